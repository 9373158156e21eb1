#include "cdlc/latent_diff.hpp"

#include "cdlc/error.hpp"

#include <cmath>
#include <unordered_map>

namespace cdlc {

namespace {

std::unordered_map<std::string_view, std::size_t> index_ids(const LatentMatrix& m) {
    std::unordered_map<std::string_view, std::size_t> idx;
    idx.reserve(m.n);
    for (std::size_t i = 0; i < m.n; ++i) idx.emplace(m.ids[i], i);
    return idx;
}

} // namespace

LatentMatrix difference_vectors(const LatentMatrix& factual, const LatentMatrix& counterfactual,
                                const PairManifest& manifest) {
    if (factual.d != counterfactual.d)
        fail(Errc::dim_mismatch, "factual d=" + std::to_string(factual.d) +
                                     " vs counterfactual d=" + std::to_string(counterfactual.d));
    const auto f_idx = index_ids(factual);
    const auto cf_idx = index_ids(counterfactual);

    LatentMatrix out;
    out.d = factual.d;
    out.n = manifest.entries.size();
    out.data.resize(out.n * out.d);
    out.ids.reserve(out.n);

    for (std::size_t r = 0; r < manifest.entries.size(); ++r) {
        const PairEntry& e = manifest.entries[r];
        auto fi = f_idx.find(e.factual_id);
        if (fi == f_idx.end())
            fail(Errc::unresolved_id, "'" + e.factual_id + "' (manifest line " +
                                          std::to_string(e.line) + ") not in factual matrix");
        auto ci = cf_idx.find(e.counterfactual_id);
        if (ci == cf_idx.end())
            fail(Errc::unresolved_id, "'" + e.counterfactual_id + "' (manifest line " +
                                          std::to_string(e.line) +
                                          ") not in counterfactual matrix");
        const auto f_row = factual.row(fi->second);
        const auto cf_row = counterfactual.row(ci->second);
        for (std::size_t j = 0; j < out.d; ++j) out.data[r * out.d + j] = cf_row[j] - f_row[j];
        out.ids.push_back(e.factual_id + "->" + e.counterfactual_id);
    }
    return out;
}

NormalizeResult unit_normalize(const LatentMatrix& diffs, double epsilon_norm) {
    NormalizeResult res;
    res.unit.d = diffs.d;
    res.unit.data.reserve(diffs.data.size());

    for (std::size_t i = 0; i < diffs.n; ++i) {
        double s = 0.0;
        for (float v : diffs.row(i)) s += double(v) * double(v);
        const double norm = std::sqrt(s);
        if (norm <= epsilon_norm) {
            res.skipped_ids.push_back(diffs.ids[i]);
            continue;
        }
        for (float v : diffs.row(i)) res.unit.data.push_back(double(v) / norm);
        res.unit.ids.push_back(diffs.ids[i]);
        res.unit.source_norms.push_back(norm);
        ++res.unit.n;
    }
    if (diffs.n > 0 && res.unit.n == 0)
        fail(Errc::all_rows_degenerate, "all " + std::to_string(diffs.n) +
                                            " difference row(s) have norm <= " +
                                            std::to_string(epsilon_norm));
    return res;
}

} // namespace cdlc
