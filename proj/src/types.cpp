#include "cdlc/types.hpp"

#include "cdlc/error.hpp"

#include <cmath>
#include <unordered_set>

namespace cdlc {

namespace {

void check_unique_ids(const std::vector<std::string>& ids, const char* what) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
        if (!seen.insert(id).second)
            fail(Errc::shape_mismatch, std::string(what) + ": duplicate id '" + id + "'");
    }
}

} // namespace

void LatentMatrix::validate() const {
    if (d == 0) fail(Errc::shape_mismatch, "latent matrix requires d >= 1");
    if (ids.size() != n)
        fail(Errc::shape_mismatch, "id count " + std::to_string(ids.size()) +
                                       " != row count " + std::to_string(n));
    if (data.size() != n * d)
        fail(Errc::shape_mismatch, "payload length " + std::to_string(data.size()) +
                                       " != n*d = " + std::to_string(n * d));
    check_unique_ids(ids, "latent matrix");
    for (std::size_t i = 0; i < n; ++i)
        for (float v : row(i))
            if (!std::isfinite(v))
                fail(Errc::non_finite_value, "non-finite value in row " + std::to_string(i));
}

void PairManifest::validate_against(const LatentMatrix& factual,
                                    const LatentMatrix& counterfactual) const {
    std::unordered_set<std::string_view> f_ids(factual.ids.begin(), factual.ids.end());
    std::unordered_set<std::string_view> cf_ids(counterfactual.ids.begin(),
                                                counterfactual.ids.end());
    for (const auto& e : entries) {
        if (!f_ids.count(e.factual_id))
            fail(Errc::unresolved_id, "'" + e.factual_id + "' (manifest line " +
                                          std::to_string(e.line) + ") not in factual matrix");
        if (!cf_ids.count(e.counterfactual_id))
            fail(Errc::unresolved_id, "'" + e.counterfactual_id + "' (manifest line " +
                                          std::to_string(e.line) +
                                          ") not in counterfactual matrix");
    }
}

std::vector<std::string> PairManifest::target_classes() const {
    std::vector<std::string> out;
    std::unordered_set<std::string_view> seen;
    for (const auto& e : entries)
        if (seen.insert(e.target_class).second) out.push_back(e.target_class);
    return out;
}

void UnitMatrix::validate() const {
    if (ids.size() != n || data.size() != n * d || source_norms.size() != n)
        fail(Errc::shape_mismatch, "unit matrix field sizes disagree");
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (double v : row(i)) s += v * v;
        if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
            fail(Errc::shape_mismatch,
                 "row " + std::to_string(i) + " is not unit-norm (|norm-1| > 1e-6)");
    }
}

void DirectionSet::validate() const {
    if (k < 1) fail(Errc::shape_mismatch, "direction set requires K >= 1");
    if (directions.size() != k * d) fail(Errc::shape_mismatch, "direction payload size mismatch");
    for (std::size_t i = 0; i < k; ++i) {
        double s = 0.0;
        for (double v : direction(i)) s += v * v;
        if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
            fail(Errc::shape_mismatch, "direction " + std::to_string(i) + " is not unit-norm");
    }
}

std::size_t ProbTable::class_index(const std::string& label) const {
    for (std::size_t j = 0; j < classes.size(); ++j)
        if (classes[j] == label) return j;
    fail(Errc::unknown_target, "class '" + label + "' not present in table");
}

void ProbTable::validate() const {
    if (ids.size() != n || classes.size() != c || probs.size() != n * c)
        fail(Errc::shape_mismatch, "probability table field sizes disagree");
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (double p : row(i)) {
            if (!(p >= 0.0 && p <= 1.0))
                fail(Errc::bad_format,
                     "probability out of [0,1] in row '" + ids[i] + "'");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-5)
            fail(Errc::bad_format, "row '" + ids[i] + "' sums to " + std::to_string(sum));
    }
}

void EffectTable::validate() const {
    if (k < 1) fail(Errc::empty_concept_list, "effect table requires K >= 1");
    if (n < 1) fail(Errc::shape_mismatch, "effect table requires N >= 1");
    if (ids.size() != n || effects.size() != n * k)
        fail(Errc::shape_mismatch, "effect table field sizes disagree");
    for (double e : effects)
        if (!(e >= -1.0 && e <= 1.0))
            fail(Errc::bad_format, "effect outside [-1,1]");
}

void AlphaSweep::validate() const {
    if (values.empty()) fail(Errc::bad_config, "alpha sweep must be non-empty");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1]))
            fail(Errc::bad_config, "alpha sweep must be strictly increasing");
}

void PlantedSpec::validate() const {
    if (k_true == 0 || d == 0 || n == 0) fail(Errc::bad_config, "planted spec fields must be positive");
    if (k_true > d)
        fail(Errc::k_exceeds_d, "k_true " + std::to_string(k_true) + " exceeds dimension " +
                                    std::to_string(d));
    if (!mixing.empty()) {
        if (mixing.size() != k_true) fail(Errc::bad_config, "mixing size must equal k_true");
        double s = 0.0;
        for (double p : mixing) {
            if (p < 0.0) fail(Errc::bad_config, "mixing proportions must be non-negative");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) fail(Errc::bad_config, "mixing proportions must sum to 1");
    }
}

} // namespace cdlc
