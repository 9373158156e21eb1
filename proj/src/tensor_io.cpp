#include "cdlc/tensor_io.hpp"

#include "cdlc/error.hpp"
#include "cdlc/strfmt.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace cdlc {

namespace {

constexpr char kMagic[4] = {'C', 'D', 'L', 'C'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

/// Cursor over an in-memory file image with bounds-checked reads.
class Reader {
public:
    Reader(const std::string& buf, const std::filesystem::path& path)
        : buf_(buf), path_(path) {}

    std::size_t remaining() const { return buf_.size() - pos_; }

    void need(std::size_t bytes, const char* what) const {
        if (remaining() < bytes)
            fail(Errc::shape_mismatch, path_.string() + ": expected " + std::to_string(bytes) +
                                           " byte(s) for " + what + ", only " +
                                           std::to_string(remaining()) + " remain");
    }

    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= std::uint16_t(std::uint8_t(buf_[pos_ + i])) << (8 * i);
        pos_ += 2;
        return v;
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32("f32 value")); }

    std::string bytes(std::size_t len, const char* what) {
        need(len, what);
        std::string s = buf_.substr(pos_, len);
        pos_ += len;
        return s;
    }

private:
    const std::string& buf_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_failure, "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(Errc::io_failure, "read error on '" + path.string() + "'");
    return std::move(ss).str();
}

void spill(const std::string& bytes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(Errc::io_failure, "write error on '" + path.string() + "'");
}

double parse_double(std::string_view token, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size())
        fail(Errc::bad_format, path.string() + ":" + std::to_string(line) + ": bad number '" +
                                   std::string(token) + "'");
    return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

/// Strips '\r', skips blank and '#' lines; calls fn(line_number, content).
template <typename Fn>
void for_each_record(const std::string& text, Fn&& fn) {
    std::size_t line_no = 0, start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line(text.data() + start,
                              (nl == std::string::npos ? text.size() : nl) - start);
        ++line_no;
        start = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        fn(line_no, line);
    }
}

nlohmann::json read_sidecar(const std::filesystem::path& path) {
    std::filesystem::path side = path;
    side += ".json";
    if (!std::filesystem::exists(side)) return nlohmann::json();
    try {
        return nlohmann::json::parse(slurp(side));
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_format, side.string() + ": " + e.what());
    }
}

void write_sidecar(const nlohmann::json& j, const std::filesystem::path& path) {
    std::filesystem::path side = path;
    side += ".json";
    spill(j.dump(2) + "\n", side);
}

} // namespace

LatentMatrix read_latent_matrix(const std::filesystem::path& path) {
    const std::string buf = slurp(path);
    Reader r(buf, path);

    const std::string magic = r.bytes(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
        fail(Errc::bad_magic, "'" + path.string() + "' is not a latent file");
    const std::uint16_t version = r.u16("version");
    if (version != kVersion)
        fail(Errc::bad_format, path.string() + ": unsupported version " + std::to_string(version));

    LatentMatrix m;
    m.n = r.u64("row count");
    m.d = r.u64("column count");
    if (m.d == 0) fail(Errc::shape_mismatch, path.string() + ": header declares d = 0");
    if (m.d > 0 && m.n > (std::numeric_limits<std::size_t>::max() / 4) / m.d)
        fail(Errc::shape_mismatch, path.string() + ": header shape implausibly large");

    const std::size_t payload = m.n * m.d * 4;
    if (r.remaining() < payload)
        fail(Errc::shape_mismatch, path.string() + ": expected " + std::to_string(payload) +
                                       " payload byte(s), only " + std::to_string(r.remaining()) +
                                       " remain");
    m.data.resize(m.n * m.d);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j < m.d; ++j) {
            float v = r.f32();
            if (!std::isfinite(v))
                fail(Errc::non_finite_value,
                     path.string() + ": non-finite value in row " + std::to_string(i));
            m.data[i * m.d + j] = v;
        }
    }

    const std::uint64_t id_count = r.u64("id count");
    if (id_count != m.n)
        fail(Errc::shape_mismatch, path.string() + ": id count " + std::to_string(id_count) +
                                       " != row count " + std::to_string(m.n));
    m.ids.reserve(m.n);
    for (std::uint64_t i = 0; i < id_count; ++i) {
        const std::uint32_t len = r.u32("id length");
        m.ids.push_back(r.bytes(len, "id bytes"));
    }
    if (r.remaining() != 0)
        fail(Errc::bad_format, path.string() + ": " + std::to_string(r.remaining()) +
                                   " trailing byte(s) after id table");
    m.validate();
    return m;
}

void write_latent_matrix(const LatentMatrix& m, const std::filesystem::path& path) {
    m.validate();
    std::string out;
    out.reserve(22 + m.data.size() * 4 + m.ids.size() * 12);
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    put_u64(out, m.n);
    put_u64(out, m.d);
    for (float v : m.data) put_f32(out, v);
    put_u64(out, m.ids.size());
    for (const auto& id : m.ids) {
        put_u32(out, static_cast<std::uint32_t>(id.size()));
        out.append(id);
    }
    spill(out, path);
}

LatentMatrix read_latent_matrix_text(const std::filesystem::path& path) {
    const std::string text = slurp(path);
    LatentMatrix m;
    for_each_record(text, [&](std::size_t line_no, std::string_view line) {
        std::istringstream ss{std::string(line)};
        std::string id;
        ss >> id;
        std::vector<float> vals;
        std::string tok;
        while (ss >> tok)
            vals.push_back(static_cast<float>(parse_double(tok, path, line_no)));
        if (vals.empty())
            fail(Errc::bad_format, path.string() + ":" + std::to_string(line_no) + ": empty row");
        if (m.n == 0) {
            m.d = vals.size();
        } else if (vals.size() != m.d) {
            fail(Errc::shape_mismatch, path.string() + ":" + std::to_string(line_no) + ": row has " +
                                           std::to_string(vals.size()) + " values, expected " +
                                           std::to_string(m.d));
        }
        m.ids.push_back(std::move(id));
        m.data.insert(m.data.end(), vals.begin(), vals.end());
        ++m.n;
    });
    if (m.n == 0) fail(Errc::bad_format, path.string() + ": no data rows");
    m.validate();
    return m;
}

PairManifest load_pair_manifest(const std::filesystem::path& path) {
    const std::string text = slurp(path);
    PairManifest manifest;
    std::set<std::pair<std::string, std::string>> seen;
    for_each_record(text, [&](std::size_t line_no, std::string_view line) {
        auto fields = split_tabs(line);
        if (fields.size() != 4)
            fail(Errc::bad_format, path.string() + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                                       std::to_string(fields.size()));
        PairEntry e;
        e.factual_id = std::string(fields[0]);
        e.counterfactual_id = std::string(fields[1]);
        e.predicted_class = std::string(fields[2]);
        e.target_class = std::string(fields[3]);
        e.line = line_no;
        if (e.factual_id.empty() || e.counterfactual_id.empty() || e.predicted_class.empty() ||
            e.target_class.empty())
            fail(Errc::bad_format, path.string() + ":" + std::to_string(line_no) + ": empty field");
        if (e.predicted_class == e.target_class)
            fail(Errc::class_equals_target,
                 path.string() + ":" + std::to_string(line_no) + ": predicted class '" +
                     e.predicted_class + "' equals target class");
        if (!seen.insert({e.factual_id, e.counterfactual_id}).second)
            fail(Errc::duplicate_pair, path.string() + ":" + std::to_string(line_no) + ": pair (" +
                                           e.factual_id + ", " + e.counterfactual_id +
                                           ") already listed");
        manifest.entries.push_back(std::move(e));
    });
    return manifest;
}

void save_pair_manifest(const PairManifest& m, const std::filesystem::path& path) {
    std::string out;
    for (const auto& e : m.entries) {
        out += e.factual_id;
        out += '\t';
        out += e.counterfactual_id;
        out += '\t';
        out += e.predicted_class;
        out += '\t';
        out += e.target_class;
        out += '\n';
    }
    spill(out, path);
}

namespace {

/// Shared TSV reader for probability and effect tables.
struct TsvTable {
    std::vector<std::string> header;
    std::vector<std::string> ids;
    std::vector<double> values; // n * header.size()
    std::size_t n = 0;
};

TsvTable read_tsv_table(const std::filesystem::path& path) {
    const std::string text = slurp(path);
    TsvTable t;
    bool have_header = false;
    for_each_record(text, [&](std::size_t line_no, std::string_view line) {
        auto fields = split_tabs(line);
        if (!have_header) {
            for (auto f : fields) {
                if (f.empty())
                    fail(Errc::bad_format,
                         path.string() + ":" + std::to_string(line_no) + ": empty header column");
                t.header.emplace_back(f);
            }
            have_header = true;
            return;
        }
        if (fields.size() != t.header.size() + 1)
            fail(Errc::bad_format, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                       std::to_string(t.header.size() + 1) + " fields, got " +
                                       std::to_string(fields.size()));
        t.ids.emplace_back(fields[0]);
        for (std::size_t j = 1; j < fields.size(); ++j)
            t.values.push_back(parse_double(fields[j], path, line_no));
        ++t.n;
    });
    if (!have_header) fail(Errc::bad_format, path.string() + ": missing header line");
    return t;
}

void write_tsv_table(const std::vector<std::string>& header, const std::vector<std::string>& ids,
                     const std::vector<double>& values, const std::filesystem::path& path) {
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out += '\t';
        out += header[j];
    }
    out += '\n';
    const std::size_t c = header.size();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += ids[i];
        for (std::size_t j = 0; j < c; ++j) {
            out += '\t';
            out += fmt_double(values[i * c + j]);
        }
        out += '\n';
    }
    spill(out, path);
}

} // namespace

ProbTable read_prob_table(const std::filesystem::path& path) {
    TsvTable t = read_tsv_table(path);
    ProbTable p;
    p.classes = std::move(t.header);
    p.ids = std::move(t.ids);
    p.probs = std::move(t.values);
    p.n = t.n;
    p.c = p.classes.size();
    p.validate();
    return p;
}

void write_prob_table(const ProbTable& t, const std::filesystem::path& path) {
    t.validate();
    write_tsv_table(t.classes, t.ids, t.probs, path);
}

EffectTable read_effect_table(const std::filesystem::path& path) {
    TsvTable t = read_tsv_table(path);
    EffectTable e;
    e.ids = std::move(t.ids);
    e.effects = std::move(t.values);
    e.n = t.n;
    e.k = t.header.size();
    e.validate();
    return e;
}

void write_effect_table(const EffectTable& t, const std::filesystem::path& path) {
    t.validate();
    std::vector<std::string> header;
    header.reserve(t.k);
    for (std::size_t j = 0; j < t.k; ++j) header.push_back("concept" + std::to_string(j));
    write_tsv_table(header, t.ids, t.effects, path);
}

UnitMatrix read_unit_matrix(const std::filesystem::path& path) {
    const LatentMatrix lm = read_latent_matrix(path);
    UnitMatrix u;
    u.ids = lm.ids;
    u.n = lm.n;
    u.d = lm.d;
    u.data.resize(lm.data.size());
    u.source_norms.assign(u.n, 1.0);
    for (std::size_t i = 0; i < u.n; ++i) {
        double s = 0.0;
        for (float v : lm.row(i)) s += double(v) * double(v);
        const double norm = std::sqrt(s);
        if (std::abs(norm - 1.0) > 1e-6)
            fail(Errc::shape_mismatch,
                 path.string() + ": row " + std::to_string(i) + " is not unit-norm");
        // Re-normalize so downstream dot products see exact unit rows.
        for (std::size_t j = 0; j < u.d; ++j) u.data[i * u.d + j] = double(lm.at(i, j)) / norm;
    }
    const nlohmann::json side = read_sidecar(path);
    if (side.contains("source_norms")) {
        auto norms = side.at("source_norms").get<std::vector<double>>();
        if (norms.size() != u.n)
            fail(Errc::shape_mismatch, path.string() + ".json: source_norms size mismatch");
        u.source_norms = std::move(norms);
    }
    u.validate();
    return u;
}

void write_unit_matrix(const UnitMatrix& u, const std::filesystem::path& path) {
    u.validate();
    LatentMatrix lm;
    lm.ids = u.ids;
    lm.n = u.n;
    lm.d = u.d;
    lm.data.resize(u.data.size());
    for (std::size_t i = 0; i < u.data.size(); ++i) lm.data[i] = static_cast<float>(u.data[i]);
    write_latent_matrix(lm, path);
    nlohmann::json side;
    side["source_norms"] = u.source_norms;
    write_sidecar(side, path);
}

DirectionSet read_direction_set(const std::filesystem::path& path) {
    const LatentMatrix lm = read_latent_matrix(path);
    const nlohmann::json side = read_sidecar(path);
    if (side.is_null())
        fail(Errc::bad_format, path.string() + ".json: provenance sidecar missing");
    DirectionSet ds;
    ds.k = lm.n;
    ds.d = lm.d;
    ds.directions.resize(lm.data.size());
    for (std::size_t i = 0; i < ds.k; ++i) {
        double s = 0.0;
        for (float v : lm.row(i)) s += double(v) * double(v);
        const double norm = std::sqrt(s);
        if (std::abs(norm - 1.0) > 1e-6)
            fail(Errc::shape_mismatch,
                 path.string() + ": direction " + std::to_string(i) + " is not unit-norm");
        for (std::size_t j = 0; j < ds.d; ++j)
            ds.directions[i * ds.d + j] = double(lm.at(i, j)) / norm;
    }
    try {
        ds.class_label = side.at("class_label").get<std::string>();
        if (side.at("k").get<std::size_t>() != ds.k)
            fail(Errc::k_mismatch, path.string() + ".json: k disagrees with matrix rows");
        ds.provenance.seed = side.at("seed").get<std::uint64_t>();
        if (side.contains("silhouette") && !side.at("silhouette").is_null()) {
            ds.provenance.silhouette = side.at("silhouette").get<double>();
            ds.provenance.has_silhouette = true;
        }
        ds.provenance.n_samples = side.at("n_samples").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_format, path.string() + ".json: " + e.what());
    }
    ds.validate();
    return ds;
}

void write_direction_set(const DirectionSet& ds, const std::filesystem::path& path) {
    ds.validate();
    LatentMatrix lm;
    lm.n = ds.k;
    lm.d = ds.d;
    lm.data.resize(ds.directions.size());
    for (std::size_t i = 0; i < ds.directions.size(); ++i)
        lm.data[i] = static_cast<float>(ds.directions[i]);
    lm.ids.reserve(ds.k);
    for (std::size_t i = 0; i < ds.k; ++i) lm.ids.push_back("c" + std::to_string(i));
    write_latent_matrix(lm, path);

    nlohmann::json side;
    side["class_label"] = ds.class_label;
    side["k"] = ds.k;
    side["seed"] = ds.provenance.seed;
    if (ds.provenance.has_silhouette)
        side["silhouette"] = ds.provenance.silhouette;
    else
        side["silhouette"] = nullptr;
    side["n_samples"] = ds.provenance.n_samples;
    write_sidecar(side, path);
}

} // namespace cdlc
