#pragma once

#include "cdlc/types.hpp"

#include <filesystem>

namespace cdlc {

// Latent container file, extension .cdlc:
//   "CDLC" | u16 version=1 | u64 n | u64 d | n*d little-endian f32 (row-major)
//   | u64 id_count(=n) | per id: u32 byte length + UTF-8 bytes
// All multi-byte integers little-endian regardless of host.

LatentMatrix read_latent_matrix(const std::filesystem::path& path);
void write_latent_matrix(const LatentMatrix& m, const std::filesystem::path& path);

/// Text fixture import: one row per line, "id v1 v2 ... vd", '#' comments.
LatentMatrix read_latent_matrix_text(const std::filesystem::path& path);

/// Manifest: one record per line, tab-separated
/// factual_id \t counterfactual_id \t predicted_class \t target_class.
/// '#' comments and blank lines allowed. Invariant violations are reported
/// with their 1-based line number.
PairManifest load_pair_manifest(const std::filesystem::path& path);
void save_pair_manifest(const PairManifest& m, const std::filesystem::path& path);

/// Probability table: header line of tab-separated class labels, then one
/// line per sample: id followed by tab-separated probabilities.
ProbTable read_prob_table(const std::filesystem::path& path);
void write_prob_table(const ProbTable& t, const std::filesystem::path& path);

/// Effect table: header line of concept column names, then id + values.
EffectTable read_effect_table(const std::filesystem::path& path);
void write_effect_table(const EffectTable& t, const std::filesystem::path& path);

/// Unit matrices reuse the latent container; source norms travel in a JSON
/// sidecar at `path + ".json"` (absent sidecar -> norms default to 1).
UnitMatrix read_unit_matrix(const std::filesystem::path& path);
void write_unit_matrix(const UnitMatrix& u, const std::filesystem::path& path);

/// Direction sets reuse the latent container; provenance (class label, k,
/// seed, silhouette, sample count) travels in the JSON sidecar.
DirectionSet read_direction_set(const std::filesystem::path& path);
void write_direction_set(const DirectionSet& ds, const std::filesystem::path& path);

} // namespace cdlc
