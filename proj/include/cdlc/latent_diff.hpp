#pragma once

#include "cdlc/types.hpp"

namespace cdlc {

/// Row i is counterfactual[cf_id_i] - factual[f_id_i], in manifest order.
/// Output ids are "f_id->cf_id".
LatentMatrix difference_vectors(const LatentMatrix& factual, const LatentMatrix& counterfactual,
                                const PairManifest& manifest);

struct NormalizeResult {
    UnitMatrix unit;
    std::vector<std::string> skipped_ids; // rows with norm <= epsilon_norm, dropped
};

/// Projects each difference row onto the unit sphere. Rows whose L2 norm is
/// at or below epsilon_norm carry no direction; they are dropped and listed
/// in skipped_ids. Norms accumulate in double even though storage is f32.
NormalizeResult unit_normalize(const LatentMatrix& diffs, double epsilon_norm = 1e-8);

} // namespace cdlc
