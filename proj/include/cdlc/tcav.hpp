#pragma once

#include "cdlc/types.hpp"

namespace cdlc {

/// Fits a binary logistic classifier (full-batch gradient descent, 500
/// iterations, step 0.1, L2 regularization) separating concept activations
/// from negatives. v is the normalized weight vector oriented toward the
/// concept class. When the data carries no separating signal the model comes
/// back with `degenerate` set and a deterministic axis fallback for v.
CavModel fit_cav(const LatentMatrix& concept_acts, const LatentMatrix& negative_acts,
                 double l2_reg = 1e-3, std::uint64_t seed = 0);

/// Fraction of gradient rows with a strictly positive dot product against
/// the CAV; zero products count as negative.
double tcav_score(const LatentMatrix& gradients, const CavModel& cav);

struct TcavRuns {
    double mean = 0.0;
    double std_dev = 0.0; // sample std (runs - 1); 0 by convention for 1 run
    std::vector<double> per_run;
};

/// Repeats fit + score with a fresh seeded negative subset per run. Subset
/// size is min(|pool|, |concept|); per-run seeds derive from `seed` by run
/// index.
TcavRuns tcav_runs(const LatentMatrix& concept_acts, const LatentMatrix& negatives_pool,
                   const LatentMatrix& gradients, std::size_t runs, std::uint64_t seed,
                   double l2_reg = 1e-3);

} // namespace cdlc
