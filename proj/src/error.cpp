#include "cdlc/error.hpp"

namespace cdlc {

const char* errc_name(Errc c) {
    switch (c) {
    case Errc::bad_magic: return "BadMagic";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_value: return "NonFiniteValue";
    case Errc::io_failure: return "IoFailure";
    case Errc::bad_format: return "BadFormat";
    case Errc::duplicate_pair: return "DuplicatePair";
    case Errc::class_equals_target: return "ClassEqualsTarget";
    case Errc::unresolved_id: return "UnresolvedId";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::id_mismatch: return "IdMismatch";
    case Errc::unknown_target: return "UnknownTarget";
    case Errc::k_mismatch: return "KMismatch";
    case Errc::all_rows_degenerate: return "AllRowsDegenerate";
    case Errc::too_few_points: return "TooFewPoints";
    case Errc::degenerate_mean: return "DegenerateMean";
    case Errc::single_cluster: return "SingleCluster";
    case Errc::empty_concept_list: return "EmptyConceptList";
    case Errc::single_direction: return "SingleDirection";
    case Errc::too_few_samples: return "TooFewSamples";
    case Errc::not_psd: return "NotPSD";
    case Errc::degenerate_data: return "DegenerateData";
    case Errc::empty_gradients: return "EmptyGradients";
    case Errc::insufficient_negatives: return "InsufficientNegatives";
    case Errc::k_exceeds_d: return "KExceedsD";
    case Errc::instance_too_large: return "InstanceTooLarge";
    case Errc::bad_config: return "BadConfig";
    case Errc::lock_held: return "LockHeld";
    }
    return "Unknown";
}

bool is_numeric_error(Errc c) {
    switch (c) {
    case Errc::non_finite_value:
    case Errc::all_rows_degenerate:
    case Errc::degenerate_mean:
    case Errc::not_psd:
    case Errc::degenerate_data:
        return true;
    default:
        return false;
    }
}

} // namespace cdlc
