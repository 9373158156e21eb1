#pragma once

#include <stdexcept>
#include <string>

namespace cdlc {

/// Error categories used by every module. The CLI maps these onto exit
/// codes: config -> 2, data -> 3, numeric -> 4.
enum class Errc {
    // file / format
    bad_magic,
    shape_mismatch,
    non_finite_value,
    io_failure,
    bad_format,
    // manifest
    duplicate_pair,
    class_equals_target,
    unresolved_id,
    // shapes and lookups
    dim_mismatch,
    id_mismatch,
    unknown_target,
    k_mismatch,
    // clustering
    all_rows_degenerate,
    too_few_points,
    degenerate_mean,
    single_cluster,
    // metrics
    empty_concept_list,
    single_direction,
    too_few_samples,
    not_psd,
    // tcav
    degenerate_data,
    empty_gradients,
    insufficient_negatives,
    // synthetic data
    k_exceeds_d,
    instance_too_large,
    // cli / pipeline
    bad_config,
    lock_held,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code),
          detail_(what) {}

    Errc code() const { return code_; }
    /// Message without the code-name prefix, for re-wrapping.
    const std::string& detail() const { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

/// True for failures of numeric preconditions rather than broken inputs.
bool is_numeric_error(Errc c);

} // namespace cdlc
