#pragma once

#include <stdexcept>
#include <string>

namespace biphoton {

/// Error categories surfaced by the toolkit. Each maps to a distinct class of
/// input or analysis failure so callers (and tests) can discriminate.
enum class errc {
    bad_magic,
    unsupported_version,
    truncated_file,
    bad_channel,
    out_of_range_record,
    unsorted_records,
    duplicate_record,
    bad_metadata,
    invalid_dataset,
    incompatible_datasets,
    io_failure,
    bad_config,
    invalid_argument,
    record_budget_exceeded,
    unknown_axis,
    missing_channel,
    invalid_factor,
    degenerate_fit,
    no_oscillation,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::bad_magic: return "bad_magic";
        case errc::unsupported_version: return "unsupported_version";
        case errc::truncated_file: return "truncated_file";
        case errc::bad_channel: return "bad_channel";
        case errc::out_of_range_record: return "out_of_range_record";
        case errc::unsorted_records: return "unsorted_records";
        case errc::duplicate_record: return "duplicate_record";
        case errc::bad_metadata: return "bad_metadata";
        case errc::invalid_dataset: return "invalid_dataset";
        case errc::incompatible_datasets: return "incompatible_datasets";
        case errc::io_failure: return "io_failure";
        case errc::bad_config: return "bad_config";
        case errc::invalid_argument: return "invalid_argument";
        case errc::record_budget_exceeded: return "record_budget_exceeded";
        case errc::unknown_axis: return "unknown_axis";
        case errc::missing_channel: return "missing_channel";
        case errc::invalid_factor: return "invalid_factor";
        case errc::degenerate_fit: return "degenerate_fit";
        case errc::no_oscillation: return "no_oscillation";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    errc code() const noexcept { return code_; }

    /// True for failures caused by malformed input rather than degenerate analysis.
    bool is_input_error() const noexcept {
        switch (code_) {
            case errc::degenerate_fit:
            case errc::no_oscillation:
            case errc::invalid_factor:
                return false;
            default:
                return true;
        }
    }

  private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool ok, errc code, const std::string& message) {
    if (!ok) fail(code, message);
}

}  // namespace biphoton
