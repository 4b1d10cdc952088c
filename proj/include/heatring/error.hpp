#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace heatring {

enum class ErrorCode {
    index,
    parse,
    spec_mismatch,
    missing_file,
    timeline_order,
    timeline_gap,
    duplicate_site,
    bad_date,
    out_of_range,
    usage,
    empty_window,
    insufficient_history,
    empty_ring,
    undefined_metrics,
    not_divisible,
    empty_profile,
    validation,
    missing_input,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::index: return "index";
    case ErrorCode::parse: return "parse";
    case ErrorCode::spec_mismatch: return "spec-mismatch";
    case ErrorCode::missing_file: return "missing-file";
    case ErrorCode::timeline_order: return "timeline-order";
    case ErrorCode::timeline_gap: return "timeline-gap";
    case ErrorCode::duplicate_site: return "duplicate-site";
    case ErrorCode::bad_date: return "bad-date";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::usage: return "usage";
    case ErrorCode::empty_window: return "empty-window";
    case ErrorCode::insufficient_history: return "insufficient-history";
    case ErrorCode::empty_ring: return "empty-ring";
    case ErrorCode::undefined_metrics: return "undefined-metrics";
    case ErrorCode::not_divisible: return "not-divisible";
    case ErrorCode::empty_profile: return "empty-profile";
    case ErrorCode::validation: return "validation";
    case ErrorCode::missing_input: return "missing-input";
    }
    return "unknown";
}

/// Every failure raised by the library carries a machine-readable code so the
/// CLI can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace heatring
