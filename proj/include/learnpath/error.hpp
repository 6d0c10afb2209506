#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace learnpath {

enum class ErrorCode {
    // jtms
    unknown_node,
    illegal_consequent,
    overlapping_lists,
    non_monotonic_cycle,
    not_an_assumption,
    node_is_out,
    // curriculum
    invalid_curriculum,
    invalid_mode,
    cycle_detected,
    missing_status,
    // assessment / student model
    score_out_of_range,
    below_pass_threshold,
    unknown_student,
    unknown_curriculum,
    unknown_enrollment,
    unknown_milestone,
    unknown_assessment,
    duplicate_student,
    duplicate_curriculum,
    duplicate_enrollment,
    milestone_locked,
    not_passed,
    // adaptation
    not_struggling,
    no_prerequisites,
    // persistence
    storage_failure,
    schema_violation,
    corrupt_log,
    store_locked,
    // service
    bad_request,
    forbidden,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::unknown_node: return "unknown_node";
    case ErrorCode::illegal_consequent: return "illegal_consequent";
    case ErrorCode::overlapping_lists: return "overlapping_lists";
    case ErrorCode::non_monotonic_cycle: return "non_monotonic_cycle";
    case ErrorCode::not_an_assumption: return "not_an_assumption";
    case ErrorCode::node_is_out: return "node_is_out";
    case ErrorCode::invalid_curriculum: return "invalid_curriculum";
    case ErrorCode::invalid_mode: return "invalid_mode";
    case ErrorCode::cycle_detected: return "cycle_detected";
    case ErrorCode::missing_status: return "missing_status";
    case ErrorCode::score_out_of_range: return "score_out_of_range";
    case ErrorCode::below_pass_threshold: return "below_pass_threshold";
    case ErrorCode::unknown_student: return "unknown_student";
    case ErrorCode::unknown_curriculum: return "unknown_curriculum";
    case ErrorCode::unknown_enrollment: return "unknown_enrollment";
    case ErrorCode::unknown_milestone: return "unknown_milestone";
    case ErrorCode::unknown_assessment: return "unknown_assessment";
    case ErrorCode::duplicate_student: return "duplicate_student";
    case ErrorCode::duplicate_curriculum: return "duplicate_curriculum";
    case ErrorCode::duplicate_enrollment: return "duplicate_enrollment";
    case ErrorCode::milestone_locked: return "milestone_locked";
    case ErrorCode::not_passed: return "not_passed";
    case ErrorCode::not_struggling: return "not_struggling";
    case ErrorCode::no_prerequisites: return "no_prerequisites";
    case ErrorCode::storage_failure: return "storage_failure";
    case ErrorCode::schema_violation: return "schema_violation";
    case ErrorCode::corrupt_log: return "corrupt_log";
    case ErrorCode::store_locked: return "store_locked";
    case ErrorCode::bad_request: return "bad_request";
    case ErrorCode::forbidden: return "forbidden";
    }
    return "unknown";
}

/// Single exception type for every domain failure; `code()` is what the
/// HTTP layer and the CLI map onto status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace learnpath
