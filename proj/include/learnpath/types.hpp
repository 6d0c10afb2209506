#pragma once

#include <string>
#include <string_view>

#include "error.hpp"

namespace learnpath {

/// Teacher setup option: `open` lets students explore every milestone in any
/// order, `locked` gates a milestone on all of its prerequisites being passed.
enum class Mode { open, locked };

enum class Status { locked, exploring, passed };

constexpr std::string_view to_string(Mode mode) { return mode == Mode::open ? "open" : "locked"; }

inline Mode parse_mode(std::string_view text) {
    if (text == "open") return Mode::open;
    if (text == "locked") return Mode::locked;
    throw Error(ErrorCode::invalid_mode, "mode must be \"open\" or \"locked\", got \"" +
                                             std::string(text) + "\"");
}

constexpr std::string_view to_string(Status status) {
    switch (status) {
    case Status::locked: return "Locked";
    case Status::exploring: return "Exploring";
    case Status::passed: return "Passed";
    }
    return "?";
}

/// Locked/red, Exploring/yellow, Passed/green.
constexpr std::string_view color_of(Status status) {
    switch (status) {
    case Status::locked: return "red";
    case Status::exploring: return "yellow";
    case Status::passed: return "green";
    }
    return "?";
}

/// Names for mastering levels 1..4.
constexpr std::string_view level_name(int level) {
    switch (level) {
    case 1: return "Minimum";
    case 2: return "Average";
    case 3: return "High";
    case 4: return "Excellent";
    }
    return "?";
}

} // namespace learnpath
