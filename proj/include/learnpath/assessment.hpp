#pragma once

// Scoring rules: exact percent computation, pass decisions and the mapping
// from a passing percent to a mastering level (1 Minimum .. 4 Excellent).
// All comparisons use exact rational arithmetic on the binary values of
// the inputs, so decisions are identical on every platform.

#include <cmath>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "curriculum.hpp"
#include "error.hpp"

namespace learnpath {

struct ScoredAttempt {
    std::string assessment_id;
    double raw_score = 0;
    double score_pct = 0; // hundredths-exact, in [0,100]
    bool passed = false;

    bool operator==(const ScoredAttempt&) const = default;
};

namespace detail {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline Rational exact(double v) { return Rational(v); }

// Percent in hundredths, rounded half-up.
inline long long percent_hundredths(double raw, double max_score) {
    Rational scaled = exact(raw) * 10000 / exact(max_score) + Rational(1, 2);
    BigInt floored = numerator(scaled) / denominator(scaled);
    return floored.convert_to<long long>();
}

// Lower band edges as fractions of (100 - threshold) above the threshold.
inline constexpr int band_edge_pct[] = {30, 60, 86};

} // namespace detail

inline ScoredAttempt score(const Assessment& assessment, double raw_score) {
    if (!(raw_score >= 0 && raw_score <= assessment.max_score))
        throw Error(ErrorCode::score_out_of_range,
                    "score " + std::to_string(raw_score) + " outside [0, " +
                        std::to_string(assessment.max_score) + "] for assessment \"" +
                        assessment.id + "\"");
    ScoredAttempt out;
    out.assessment_id = assessment.id;
    out.raw_score = raw_score;
    const auto hundredths = detail::percent_hundredths(raw_score, assessment.max_score);
    out.score_pct = static_cast<double>(hundredths) / 100.0;
    out.passed = detail::Rational(hundredths, 100) >= detail::exact(assessment.pass_threshold_pct);
    return out;
}

/// Level for a passing percent. Default threshold 50 gives bands
/// [50,65) [65,80) [80,93) [93,100]; other thresholds rescale those edges
/// linearly onto [threshold,100].
inline int mastery_from_score(double score_pct, double pass_threshold_pct = 50) {
    if (!(score_pct >= 0 && score_pct <= 100))
        throw Error(ErrorCode::score_out_of_range,
                    "percent " + std::to_string(score_pct) + " outside [0,100]");
    const auto pct = detail::exact(score_pct);
    const auto threshold = detail::exact(pass_threshold_pct);
    if (pct < threshold)
        throw Error(ErrorCode::below_pass_threshold,
                    "percent " + std::to_string(score_pct) + " below pass threshold " +
                        std::to_string(pass_threshold_pct));
    int level = 1;
    for (int edge : detail::band_edge_pct)
        if (pct >= threshold + detail::Rational(edge, 100) * (100 - threshold)) ++level;
    return level;
}

} // namespace learnpath
