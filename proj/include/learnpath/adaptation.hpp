#pragma once

// Turns an enrollment's network state, mastery map and attempt history into
// an ordered list of explained recommendations. Everything here is a pure
// read of the enrollment.

#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "student_model.hpp"
#include "types.hpp"

namespace learnpath {

inline constexpr std::string_view recommendation_schema = "recommendation/1";

enum class RecommendationKind { study_next, revise_prerequisite, extra_support, challenge };

constexpr std::string_view to_string(RecommendationKind kind) {
    switch (kind) {
    case RecommendationKind::study_next: return "study_next";
    case RecommendationKind::revise_prerequisite: return "revise_prerequisite";
    case RecommendationKind::extra_support: return "extra_support";
    case RecommendationKind::challenge: return "challenge";
    }
    return "?";
}

struct Recommendation {
    RecommendationKind kind = RecommendationKind::study_next;
    std::string milestone;
    std::vector<std::string> asset_ids;
    std::string rationale;
    int rank = 0; // 1-based

    bool operator==(const Recommendation&) const = default;
};

inline bool detect_struggle(const NodeState& state, const StrugglePolicy& policy) {
    return state.consecutive_failures >= policy.k_failures;
}

/// Passed direct prerequisites of a struggling milestone, weakest first.
inline std::vector<std::string> revision_plan(const Enrollment& e, const std::string& milestone,
                                              const StrugglePolicy& policy) {
    const auto& state = e.state(milestone);
    if (state.status != Status::exploring || !detect_struggle(state, policy))
        throw Error(ErrorCode::not_struggling, "milestone \"" + milestone + "\" is not struggling");
    auto plan = e.weakest_prerequisites(milestone);
    if (plan.empty())
        throw Error(ErrorCode::no_prerequisites,
                    "milestone \"" + milestone + "\" has no passed prerequisites to revise");
    return plan;
}

namespace detail {

// Mean mastery over passed direct prerequisites; 4 for entry milestones,
// nothing when prerequisites exist but none is passed yet.
inline std::optional<double> prerequisite_mastery(const Enrollment& e, const Milestone& m) {
    if (m.prerequisites.empty()) return 4.0;
    double sum = 0;
    int count = 0;
    for (const auto& p : m.prerequisites) {
        const auto& s = e.state(p);
        if (s.status == Status::passed) {
            sum += *s.mastering_level;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / count;
}

inline std::string level_text(const Enrollment& e, const std::string& milestone) {
    const auto& s = e.state(milestone);
    if (!s.mastering_level) return milestone + " (not passed)";
    return milestone + " (level " + std::to_string(*s.mastering_level) + " " +
           std::string(level_name(*s.mastering_level)) + ")";
}

inline std::string join(const std::vector<std::string>& items, std::string_view sep = ", ") {
    std::string out;
    for (const auto& item : items) out += (out.empty() ? "" : std::string(sep)) + item;
    return out;
}

inline std::string format_mean(double v) {
    std::ostringstream out;
    out.precision(3);
    out << v;
    return out.str();
}

// Milestones whose `passed` assumptions ground the unlocked node.
inline std::vector<std::string> unlocking_prerequisites(const Enrollment& e, const std::string& milestone) {
    const auto& compiled = e.compiled();
    std::vector<std::string> out;
    const auto tree = compiled.network.explain(compiled.nodes.at(milestone).unlocked);
    for (const auto& leaf : tree.antecedents)
        if (!leaf.absent) out.push_back(compiled.milestone_of[leaf.node.value]);
    return out;
}

} // namespace detail

/// Core assets in authored order, then support assets for weak or
/// struggling learners, then challenge assets for strong ones.
inline std::vector<std::string> select_assets(const Enrollment& e, const std::string& milestone,
                                              const StrugglePolicy& policy) {
    const auto& m = e.curriculum().at(milestone);
    const auto mastery = detail::prerequisite_mastery(e, m);
    const auto& state = e.state(milestone);
    const bool flagged = state.status == Status::exploring && detect_struggle(state, policy);
    const bool support = flagged || (mastery && *mastery <= 1);
    const bool challenge = mastery && *mastery >= 3;
    std::vector<std::string> out;
    for (auto kind : {AssetKind::core, AssetKind::support, AssetKind::challenge}) {
        if (kind == AssetKind::support && !support) continue;
        if (kind == AssetKind::challenge && !challenge) continue;
        for (const auto& a : m.assets)
            if (a.kind == kind) out.push_back(a.id);
    }
    return out;
}

inline std::vector<std::string> select_assets(const Enrollment& e, const std::string& milestone) {
    return select_assets(e, milestone, e.policy());
}

inline std::vector<Recommendation> recommend(const Enrollment& e, const StrugglePolicy& policy) {
    std::vector<Recommendation> out;
    auto push = [&](RecommendationKind kind, const std::string& milestone,
                    std::vector<std::string> assets, std::string rationale) {
        out.push_back({kind, milestone, std::move(assets), std::move(rationale),
                       static_cast<int>(out.size()) + 1});
    };
    const auto& order = e.topological();

    // Struggling milestones first: revise the weakest prerequisite not yet
    // revised, or fall back to extra support.
    for (const auto& id : order) {
        const auto& s = e.state(id);
        if (s.status != Status::exploring || !detect_struggle(s, policy)) continue;
        const auto stuck = id + " failed " + std::to_string(s.consecutive_failures) +
                           " consecutive attempts";
        const auto plan = e.weakest_prerequisites(id);
        if (const auto head = e.revision_head(id)) {
            std::vector<std::string> ranked;
            for (const auto& p : plan) ranked.push_back(detail::level_text(e, p));
            push(RecommendationKind::revise_prerequisite, *head, select_assets(e, *head, policy),
                 stuck + "; revise prerequisite " + detail::level_text(e, *head) +
                     " (weakest first: " + detail::join(ranked, " -> ") + ")");
        } else if (plan.empty()) {
            push(RecommendationKind::extra_support, id, select_assets(e, id, policy),
                 stuck + "; no passed prerequisites to revise, extra material for " + id);
        } else {
            push(RecommendationKind::extra_support, id, select_assets(e, id, policy),
                 stuck + "; prerequisites already revised (" + detail::join(plan) +
                     "), extra material for " + id);
        }
    }

    for (const auto& id : order) {
        const auto& s = e.state(id);
        if (s.status != Status::exploring || detect_struggle(s, policy)) continue;
        const auto& m = e.curriculum().at(id);
        std::string why;
        const auto grounds = detail::unlocking_prerequisites(e, id);
        if (!grounds.empty()) {
            std::vector<std::string> parts;
            for (const auto& g : grounds) parts.push_back(detail::level_text(e, g));
            why = id + " unlocked: prerequisites passed " + detail::join(parts);
        } else if (m.prerequisites.empty()) {
            why = id + " is an entry milestone with no prerequisites";
        } else {
            why = id + " open for exploration in any order (prerequisites " +
                  detail::join({m.prerequisites.begin(), m.prerequisites.end()}) + ")";
        }
        const auto mastery = detail::prerequisite_mastery(e, m);
        if (mastery && *mastery >= 3)
            why += "; challenge material added (prerequisite mastery " + detail::format_mean(*mastery) + ")";
        else if (mastery && *mastery <= 1)
            why += "; support material added (prerequisite mastery " + detail::format_mean(*mastery) + ")";
        push(RecommendationKind::study_next, id, select_assets(e, id, policy), why);
    }

    for (const auto& id : order) {
        const auto& s = e.state(id);
        if (s.status != Status::passed || s.mastering_level != 4) continue;
        std::set<std::string> listed;
        for (const auto& r : out) listed.insert(r.asset_ids.begin(), r.asset_ids.end());
        std::vector<std::string> assets;
        for (const auto& a : e.curriculum().at(id).assets)
            if (a.kind == AssetKind::challenge && !listed.count(a.id)) assets.push_back(a.id);
        if (assets.empty()) continue;
        push(RecommendationKind::challenge, id, std::move(assets),
             id + " passed at level 4 (Excellent); advanced exercises available");
    }
    return out;
}

inline std::vector<Recommendation> recommend(const Enrollment& e) { return recommend(e, e.policy()); }

inline void to_json(json& j, const Recommendation& r) {
    j = json{{"rank", r.rank},
             {"kind", to_string(r.kind)},
             {"milestone", r.milestone},
             {"assets", r.asset_ids},
             {"rationale", r.rationale}};
}

inline json recommendation_document(const Enrollment& e, const std::vector<Recommendation>& items) {
    return json{{"schema", recommendation_schema}, {"enrollment_id", e.id()}, {"items", items}};
}

} // namespace learnpath
