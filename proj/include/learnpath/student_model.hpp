#pragma once

// Per-student progress. Each enrollment owns a private copy of the
// compiled JTMS network; passing an assessment enables the milestone's
// `passed` assumption and the network decides what unlocks downstream.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "assessment.hpp"
#include "curriculum.hpp"
#include "error.hpp"
#include "jtms.hpp"
#include "types.hpp"

namespace learnpath {

using Timestamp = std::string; // ISO-8601 UTC, e.g. 2026-10-16T09:30:00Z

inline constexpr std::string_view enrollment_schema = "enrollment/1";

struct StudentProfile {
    std::string id;
    std::string display_name;
    Timestamp created_at;

    bool operator==(const StudentProfile&) const = default;
};

/// A milestone is a struggle once it has failed `k_failures` times in a row.
struct StrugglePolicy {
    int k_failures = 2;

    bool operator==(const StrugglePolicy&) const = default;
};

struct AttemptRecord {
    std::string assessment_id;
    double score = 0;
    double score_pct = 0;
    bool passed = false;
    bool revision = false; // recorded while the milestone was already Passed
    Timestamp timestamp;

    bool operator==(const AttemptRecord&) const = default;
};

// Which prerequisites of a struggling milestone have been revised and
// then followed by another failure; the next plan entry is the first
// weakest prerequisite not yet exhausted.
struct RevisionProgress {
    std::vector<std::string> exhausted;
    std::optional<std::string> pending;

    bool operator==(const RevisionProgress&) const = default;
};

struct NodeState {
    Status status = Status::locked;
    std::optional<int> mastering_level;
    std::vector<AttemptRecord> attempts;
    int consecutive_failures = 0;
    RevisionProgress revision;

    bool operator==(const NodeState&) const = default;
};

struct StatusChange {
    std::string milestone;
    Status before = Status::locked;
    Status after = Status::locked;

    bool operator==(const StatusChange&) const = default;
};

/// Outcome of a mutation: the attempt that was recorded (if any) and every
/// milestone whose status changed, ascending by milestone id.
struct StateDelta {
    std::string milestone;
    std::optional<AttemptRecord> attempt;
    std::optional<int> mastering_level;
    std::vector<StatusChange> changes;

    bool operator==(const StateDelta&) const = default;
};

class Enrollment {
public:
    Enrollment(std::string id, std::string student_id, std::shared_ptr<const Curriculum> curriculum,
               Mode mode, StrugglePolicy policy = {})
        : id_(std::move(id)),
          student_id_(std::move(student_id)),
          curriculum_(std::move(curriculum)),
          mode_(mode),
          policy_(policy),
          compiled_(compile_to_jtms(*curriculum_, mode)),
          order_(topological_order(*curriculum_)) {
        if (policy_.k_failures < 1)
            throw Error(ErrorCode::schema_violation, "k_failures must be at least 1");
        for (const auto& m : curriculum_->milestones) states_[m.id].status = compute_status(m.id);
    }

    const std::string& id() const noexcept { return id_; }
    const std::string& student_id() const noexcept { return student_id_; }
    const std::string& curriculum_id() const noexcept { return curriculum_->id; }
    const Curriculum& curriculum() const noexcept { return *curriculum_; }
    Mode mode() const noexcept { return mode_; }
    const StrugglePolicy& policy() const noexcept { return policy_; }
    const jtms::Network& network() const noexcept { return compiled_.network; }
    const NetworkTemplate& compiled() const noexcept { return compiled_; }
    const std::map<std::string, NodeState>& states() const noexcept { return states_; }
    const std::vector<std::string>& topological() const noexcept { return order_; }

    const NodeState& state(std::string_view milestone) const {
        auto it = states_.find(std::string(milestone));
        if (it == states_.end())
            throw Error(ErrorCode::unknown_milestone,
                        "unknown milestone \"" + std::string(milestone) + "\"");
        return it->second;
    }

    /// Recomputed from the network: Passed iff passed(m) is enabled, else
    /// Exploring iff unlocked(m) is IN, else Locked.
    Status status_of(std::string_view milestone) const {
        (void)state(milestone);
        return compute_status(std::string(milestone));
    }

    std::map<std::string, Status> statuses() const {
        std::map<std::string, Status> out;
        for (const auto& [id, s] : states_) out.emplace(id, s.status);
        return out;
    }

    std::size_t topological_position(const std::string& milestone) const {
        return static_cast<std::size_t>(std::find(order_.begin(), order_.end(), milestone) -
                                        order_.begin());
    }

    /// Passed direct prerequisites of `milestone`, weakest mastery first,
    /// ties by topological position then id.
    std::vector<std::string> weakest_prerequisites(const std::string& milestone) const {
        std::vector<std::string> out;
        for (const auto& p : curriculum_->at(milestone).prerequisites)
            if (states_.at(p).status == Status::passed) out.push_back(p);
        std::sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
            auto key = [&](const std::string& id) {
                return std::tuple(*states_.at(id).mastering_level, topological_position(id), id);
            };
            return key(a) < key(b);
        });
        return out;
    }

    /// Current head of the revision plan, skipping exhausted entries.
    std::optional<std::string> revision_head(const std::string& milestone) const {
        const auto& progress = states_.at(milestone).revision;
        for (const auto& p : weakest_prerequisites(milestone))
            if (std::find(progress.exhausted.begin(), progress.exhausted.end(), p) ==
                progress.exhausted.end())
                return p;
        return std::nullopt;
    }

    bool struggling(const std::string& milestone, const StrugglePolicy& policy) const {
        return states_.at(milestone).consecutive_failures >= policy.k_failures;
    }

    StateDelta record_attempt(const std::string& milestone, const std::string& assessment_id,
                              double raw_score, const Timestamp& timestamp) {
        const auto& m = curriculum_->at(milestone);
        auto& state = states_.at(milestone);
        if (state.status == Status::locked)
            throw Error(ErrorCode::milestone_locked, "milestone \"" + milestone + "\" is locked");
        const auto* assessment = m.find_assessment(assessment_id);
        if (!assessment)
            throw Error(ErrorCode::unknown_assessment, "assessment \"" + assessment_id +
                                                           "\" does not belong to milestone \"" +
                                                           milestone + "\"");
        const auto scored = score(*assessment, raw_score);

        // A new attempt on the plan head of a struggling milestone counts as
        // having revised it.
        for (auto& [other, other_state] : states_) {
            if (other == milestone || other_state.status != Status::exploring) continue;
            if (!struggling(other, policy_)) continue;
            if (revision_head(other) == milestone) other_state.revision.pending = milestone;
        }

        AttemptRecord record{assessment_id,     raw_score, scored.score_pct, scored.passed,
                             state.status == Status::passed, timestamp};
        state.attempts.push_back(record);

        StateDelta delta;
        delta.milestone = milestone;
        delta.attempt = record;
        if (scored.passed) {
            int level = mastery_from_score(scored.score_pct, assessment->pass_threshold_pct);
            if (state.mastering_level) level = std::max(level, *state.mastering_level);
            state.mastering_level = level;
            state.consecutive_failures = 0;
            state.revision = {};
            compiled_.network.enable_assumption(compiled_.nodes.at(milestone).passed);
        } else {
            if (struggling(milestone, policy_) && state.revision.pending) {
                state.revision.exhausted.push_back(*state.revision.pending);
                state.revision.pending.reset();
            }
            ++state.consecutive_failures;
        }
        delta.mastering_level = state.mastering_level;
        delta.changes = refresh();
        return delta;
    }

    StateDelta revoke_pass(const std::string& milestone) {
        (void)curriculum_->at(milestone);
        auto& state = states_.at(milestone);
        if (state.status != Status::passed)
            throw Error(ErrorCode::not_passed, "milestone \"" + milestone + "\" is not passed");
        compiled_.network.retract_assumption(compiled_.nodes.at(milestone).passed);
        state.mastering_level.reset();
        StateDelta delta;
        delta.milestone = milestone;
        delta.changes = refresh();
        return delta;
    }

    /// Status and level per milestone; what a student sees on the map.
    std::map<std::string, std::pair<Status, std::optional<int>>> progress() const {
        std::map<std::string, std::pair<Status, std::optional<int>>> out;
        for (const auto& [id, s] : states_) out.emplace(id, std::pair(s.status, s.mastering_level));
        return out;
    }

    bool operator==(const Enrollment& other) const {
        return id_ == other.id_ && student_id_ == other.student_id_ &&
               *curriculum_ == *other.curriculum_ && mode_ == other.mode_ &&
               policy_ == other.policy_ && compiled_ == other.compiled_ &&
               states_ == other.states_;
    }

private:
    Status compute_status(const std::string& milestone) const {
        const auto& nodes = compiled_.nodes.at(milestone);
        if (compiled_.network.node(nodes.passed).enabled) return Status::passed;
        if (compiled_.network.label_of(nodes.unlocked) == jtms::Label::in) return Status::exploring;
        return Status::locked;
    }

    std::vector<StatusChange> refresh() {
        std::vector<StatusChange> changes;
        for (auto& [id, state] : states_) {
            const auto now = compute_status(id);
            if (now != state.status) {
                changes.push_back({id, state.status, now});
                state.status = now;
            }
        }
        return changes;
    }

    std::string id_;
    std::string student_id_;
    std::shared_ptr<const Curriculum> curriculum_;
    Mode mode_;
    StrugglePolicy policy_;
    NetworkTemplate compiled_;
    std::vector<std::string> order_;
    std::map<std::string, NodeState> states_;
};

/// Student profiles and their enrollments.
class StudentDirectory {
public:
    const StudentProfile& add_student(StudentProfile profile) {
        if (students_.count(profile.id))
            throw Error(ErrorCode::duplicate_student, "student \"" + profile.id + "\" exists");
        auto id = profile.id;
        return students_.emplace(std::move(id), std::move(profile)).first->second;
    }

    const StudentProfile& student(const std::string& id) const {
        auto it = students_.find(id);
        if (it == students_.end())
            throw Error(ErrorCode::unknown_student, "unknown student \"" + id + "\"");
        return it->second;
    }

    /// Fresh enrollment with a newly compiled private network.
    Enrollment& enroll(std::string enrollment_id, const std::string& student_id,
                       std::shared_ptr<const Curriculum> curriculum, Mode mode,
                       StrugglePolicy policy = {}) {
        (void)student(student_id);
        if (find_enrollment(student_id, curriculum->id))
            throw Error(ErrorCode::duplicate_enrollment, "student \"" + student_id +
                                                             "\" is already enrolled in \"" +
                                                             curriculum->id + "\"");
        if (enrollments_.count(enrollment_id))
            throw Error(ErrorCode::duplicate_enrollment,
                        "enrollment id \"" + enrollment_id + "\" is taken");
        Enrollment e(enrollment_id, student_id, std::move(curriculum), mode, policy);
        return enrollments_.emplace(std::move(enrollment_id), std::move(e)).first->second;
    }

    std::optional<std::string> find_enrollment(const std::string& student_id,
                                               const std::string& curriculum_id) const {
        for (const auto& [id, e] : enrollments_)
            if (e.student_id() == student_id && e.curriculum_id() == curriculum_id) return id;
        return std::nullopt;
    }

    Enrollment& enrollment(const std::string& id) {
        auto it = enrollments_.find(id);
        if (it == enrollments_.end())
            throw Error(ErrorCode::unknown_enrollment, "unknown enrollment \"" + id + "\"");
        return it->second;
    }

    const Enrollment& enrollment(const std::string& id) const {
        return const_cast<StudentDirectory*>(this)->enrollment(id);
    }

    const std::map<std::string, StudentProfile>& students() const noexcept { return students_; }
    const std::map<std::string, Enrollment>& enrollments() const noexcept { return enrollments_; }

    bool operator==(const StudentDirectory&) const = default;

private:
    std::map<std::string, StudentProfile> students_;
    std::map<std::string, Enrollment> enrollments_;
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const StudentProfile& s) {
    j = json{{"id", s.id}, {"display_name", s.display_name}, {"created_at", s.created_at}};
}

inline void to_json(json& j, const AttemptRecord& a) {
    j = json{{"assessment_id", a.assessment_id}, {"score", a.score},
             {"score_pct", a.score_pct},         {"passed", a.passed},
             {"revision", a.revision},           {"timestamp", a.timestamp}};
}

inline json optional_level(const std::optional<int>& level) {
    return level ? json(*level) : json(nullptr);
}

inline void to_json(json& j, const StatusChange& c) {
    j = json{{"milestone", c.milestone},
             {"before", to_string(c.before)},
             {"after", to_string(c.after)},
             {"color", color_of(c.after)}};
}

inline void to_json(json& j, const StateDelta& d) {
    j = json{{"milestone", d.milestone},
             {"mastering_level", optional_level(d.mastering_level)},
             {"changes", d.changes}};
    j["attempt"] = d.attempt ? json(*d.attempt) : json(nullptr);
}

inline void to_json(json& j, const NodeState& s) {
    j = json{{"status", to_string(s.status)},
             {"color", color_of(s.status)},
             {"mastering_level", optional_level(s.mastering_level)},
             {"consecutive_failures", s.consecutive_failures},
             {"attempts", s.attempts},
             {"revision",
              {{"exhausted", s.revision.exhausted},
               {"pending", s.revision.pending ? json(*s.revision.pending) : json(nullptr)}}}};
}

/// Full enrollment snapshot (`enrollment/1`), including the network dump.
inline json enrollment_document(const Enrollment& e) {
    json network = json::array();
    std::istringstream lines(e.network().dump());
    for (std::string line; std::getline(lines, line);) network.push_back(line);
    return json{{"schema", enrollment_schema},
                {"id", e.id()},
                {"student_id", e.student_id()},
                {"curriculum_id", e.curriculum_id()},
                {"mode", to_string(e.mode())},
                {"k_failures", e.policy().k_failures},
                {"milestones", e.states()},
                {"network", network}};
}

/// Per-milestone {status, mastering_level, color}, the map view.
inline json progress_map(const Enrollment& e) {
    json milestones = json::array();
    for (const auto& id : e.topological()) {
        const auto& s = e.state(id);
        const auto& m = e.curriculum().at(id);
        milestones.push_back({{"id", id},
                              {"title", m.title},
                              {"prerequisites", m.prerequisites},
                              {"status", to_string(s.status)},
                              {"color", color_of(s.status)},
                              {"mastering_level", optional_level(s.mastering_level)},
                              {"consecutive_failures", s.consecutive_failures}});
    }
    return json{{"enrollment_id", e.id()},
                {"curriculum_id", e.curriculum_id()},
                {"mode", to_string(e.mode())},
                {"milestones", milestones}};
}

} // namespace learnpath
