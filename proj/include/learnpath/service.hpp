#pragma once

// Operations shared by the HTTP API and the CLI. Each mutation is staged on
// a copy, appended to the event log, then committed, so a rejected or
// failed operation leaves both the log and the in-memory state untouched.
//
// Locking: a shared_mutex guards the registry (students, curricula, the
// enrollment table). Attempts and revocations hold it shared plus a FIFO
// ticket lock of their enrollment, so different enrollments progress in
// parallel and one enrollment's requests run in arrival order. Appends go
// through a single mutex.

#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "adaptation.hpp"
#include "curriculum.hpp"
#include "persistence.hpp"
#include "student_model.hpp"

namespace learnpath {

using Clock = std::function<Timestamp()>;

/// Outcome of submitting a curriculum document: either the registered
/// curriculum or a non-empty report.
struct Registration {
    std::shared_ptr<const Curriculum> curriculum;
    ValidationReport report;

    bool ok() const noexcept { return curriculum != nullptr; }
};

struct ReplayCheck {
    bool equal = false;
    bool snapshot_present = false;
    std::uint64_t events = 0;
    std::string replayed;
};

namespace detail {

// Grants the lock in the order lock() was called.
class TicketLock {
public:
    void lock() {
        std::unique_lock guard(m_);
        const auto ticket = next_++;
        cv_.wait(guard, [&] { return serving_ == ticket; });
    }

    void unlock() {
        {
            std::lock_guard guard(m_);
            ++serving_;
        }
        cv_.notify_all();
    }

private:
    std::mutex m_;
    std::condition_variable cv_;
    std::uint64_t next_ = 0;
    std::uint64_t serving_ = 0;
};

inline void require_id(const std::string& value, const char* what) {
    if (value.empty()) throw Error(ErrorCode::bad_request, std::string(what) + " must not be empty");
}

} // namespace detail

class Service {
public:
    explicit Service(fs::path root, Clock clock = utc_now, const WarningSink& warn = {},
                     bool write_snapshots = true)
        : store_(std::move(root), warn), clock_(std::move(clock)), write_snapshots_(write_snapshots) {
        state_ = replay(store_.log().events());
        for (const auto& [id, e] : state_.directory().enrollments())
            slots_.emplace(id, std::make_unique<detail::TicketLock>());
    }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    const fs::path& root() const noexcept { return store_.root(); }

    // -- students ----------------------------------------------------------

    StudentProfile create_student(const std::string& id, const std::string& display_name) {
        detail::require_id(id, "student_id");
        std::unique_lock guard(registry_);
        if (state_.directory().students().count(id))
            throw Error(ErrorCode::duplicate_student, "student \"" + id + "\" exists");
        auto ev = commit(EventKind::student_created,
                         {{"student_id", id}, {"display_name", display_name}});
        state_.apply(ev);
        store_.write_students(state_.directory());
        snapshot_locked();
        return state_.directory().student(id);
    }

    // -- curricula ---------------------------------------------------------

    Registration register_curriculum(const json& document) {
        Registration out;
        out.report = validate_document(document);
        if (!out.report.empty()) return out;
        auto c = std::make_shared<const Curriculum>(parse_curriculum(document));
        std::unique_lock guard(registry_);
        if (state_.curricula().count(c->id))
            throw Error(ErrorCode::duplicate_curriculum, "curriculum \"" + c->id + "\" exists");
        // The logged document is the normalized form, so replay sees exactly
        // what was validated here.
        auto ev = commit(EventKind::curriculum_registered, {{"curriculum", json(*c)}});
        state_.apply(ev);
        store_.write_curriculum(*c);
        snapshot_locked();
        out.curriculum = state_.curriculum(c->id);
        return out;
    }

    std::shared_ptr<const Curriculum> curriculum(const std::string& id) const {
        std::shared_lock guard(registry_);
        return state_.curriculum(id);
    }

    std::vector<std::string> curriculum_ids() const {
        std::shared_lock guard(registry_);
        std::vector<std::string> out;
        for (const auto& [id, c] : state_.curricula()) out.push_back(id);
        return out;
    }

    /// Changes the default mode for future enrollments.
    std::shared_ptr<const Curriculum> set_mode(const std::string& curriculum_id, Mode mode) {
        std::unique_lock guard(registry_);
        (void)state_.curriculum(curriculum_id);
        auto ev = commit(EventKind::mode_set,
                         {{"curriculum_id", curriculum_id}, {"mode", to_string(mode)}});
        state_.apply(ev);
        auto c = state_.curriculum(curriculum_id);
        store_.write_curriculum(*c);
        snapshot_locked();
        return c;
    }

    // -- enrollments -------------------------------------------------------

    /// Returns the new enrollment id. Without a mode the curriculum default
    /// applies.
    std::string enroll(const std::string& student_id, const std::string& curriculum_id,
                       std::optional<Mode> mode = std::nullopt, StrugglePolicy policy = {}) {
        if (policy.k_failures < 1) throw Error(ErrorCode::bad_request, "k_failures must be positive");
        std::unique_lock guard(registry_);
        const auto& directory = state_.directory();
        (void)directory.student(student_id);
        auto c = state_.curriculum(curriculum_id);
        if (directory.find_enrollment(student_id, curriculum_id))
            throw Error(ErrorCode::duplicate_enrollment, "student \"" + student_id +
                                                             "\" is already enrolled in \"" +
                                                             curriculum_id + "\"");
        const auto id = "e" + std::to_string(directory.enrollments().size() + 1);
        auto ev = commit(EventKind::enrolled, {{"enrollment_id", id},
                                               {"student_id", student_id},
                                               {"curriculum_id", curriculum_id},
                                               {"mode", to_string(mode.value_or(c->mode_default))},
                                               {"k_failures", policy.k_failures}});
        state_.apply(ev);
        slots_.emplace(id, std::make_unique<detail::TicketLock>());
        snapshot_locked();
        return id;
    }

    StateDelta record_attempt(const std::string& enrollment_id, const std::string& milestone,
                              const std::string& assessment, double score) {
        auto delta = mutate(enrollment_id, EventKind::attempt_recorded,
                            {{"enrollment_id", enrollment_id},
                             {"milestone_id", milestone},
                             {"assessment_id", assessment},
                             {"score", score}},
                            &LearningState::apply_attempt);
        snapshot();
        return delta;
    }

    StateDelta revoke(const std::string& enrollment_id, const std::string& milestone,
                      const std::string& reason) {
        auto delta = mutate(enrollment_id, EventKind::pass_revoked,
                            {{"enrollment_id", enrollment_id},
                             {"milestone_id", milestone},
                             {"reason", reason}},
                            &LearningState::apply_revoke);
        snapshot();
        return delta;
    }

    /// Runs `fn` on a consistent view of one enrollment.
    template <class F>
    auto read_enrollment(const std::string& enrollment_id, F&& fn) const {
        std::shared_lock guard(registry_);
        const auto& e = state_.directory().enrollment(enrollment_id);
        std::lock_guard slot(*slots_.at(enrollment_id));
        return fn(e);
    }

    std::string owner_of(const std::string& enrollment_id) const {
        return read_enrollment(enrollment_id, [](const Enrollment& e) { return e.student_id(); });
    }

    json map(const std::string& enrollment_id) const {
        return read_enrollment(enrollment_id, [](const Enrollment& e) { return progress_map(e); });
    }

    std::string dot(const std::string& enrollment_id) const {
        return read_enrollment(enrollment_id,
                               [](const Enrollment& e) { return export_dot(e.curriculum(), e.statuses()); });
    }

    json recommendations(const std::string& enrollment_id) const {
        return read_enrollment(enrollment_id, [](const Enrollment& e) {
            return recommendation_document(e, recommend(e));
        });
    }

    // -- snapshots ---------------------------------------------------------

    std::string snapshot_text() const {
        std::unique_lock guard(registry_);
        return learnpath::snapshot_text(state_);
    }

    /// Writes the current state to snapshots/latest.json.
    void snapshot() {
        if (!write_snapshots_) return;
        std::unique_lock guard(registry_);
        snapshot_locked();
    }

    std::uint64_t last_seq() const {
        std::unique_lock guard(registry_);
        return state_.last_seq();
    }

    /// Replays the log from scratch and compares with the stored snapshot.
    ReplayCheck replay_check() const {
        std::unique_lock guard(registry_);
        ReplayCheck out;
        out.events = store_.log().events().size();
        out.replayed = learnpath::snapshot_text(replay(store_.log().events()));
        const auto stored = store_.read_snapshot();
        out.snapshot_present = stored.has_value();
        out.equal = stored ? *stored == out.replayed
                           : out.replayed == learnpath::snapshot_text(LearningState{});
        return out;
    }

private:
    // Appends under the single appender lock and returns the stored event.
    Event commit(EventKind kind, json payload) {
        std::lock_guard guard(append_);
        const auto seq = store_.log().append(kind, std::move(payload), clock_());
        state_.set_last_seq(seq);
        return store_.log().events().back();
    }

    template <class Apply>
    StateDelta mutate(const std::string& enrollment_id, EventKind kind, json payload, Apply apply) {
        std::shared_lock guard(registry_);
        auto& live = state_.directory().enrollment(enrollment_id);
        std::lock_guard slot(*slots_.at(enrollment_id));
        Enrollment staged = live;
        Event ev{0, clock_(), kind, payload};
        auto delta = apply(staged, ev);
        {
            std::lock_guard append(append_);
            const auto seq = store_.log().append(kind, std::move(payload), ev.timestamp);
            state_.set_last_seq(seq);
        }
        live = std::move(staged);
        return delta;
    }

    void snapshot_locked() {
        if (write_snapshots_) store_.write_snapshot(learnpath::snapshot_text(state_));
    }

    mutable std::shared_mutex registry_;
    std::mutex append_;
    Store store_;
    Clock clock_;
    bool write_snapshots_;
    LearningState state_;
    std::map<std::string, std::unique_ptr<detail::TicketLock>> slots_;
};

} // namespace learnpath
