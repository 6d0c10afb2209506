#pragma once

// Event-sourced storage. Every state change is one JSON line in
// `events.log`; students, curricula and enrollments are rebuilt by
// replaying the log in seq order. Documents under `curricula/`,
// `students.json` and `snapshots/` are caches for inspection.
//
// Store layout:
//   <root>/events.log          append-only, one event per line
//   <root>/curricula/<id>.json registered curriculum documents
//   <root>/students.json       student profiles
//   <root>/snapshots/latest.json
//   <root>/store.lock          held while a process has the store open

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <json.hpp>

#include "adaptation.hpp"
#include "curriculum.hpp"
#include "error.hpp"
#include "student_model.hpp"

namespace learnpath {

namespace fs = std::filesystem;

inline constexpr int event_format_version = 1;

enum class EventKind {
    student_created,
    curriculum_registered,
    enrolled,
    attempt_recorded,
    pass_revoked,
    mode_set,
};

constexpr std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::student_created: return "student_created";
    case EventKind::curriculum_registered: return "curriculum_registered";
    case EventKind::enrolled: return "enrolled";
    case EventKind::attempt_recorded: return "attempt_recorded";
    case EventKind::pass_revoked: return "pass_revoked";
    case EventKind::mode_set: return "mode_set";
    }
    return "?";
}

inline std::optional<EventKind> parse_event_kind(std::string_view text) {
    for (auto kind : {EventKind::student_created, EventKind::curriculum_registered,
                      EventKind::enrolled, EventKind::attempt_recorded, EventKind::pass_revoked,
                      EventKind::mode_set})
        if (to_string(kind) == text) return kind;
    return std::nullopt;
}

struct Event {
    std::uint64_t seq = 0;
    Timestamp timestamp;
    EventKind kind = EventKind::student_created;
    json payload = json::object();

    bool operator==(const Event&) const = default;
};

inline Timestamp utc_now() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t secs = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

// ---------------------------------------------------------------------------
// Payload schemas

namespace detail {

enum class FieldType { string, number, integer, object };

struct FieldSpec {
    const char* name;
    FieldType type;
};

inline std::vector<FieldSpec> payload_fields(EventKind kind) {
    using T = FieldType;
    switch (kind) {
    case EventKind::student_created: return {{"student_id", T::string}, {"display_name", T::string}};
    case EventKind::curriculum_registered: return {{"curriculum", T::object}};
    case EventKind::enrolled:
        return {{"enrollment_id", T::string},
                {"student_id", T::string},
                {"curriculum_id", T::string},
                {"mode", T::string},
                {"k_failures", T::integer}};
    case EventKind::attempt_recorded:
        return {{"enrollment_id", T::string},
                {"milestone_id", T::string},
                {"assessment_id", T::string},
                {"score", T::number}};
    case EventKind::pass_revoked:
        return {{"enrollment_id", T::string}, {"milestone_id", T::string}, {"reason", T::string}};
    case EventKind::mode_set: return {{"curriculum_id", T::string}, {"mode", T::string}};
    }
    return {};
}

} // namespace detail

/// Throws schema_violation unless `payload` carries exactly the fields of
/// its kind with the right JSON types.
inline void validate_payload(EventKind kind, const json& payload) {
    auto fail = [&](const std::string& what) {
        throw Error(ErrorCode::schema_violation,
                    std::string(to_string(kind)) + " payload: " + what);
    };
    if (!payload.is_object()) fail("expected an object");
    const auto fields = detail::payload_fields(kind);
    for (const auto& f : fields) {
        auto it = payload.find(f.name);
        if (it == payload.end()) fail(std::string("missing \"") + f.name + "\"");
        bool ok = false;
        switch (f.type) {
        case detail::FieldType::string: ok = it->is_string(); break;
        case detail::FieldType::number: ok = it->is_number(); break;
        case detail::FieldType::integer: ok = it->is_number_integer(); break;
        case detail::FieldType::object: ok = it->is_object(); break;
        }
        if (!ok) fail(std::string("wrong type for \"") + f.name + "\"");
    }
    if (payload.size() != fields.size()) fail("unexpected extra fields");
    if (auto it = payload.find("mode"); it != payload.end() && *it != "open" && *it != "locked")
        fail("mode must be open or locked");
    if (auto it = payload.find("k_failures"); it != payload.end() && it->get<long long>() < 1)
        fail("k_failures must be positive");
}

inline json event_line(const Event& e) {
    return json{{"v", event_format_version},
                {"seq", e.seq},
                {"ts", e.timestamp},
                {"kind", to_string(e.kind)},
                {"payload", e.payload}};
}

inline Event parse_event_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::schema_violation, std::string("unparsable event: ") + e.what());
    }
    if (!j.is_object() || j.value("v", 0) != event_format_version)
        throw Error(ErrorCode::schema_violation, "unsupported event version");
    if (!j.contains("seq") || !j["seq"].is_number_unsigned() || !j.contains("ts") ||
        !j["ts"].is_string() || !j.contains("kind") || !j["kind"].is_string() ||
        !j.contains("payload"))
        throw Error(ErrorCode::schema_violation, "event is missing v/seq/ts/kind/payload");
    auto kind = parse_event_kind(j["kind"].get<std::string>());
    if (!kind) throw Error(ErrorCode::schema_violation, "unknown event kind");
    Event e{j["seq"].get<std::uint64_t>(), j["ts"].get<std::string>(), *kind, j["payload"]};
    validate_payload(e.kind, e.payload);
    return e;
}

// ---------------------------------------------------------------------------
// Event log

using WarningSink = std::function<void(const std::string&)>;

/// Append-only JSON-Lines log. Appends are fsynced before returning. A
/// final line without its newline is treated as a torn write: it is
/// truncated away with a warning. Any other bad line fails the open.
class EventLog {
public:
    explicit EventLog(fs::path path, const WarningSink& warn = {}) : path_(std::move(path)) {
        load(warn);
        fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd_ < 0)
            throw Error(ErrorCode::storage_failure,
                        "cannot open " + path_.string() + ": " + std::strerror(errno));
    }

    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    ~EventLog() {
        if (fd_ >= 0) ::close(fd_);
    }

    const std::vector<Event>& events() const noexcept { return events_; }
    std::uint64_t last_seq() const noexcept { return events_.size(); }

    /// Validates, assigns the next seq, writes durably. Returns the seq.
    std::uint64_t append(EventKind kind, json payload, Timestamp timestamp) {
        validate_payload(kind, payload);
        Event e{last_seq() + 1, std::move(timestamp), kind, std::move(payload)};
        const auto line = event_line(e).dump() + "\n";
        std::size_t written = 0;
        while (written < line.size()) {
            auto n = ::write(fd_, line.data() + written, line.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::storage_failure,
                            "write to " + path_.string() + " failed: " + std::strerror(errno));
            }
            written += static_cast<std::size_t>(n);
        }
        if (::fsync(fd_) != 0)
            throw Error(ErrorCode::storage_failure,
                        "fsync of " + path_.string() + " failed: " + std::strerror(errno));
        events_.push_back(std::move(e));
        return events_.back().seq;
    }

private:
    void load(const WarningSink& warn) {
        std::ifstream in(path_, std::ios::binary);
        if (!in) return;
        std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();

        std::size_t pos = 0;
        while (pos < content.size()) {
            const auto nl = content.find('\n', pos);
            if (nl == std::string::npos) {
                if (warn)
                    warn("events.log: discarding torn final line (" +
                         std::to_string(content.size() - pos) + " bytes after seq " +
                         std::to_string(events_.size()) + ")");
                fs::resize_file(path_, pos);
                break;
            }
            const auto line = content.substr(pos, nl - pos);
            const auto expected = events_.size() + 1;
            Event e;
            try {
                e = parse_event_line(line);
            } catch (const Error& err) {
                throw Error(ErrorCode::corrupt_log, "corrupt event log at seq " +
                                                        std::to_string(expected) + ": " + err.what());
            }
            if (e.seq != expected)
                throw Error(ErrorCode::corrupt_log, "corrupt event log at seq " +
                                                        std::to_string(expected) + ": found seq " +
                                                        std::to_string(e.seq));
            events_.push_back(std::move(e));
            pos = nl + 1;
        }
    }

    fs::path path_;
    int fd_ = -1;
    std::vector<Event> events_;
};

// ---------------------------------------------------------------------------
// Application state rebuilt from events

/// Result of applying one event; which fields are set depends on the kind.
struct Applied {
    std::optional<StateDelta> delta;
    std::string subject; // id of the created or touched entity
};

class LearningState {
public:
    const StudentDirectory& directory() const noexcept { return directory_; }
    StudentDirectory& directory() noexcept { return directory_; }
    std::uint64_t last_seq() const noexcept { return last_seq_; }

    const std::map<std::string, std::shared_ptr<const Curriculum>>& curricula() const noexcept {
        return curricula_;
    }

    std::shared_ptr<const Curriculum> curriculum(const std::string& id) const {
        auto it = curricula_.find(id);
        if (it == curricula_.end())
            throw Error(ErrorCode::unknown_curriculum, "unknown curriculum \"" + id + "\"");
        return it->second;
    }

    // The per-kind steps below are shared by live mutations and replay.

    static StudentProfile make_student(const Event& e) {
        return {e.payload["student_id"], e.payload["display_name"], e.timestamp};
    }

    static Curriculum make_curriculum(const json& doc) {
        auto c = parse_curriculum(doc);
        if (auto report = validate(c); !report.empty())
            throw Error(ErrorCode::invalid_curriculum,
                        "curriculum \"" + c.id + "\" is invalid: " + report.front().message);
        return c;
    }

    static StateDelta apply_attempt(Enrollment& e, const Event& ev) {
        return e.record_attempt(ev.payload["milestone_id"], ev.payload["assessment_id"],
                                ev.payload["score"].get<double>(), ev.timestamp);
    }

    static StateDelta apply_revoke(Enrollment& e, const Event& ev) {
        return e.revoke_pass(ev.payload["milestone_id"]);
    }

    std::shared_ptr<const Curriculum> with_mode(const Event& ev) const {
        auto updated = std::make_shared<Curriculum>(*curriculum(ev.payload["curriculum_id"]));
        updated->mode_default = parse_mode(ev.payload["mode"].get<std::string>());
        return updated;
    }

    /// Applies one event in place. Throws on events the state rejects.
    Applied apply(const Event& ev) {
        Applied out;
        switch (ev.kind) {
        case EventKind::student_created: {
            out.subject = directory_.add_student(make_student(ev)).id;
            break;
        }
        case EventKind::curriculum_registered: {
            auto c = std::make_shared<const Curriculum>(make_curriculum(ev.payload["curriculum"]));
            if (curricula_.count(c->id))
                throw Error(ErrorCode::duplicate_curriculum, "curriculum \"" + c->id + "\" exists");
            out.subject = c->id;
            curricula_.emplace(c->id, std::move(c));
            break;
        }
        case EventKind::enrolled: {
            auto c = curriculum(ev.payload["curriculum_id"]);
            out.subject = directory_
                              .enroll(ev.payload["enrollment_id"], ev.payload["student_id"], c,
                                      parse_mode(ev.payload["mode"].get<std::string>()),
                                      StrugglePolicy{ev.payload["k_failures"].get<int>()})
                              .id();
            break;
        }
        case EventKind::attempt_recorded: {
            auto& e = directory_.enrollment(ev.payload["enrollment_id"]);
            out.delta = apply_attempt(e, ev);
            out.subject = e.id();
            break;
        }
        case EventKind::pass_revoked: {
            auto& e = directory_.enrollment(ev.payload["enrollment_id"]);
            out.delta = apply_revoke(e, ev);
            out.subject = e.id();
            break;
        }
        case EventKind::mode_set: {
            auto updated = with_mode(ev);
            out.subject = updated->id;
            curricula_[updated->id] = std::move(updated);
            break;
        }
        }
        last_seq_ = ev.seq;
        return out;
    }

    void install_curriculum(std::shared_ptr<const Curriculum> c) { curricula_[c->id] = std::move(c); }
    void set_last_seq(std::uint64_t seq) noexcept { last_seq_ = seq; }

    /// Deterministic document of the whole state.
    json snapshot() const {
        json students = json::array();
        for (const auto& [id, s] : directory_.students()) students.push_back(s);
        json curricula = json::object();
        for (const auto& [id, c] : curricula_) curricula[id] = *c;
        json enrollments = json::object();
        for (const auto& [id, e] : directory_.enrollments()) enrollments[id] = enrollment_document(e);
        return json{{"schema", "state/1"},
                    {"last_seq", last_seq_},
                    {"students", students},
                    {"curricula", curricula},
                    {"enrollments", enrollments}};
    }

private:
    StudentDirectory directory_;
    std::map<std::string, std::shared_ptr<const Curriculum>> curricula_;
    std::uint64_t last_seq_ = 0;
};

/// Rebuilds state from events in seq order; fails closed on the first event
/// that is out of sequence or that the state rejects.
inline LearningState replay(const std::vector<Event>& events) {
    LearningState state;
    std::uint64_t expected = 1;
    for (const auto& ev : events) {
        if (ev.seq != expected)
            throw Error(ErrorCode::corrupt_log, "corrupt event log at seq " +
                                                    std::to_string(expected) + ": found seq " +
                                                    std::to_string(ev.seq));
        try {
            state.apply(ev);
        } catch (const Error& e) {
            throw Error(ErrorCode::corrupt_log, "corrupt event log at seq " +
                                                    std::to_string(ev.seq) + ": " + e.what());
        }
        ++expected;
    }
    return state;
}

inline std::string snapshot_text(const LearningState& state) { return state.snapshot().dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// On-disk store

namespace detail {

inline void write_atomically(const fs::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out)
            throw Error(ErrorCode::storage_failure, "cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::storage_failure, "cannot rename to " + path.string() + ": " + ec.message());
}

} // namespace detail

/// Exclusive handle on a store directory; the lock is released when the
/// Store is destroyed.
class Store {
public:
    explicit Store(fs::path root, const WarningSink& warn = {}) : root_(std::move(root)) {
        std::error_code ec;
        fs::create_directories(root_ / "curricula", ec);
        fs::create_directories(root_ / "snapshots", ec);
        if (ec || !fs::is_directory(root_))
            throw Error(ErrorCode::storage_failure, "cannot create store at " + root_.string());
        lock_fd_ = ::open((root_ / "store.lock").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (lock_fd_ < 0)
            throw Error(ErrorCode::storage_failure, "cannot open lock file in " + root_.string());
        if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(lock_fd_);
            throw Error(ErrorCode::store_locked,
                        "store " + root_.string() + " is locked by another process");
        }
        log_ = std::make_unique<EventLog>(root_ / "events.log", warn);
    }

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    ~Store() {
        log_.reset();
        if (lock_fd_ >= 0) {
            ::flock(lock_fd_, LOCK_UN);
            ::close(lock_fd_);
        }
    }

    const fs::path& root() const noexcept { return root_; }
    EventLog& log() noexcept { return *log_; }
    const EventLog& log() const noexcept { return *log_; }

    void write_curriculum(const Curriculum& c) {
        detail::write_atomically(root_ / "curricula" / (c.id + ".json"), json(c).dump(2) + "\n");
    }

    void write_students(const StudentDirectory& directory) {
        json students = json::array();
        for (const auto& [id, s] : directory.students()) students.push_back(s);
        detail::write_atomically(root_ / "students.json",
                                 json{{"schema", "students/1"}, {"students", students}}.dump(2) + "\n");
    }

    void write_snapshot(const std::string& text) {
        detail::write_atomically(root_ / "snapshots" / "latest.json", text);
    }

    std::optional<std::string> read_snapshot() const {
        std::ifstream in(root_ / "snapshots" / "latest.json", std::ios::binary);
        if (!in) return std::nullopt;
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }

private:
    fs::path root_;
    int lock_fd_ = -1;
    std::unique_ptr<EventLog> log_;
};

} // namespace learnpath
