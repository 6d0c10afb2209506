#pragma once

// Authored course model: milestones with prerequisites, assets and
// assessments. Validation, deterministic topological ordering, compilation
// into a per-student JTMS template, and Graphviz export.

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "jtms.hpp"
#include "types.hpp"

namespace learnpath {

using nlohmann::json;

inline constexpr std::string_view curriculum_schema = "curriculum/1";

enum class AssetKind { core, support, challenge };

constexpr std::string_view to_string(AssetKind kind) {
    switch (kind) {
    case AssetKind::core: return "core";
    case AssetKind::support: return "support";
    case AssetKind::challenge: return "challenge";
    }
    return "?";
}

struct Asset {
    std::string id;
    AssetKind kind = AssetKind::core;
    int difficulty = 1; // 1..4
    std::string uri;
    std::string title;

    bool operator==(const Asset&) const = default;
};

struct Assessment {
    std::string id;
    std::string title;
    double max_score = 100;
    double pass_threshold_pct = 50;

    bool operator==(const Assessment&) const = default;
};

struct Milestone {
    std::string id;
    std::string title;
    std::set<std::string> prerequisites;
    std::vector<Asset> assets;
    std::vector<Assessment> assessments;

    const Assessment* find_assessment(std::string_view assessment_id) const {
        for (const auto& a : assessments)
            if (a.id == assessment_id) return &a;
        return nullptr;
    }

    bool operator==(const Milestone&) const = default;
};

struct Curriculum {
    std::string id;
    std::string title;
    Mode mode_default = Mode::locked;
    std::vector<Milestone> milestones;

    const Milestone* find(std::string_view milestone_id) const {
        for (const auto& m : milestones)
            if (m.id == milestone_id) return &m;
        return nullptr;
    }

    const Milestone& at(std::string_view milestone_id) const {
        if (const auto* m = find(milestone_id)) return *m;
        throw Error(ErrorCode::unknown_milestone,
                    "unknown milestone \"" + std::string(milestone_id) + "\"");
    }

    bool operator==(const Curriculum&) const = default;
};

struct Violation {
    std::string rule;    // stable machine-readable name
    std::string subject; // offending id or document path
    std::string message;

    bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

// ---------------------------------------------------------------------------
// JSON document format

inline void to_json(json& j, const Asset& a) {
    j = json{{"id", a.id},
             {"kind", to_string(a.kind)},
             {"difficulty", a.difficulty},
             {"uri", a.uri},
             {"title", a.title}};
}

inline void to_json(json& j, const Assessment& a) {
    j = json{{"id", a.id},
             {"title", a.title},
             {"max_score", a.max_score},
             {"pass_threshold_pct", a.pass_threshold_pct}};
}

inline void to_json(json& j, const Milestone& m) {
    j = json{{"id", m.id},
             {"title", m.title},
             {"prerequisites", m.prerequisites},
             {"assets", m.assets},
             {"assessments", m.assessments}};
}

inline void to_json(json& j, const Curriculum& c) {
    j = json{{"schema", curriculum_schema},
             {"id", c.id},
             {"title", c.title},
             {"mode_default", to_string(c.mode_default)},
             {"milestones", c.milestones}};
}

inline void to_json(json& j, const Violation& v) {
    j = json{{"rule", v.rule}, {"subject", v.subject}, {"message", v.message}};
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::invalid_curriculum, path + ": " + what);
}

inline const json& field(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) schema_error(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(path, std::string("missing field \"") + key + "\"");
    return *it;
}

inline std::string text(const json& obj, const std::string& path, const char* key) {
    const auto& v = field(obj, path, key);
    if (!v.is_string()) schema_error(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline double number(const json& v, const std::string& path) {
    if (!v.is_number()) schema_error(path, "expected a number");
    return v.get<double>();
}

inline const json& array(const json& obj, const std::string& path, const char* key) {
    const auto& v = field(obj, path, key);
    if (!v.is_array()) schema_error(path + "." + key, "expected an array");
    return v;
}

inline AssetKind asset_kind(const std::string& s, const std::string& path) {
    if (s == "core") return AssetKind::core;
    if (s == "support") return AssetKind::support;
    if (s == "challenge") return AssetKind::challenge;
    schema_error(path, "asset kind must be core, support or challenge");
}

} // namespace detail

/// Structural parse. Throws invalid_curriculum on shape errors (missing
/// fields, wrong types, unknown schema); semantic rules belong to validate().
inline Curriculum parse_curriculum(const json& doc) {
    using namespace detail;
    const std::string root = "$";
    if (!doc.is_object()) schema_error(root, "expected an object");
    if (text(doc, root, "schema") != curriculum_schema)
        schema_error(root + ".schema", "expected \"" + std::string(curriculum_schema) + "\"");

    Curriculum c;
    c.id = text(doc, root, "id");
    c.title = text(doc, root, "title");
    try {
        c.mode_default = parse_mode(text(doc, root, "mode_default"));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::invalid_mode) schema_error(root + ".mode_default", e.what());
        throw;
    }

    const auto& milestones = array(doc, root, "milestones");
    for (std::size_t i = 0; i < milestones.size(); ++i) {
        const auto& mj = milestones[i];
        const auto mpath = root + ".milestones[" + std::to_string(i) + "]";
        Milestone m;
        m.id = text(mj, mpath, "id");
        m.title = text(mj, mpath, "title");
        for (const auto& p : array(mj, mpath, "prerequisites")) {
            if (!p.is_string()) schema_error(mpath + ".prerequisites", "expected strings");
            m.prerequisites.insert(p.get<std::string>());
        }
        const auto& assets = array(mj, mpath, "assets");
        for (std::size_t k = 0; k < assets.size(); ++k) {
            const auto apath = mpath + ".assets[" + std::to_string(k) + "]";
            Asset a;
            a.id = text(assets[k], apath, "id");
            a.kind = asset_kind(text(assets[k], apath, "kind"), apath + ".kind");
            const auto& d = field(assets[k], apath, "difficulty");
            if (!d.is_number_integer()) schema_error(apath + ".difficulty", "expected an integer");
            a.difficulty = d.get<int>();
            a.uri = text(assets[k], apath, "uri");
            a.title = text(assets[k], apath, "title");
            m.assets.push_back(std::move(a));
        }
        const auto& assessments = array(mj, mpath, "assessments");
        for (std::size_t k = 0; k < assessments.size(); ++k) {
            const auto apath = mpath + ".assessments[" + std::to_string(k) + "]";
            Assessment a;
            a.id = text(assessments[k], apath, "id");
            a.title = text(assessments[k], apath, "title");
            a.max_score = number(field(assessments[k], apath, "max_score"), apath + ".max_score");
            if (auto it = assessments[k].find("pass_threshold_pct"); it != assessments[k].end())
                a.pass_threshold_pct = number(*it, apath + ".pass_threshold_pct");
            m.assessments.push_back(std::move(a));
        }
        c.milestones.push_back(std::move(m));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

// Kahn's algorithm over resolvable edges; smallest ready id first.
// Returns the emitted order; milestones left out sit on or behind a cycle.
inline std::vector<std::string> kahn(const Curriculum& c) {
    std::map<std::string, std::size_t> pending;
    std::map<std::string, std::vector<std::string>> dependents;
    for (const auto& m : c.milestones) pending.emplace(m.id, 0);
    for (const auto& m : c.milestones)
        for (const auto& p : m.prerequisites)
            if (pending.count(p)) {
                ++pending[m.id];
                dependents[p].push_back(m.id);
            }
    std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
    for (const auto& [id, count] : pending)
        if (count == 0) ready.push(id);
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto id = ready.top();
        ready.pop();
        order.push_back(id);
        for (const auto& d : dependents[id])
            if (--pending[d] == 0) ready.push(d);
    }
    return order;
}

} // namespace detail

inline ValidationReport validate(const Curriculum& c) {
    ValidationReport report;
    auto add = [&](std::string rule, std::string subject, std::string message) {
        report.push_back({std::move(rule), std::move(subject), std::move(message)});
    };

    if (c.id.empty()) add("empty_id", "$.id", "curriculum id is empty");

    std::set<std::string> milestone_ids, asset_ids, assessment_ids;
    for (const auto& m : c.milestones) {
        if (m.id.empty()) add("empty_id", m.title, "milestone id is empty");
        if (!milestone_ids.insert(m.id).second)
            add("duplicate_milestone", m.id, "duplicate milestone id \"" + m.id + "\"");
    }

    for (const auto& m : c.milestones) {
        for (const auto& p : m.prerequisites) {
            if (p == m.id)
                add("cycle", m.id, "cycle: milestone \"" + m.id + "\" requires itself");
            else if (!milestone_ids.count(p))
                add("dangling_prerequisite", m.id,
                    "dangling prerequisite \"" + p + "\" on milestone \"" + m.id + "\"");
        }
        if (m.assets.empty()) add("no_assets", m.id, "milestone \"" + m.id + "\" has no assets");
        if (m.assessments.empty())
            add("no_assessments", m.id, "milestone \"" + m.id + "\" has no assessments");
        for (const auto& a : m.assets) {
            if (!asset_ids.insert(a.id).second)
                add("duplicate_asset", a.id, "duplicate asset id \"" + a.id + "\"");
            if (a.difficulty < 1 || a.difficulty > 4)
                add("difficulty_range", a.id,
                    "asset \"" + a.id + "\" difficulty " + std::to_string(a.difficulty) +
                        " outside 1..4");
        }
        for (const auto& a : m.assessments) {
            if (!assessment_ids.insert(a.id).second)
                add("duplicate_assessment", a.id, "duplicate assessment id \"" + a.id + "\"");
            if (!(a.max_score > 0))
                add("max_score_range", a.id, "assessment \"" + a.id + "\" max_score must be > 0");
            if (!(a.pass_threshold_pct > 0 && a.pass_threshold_pct <= 100))
                add("pass_threshold_range", a.id,
                    "assessment \"" + a.id + "\" pass_threshold_pct must be in (0,100]");
        }
    }

    // Self-loops are already reported above; look for longer cycles.
    Curriculum without_self_loops = c;
    for (auto& m : without_self_loops.milestones) m.prerequisites.erase(m.id);
    const auto order = detail::kahn(without_self_loops);
    if (order.size() < milestone_ids.size()) {
        std::set<std::string> emitted(order.begin(), order.end());
        std::string members;
        for (const auto& id : milestone_ids)
            if (!emitted.count(id)) members += (members.empty() ? "" : ", ") + id;
        add("cycle", members, "cycle in prerequisite graph involving: " + members);
    }

    if (!c.milestones.empty() &&
        std::none_of(c.milestones.begin(), c.milestones.end(),
                     [](const Milestone& m) { return m.prerequisites.empty(); }))
        add("no_entry_point", c.id, "no milestone without prerequisites");

    return report;
}

/// Validates an arbitrary parsed document: shape errors become a single
/// `schema` violation, otherwise the semantic rules apply.
inline ValidationReport validate_document(const json& doc) {
    Curriculum c;
    try {
        c = parse_curriculum(doc);
    } catch (const Error& e) {
        return {{"schema", "$", e.what()}};
    }
    return validate(c);
}

inline std::vector<std::string> topological_order(const Curriculum& c) {
    auto order = detail::kahn(c);
    if (order.size() != c.milestones.size())
        throw Error(ErrorCode::cycle_detected, "prerequisite graph of \"" + c.id + "\" has a cycle");
    return order;
}

// ---------------------------------------------------------------------------
// Compilation

struct MilestoneNodes {
    jtms::NodeId passed;   // assumption, enabled when the student passes
    jtms::NodeId unlocked; // derived, IN when the milestone may be explored

    bool operator==(const MilestoneNodes&) const = default;
};

struct NetworkTemplate {
    Mode mode = Mode::locked;
    jtms::Network network;
    std::map<std::string, MilestoneNodes> nodes;
    std::vector<std::string> milestone_of; // indexed by node id

    bool operator==(const NetworkTemplate&) const = default;
};

inline NetworkTemplate compile_to_jtms(const Curriculum& c, Mode mode) {
    if (auto report = validate(c); !report.empty())
        throw Error(ErrorCode::invalid_curriculum,
                    "curriculum \"" + c.id + "\" is invalid: " + report.front().message);

    NetworkTemplate t;
    t.mode = mode;
    std::vector<const Milestone*> by_id;
    for (const auto& m : c.milestones) by_id.push_back(&m);
    std::sort(by_id.begin(), by_id.end(),
              [](const Milestone* a, const Milestone* b) { return a->id < b->id; });

    for (const auto* m : by_id) {
        MilestoneNodes nodes{t.network.add_node(jtms::NodeKind::assumption),
                             t.network.add_node(jtms::NodeKind::derived)};
        t.nodes.emplace(m->id, nodes);
        t.milestone_of.push_back(m->id);
        t.milestone_of.push_back(m->id);
    }
    for (const auto* m : by_id) {
        std::vector<jtms::NodeId> in_list;
        if (mode == Mode::locked)
            for (const auto& p : m->prerequisites) in_list.push_back(t.nodes.at(p).passed);
        t.network.add_justification(t.nodes.at(m->id).unlocked, std::move(in_list));
    }
    return t;
}

inline NetworkTemplate compile_to_jtms(const Curriculum& c, std::string_view mode) {
    return compile_to_jtms(c, parse_mode(mode));
}

// ---------------------------------------------------------------------------
// Graphviz export

namespace detail {

inline std::string dot_quote(std::string_view s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        if (ch == '\n') {
            out += "\\n";
            continue;
        }
        out += ch;
    }
    return out + "\"";
}

} // namespace detail

/// One filled node per milestone colored by status, one edge per
/// prerequisite pair (prerequisite -> dependent), all in ascending id order.
inline std::string export_dot(const Curriculum& c, const std::map<std::string, Status>& statuses) {
    std::vector<const Milestone*> by_id;
    for (const auto& m : c.milestones) by_id.push_back(&m);
    std::sort(by_id.begin(), by_id.end(),
              [](const Milestone* a, const Milestone* b) { return a->id < b->id; });

    std::ostringstream out;
    out << "digraph " << detail::dot_quote(c.id) << " {\n";
    out << "  node [shape=box, style=filled];\n";
    for (const auto* m : by_id) {
        auto it = statuses.find(m->id);
        if (it == statuses.end())
            throw Error(ErrorCode::missing_status, "no status for milestone \"" + m->id + "\"");
        out << "  " << detail::dot_quote(m->id) << " [label=" << detail::dot_quote(m->title)
            << ", fillcolor=\"" << color_of(it->second) << "\"];\n";
    }
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto* m : by_id)
        for (const auto& p : m->prerequisites) edges.emplace_back(p, m->id);
    std::sort(edges.begin(), edges.end());
    for (const auto& [from, to] : edges)
        out << "  " << detail::dot_quote(from) << " -> " << detail::dot_quote(to) << ";\n";
    out << "}\n";
    return out.str();
}

} // namespace learnpath
