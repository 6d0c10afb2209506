#pragma once

// Justification-based truth maintenance network.
//
// Nodes are labeled IN or OUT. A derived node is IN iff one of its
// justifications is valid (every in-list node IN, every out-list node OUT)
// and that support is grounded in premises and enabled assumptions. The
// network refuses any justification whose out-list edge would sit on a
// dependency cycle, so the grounded labeling is unique and can be
// maintained incrementally by relabeling only the affected cone.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace learnpath::jtms {

template <class Tag>
struct Id {
    std::uint32_t value = 0;
    constexpr auto operator<=>(const Id&) const = default;
};

using NodeId = Id<struct NodeTag>;
using JustificationId = Id<struct JustificationTag>;

enum class NodeKind { premise, assumption, derived, contradiction };
enum class Label { out, in };

constexpr std::string_view to_string(NodeKind kind) {
    switch (kind) {
    case NodeKind::premise: return "premise";
    case NodeKind::assumption: return "assumption";
    case NodeKind::derived: return "derived";
    case NodeKind::contradiction: return "contradiction";
    }
    return "?";
}

constexpr std::string_view to_string(Label label) { return label == Label::in ? "IN" : "OUT"; }

struct BeliefNode {
    NodeId id;
    NodeKind kind = NodeKind::derived;
    Label label = Label::out;
    std::optional<JustificationId> support;
    bool enabled = false;

    bool operator==(const BeliefNode&) const = default;
};

struct Justification {
    JustificationId id;
    NodeId consequent;
    std::vector<NodeId> in_list;  // sorted, unique
    std::vector<NodeId> out_list; // sorted, unique

    bool operator==(const Justification&) const = default;
};

struct LabelChange {
    NodeId node;
    Label before = Label::out;
    Label after = Label::out;

    bool operator==(const LabelChange&) const = default;
};

/// Label changes in ascending node id order.
using LabelDelta = std::vector<LabelChange>;

/// Well-founded support of an IN node. Out-list members of a supporting
/// justification appear as leaves with `absent` set.
struct SupportTree {
    NodeId node;
    NodeKind kind = NodeKind::derived;
    bool absent = false;
    std::optional<JustificationId> via;
    std::vector<SupportTree> antecedents;

    std::size_t depth() const {
        std::size_t deepest = 0;
        for (const auto& child : antecedents) deepest = std::max(deepest, child.depth());
        return deepest + 1;
    }
};

class Network {
public:
    Network() = default;

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t justification_count() const noexcept { return justifications_.size(); }

    NodeId add_node(NodeKind kind) {
        BeliefNode node;
        node.id = NodeId{static_cast<std::uint32_t>(nodes_.size())};
        node.kind = kind;
        node.label = kind == NodeKind::premise ? Label::in : Label::out;
        nodes_.push_back(node);
        dependents_.emplace_back();
        supporters_.emplace_back();
        return node.id;
    }

    JustificationId add_justification(NodeId consequent, std::vector<NodeId> in_list,
                                      std::vector<NodeId> out_list = {}) {
        check_node(consequent);
        for (auto id : in_list) check_node(id);
        for (auto id : out_list) check_node(id);

        const auto kind = nodes_[consequent.value].kind;
        if (kind != NodeKind::derived && kind != NodeKind::contradiction)
            throw Error(ErrorCode::illegal_consequent,
                        "node " + std::to_string(consequent.value) + " is a " +
                            std::string(to_string(kind)) + " and cannot be justified");

        normalize(in_list);
        normalize(out_list);
        auto mentions_consequent = [&](const std::vector<NodeId>& list) {
            return std::binary_search(list.begin(), list.end(), consequent);
        };
        if (mentions_consequent(in_list) || mentions_consequent(out_list))
            throw Error(ErrorCode::overlapping_lists, "justification mentions its own consequent");
        std::vector<NodeId> both;
        std::set_intersection(in_list.begin(), in_list.end(), out_list.begin(), out_list.end(),
                              std::back_inserter(both));
        if (!both.empty())
            throw Error(ErrorCode::overlapping_lists,
                        "node " + std::to_string(both.front().value) +
                            " appears in both in-list and out-list");

        Justification just;
        just.id = JustificationId{static_cast<std::uint32_t>(justifications_.size())};
        just.consequent = consequent;
        just.in_list = std::move(in_list);
        just.out_list = std::move(out_list);
        link(just);
        justifications_.push_back(just);

        if (has_out_edge_in_cycle()) {
            justifications_.pop_back();
            unlink(just);
            throw Error(ErrorCode::non_monotonic_cycle,
                        "justification for node " + std::to_string(consequent.value) +
                            " would put an out-list edge on a dependency cycle");
        }

        relabel_from({consequent}, true);
        return just.id;
    }

    LabelDelta enable_assumption(NodeId id) { return set_enabled(id, true); }
    LabelDelta retract_assumption(NodeId id) { return set_enabled(id, false); }

    Label label_of(NodeId id) const {
        check_node(id);
        return nodes_[id.value].label;
    }

    const BeliefNode& node(NodeId id) const {
        check_node(id);
        return nodes_[id.value];
    }

    const Justification& justification(JustificationId id) const {
        if (id.value >= justifications_.size())
            throw Error(ErrorCode::unknown_node,
                        "unknown justification " + std::to_string(id.value));
        return justifications_[id.value];
    }

    std::span<const BeliefNode> nodes() const noexcept { return nodes_; }
    std::span<const Justification> justifications() const noexcept { return justifications_; }

    /// Justifications that mention `id` in their in- or out-list, ascending.
    std::span<const JustificationId> dependents(NodeId id) const {
        check_node(id);
        return dependents_[id.value];
    }

    /// Reverse index recomputed from the justification table.
    std::vector<std::vector<JustificationId>> rebuild_dependents() const {
        std::vector<std::vector<JustificationId>> index(nodes_.size());
        for (const auto& just : justifications_) {
            for (auto id : just.in_list) index[id.value].push_back(just.id);
            for (auto id : just.out_list) index[id.value].push_back(just.id);
        }
        return index;
    }

    const std::vector<std::vector<JustificationId>>& dependents_index() const noexcept {
        return dependents_;
    }

    std::vector<Label> labels() const {
        std::vector<Label> out;
        out.reserve(nodes_.size());
        for (const auto& node : nodes_) out.push_back(node.label);
        return out;
    }

    bool is_valid(const Justification& just) const {
        return std::all_of(just.in_list.begin(), just.in_list.end(),
                           [&](NodeId id) { return nodes_[id.value].label == Label::in; }) &&
               std::all_of(just.out_list.begin(), just.out_list.end(),
                           [&](NodeId id) { return nodes_[id.value].label == Label::out; });
    }

    SupportTree explain(NodeId id) const {
        check_node(id);
        if (nodes_[id.value].label != Label::in)
            throw Error(ErrorCode::node_is_out, "node " + std::to_string(id.value) + " is OUT");
        return explain_in(id);
    }

    /// Contradiction nodes currently IN, ascending.
    std::vector<NodeId> contradictions() const {
        std::vector<NodeId> out;
        for (const auto& node : nodes_)
            if (node.kind == NodeKind::contradiction && node.label == Label::in)
                out.push_back(node.id);
        return out;
    }

    /// True iff every IN derived node reaches premises or enabled
    /// assumptions through recorded supports without revisiting a node.
    bool is_well_founded() const {
        enum class Mark { unseen, active, grounded };
        std::vector<Mark> mark(nodes_.size(), Mark::unseen);
        std::function<bool(NodeId)> grounded = [&](NodeId id) -> bool {
            auto& m = mark[id.value];
            if (m == Mark::grounded) return true;
            if (m == Mark::active) return false;
            const auto& node = nodes_[id.value];
            if (node.label != Label::in) return false;
            if (node.kind == NodeKind::premise) return (m = Mark::grounded), true;
            if (node.kind == NodeKind::assumption) {
                if (!node.enabled) return false;
                return (m = Mark::grounded), true;
            }
            if (!node.support) return false;
            const auto& just = justifications_[node.support->value];
            if (!is_valid(just) || just.consequent != id) return false;
            m = Mark::active;
            for (auto ante : just.in_list)
                if (!grounded(ante)) return false;
            m = Mark::grounded;
            return true;
        };
        for (const auto& node : nodes_)
            if (node.label == Label::in && !grounded(node.id)) return false;
        return true;
    }

    /// One line per node: `id kind label support`, support `-` when absent.
    std::string dump() const {
        std::ostringstream out;
        for (const auto& node : nodes_) {
            out << node.id.value << ' ' << to_string(node.kind) << ' ' << to_string(node.label)
                << ' ';
            if (node.support)
                out << node.support->value;
            else
                out << '-';
            out << '\n';
        }
        return out.str();
    }

    bool operator==(const Network&) const = default;

private:
    void check_node(NodeId id) const {
        if (id.value >= nodes_.size())
            throw Error(ErrorCode::unknown_node, "unknown node " + std::to_string(id.value));
    }

    static void normalize(std::vector<NodeId>& list) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }

    static void insert_sorted(std::vector<JustificationId>& list, JustificationId id) {
        list.insert(std::upper_bound(list.begin(), list.end(), id), id);
    }

    static void erase_value(std::vector<JustificationId>& list, JustificationId id) {
        list.erase(std::remove(list.begin(), list.end(), id), list.end());
    }

    void link(const Justification& just) {
        for (auto id : just.in_list) insert_sorted(dependents_[id.value], just.id);
        for (auto id : just.out_list) insert_sorted(dependents_[id.value], just.id);
        insert_sorted(supporters_[just.consequent.value], just.id);
    }

    void unlink(const Justification& just) {
        for (auto id : just.in_list) erase_value(dependents_[id.value], just.id);
        for (auto id : just.out_list) erase_value(dependents_[id.value], just.id);
        erase_value(supporters_[just.consequent.value], just.id);
    }

    // Tarjan over an arbitrary vertex subset. `succ(v, fn)` calls fn for
    // every successor of v inside the subset. Components come out sinks
    // first; `component[v]` receives the component index.
    template <class Successors>
    static std::vector<std::vector<std::uint32_t>> strongly_connected(
        std::span<const std::uint32_t> vertices, std::size_t universe, Successors succ,
        std::vector<std::uint32_t>& component) {
        constexpr auto none = static_cast<std::uint32_t>(-1);
        std::vector<std::uint32_t> index(universe, none), low(universe, 0);
        std::vector<bool> on_stack(universe, false);
        component.assign(universe, none);
        std::vector<std::uint32_t> stack;
        std::vector<std::vector<std::uint32_t>> components;
        std::uint32_t counter = 0;

        struct Frame {
            std::uint32_t vertex;
            std::vector<std::uint32_t> next;
            std::size_t pos = 0;
        };

        for (auto root : vertices) {
            if (index[root] != none) continue;
            std::vector<Frame> frames;
            auto open = [&](std::uint32_t v) {
                index[v] = low[v] = counter++;
                stack.push_back(v);
                on_stack[v] = true;
                Frame frame{v, {}, 0};
                succ(v, [&](std::uint32_t w) { frame.next.push_back(w); });
                frames.push_back(std::move(frame));
            };
            open(root);
            while (!frames.empty()) {
                auto& frame = frames.back();
                if (frame.pos < frame.next.size()) {
                    auto w = frame.next[frame.pos++];
                    if (index[w] == none)
                        open(w);
                    else if (on_stack[w])
                        low[frame.vertex] = std::min(low[frame.vertex], index[w]);
                    continue;
                }
                auto v = frame.vertex;
                frames.pop_back();
                if (!frames.empty())
                    low[frames.back().vertex] = std::min(low[frames.back().vertex], low[v]);
                if (low[v] == index[v]) {
                    std::vector<std::uint32_t> members;
                    std::uint32_t w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        component[w] = static_cast<std::uint32_t>(components.size());
                        members.push_back(w);
                    } while (w != v);
                    std::sort(members.begin(), members.end());
                    components.push_back(std::move(members));
                }
            }
        }
        return components;
    }

    bool has_out_edge_in_cycle() const {
        std::vector<std::uint32_t> all(nodes_.size());
        for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
        std::vector<std::uint32_t> component;
        strongly_connected(
            all, nodes_.size(),
            [&](std::uint32_t v, auto&& emit) {
                for (auto j : dependents_[v]) emit(justifications_[j.value].consequent.value);
            },
            component);
        for (const auto& just : justifications_)
            for (auto id : just.out_list)
                if (component[id.value] == component[just.consequent.value]) return true;
        return false;
    }

    LabelDelta set_enabled(NodeId id, bool enabled) {
        check_node(id);
        auto& node = nodes_[id.value];
        if (node.kind != NodeKind::assumption)
            throw Error(ErrorCode::not_an_assumption,
                        "node " + std::to_string(id.value) + " is not an assumption");
        if (node.enabled == enabled) return {};
        node.enabled = enabled;
        node.label = enabled ? Label::in : Label::out;
        LabelDelta delta = relabel_from({id}, false);
        LabelChange own{id, enabled ? Label::out : Label::in, node.label};
        delta.insert(std::lower_bound(delta.begin(), delta.end(), own,
                                      [](const LabelChange& a, const LabelChange& b) {
                                          return a.node < b.node;
                                      }),
                     own);
        return delta;
    }

    // Relabels every derived/contradiction node downstream of `seeds`
    // (including the seeds themselves when `include_seeds`), component by
    // component in dependency order, and reports the label changes.
    LabelDelta relabel_from(std::vector<NodeId> seeds, bool include_seeds) {
        std::vector<bool> in_cone(nodes_.size(), false);
        std::vector<std::uint32_t> cone;
        std::vector<std::uint32_t> frontier;
        auto visit = [&](std::uint32_t v) {
            if (in_cone[v]) return;
            in_cone[v] = true;
            frontier.push_back(v);
            const auto kind = nodes_[v].kind;
            if (kind == NodeKind::derived || kind == NodeKind::contradiction) cone.push_back(v);
        };
        for (auto seed : seeds) {
            if (include_seeds) {
                visit(seed.value);
            } else {
                in_cone[seed.value] = true;
                frontier.push_back(seed.value);
            }
        }
        while (!frontier.empty()) {
            auto v = frontier.back();
            frontier.pop_back();
            for (auto j : dependents_[v]) visit(justifications_[j.value].consequent.value);
        }
        std::sort(cone.begin(), cone.end());

        std::vector<Label> before(cone.size());
        for (std::size_t i = 0; i < cone.size(); ++i) before[i] = nodes_[cone[i]].label;

        std::vector<bool> recompute(nodes_.size(), false);
        for (auto v : cone) recompute[v] = true;

        std::vector<std::uint32_t> component;
        auto components = strongly_connected(
            cone, nodes_.size(),
            [&](std::uint32_t v, auto&& emit) {
                for (auto j : dependents_[v]) {
                    auto c = justifications_[j.value].consequent.value;
                    if (recompute[c]) emit(c);
                }
            },
            component);

        // Tarjan yields sinks first; walk sources first.
        for (auto it = components.rbegin(); it != components.rend(); ++it) close_component(*it);

        LabelDelta delta;
        for (std::size_t i = 0; i < cone.size(); ++i)
            if (nodes_[cone[i]].label != before[i])
                delta.push_back({NodeId{cone[i]}, before[i], nodes_[cone[i]].label});
        return delta;
    }

    // Monotone closure inside one component. Out-list members are never in
    // the same component, so their labels are already final here.
    void close_component(const std::vector<std::uint32_t>& members) {
        for (auto v : members) {
            nodes_[v].label = Label::out;
            nodes_[v].support.reset();
        }
        for (;;) {
            std::vector<std::pair<std::uint32_t, JustificationId>> fresh;
            for (auto v : members) {
                if (nodes_[v].label == Label::in) continue;
                for (auto j : supporters_[v]) {
                    if (is_valid(justifications_[j.value])) {
                        fresh.emplace_back(v, j);
                        break;
                    }
                }
            }
            if (fresh.empty()) break;
            for (auto [v, j] : fresh) {
                nodes_[v].label = Label::in;
                nodes_[v].support = j;
            }
        }
    }

    SupportTree explain_in(NodeId id) const {
        const auto& node = nodes_[id.value];
        SupportTree tree;
        tree.node = id;
        tree.kind = node.kind;
        if (!node.support) return tree;
        tree.via = node.support;
        const auto& just = justifications_[node.support->value];
        for (auto ante : just.in_list) tree.antecedents.push_back(explain_in(ante));
        for (auto absent : just.out_list) {
            SupportTree leaf;
            leaf.node = absent;
            leaf.kind = nodes_[absent.value].kind;
            leaf.absent = true;
            tree.antecedents.push_back(std::move(leaf));
        }
        return tree;
    }

    std::vector<BeliefNode> nodes_;
    std::vector<Justification> justifications_;
    std::vector<std::vector<JustificationId>> dependents_;
    std::vector<std::vector<JustificationId>> supporters_;
};

} // namespace learnpath::jtms
