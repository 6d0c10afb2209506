#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "learnpath/jtms.hpp"
#include "support/jtms_oracle.hpp"
#include "support/random_networks.hpp"

using namespace learnpath::jtms;
using learnpath::Error;
using learnpath::ErrorCode;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::storage_failure;
}

// Chain A -> D1 -> D2 where each Di is justified by its predecessor.
struct Chain {
    Network net;
    NodeId a, d1, d2;
    Chain() {
        a = net.add_node(NodeKind::assumption);
        d1 = net.add_node(NodeKind::derived);
        d2 = net.add_node(NodeKind::derived);
        net.add_justification(d1, {a});
        net.add_justification(d2, {d1});
    }
};

} // namespace

TEST(JtmsCreate, EmptyNetwork) {
    Network net;
    EXPECT_EQ(net.node_count(), 0u);
    EXPECT_EQ(net.justification_count(), 0u);
    EXPECT_EQ(code_of([&] { (void)net.label_of(NodeId{0}); }), ErrorCode::unknown_node);
    EXPECT_TRUE(net.is_well_founded());
    EXPECT_TRUE(net.contradictions().empty());
}

TEST(JtmsAddNode, InitialLabels) {
    Network net;
    EXPECT_EQ(net.label_of(net.add_node(NodeKind::premise)), Label::in);
    auto a = net.add_node(NodeKind::assumption);
    EXPECT_EQ(net.label_of(a), Label::out);
    EXPECT_FALSE(net.node(a).enabled);
    EXPECT_EQ(net.label_of(net.add_node(NodeKind::derived)), Label::out);
    EXPECT_EQ(net.label_of(net.add_node(NodeKind::contradiction)), Label::out);
}

TEST(JtmsAddJustification, PremiseSupportsDerived) {
    Network net;
    auto p = net.add_node(NodeKind::premise);
    auto d = net.add_node(NodeKind::derived);
    net.add_justification(d, {p});
    EXPECT_EQ(net.label_of(d), Label::in);

    oracle::Net model{{oracle::Kind::premise, oracle::Kind::derived}, {false, false}, {{1, {0}, {}}}};
    EXPECT_EQ(fuzz::to_oracle_labels(net), oracle::labels(model));
}

TEST(JtmsAddJustification, DisabledAssumptionLeavesDerivedOut) {
    Network net;
    auto a = net.add_node(NodeKind::assumption);
    auto d = net.add_node(NodeKind::derived);
    net.add_justification(d, {a});
    EXPECT_EQ(net.label_of(d), Label::out);
    EXPECT_FALSE(net.node(d).support.has_value());
}

TEST(JtmsAddJustification, EmptyListsAreUnconditional) {
    Network net;
    auto d = net.add_node(NodeKind::derived);
    auto j = net.add_justification(d, {});
    EXPECT_EQ(net.label_of(d), Label::in);
    EXPECT_EQ(net.node(d).support, j);
}

TEST(JtmsAddJustification, Errors) {
    Network net;
    auto p = net.add_node(NodeKind::premise);
    auto a = net.add_node(NodeKind::assumption);
    auto d = net.add_node(NodeKind::derived);
    EXPECT_EQ(code_of([&] { net.add_justification(NodeId{9}, {}); }), ErrorCode::unknown_node);
    EXPECT_EQ(code_of([&] { net.add_justification(d, {NodeId{9}}); }), ErrorCode::unknown_node);
    EXPECT_EQ(code_of([&] { net.add_justification(p, {}); }), ErrorCode::illegal_consequent);
    EXPECT_EQ(code_of([&] { net.add_justification(a, {}); }), ErrorCode::illegal_consequent);
    EXPECT_EQ(code_of([&] { net.add_justification(d, {a}, {a}); }), ErrorCode::overlapping_lists);
    EXPECT_EQ(code_of([&] { net.add_justification(d, {d}); }), ErrorCode::overlapping_lists);
    EXPECT_EQ(net.justification_count(), 0u);
}

TEST(JtmsAddJustification, RejectsOutEdgeOnCycle) {
    Network net;
    auto x = net.add_node(NodeKind::derived);
    auto y = net.add_node(NodeKind::derived);
    net.add_justification(y, {x});
    const Network before = net;
    EXPECT_EQ(code_of([&] { net.add_justification(x, {}, {y}); }),
              ErrorCode::non_monotonic_cycle);
    EXPECT_EQ(net, before);
    EXPECT_EQ(net.rebuild_dependents(), net.dependents_index());
}

TEST(JtmsAddJustification, RejectsInEdgeClosingCycleThroughOldOutEdge) {
    Network net;
    auto x = net.add_node(NodeKind::derived);
    auto y = net.add_node(NodeKind::derived);
    net.add_justification(y, {}, {x});
    EXPECT_EQ(code_of([&] { net.add_justification(x, {y}); }), ErrorCode::non_monotonic_cycle);
}

TEST(JtmsAddJustification, MonotonicCycleAllowedButUnfounded) {
    Network net;
    auto x = net.add_node(NodeKind::derived);
    auto y = net.add_node(NodeKind::derived);
    net.add_justification(x, {y});
    net.add_justification(y, {x});
    EXPECT_EQ(net.label_of(x), Label::out);
    EXPECT_EQ(net.label_of(y), Label::out);
}

TEST(JtmsEnable, ChainPropagates) {
    Chain c;
    auto delta = c.net.enable_assumption(c.a);
    LabelDelta expected{{c.a, Label::out, Label::in},
                        {c.d1, Label::out, Label::in},
                        {c.d2, Label::out, Label::in}};
    EXPECT_EQ(delta, expected);
    EXPECT_TRUE(c.net.enable_assumption(c.a).empty());
}

TEST(JtmsEnable, OutListDefeatsConsequent) {
    Network net;
    auto a = net.add_node(NodeKind::assumption);
    auto d = net.add_node(NodeKind::derived);
    net.add_justification(d, {}, {a});
    EXPECT_EQ(net.label_of(d), Label::in);
    auto delta = net.enable_assumption(a);
    EXPECT_NE(std::find(delta.begin(), delta.end(), LabelChange{d, Label::in, Label::out}),
              delta.end());
}

TEST(JtmsEnable, Errors) {
    Network net;
    auto p = net.add_node(NodeKind::premise);
    EXPECT_EQ(code_of([&] { net.enable_assumption(p); }), ErrorCode::not_an_assumption);
    EXPECT_EQ(code_of([&] { net.retract_assumption(NodeId{4}); }), ErrorCode::unknown_node);
}

TEST(JtmsRetract, RoundTripRestoresInitialState) {
    Chain c;
    const Network initial = c.net;
    c.net.enable_assumption(c.a);
    c.net.retract_assumption(c.a);
    EXPECT_EQ(c.net, initial);
    EXPECT_TRUE(c.net.retract_assumption(c.a).empty());
}

TEST(JtmsRetract, DiamondFallsTogether) {
    Network net;
    auto a = net.add_node(NodeKind::assumption);
    auto d1 = net.add_node(NodeKind::derived);
    auto d2 = net.add_node(NodeKind::derived);
    auto d3 = net.add_node(NodeKind::derived);
    net.add_justification(d1, {a});
    net.add_justification(d2, {a});
    net.add_justification(d3, {d1, d2});
    net.enable_assumption(a);
    ASSERT_EQ(net.label_of(d3), Label::in);
    net.retract_assumption(a);
    for (auto d : {d1, d2, d3}) EXPECT_EQ(net.label_of(d), Label::out);
}

TEST(JtmsLabel, SupportCycleWithoutExternalSupportIsOut) {
    Network net;
    auto a = net.add_node(NodeKind::assumption);
    auto x = net.add_node(NodeKind::derived);
    auto y = net.add_node(NodeKind::derived);
    net.add_justification(x, {y});
    net.add_justification(y, {x});
    net.add_justification(x, {a});
    net.enable_assumption(a);
    EXPECT_EQ(net.label_of(x), Label::in);
    EXPECT_EQ(net.label_of(y), Label::in);
    // Losing the external support must not leave the loop holding itself up.
    net.retract_assumption(a);
    EXPECT_EQ(net.label_of(x), Label::out);
    EXPECT_EQ(net.label_of(y), Label::out);

    oracle::Net model{{oracle::Kind::assumption, oracle::Kind::derived, oracle::Kind::derived},
                      {false, false, false},
                      {{1, {2}, {}}, {2, {1}, {}}, {1, {0}, {}}}};
    EXPECT_EQ(fuzz::to_oracle_labels(net), oracle::labels(model));
}

TEST(JtmsExplain, PremiseIsLeaf) {
    Network net;
    auto p = net.add_node(NodeKind::premise);
    auto tree = net.explain(p);
    EXPECT_EQ(tree.depth(), 1u);
    EXPECT_FALSE(tree.via.has_value());
}

TEST(JtmsExplain, DepthTwoTree) {
    Network net;
    auto p = net.add_node(NodeKind::premise);
    auto d = net.add_node(NodeKind::derived);
    auto j = net.add_justification(d, {p});
    auto tree = net.explain(d);
    EXPECT_EQ(tree.depth(), 2u);
    EXPECT_EQ(tree.via, j);
    ASSERT_EQ(tree.antecedents.size(), 1u);
    EXPECT_EQ(tree.antecedents[0].node, p);
}

TEST(JtmsExplain, UsesLowestValidJustification) {
    Network net;
    auto p = net.add_node(NodeKind::premise);
    auto q = net.add_node(NodeKind::premise);
    auto a = net.add_node(NodeKind::assumption);
    auto d = net.add_node(NodeKind::derived);
    auto j0 = net.add_justification(d, {a});
    auto j1 = net.add_justification(d, {q}, {a});
    auto j2 = net.add_justification(d, {p});
    EXPECT_EQ(net.explain(d).via, j1);
    net.enable_assumption(a);
    EXPECT_EQ(net.explain(d).via, j0);
    net.retract_assumption(a);
    EXPECT_EQ(net.explain(d).via, j1);
    auto tree = net.explain(d);
    ASSERT_EQ(tree.antecedents.size(), 2u);
    EXPECT_EQ(tree.antecedents[1].node, a);
    EXPECT_TRUE(tree.antecedents[1].absent);
    (void)j2;
}

TEST(JtmsExplain, OutNodeRejected) {
    Network net;
    auto d = net.add_node(NodeKind::derived);
    EXPECT_EQ(code_of([&] { net.explain(d); }), ErrorCode::node_is_out);
    EXPECT_EQ(code_of([&] { net.explain(NodeId{3}); }), ErrorCode::unknown_node);
}

TEST(JtmsContradictions, DetectedAndCleared) {
    Network net;
    EXPECT_TRUE(net.contradictions().empty());
    auto p = net.add_node(NodeKind::premise);
    auto a = net.add_node(NodeKind::assumption);
    auto c1 = net.add_node(NodeKind::contradiction);
    auto c2 = net.add_node(NodeKind::contradiction);
    net.add_justification(c1, {p});
    net.add_justification(c2, {a});
    EXPECT_EQ(net.contradictions(), std::vector<NodeId>{c1});
    net.enable_assumption(a);
    EXPECT_EQ(net.contradictions(), (std::vector<NodeId>{c1, c2}));
    net.retract_assumption(a);
    EXPECT_EQ(net.contradictions(), std::vector<NodeId>{c1});
}

TEST(JtmsDump, OneLinePerNode) {
    Network net;
    auto p = net.add_node(NodeKind::premise);
    auto a = net.add_node(NodeKind::assumption);
    auto d = net.add_node(NodeKind::derived);
    net.add_justification(d, {p});
    (void)a;
    EXPECT_EQ(net.dump(), "0 premise IN -\n1 assumption OUT -\n2 derived IN 0\n");
}

// The alternating-fixpoint oracle must agree with exhaustive search for
// stable labelings; otherwise it is not a trustworthy reference.
TEST(JtmsOracle, AgreesWithStableEnumeration) {
    std::mt19937 rng(7);
    for (int round = 0; round < 300; ++round) {
        auto m = fuzz::random_network(rng, 10, 16);
        for (auto a : m.assumptions)
            if (std::bernoulli_distribution(0.5)(rng)) m.model.enabled[a] = true;
        auto wf = oracle::well_founded(m.model);
        ASSERT_TRUE(wf.total());
        auto stable = oracle::stable_labelings(m.model);
        ASSERT_EQ(stable.size(), 1u);
        EXPECT_EQ(stable.front(), wf.certainly_in);
    }
}

TEST(JtmsProperty, IncrementalMatchesOracle) {
    std::mt19937 rng(11);
    for (int round = 0; round < 400; ++round) {
        auto m = fuzz::random_network(rng);
        ASSERT_EQ(fuzz::to_oracle_labels(m.network), oracle::labels(m.model));
        for (int step = 0; step < 15 && !m.assumptions.empty(); ++step) {
            if (std::bernoulli_distribution(0.2)(rng)) {
                fuzz::try_add_random_justification(m, rng);
                ASSERT_EQ(fuzz::to_oracle_labels(m.network), oracle::labels(m.model));
                continue;
            }
            auto pick = m.assumptions[std::uniform_int_distribution<std::size_t>(
                0, m.assumptions.size() - 1)(rng)];
            bool enable = std::bernoulli_distribution(0.6)(rng);
            auto before = m.network.labels();
            auto delta = enable ? m.network.enable_assumption(NodeId{pick})
                                : m.network.retract_assumption(NodeId{pick});
            m.model.enabled[pick] = enable;
            ASSERT_EQ(fuzz::to_oracle_labels(m.network), oracle::labels(m.model));
            ASSERT_TRUE(m.network.is_well_founded());
            ASSERT_EQ(m.network.rebuild_dependents(), m.network.dependents_index());
            for (const auto& change : delta) {
                ASSERT_EQ(before[change.node.value], change.before);
                before[change.node.value] = change.after;
            }
            ASSERT_EQ(before, m.network.labels());
            ASSERT_TRUE(std::is_sorted(delta.begin(), delta.end(),
                                       [](auto& x, auto& y) { return x.node < y.node; }));
        }
    }
}

TEST(JtmsProperty, IdempotentEnableAndRetract) {
    std::mt19937 rng(5);
    for (int round = 0; round < 200; ++round) {
        auto m = fuzz::random_network(rng);
        for (auto a : m.assumptions) {
            m.network.enable_assumption(NodeId{a});
            const Network once = m.network;
            EXPECT_TRUE(m.network.enable_assumption(NodeId{a}).empty());
            EXPECT_EQ(m.network, once);
            m.network.retract_assumption(NodeId{a});
            const Network retracted = m.network;
            m.network.retract_assumption(NodeId{a});
            EXPECT_EQ(m.network, retracted);
        }
    }
}

TEST(JtmsProperty, EnableOrderIndependent) {
    std::mt19937 rng(3);
    for (int round = 0; round < 200; ++round) {
        auto m = fuzz::random_network(rng);
        Network forward = m.network, shuffled = m.network;
        for (auto a : m.assumptions) forward.enable_assumption(NodeId{a});
        auto order = m.assumptions;
        std::shuffle(order.begin(), order.end(), rng);
        for (auto a : order) shuffled.enable_assumption(NodeId{a});
        EXPECT_EQ(forward, shuffled);
    }
}
