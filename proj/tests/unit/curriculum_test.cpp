#include <random>

#include <gtest/gtest.h>

#include "learnpath/curriculum.hpp"
#include "support/fixtures.hpp"

using namespace learnpath;
using fixtures::milestone;

namespace {

bool has_rule(const ValidationReport& report, const std::string& rule) {
    return std::any_of(report.begin(), report.end(), [&](const Violation& v) { return v.rule == rule; });
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::storage_failure;
}

} // namespace

TEST(CurriculumValidate, SampleCourseIsValid) {
    EXPECT_TRUE(validate(fixtures::sample_course()).empty());
    EXPECT_TRUE(validate_document(fixtures::sample_document()).empty());
}

TEST(CurriculumValidate, ChainIsValid) {
    auto c = fixtures::curriculum({milestone("RA"), milestone("SQL", {"RA"}), milestone("ODB", {"SQL"})});
    EXPECT_TRUE(validate(c).empty());
}

TEST(CurriculumValidate, DanglingPrerequisite) {
    auto report = validate(fixtures::curriculum({milestone("A"), milestone("B", {"X"})}));
    ASSERT_EQ(report.size(), 1u);
    EXPECT_EQ(report[0].rule, "dangling_prerequisite");
    EXPECT_NE(report[0].message.find("dangling prerequisite"), std::string::npos);
}

TEST(CurriculumValidate, MutualPrerequisitesFormCycle) {
    auto report = validate(fixtures::curriculum({milestone("E"), milestone("A", {"B"}), milestone("B", {"A"})}));
    ASSERT_TRUE(has_rule(report, "cycle"));
    EXPECT_NE(report[0].message.find("cycle"), std::string::npos);
    EXPECT_EQ(report[0].subject, "A, B");
}

TEST(CurriculumValidate, SelfPrerequisite) {
    EXPECT_TRUE(has_rule(validate(fixtures::curriculum({milestone("E"), milestone("A", {"A"})})), "cycle"));
}

TEST(CurriculumValidate, FieldRules) {
    auto bad = milestone("A");
    bad.assets[0].difficulty = 5;
    bad.assessments[0].pass_threshold_pct = 0;
    bad.assessments.push_back({"A-test2", "t", 0, 100});
    auto empty = milestone("B");
    empty.assets.clear();
    empty.assessments.clear();
    auto report = validate(fixtures::curriculum({bad, empty, milestone("A")}));
    EXPECT_TRUE(has_rule(report, "difficulty_range"));
    EXPECT_TRUE(has_rule(report, "pass_threshold_range"));
    EXPECT_TRUE(has_rule(report, "max_score_range"));
    EXPECT_TRUE(has_rule(report, "no_assets"));
    EXPECT_TRUE(has_rule(report, "no_assessments"));
    EXPECT_TRUE(has_rule(report, "duplicate_milestone"));
    EXPECT_TRUE(has_rule(report, "duplicate_asset"));
    EXPECT_TRUE(has_rule(report, "duplicate_assessment"));
}

TEST(CurriculumValidate, ThresholdOfHundredIsAllowed) {
    auto m = milestone("A");
    m.assessments[0].pass_threshold_pct = 100;
    EXPECT_TRUE(validate(fixtures::curriculum({m})).empty());
}

TEST(CurriculumValidate, EmptyCurriculumAccepted) {
    EXPECT_TRUE(validate(fixtures::curriculum({})).empty());
}

TEST(CurriculumValidate, ShapeErrorsBecomeSchemaViolations) {
    auto doc = fixtures::sample_document();
    doc.erase("schema");
    auto report = validate_document(doc);
    ASSERT_EQ(report.size(), 1u);
    EXPECT_EQ(report[0].rule, "schema");

    doc = fixtures::sample_document();
    doc["milestones"][0]["assets"][0]["difficulty"] = "hard";
    EXPECT_EQ(validate_document(doc).at(0).rule, "schema");

    doc = fixtures::sample_document();
    doc["mode_default"] = "sideways";
    EXPECT_EQ(validate_document(doc).at(0).rule, "schema");

    EXPECT_EQ(validate_document(json::array()).at(0).rule, "schema");
}

TEST(CurriculumParse, DefaultThreshold) {
    auto doc = fixtures::sample_document();
    doc["milestones"][0]["assessments"][0].erase("pass_threshold_pct");
    EXPECT_EQ(parse_curriculum(doc).milestones[0].assessments[0].pass_threshold_pct, 50);
}

TEST(CurriculumTopological, TieBreakByAscendingId) {
    auto c = fixtures::curriculum({milestone("ODB", {"RA", "SQL"}), milestone("SQL"), milestone("RA")});
    EXPECT_EQ(topological_order(c), (std::vector<std::string>{"RA", "SQL", "ODB"}));
    EXPECT_EQ(topological_order(fixtures::curriculum({milestone("Z")})), std::vector<std::string>{"Z"});
    EXPECT_EQ(topological_order(fixtures::curriculum({milestone("c"), milestone("a"), milestone("b")})),
              (std::vector<std::string>{"a", "b", "c"}));
}

TEST(CurriculumTopological, PrerequisitesPrecedeDependents) {
    // A ready milestone with a large id must not block smaller ids that
    // become ready later.
    auto c = fixtures::curriculum({milestone("Z"), milestone("B", {"Z"}), milestone("Y")});
    EXPECT_EQ(topological_order(c), (std::vector<std::string>{"Y", "Z", "B"}));
}

TEST(CurriculumTopological, CycleDetected) {
    auto c = fixtures::curriculum({milestone("A", {"B"}), milestone("B", {"A"})});
    EXPECT_EQ(code_of([&] { topological_order(c); }), ErrorCode::cycle_detected);
}

TEST(CurriculumCompile, LockedMode) {
    auto c = fixtures::sample_course();
    auto t = compile_to_jtms(c, Mode::locked);
    EXPECT_EQ(t.network.label_of(t.nodes.at("RA").unlocked), jtms::Label::in);
    EXPECT_EQ(t.network.label_of(t.nodes.at("SQL").unlocked), jtms::Label::in);
    EXPECT_EQ(t.network.label_of(t.nodes.at("ODB").unlocked), jtms::Label::out);
    for (const auto& [id, nodes] : t.nodes) {
        EXPECT_EQ(t.network.node(nodes.passed).kind, jtms::NodeKind::assumption);
        EXPECT_EQ(t.milestone_of[nodes.passed.value], id);
        EXPECT_EQ(t.milestone_of[nodes.unlocked.value], id);
    }
    // One AND-justification per milestone.
    EXPECT_EQ(t.network.justification_count(), 3u);
    const auto& j = t.network.justification(*t.network.node(t.nodes.at("RA").unlocked).support);
    EXPECT_TRUE(j.in_list.empty());
}

TEST(CurriculumCompile, OpenModeUnlocksEverything) {
    auto t = compile_to_jtms(fixtures::sample_course(), "open");
    for (const auto& [id, nodes] : t.nodes) {
        EXPECT_EQ(t.network.label_of(nodes.unlocked), jtms::Label::in) << id;
        EXPECT_EQ(t.network.label_of(nodes.passed), jtms::Label::out) << id;
    }
}

TEST(CurriculumCompile, Errors) {
    EXPECT_EQ(code_of([] { compile_to_jtms(fixtures::sample_course(), "textbook"); }),
              ErrorCode::invalid_mode);
    auto bad = fixtures::curriculum({milestone("A", {"B"}), milestone("B", {"A"})});
    EXPECT_EQ(code_of([&] { compile_to_jtms(bad, Mode::open); }), ErrorCode::invalid_curriculum);
}

// Locked compilation: unlocked(m) is IN exactly when every prerequisite's
// passed node is enabled; checked for every subset of prerequisites.
TEST(CurriculumProperty, UnlockRequiresAllPrerequisites) {
    std::mt19937 rng(21);
    for (int round = 0; round < 60; ++round) {
        auto c = fixtures::random_dag(rng, 10);
        const auto t = compile_to_jtms(c, Mode::locked);
        for (const auto& m : c.milestones) {
            std::vector<std::string> pre(m.prerequisites.begin(), m.prerequisites.end());
            for (std::uint32_t mask = 0; mask < (1U << pre.size()); ++mask) {
                auto net = t.network;
                for (std::size_t b = 0; b < pre.size(); ++b)
                    if (mask >> b & 1U) net.enable_assumption(t.nodes.at(pre[b]).passed);
                const bool all = mask == (1U << pre.size()) - 1;
                ASSERT_EQ(net.label_of(t.nodes.at(m.id).unlocked) == jtms::Label::in, all);
            }
        }
    }
}

TEST(CurriculumProperty, OpenModeNeedsNoAssumptions) {
    std::mt19937 rng(22);
    for (int round = 0; round < 100; ++round) {
        auto c = fixtures::random_dag(rng, 10);
        const auto t = compile_to_jtms(c, Mode::open);
        for (const auto& [id, nodes] : t.nodes)
            ASSERT_EQ(t.network.label_of(nodes.unlocked), jtms::Label::in);
    }
}

TEST(CurriculumProperty, ValidationStableUnderRoundTrip) {
    std::mt19937 rng(23);
    for (int round = 0; round < 200; ++round) {
        auto c = fixtures::random_dag(rng, 8);
        // Break some of them.
        std::uniform_int_distribution<int> damage(0, 4);
        auto& m = c.milestones[std::uniform_int_distribution<std::size_t>(0, c.milestones.size() - 1)(rng)];
        switch (damage(rng)) {
        case 0: m.prerequisites.insert("missing"); break;
        case 1: m.prerequisites.insert(c.milestones.back().id); break;
        case 2: m.assets.clear(); break;
        case 3: m.assessments[0].pass_threshold_pct = 120; break;
        default: break;
        }
        const auto direct = validate(c);
        const auto reparsed = validate_document(json::parse(json(c).dump()));
        ASSERT_EQ(direct, reparsed);
        ASSERT_EQ(parse_curriculum(json(c)), c);
    }
}

TEST(CurriculumDot, GoldenMixedStatuses) {
    auto dot = export_dot(fixtures::sample_course(), {{"RA", Status::passed},
                                                      {"SQL", Status::exploring},
                                                      {"ODB", Status::locked}});
    EXPECT_EQ(dot, fixtures::read_file(fixtures::source_path("tests/golden/sample_mixed.dot")));
}

TEST(CurriculumDot, AllLockedAreRed) {
    auto dot = export_dot(fixtures::sample_course(), {{"RA", Status::locked},
                                                      {"SQL", Status::locked},
                                                      {"ODB", Status::locked}});
    std::size_t reds = 0;
    for (auto pos = dot.find("fillcolor=\"red\""); pos != std::string::npos;
         pos = dot.find("fillcolor=\"red\"", pos + 1))
        ++reds;
    EXPECT_EQ(reds, 3u);
    EXPECT_EQ(dot.find("green"), std::string::npos);
}

TEST(CurriculumDot, EmptyCurriculumHasOnlyFrame) {
    EXPECT_EQ(export_dot(fixtures::curriculum({}), {}),
              "digraph \"course\" {\n  node [shape=box, style=filled];\n}\n");
}

TEST(CurriculumDot, MissingStatus) {
    EXPECT_EQ(code_of([] { export_dot(fixtures::sample_course(), {{"RA", Status::passed}}); }),
              ErrorCode::missing_status);
}

TEST(CurriculumDot, EscapesQuotes) {
    auto m = milestone("A");
    m.title = "say \"hi\"";
    auto dot = export_dot(fixtures::curriculum({m}), {{"A", Status::exploring}});
    EXPECT_NE(dot.find("label=\"say \\\"hi\\\"\""), std::string::npos);
}
