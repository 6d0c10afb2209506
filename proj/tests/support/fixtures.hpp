#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "learnpath/curriculum.hpp"

namespace fixtures {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string source_path(const std::string& rel) {
    return std::string(LEARNPATH_SOURCE_DIR) + "/" + rel;
}

inline learnpath::json sample_document() {
    return learnpath::json::parse(read_file(source_path("data/sample_course.json")));
}

inline learnpath::Curriculum sample_course() {
    return learnpath::parse_curriculum(sample_document());
}

inline learnpath::Milestone milestone(std::string id, std::set<std::string> prerequisites = {}) {
    learnpath::Milestone m;
    m.title = "Milestone " + id;
    m.prerequisites = std::move(prerequisites);
    m.assets.push_back({id + "-core", learnpath::AssetKind::core, 2, "uri:" + id, "core " + id});
    m.assessments.push_back({id + "-test", "test " + id, 100, 50});
    m.id = std::move(id);
    return m;
}

inline learnpath::Curriculum curriculum(std::vector<learnpath::Milestone> milestones,
                                        learnpath::Mode mode = learnpath::Mode::locked) {
    learnpath::Curriculum c;
    c.id = "course";
    c.title = "Course";
    c.mode_default = mode;
    c.milestones = std::move(milestones);
    return c;
}

// Random valid curriculum: prerequisites always point to milestones
// created earlier, ids are shuffled so id order differs from DAG order.
inline learnpath::Curriculum random_dag(std::mt19937& rng, std::size_t max_milestones) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, max_milestones)(rng);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("M" + std::to_string(10 + i));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<learnpath::Milestone> ms;
    std::bernoulli_distribution edge(0.35);
    for (std::size_t i = 0; i < n; ++i) {
        std::set<std::string> prereqs;
        for (std::size_t k = 0; k < i; ++k)
            if (edge(rng)) prereqs.insert(ids[k]);
        auto m = milestone(ids[i], prereqs);
        m.assets.push_back({ids[i] + "-extra", learnpath::AssetKind::support, 1, "u", "support"});
        m.assets.push_back({ids[i] + "-hard", learnpath::AssetKind::challenge, 4, "u", "challenge"});
        ms.push_back(std::move(m));
    }
    return curriculum(std::move(ms));
}

} // namespace fixtures
