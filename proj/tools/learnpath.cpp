// learnpath: operator command line.
//
// Exit codes: 0 success, 1 usage error, 2 validation or domain failure,
// 3 store or I/O failure. Results go to stdout, diagnostics to stderr.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "learnpath/api.hpp"
#include "learnpath/service.hpp"

namespace lp = learnpath;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_domain = 2;
constexpr int exit_store = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code_for(lp::ErrorCode code) {
    switch (code) {
    case lp::ErrorCode::storage_failure:
    case lp::ErrorCode::corrupt_log:
    case lp::ErrorCode::store_locked: return exit_store;
    default: return exit_domain;
    }
}

lp::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw lp::Error(lp::ErrorCode::storage_failure, "cannot read " + path);
    try {
        return lp::json::parse(in);
    } catch (const lp::json::parse_error& e) {
        throw lp::Error(lp::ErrorCode::schema_violation, path + ": " + e.what());
    }
}

void warn(const std::string& message) { std::cerr << "warning: " << message << "\n"; }

std::unique_ptr<lp::Service> open_store(const std::string& store) {
    if (store.empty()) throw UsageError("no store given: pass --store or set JTMS_STORE");
    return std::make_unique<lp::Service>(store, lp::utc_now, warn);
}

std::pair<std::string, int> parse_bind(const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw UsageError("--bind expects host:port, got " + bind);
    try {
        std::size_t used = 0;
        const int port = std::stoi(bind.substr(colon + 1), &used);
        if (used != bind.size() - colon - 1 || port < 0 || port > 65535) throw std::out_of_range("port");
        return {bind.substr(0, colon), port};
    } catch (const std::logic_error&) {
        throw UsageError("bad port in --bind " + bind);
    }
}

int serve(const std::string& store, const std::string& bind, const std::string& token_file,
          const std::string& cors) {
    const auto [host, port] = parse_bind(bind);
    // Block the stop signals before any thread starts so only the waiter
    // below receives them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto tokens = token_file.empty() ? lp::api::TokenTable{} : lp::api::TokenTable::load(token_file);
    if (token_file.empty()) warn("no --tokens file: every mutating route will answer 403");
    auto service = open_store(store);
    lp::api::Server server(*service, std::move(tokens), {cors});

    int bound = port;
    if (port == 0) {
        bound = server.bind_any(host);
    } else if (!server.http().bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound <= 0) {
        std::cerr << "error: cannot bind " << bind << "\n";
        return exit_store;
    }
    std::cout << "listening " << host << ":" << bound << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.run();
    // run() also returns if the listener fails; wake the waiter either way.
    ::kill(::getpid(), SIGTERM);
    waiter.join();
    service->snapshot();
    std::cerr << "stopped\n";
    return 0;
}

void print_recommendations(const lp::json& doc) {
    for (const auto& item : doc["items"]) {
        std::string assets;
        for (const auto& a : item["assets"]) assets += (assets.empty() ? "" : ",") + a.get<std::string>();
        std::cout << item["rank"].get<int>() << "\t" << item["kind"].get<std::string>() << "\t"
                  << item["milestone"].get<std::string>() << "\t" << assets << "\t"
                  << item["rationale"].get<std::string>() << "\n";
    }
}

void print_map(const lp::json& map) {
    for (const auto& m : map["milestones"]) {
        std::cout << m["id"].get<std::string>() << "\t" << m["status"].get<std::string>() << "\t"
                  << m["color"].get<std::string>() << "\t"
                  << (m["mastering_level"].is_null() ? "-" : std::to_string(m["mastering_level"].get<int>()))
                  << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive learning paths over a truth maintenance network"};
    app.require_subcommand(1);

    std::string store;
    auto add_store = [&](CLI::App* cmd) {
        cmd->add_option("--store", store, "Store directory")->envname("JTMS_STORE");
    };

    std::string file;
    auto* validate = app.add_subcommand("validate", "Check a curriculum document");
    validate->add_option("curriculum", file, "Curriculum JSON file")->required();

    std::string bind = "127.0.0.1:8080", token_file, cors = "*";
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
    add_store(serve_cmd);
    serve_cmd->add_option("--bind", bind, "host:port, port 0 picks a free port")->capture_default_str();
    serve_cmd->add_option("--tokens", token_file, "Bearer token file");
    serve_cmd->add_option("--cors-origin", cors, "Access-Control-Allow-Origin value")->capture_default_str();

    std::string student_id, display_name;
    auto* add_student = app.add_subcommand("add-student", "Create a student profile");
    add_store(add_student);
    add_student->add_option("--id", student_id)->required();
    add_student->add_option("--name", display_name);

    auto* reg = app.add_subcommand("register", "Validate and register a curriculum");
    add_store(reg);
    reg->add_option("curriculum", file, "Curriculum JSON file")->required();

    std::string curriculum_id, mode_text;
    auto* set_mode = app.add_subcommand("set-mode", "Change a curriculum's default mode");
    add_store(set_mode);
    set_mode->add_option("--curriculum", curriculum_id)->required();
    set_mode->add_option("--mode", mode_text)->required();

    int k_failures = lp::StrugglePolicy{}.k_failures;
    auto* enroll = app.add_subcommand("enroll", "Enroll a student; prints the enrollment id");
    add_store(enroll);
    enroll->add_option("--student", student_id)->required();
    enroll->add_option("--curriculum", curriculum_id)->required();
    enroll->add_option("--mode", mode_text, "open or locked (default: curriculum default)");
    enroll->add_option("--k-failures", k_failures, "Consecutive failures that count as struggling")
        ->capture_default_str();

    std::string enrollment, milestone, assessment, reason;
    double score = 0;
    auto* attempt = app.add_subcommand("attempt", "Record an assessment attempt; prints the state delta");
    add_store(attempt);
    attempt->add_option("--enrollment", enrollment)->required();
    attempt->add_option("--milestone", milestone)->required();
    attempt->add_option("--assessment", assessment)->required();
    attempt->add_option("--score", score)->required();

    auto* revoke = app.add_subcommand("revoke", "Revoke a pass; prints the state delta");
    add_store(revoke);
    revoke->add_option("--enrollment", enrollment)->required();
    revoke->add_option("--milestone", milestone)->required();
    revoke->add_option("--reason", reason);

    bool as_json = false;
    auto* recommend = app.add_subcommand("recommend", "Print ranked recommendations");
    add_store(recommend);
    recommend->add_option("--enrollment", enrollment)->required();
    recommend->add_flag("--json", as_json, "Print the JSON document instead of lines");

    auto* map = app.add_subcommand("map", "Print milestone status lines");
    add_store(map);
    map->add_option("--enrollment", enrollment)->required();
    map->add_flag("--json", as_json, "Print the JSON document instead of lines");

    std::string output;
    auto* export_dot = app.add_subcommand("export-dot", "Write the enrollment map as Graphviz DOT");
    add_store(export_dot);
    export_dot->add_option("--enrollment", enrollment)->required();
    export_dot->add_option("-o,--output", output, "Output file (default stdout)");

    auto* replay_check = app.add_subcommand("replay-check", "Compare the stored snapshot with a fresh replay");
    add_store(replay_check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    }

    try {
        if (validate->parsed()) {
            const auto doc = read_json(file);
            const auto report = lp::validate_document(doc);
            for (const auto& v : report) std::cerr << v.rule << "\t" << v.subject << "\t" << v.message << "\n";
            if (!report.empty()) return exit_domain;
            std::cout << "valid\t" << doc["id"].get<std::string>() << "\n";
            return 0;
        }
        if (serve_cmd->parsed()) return serve(store, bind, token_file, cors);

        if (reg->parsed()) {
            const auto doc = read_json(file);
            auto service = open_store(store);
            const auto result = service->register_curriculum(doc);
            for (const auto& v : result.report) std::cerr << v.rule << "\t" << v.subject << "\t" << v.message << "\n";
            if (!result.ok()) return exit_domain;
            std::cout << result.curriculum->id << "\n";
            return 0;
        }

        auto service = open_store(store);
        if (add_student->parsed()) {
            std::cout << service->create_student(student_id, display_name.empty() ? student_id : display_name).id
                      << "\n";
        } else if (set_mode->parsed()) {
            service->set_mode(curriculum_id, lp::parse_mode(mode_text));
            std::cout << curriculum_id << "\t" << mode_text << "\n";
        } else if (enroll->parsed()) {
            std::optional<lp::Mode> mode;
            if (!mode_text.empty()) mode = lp::parse_mode(mode_text);
            std::cout << service->enroll(student_id, curriculum_id, mode, {k_failures}) << "\n";
        } else if (attempt->parsed()) {
            std::cout << lp::json(service->record_attempt(enrollment, milestone, assessment, score)).dump() << "\n";
        } else if (revoke->parsed()) {
            std::cout << lp::json(service->revoke(enrollment, milestone, reason)).dump() << "\n";
        } else if (recommend->parsed()) {
            const auto doc = service->recommendations(enrollment);
            if (as_json) std::cout << doc.dump(2) << "\n";
            else print_recommendations(doc);
        } else if (map->parsed()) {
            const auto doc = service->map(enrollment);
            if (as_json) std::cout << doc.dump(2) << "\n";
            else print_map(doc);
        } else if (export_dot->parsed()) {
            const auto dot = service->dot(enrollment);
            if (output.empty()) {
                std::cout << dot;
            } else {
                std::ofstream out(output, std::ios::binary | std::ios::trunc);
                out << dot;
                if (!out.flush()) throw lp::Error(lp::ErrorCode::storage_failure, "cannot write " + output);
            }
        } else if (replay_check->parsed()) {
            const auto check = service->replay_check();
            if (!check.snapshot_present && check.events > 0) {
                std::cerr << "no snapshot to compare against (" << check.events << " events)\n";
                return exit_domain;
            }
            if (!check.equal) {
                std::cerr << "snapshot differs from replay of " << check.events << " events\n";
                return exit_domain;
            }
            std::cout << "ok\t" << check.events << " events\n";
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const lp::Error& e) {
        std::cerr << "error: " << lp::to_string(e.code()) << ": " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_store;
    }
}
