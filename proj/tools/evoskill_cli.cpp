// Operator CLI: ingest catalogs, generate synthetic routing queries, train
// and evaluate the router, run learning rounds, and export reports.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "evoskill/evoskill.hpp"
#include "evoskill/http_transport.hpp"

namespace fs = std::filesystem;
using namespace evoskill;

namespace {

std::string default_config_path() {
    if (const char* env = std::getenv("EVOSKILL_CONFIG")) return env;
    if (const char* home = std::getenv("HOME"))
        return std::string(home) + "/memento_s/config.json";
    return "config.json";
}

struct Runtime {
    GatewayConfig config;
    std::unique_ptr<ChatKernel> chat;
    std::unique_ptr<Embedder> embedder;
};

// base_url "scripted://<rules.json>" selects the deterministic offline kernel;
// anything else goes over HTTP. Embeddings default to the offline hash
// fallback unless the config asks for the HTTP provider.
Runtime build_runtime(const std::string& config_path, bool need_chat) {
    Runtime rt;
    bool have_config = fs::exists(config_path);
    if (have_config) {
        rt.config = load_config(config_path);
        export_env(rt.config);
    } else {
        rt.config.active_profile = "default";
        rt.config.profiles["default"] = {};
    }

    const auto& prof = rt.config.profiles.at(rt.config.active_profile);
    if (prof.base_url.rfind("scripted://", 0) == 0) {
        fs::path rules = prof.base_url.substr(11);
        if (rules.is_relative() && have_config)
            rules = fs::path(config_path).parent_path() / rules;
        rt.chat = std::make_unique<ScriptedKernel>(ScriptedKernel::from_file(rules.string()));
    } else if (!prof.base_url.empty()) {
        rt.chat = std::make_unique<HttpChatKernel>(rt.config,
                                                   std::make_shared<HttplibTransport>());
    }
    if (need_chat && !rt.chat)
        throw std::runtime_error("no chat provider configured (config: " + config_path + ")");

    std::string provider =
        rt.config.raw.is_object()
            ? rt.config.raw.value("embedding", nlohmann::json::object()).value("provider", "offline")
            : "offline";
    if (provider == "http") {
        rt.embedder = std::make_unique<HttpEmbedder>(rt.config,
                                                     std::make_shared<HttplibTransport>());
    } else {
        rt.embedder = std::make_unique<OfflineHashEmbedder>(
            rt.config.offline_embedding.dimension, rt.config.offline_embedding.seed);
    }
    return rt;
}

SkillLibrary load_library_all_atomic(const std::string& dir) {
    SkillLibrary lib = load_library(dir);
    // Skills present before the run are the seed set.
    for (const auto& [id, s] : lib.skills) lib.atomic_ids.insert(id);
    return lib;
}

RoutingPolicy load_policy(const std::string& adapter_path, Eigen::Index dim,
                          double miss_threshold) {
    RoutingPolicy policy;
    if (!adapter_path.empty() && fs::exists(adapter_path))
        policy.adapter = load_adapter(adapter_path);
    else
        policy.adapter = RouterAdapter(dim);
    policy.miss_threshold = miss_threshold;
    return policy;
}

class LockFile {
public:
    explicit LockFile(const fs::path& root) : path_(root / ".lock") {
        fs::create_directories(root);
        if (fs::exists(path_))
            throw std::runtime_error("library is locked by another run: " + path_.string());
        std::ofstream(path_) << "locked\n";
    }
    ~LockFile() {
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    fs::path path_;
};

int cmd_ingest(const std::string& catalog, std::int64_t min_stars, const std::string& out_dir,
               bool no_name_pass) {
    auto res = ingest_catalog(catalog, min_stars);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    auto entries = dedup_catalog(res.entries, !no_name_pass);
    for (const auto& e : entries) {
        SkillRecord s;
        s.id = e.id;
        s.name = e.name;
        s.description = e.description;
        s.spec_text = "# " + e.name + "\n\n" + e.description + "\n";
        if (!e.keywords.empty()) {
            s.spec_text += "\nKeywords:";
            for (const auto& k : e.keywords) s.spec_text += " " + k;
            s.spec_text += "\n";
        }
        save_skill(out_dir, s);
    }
    std::cout << "ingested " << entries.size() << " skills (" << res.entries.size()
              << " kept after stars filter, " << res.skipped << " malformed lines)\n";
    return 0;
}

int cmd_synth(const std::string& skills_dir, int pos, int neg, const std::string& out,
              const std::string& config_path) {
    auto rt = build_runtime(config_path, true);
    auto lib = load_library_all_atomic(skills_dir);
    std::vector<QueryPair> all;
    std::vector<std::string> warnings;
    for (const auto& [id, skill] : lib.skills) {
        auto generated = generate_synthetic_queries(skill, *rt.chat, pos, neg, {});
        auto accepted = judge_filter_queries(generated, skill, *rt.chat, &warnings);
        all.insert(all.end(), accepted.begin(), accepted.end());
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    save_query_pairs(all, out);
    std::cout << "wrote " << all.size() << " query pairs to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& pairs_path, const std::string& skills_dir,
              const std::string& out, const TrainConfig& cfg, const std::string& config_path) {
    auto rt = build_runtime(config_path, false);
    auto pairs = load_query_pairs(pairs_path);
    auto lib = load_library_all_atomic(skills_dir);
    std::map<std::string, std::string> texts;
    for (const auto& [id, s] : lib.skills) texts[id] = s.document();
    TrainLog log;
    auto adapter = train_adapter(pairs, texts, *rt.embedder, cfg, &log);
    for (std::size_t i = 0; i < log.epoch_loss.size(); ++i)
        std::cerr << "epoch " << i << " loss " << log.epoch_loss[i] << "\n";
    save_adapter(adapter, cfg, out);
    std::cout << "adapter written to " << out << "\n";
    return 0;
}

int cmd_route(const std::string& goal, const std::string& skills_dir,
              const std::string& adapter_path, std::size_t top_k, double miss_threshold,
              const std::string& config_path) {
    auto rt = build_runtime(config_path, false);
    auto lib = load_library_all_atomic(skills_dir);
    if (lib.skills.empty()) {
        std::cout << "MISS\n";
        return 0;
    }
    auto policy = load_policy(adapter_path, rt.embedder->embed_one("probe").size(),
                              miss_threshold);
    auto pipeline = RouterPipeline::build(lib, *rt.embedder);
    Vec goal_vec = rt.embedder->embed_one(goal);
    auto candidates = pipeline.route_candidates(policy, goal, goal_vec, top_k);
    auto decision = route(policy, candidates);
    for (const auto& c : candidates) std::cout << c.id << "\t" << c.score << "\n";
    if (!decision) std::cout << "MISS\n";
    return 0;
}

int cmd_run(const std::string& tasks_path, int rounds, const std::string& config_path,
            const std::string& journal_path, const std::string& skills_dir,
            const std::string& adapter_path, const std::string& report_path,
            const std::string& report_format) {
    auto rt = build_runtime(config_path, true);
    LockFile lock{fs::path(skills_dir)};
    auto corpus = load_corpus(tasks_path);

    LoopState state;
    state.library = load_library_all_atomic(skills_dir);
    state.policy = load_policy(adapter_path, rt.embedder->embed_one("probe").size(), 0.15);
    state.kernels = {rt.chat.get(), rt.chat.get(), rt.chat.get()};
    state.embedder = rt.embedder.get();
    state.library_root = skills_dir;
    state.config.persist = true;

    Journal journal(journal_path);
    auto report = run_training(corpus, state, rounds, &journal);
    save_tips(state.tips, journal_path + ".tips");
    if (!report_path.empty()) export_report(report, report_path, report_format);
    for (const auto& row : report.rows)
        std::cout << "round " << row.round << " first=" << row.first_accuracy
                  << " final=" << row.final_accuracy << " library=" << row.library_size << "\n";
    return 0;
}

int cmd_eval(const std::string& tasks_path, const std::string& mode,
             const std::string& skills_dir, const std::string& adapter_path,
             const std::string& config_path) {
    auto rt = build_runtime(config_path, true);
    auto corpus = load_corpus(tasks_path);

    LoopState state;
    state.library = load_library_all_atomic(skills_dir);
    state.policy = load_policy(adapter_path, rt.embedder->embed_one("probe").size(), 0.15);
    state.kernels = {rt.chat.get(), rt.chat.get(), rt.chat.get()};
    state.embedder = rt.embedder.get();

    auto res = run_test(corpus, state,
                        mode == "baseline" ? EvalMode::read_write_only : EvalMode::full);
    if (!res.applicable) {
        std::cout << "accuracy n/a (empty corpus)\n";
        return 0;
    }
    std::cout << "accuracy " << res.accuracy << "\n";
    for (const auto& [cat, acc] : res.category_accuracy)
        std::cout << "category " << cat << " " << acc << "\n";
    return 0;
}

int cmd_report(const std::string& journal_path, const std::string& format,
               const std::string& out) {
    auto report = replay_report(journal_path);
    export_report(report, out, format);
    std::cout << "report written to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-evolving skill agent"};
    app.require_subcommand(1);
    std::string config_path = default_config_path();
    app.add_option("--config", config_path, "Gateway config file");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Filter and dedup a JSONL skill catalog");
    std::string catalog, out_dir = "skills";
    std::int64_t min_stars = 500;
    bool no_name_pass = false;
    ingest->add_option("--catalog", catalog, "Catalog JSONL")->required();
    ingest->add_option("--min-stars", min_stars, "Keep entries with stars strictly above this");
    ingest->add_option("--out", out_dir, "Skill library directory");
    ingest->add_flag("--no-name-dedup", no_name_pass, "Disable the name-level dedup pass");

    // synth-queries
    auto* synth = app.add_subcommand("synth-queries", "Generate judge-filtered routing queries");
    std::string synth_skills = "skills", synth_out = "queries.jsonl";
    int need_pos = 4, need_neg = 4;
    synth->add_option("--skills", synth_skills, "Skill library directory");
    synth->add_option("--pos", need_pos, "Positive queries per skill");
    synth->add_option("--neg", need_neg, "Hard negatives per skill");
    synth->add_option("--out", synth_out, "Output JSONL");

    // train-router
    auto* train = app.add_subcommand("train-router", "Train the routing adapter");
    std::string pairs_path, train_skills = "skills", adapter_out = "adapter.json";
    TrainConfig tcfg;
    train->add_option("--pairs", pairs_path, "Query-pair JSONL")->required();
    train->add_option("--skills", train_skills, "Skill library directory");
    train->add_option("--out", adapter_out, "Adapter output path");
    train->add_option("--tau", tcfg.temperature, "Softmax temperature");
    train->add_option("--lr", tcfg.learning_rate, "Learning rate");
    train->add_option("--epochs", tcfg.epochs, "Training epochs");
    train->add_option("--batch", tcfg.batch_size, "Batch size (skills)");
    train->add_option("--seed", tcfg.seed, "Shuffle seed");

    // route
    auto* rt_cmd = app.add_subcommand("route", "Route a goal to skills");
    std::string goal, route_skills = "skills", adapter_path;
    std::size_t top_k = 5;
    double miss_threshold = 0.15;
    rt_cmd->add_option("goal", goal, "Routing goal")->required();
    rt_cmd->add_option("--skills", route_skills, "Skill library directory");
    rt_cmd->add_option("--adapter", adapter_path, "Trained adapter JSON");
    rt_cmd->add_option("--top-k", top_k, "Candidates to print");
    rt_cmd->add_option("--miss-threshold", miss_threshold, "Minimum top-1 adapter score");

    // run
    auto* run = app.add_subcommand("run", "Run reflective learning rounds");
    std::string tasks_path, journal_path = "journal.jsonl", run_skills = "skills";
    std::string run_adapter, report_path, report_format = "json";
    int rounds = 3;
    run->add_option("--tasks", tasks_path, "Task corpus JSONL")->required();
    run->add_option("--rounds", rounds, "Training rounds");
    run->add_option("--journal", journal_path, "Episode journal output");
    run->add_option("--skills", run_skills, "Skill library directory");
    run->add_option("--adapter", run_adapter, "Trained adapter JSON");
    run->add_option("--report", report_path, "Also export the round report here");
    run->add_option("--report-format", report_format, "csv or json");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate on a frozen library");
    std::string eval_tasks, eval_mode = "full", eval_skills = "skills", eval_adapter;
    eval->add_option("--tasks", eval_tasks, "Task corpus JSONL")->required();
    eval->add_option("--mode", eval_mode, "full or baseline")
        ->check(CLI::IsMember({"full", "baseline"}));
    eval->add_option("--skills", eval_skills, "Skill library directory");
    eval->add_option("--adapter", eval_adapter, "Trained adapter JSON");

    // report
    auto* report = app.add_subcommand("report", "Rebuild a round report from a journal");
    std::string rep_journal, rep_format = "json", rep_out = "report.json";
    report->add_option("--journal", rep_journal, "Episode journal")->required();
    report->add_option("--format", rep_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    report->add_option("--out", rep_out, "Output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) return cmd_ingest(catalog, min_stars, out_dir, no_name_pass);
        if (*synth) return cmd_synth(synth_skills, need_pos, need_neg, synth_out, config_path);
        if (*train) return cmd_train(pairs_path, train_skills, adapter_out, tcfg, config_path);
        if (*rt_cmd)
            return cmd_route(goal, route_skills, adapter_path, top_k, miss_threshold,
                             config_path);
        if (*run)
            return cmd_run(tasks_path, rounds, config_path, journal_path, run_skills,
                           run_adapter, report_path, report_format);
        if (*eval) return cmd_eval(eval_tasks, eval_mode, eval_skills, eval_adapter, config_path);
        if (*report) return cmd_report(rep_journal, rep_format, rep_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
