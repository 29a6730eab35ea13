// Acceptance suite: one pass/fail line per criterion, exit 0 only if all pass.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "evoskill/evoskill.hpp"

using namespace evoskill;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, const char* name, bool ok, double seconds) {
    std::printf("[%s] criterion %2d: %s (%.2fs)\n", ok ? "PASS" : "FAIL", n, name, seconds);
    if (!ok) ++failures;
}

template <typename F>
void criterion(int n, const char* name, F body) {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
        ok = body();
    } catch (const std::exception& e) {
        std::printf("       exception: %s\n", e.what());
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(n, name, ok, s);
}

// --------------------------------------------------------------------------
// criterion 1 helpers

Mat fd_gradient(const TrainingBatch& batch, const RouterAdapter& adapter, double h = 1e-4) {
    Mat g = Mat::Zero(adapter.dimension(), adapter.dimension());
    for (Eigen::Index r = 0; r < adapter.dimension(); ++r)
        for (Eigen::Index c = 0; c < adapter.dimension(); ++c) {
            RouterAdapter plus = adapter, minus = adapter;
            plus.matrix(r, c) += h;
            minus.matrix(r, c) -= h;
            g(r, c) = (infonce_loss(batch, plus) - infonce_loss(batch, minus)) / (2 * h);
        }
    return g;
}

bool check_infonce() {
    auto unit2 = [](double a, double b) {
        Vec v(2);
        v << a, b;
        return Vec(v / v.norm());
    };
    TrainingBatch sym;
    sym.temperature = 1.0;
    sym.skills = {unit2(1, 0)};
    sym.positives = {{unit2(0, 1)}};
    sym.negatives = {{unit2(0, 1)}};
    if (std::abs(infonce_loss(sym, RouterAdapter(2)) - std::log(2.0)) > 1e-9) return false;

    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937 rng(300 + seed);
        std::normal_distribution<double> dist;
        auto rand_unit = [&](Eigen::Index d) {
            Vec v(d);
            for (Eigen::Index i = 0; i < d; ++i) v[i] = dist(rng);
            return Vec(v / v.norm());
        };
        TrainingBatch b;
        b.temperature = 0.4;
        for (int i = 0; i < 2; ++i) {
            b.skills.push_back(rand_unit(4));
            b.positives.push_back({rand_unit(4), rand_unit(4)});
            b.negatives.push_back({rand_unit(4), rand_unit(4)});
        }
        RouterAdapter adapter(4);
        for (Eigen::Index r = 0; r < 4; ++r)
            for (Eigen::Index c = 0; c < 4; ++c) adapter.matrix(r, c) += 0.3 * dist(rng);
        double err = (infonce_gradient(b, adapter) - fd_gradient(b, adapter)).cwiseAbs().maxCoeff();
        if (err >= 1e-4) return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// criterion 2: router direction-of-effect on a synthetic 12-skill fixture

bool check_router_direction() {
    const char* domains[12] = {"invoices",  "genomes",   "contracts",   "telemetry",
                               "recipes",   "subtitles", "blueprints",  "ledgers",
                               "manifests", "transcripts", "itineraries", "schematics"};
    const char* fillers[8] = {"please", "quickly", "today",  "batch",
                              "legacy", "urgent",  "weekly", "archive"};

    SkillLibrary lib;
    std::map<std::string, std::string> texts;
    for (int i = 0; i < 12; ++i) {
        SkillRecord s;
        s.id = "s" + std::to_string(i);
        s.name = std::string(domains[i]) + " helper";
        s.description =
            std::string("tools for ") + domains[i] + " processing and " + domains[i] + " cleanup";
        s.spec_text = "# " + s.name + "\n";
        texts[s.id] = s.document();
        lib.add(std::move(s));
    }

    // Positives carry one on-topic token drowned out by a doubled decoy from
    // the neighbouring skill, plus a cue token that only training can exploit.
    std::vector<QueryPair> pairs;
    std::vector<std::pair<std::string, std::string>> eval_pairs;
    for (int i = 0; i < 12; ++i) {
        int j = (i + 1) % 12;
        for (int v = 0; v < 8; ++v) {
            std::string pos = "cue" + std::to_string(i) + " " + fillers[v] + " " + domains[i] +
                              " " + domains[j] + " " + domains[j];
            pairs.push_back({"s" + std::to_string(i), pos, Polarity::positive, ""});
            eval_pairs.push_back({pos, "s" + std::to_string(i)});
            std::string neg = std::string(domains[i]) + " " + domains[i] + " " + fillers[v] +
                              " offtopic" + std::to_string(v);
            pairs.push_back({"s" + std::to_string(i), neg, Polarity::hard_negative, ""});
        }
    }

    OfflineHashEmbedder emb(128, 42);
    RoutingPolicy identity;
    identity.adapter = RouterAdapter(128);
    identity.miss_threshold = -1e9;

    double r_bm25 = recall_at_k_bm25(eval_pairs, lib, 1);
    double r_id = recall_at_k(identity, eval_pairs, lib, emb, 1);

    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.learning_rate = 0.1;
    cfg.temperature = 0.2;
    cfg.batch_size = 12;
    cfg.seed = 1;
    RoutingPolicy trained = identity;
    trained.adapter = train_adapter(pairs, texts, emb, cfg);
    double r_tr = recall_at_k(trained, eval_pairs, lib, emb, 1);

    std::printf("       recall@1: trained=%.3f identity=%.3f bm25=%.3f\n", r_tr, r_id, r_bm25);
    return r_tr >= r_id && r_id >= r_bm25 && r_tr >= r_id + 0.1;
}

// --------------------------------------------------------------------------
// criteria 3/4/10: 20-task choreography

struct Choreography {
    ScriptedKernel chat, judge_k, reflect;
    OfflineHashEmbedder embedder{64, 42};
    LoopState state;
    TaskCorpus corpus;

    Choreography() {
        judge_k.set_default("INCORRECT\nwrong");
        for (int i = 0; i < 10; ++i) {
            std::string eq = "easytask" + std::to_string(i) + " question";
            std::string hq = "hardtask" + std::to_string(i) + " question";
            std::string marker = "PATCH_hardtask" + std::to_string(i);
            corpus.tasks.push_back({"easy" + std::to_string(i), eq, "E" + std::to_string(i),
                                    i % 2 ? "alpha" : "beta"});
            corpus.tasks.push_back({"hard" + std::to_string(i), hq, "H" + std::to_string(i),
                                    i % 2 ? "alpha" : "beta"});
            chat.add_rule({eq, "FINAL ANSWER: E" + std::to_string(i)});
            chat.add_rule({hq, "FINAL ANSWER: H" + std::to_string(i), "last_user", marker});
            chat.add_rule({hq, "FINAL ANSWER: wrong"});
            reflect.add_rule({"skill rewriter",
                              "{\"prompts/fix_hardtask" + std::to_string(i) + ".md\": \"" +
                                  marker + "\"}",
                              "last_user", hq});
        }
        chat.add_rule({"gate check question", "FINAL ANSWER: GATEOK"});
        chat.set_default("FINAL ANSWER: unknown");
        reflect.add_rule({"synthetic unit test",
                          R"({"question": "gate check question", "expected": "GATEOK"})"});
        reflect.add_rule({"transferable sentence", "Check the task marker before answering."});
        reflect.set_default("");

        SkillRecord seed;
        seed.id = "solver";
        seed.name = "General solver";
        seed.description = "answers easytask and hardtask questions";
        seed.spec_text = "# General solver\n";
        state.library.add(seed, true);
        state.seed_library.add(seed, true);
        state.policy.adapter = RouterAdapter(64);
        state.policy.miss_threshold = -1e9;
        state.kernels = {&chat, &judge_k, &reflect};
        state.embedder = &embedder;
    }
};

Choreography* g_chor = nullptr;
RoundReport g_chor_report;

bool check_learning_curve() {
    static Choreography chor;
    g_chor = &chor;
    g_chor_report = run_rounds(chor.corpus, chor.state, 3);
    const auto& rows = g_chor_report.rows;
    if (rows.size() != 3) return false;
    std::printf("       first@R0=%.2f final: R0=%.2f R1=%.2f R2=%.2f\n", rows[0].first_accuracy,
                rows[0].final_accuracy, rows[1].final_accuracy, rows[2].final_accuracy);
    if (rows[0].first_accuracy > 0.55) return false;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].final_accuracy < rows[i - 1].final_accuracy - 1e-12) return false;
    return rows[2].final_accuracy == 1.0;
}

bool check_ablation() {
    if (!g_chor) return false;
    auto full = run_test(g_chor->corpus, g_chor->state, EvalMode::full);
    auto ablated = run_test(g_chor->corpus, g_chor->state, EvalMode::read_write_only);
    std::printf("       test accuracy: full=%.2f read_write_only=%.2f\n", full.accuracy,
                ablated.accuracy);
    return full.applicable && ablated.applicable && full.accuracy >= ablated.accuracy + 0.2;
}

// --------------------------------------------------------------------------
// criterion 5: rollback safety on disk

std::map<std::string, std::string> snapshot_dir(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files[fs::relative(e.path(), root).string()] = ss.str();
    }
    return files;
}

bool check_rollback() {
    fs::path root = fs::temp_directory_path() / "evoskill-acceptance-rollback";
    fs::remove_all(root);
    fs::create_directories(root);
    std::mt19937 rng(77);
    auto word = [&]() { return "w" + std::to_string(rng() % 1000); };

    for (int scenario = 0; scenario < 100; ++scenario) {
        SkillRecord s;
        s.id = "skill" + std::to_string(scenario);
        s.name = word() + " " + word();
        s.description = word() + " " + word() + " " + word();
        s.spec_text = "# " + s.name + "\n\n" + word() + "\n";
        s.version = 1 + static_cast<std::int64_t>(rng() % 4);
        for (unsigned i = 0; i < rng() % 3; ++i) s.prompt_files["p" + std::to_string(i) + ".md"] = word();
        for (unsigned i = 0; i < rng() % 2; ++i) s.script_files["r" + std::to_string(i) + ".py"] = word();
        save_skill(root, s);

        OfflineHashEmbedder emb(32, 1);
        ScriptedKernel chat, judge_k, reflect;
        chat.set_default("FINAL ANSWER: never the expected answer");
        judge_k.set_default("INCORRECT\nwrong");
        nlohmann::json patch = {{"SKILL.md", "# mutated\n" + word() + "\n"}};
        if (rng() % 2) patch["prompts/extra.md"] = word();
        reflect.add_rule({"transferable sentence", "Tip."});
        reflect.add_rule({"skill rewriter", patch.dump()});
        reflect.add_rule({"synthetic unit test",
                          R"({"question": "gate probe", "expected": "UNREACHABLE"})"});

        LoopState state;
        state.library.add(s);
        state.policy.adapter = RouterAdapter(32);
        state.kernels = {&chat, &judge_k, &reflect};
        state.embedder = &emb;
        state.config.persist = true;
        state.config.record_utility = false;  // isolate the mutation path
        state.library_root = root;

        auto before = snapshot_dir(root);
        ExecutionTrace trace;
        trace.skill_id = s.id;
        trace.task_id = "t";
        auto out = write(trace, {false, "wrong"}, state, {"goal " + word(), {}}, 0);
        if (!out.rolled_back) return false;
        if (snapshot_dir(root) != before) return false;
        if (state.library.at(s.id).version != s.version) return false;
        if (!(state.library.at(s.id) == s)) return false;
    }
    fs::remove_all(root);
    return true;
}

// --------------------------------------------------------------------------
// criterion 6: discovery guard

bool check_discovery_guard() {
    bool saw_optimise = false, saw_discover = false;
    std::mt19937 rng(5);
    for (int scenario = 0; scenario < 60; ++scenario) {
        SkillRecord s;
        s.id = "target";
        s.name = "Target";
        s.description = "a skill under repair";
        s.spec_text = "# Target\n";
        s.utility.n_succ = rng() % 6;
        s.utility.n_fail = rng() % 6;

        OfflineHashEmbedder emb(32, 1);
        ScriptedKernel chat, judge_k, reflect;
        judge_k.set_default("INCORRECT\nwrong");
        reflect.add_rule({"transferable sentence", "Tip."});
        reflect.add_rule({"skill rewriter", R"({"SKILL.md": "# patched\n"})"});
        reflect.add_rule({"fundamentally different approach",
                          R"({"id":"fresh","name":"F","description":"d","skill_md":"# F\n"})"});

        LoopState state;
        state.library.add(s);
        state.policy.adapter = RouterAdapter(32);
        state.kernels = {&chat, &judge_k, &reflect};
        state.embedder = &emb;
        state.config.gate_enabled = false;

        ExecutionTrace trace;
        trace.skill_id = "target";
        auto out = write(trace, {false, "wrong"}, state, {"goal", {}}, 0);

        // the guard is evaluated on post-bookkeeping utility
        UtilityStats after = s.utility;
        after.n_fail += 1;
        bool escalate = after.value() < state.config.utility_threshold &&
                        after.samples() >= state.config.min_samples;
        if (escalate) {
            if (out.mutation != "discovered") return false;
            saw_discover = true;
        } else {
            if (out.mutation != "optimised") return false;
            saw_optimise = true;
        }
        // global invariant: a discovery never happens without the guard
        if (out.mutation == "discovered" && !escalate) return false;
    }
    return saw_optimise && saw_discover;
}

// --------------------------------------------------------------------------
// criterion 7: retrieval oracle equivalence

std::map<std::string, double> bm25_oracle(const std::map<std::string, std::string>& docs,
                                          const std::string& query) {
    std::map<std::string, std::vector<std::string>> tokens;
    double total_len = 0;
    for (const auto& [id, text] : docs) {
        tokens[id] = tokenize(text);
        total_len += tokens[id].size();
    }
    const double n = static_cast<double>(docs.size());
    const double avgdl = total_len / n;
    std::map<std::string, double> scores;
    for (const auto& term : tokenize(query)) {
        double df = 0;
        for (const auto& [id, toks] : tokens)
            if (std::count(toks.begin(), toks.end(), term) > 0) df += 1;
        if (df == 0) continue;
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const auto& [id, toks] : tokens) {
            double tf = static_cast<double>(std::count(toks.begin(), toks.end(), term));
            if (tf == 0) continue;
            double dl = static_cast<double>(toks.size());
            scores[id] += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * dl / avgdl));
        }
    }
    return scores;
}

bool check_retrieval_oracles() {
    std::map<std::string, std::string> docs = {
        {"a", "pdf parser extracts tables from pdf files"},
        {"b", "web crawler downloads pages and follows links"},
        {"c", "csv tables cleaner fixes broken tables"},
        {"d", "calendar planner schedules meetings"},
    };
    SparseIndex idx;
    for (const auto& [id, text] : docs) idx.add(id, text);
    for (const std::string& q : {"pdf tables", "tables tables crawler", "calendar pdf links"}) {
        auto expected = bm25_oracle(docs, q);
        auto got = idx.search(q, 10);
        if (got.size() != expected.size()) return false;
        for (const auto& e : got)
            if (std::abs(e.score - expected[e.id]) > 1e-12) return false;
    }

    // dense: brute-force cosine sort
    std::mt19937 rng(9);
    std::normal_distribution<double> dist;
    DenseIndex dense(6);
    std::map<std::string, Vec> vecs;
    for (int i = 0; i < 5; ++i) {
        Vec v(6);
        for (int j = 0; j < 6; ++j) v[j] = dist(rng);
        std::string id = "s" + std::to_string(i);
        dense.add(id, v);
        vecs[id] = v / v.norm();
    }
    Vec q(6);
    for (int j = 0; j < 6; ++j) q[j] = dist(rng);
    q /= q.norm();
    std::vector<std::pair<std::string, double>> expected;
    for (const auto& [id, v] : vecs) expected.emplace_back(id, v.dot(q));
    std::sort(expected.begin(), expected.end(), [](auto& a, auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    auto got = dense.search(q, 5);
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].id != expected[i].first) return false;
        if (std::abs(got[i].score - expected[i].second) > 1e-12) return false;
    }

    // rrf: hand-evaluated mixed-overlap case
    RankedList l1 = {{"a", 10.0}, {"b", 4.0}, {"c", 1.0}};
    RankedList l2 = {{"b", 0.9}, {"d", 0.5}, {"a", 0.1}};
    auto out = rrf_fuse({l1, l2}, 60, 0.5);
    std::map<std::string, double> fused;
    for (const auto& e : out) fused[e.id] = e.score;
    auto part = [](double rank, double norm) { return 0.5 / (60 + rank) + 0.5 * norm; };
    if (std::abs(fused["a"] - (part(1, 1.0) + part(3, 0.0))) > 1e-9) return false;
    if (std::abs(fused["b"] - (part(2, 3.0 / 9.0) + part(1, 1.0))) > 1e-9) return false;
    if (std::abs(fused["c"] - part(3, 0.0)) > 1e-9) return false;
    if (std::abs(fused["d"] - part(2, 0.5)) > 1e-9) return false;
    return true;
}

// --------------------------------------------------------------------------
// criterion 8: dedup conformance

bool check_dedup() {
    auto entry = [](std::string id, std::string desc, std::int64_t stars, std::string updated) {
        CatalogEntry e;
        e.id = std::move(id);
        e.name = e.id;
        e.description = std::move(desc);
        e.stars = stars;
        e.updated_at = std::move(updated);
        return e;
    };
    struct Case {
        std::vector<CatalogEntry> in;
        std::vector<std::string> expect;  // surviving ids, sorted
    };
    std::vector<Case> cases = {
        {{entry("a", "same", 900, "2024-01-01"), entry("b", "same", 600, "2024-01-01")}, {"a"}},
        {{entry("a", "same", 600, "2024-01-01"), entry("b", "same", 900, "2024-01-01")}, {"b"}},
        {{entry("a", "same", 700, "2023-01-01"), entry("b", "same", 700, "2024-01-01")}, {"b"}},
        {{entry("z", "same", 700, "2024-01-01"), entry("a", "same", 700, "2023-01-01")}, {"z"}},
        // all-equal tie: lexicographically larger id survives
        {{entry("a", "same", 700, "2024-01-01"), entry("b", "same", 700, "2024-01-01"),
          entry("c", "same", 700, "2024-01-01")},
         {"c"}},
        // unparseable timestamp sorts as oldest
        {{entry("zz", "same", 700, "not-a-date"), entry("aa", "same", 700, "2020-01-01")}, {"aa"}},
        {{entry("a", "same", 700, "not-a-date"), entry("b", "same", 700, "also-bad")}, {"b"}},
        // whitespace-normalised grouping, no case folding
        {{entry("a", "hello   world", 10, "2024-01-01"), entry("b", "hello world", 20, "2024-01-01")},
         {"b"}},
        {{entry("a", "Hello", 10, "2024-01-01"), entry("b", "hello", 20, "2024-01-01")}, {"a", "b"}},
        // distinct descriptions untouched
        {{entry("a", "one", 10, "2024-01-01"), entry("b", "two", 20, "2024-01-01")}, {"a", "b"}},
        // stars dominate recency
        {{entry("a", "same", 900, "2000-01-01"), entry("b", "same", 800, "2024-01-01")}, {"a"}},
        // three-way: stars first, then date among the tied pair
        {{entry("a", "same", 500, "2024-01-01"), entry("b", "same", 700, "2020-01-01"),
          entry("c", "same", 700, "2021-01-01")},
         {"c"}},
    };
    std::mt19937 rng(3);
    for (auto& c : cases) {
        for (int trial = 0; trial < 20; ++trial) {
            std::shuffle(c.in.begin(), c.in.end(), rng);
            auto out = dedup_catalog(c.in, false);
            std::vector<std::string> ids;
            for (const auto& e : out) ids.push_back(e.id);
            if (ids != c.expect) return false;
        }
    }
    return true;
}

// --------------------------------------------------------------------------
// criterion 9: coverage-radius monotonicity

bool check_coverage_monotone() {
    OfflineHashEmbedder emb(32, 4);
    std::mt19937 rng(21);
    const char* words[] = {"sum", "graph", "pdf", "query", "poem", "map", "sort", "mesh", "log"};
    auto phrase = [&]() {
        return std::string(words[rng() % 9]) + " " + words[rng() % 9] + " " + words[rng() % 9];
    };
    for (int seq = 0; seq < 20; ++seq) {
        TaskCorpus corpus;
        for (int i = 0; i < 6; ++i)
            corpus.tasks.push_back({"t" + std::to_string(i), phrase(), "a"});
        SkillLibrary lib;
        double prev = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 5; ++s) {
            SkillRecord sk;
            sk.id = "s" + std::to_string(s);
            sk.name = sk.id;
            sk.description = phrase();
            sk.spec_text = "x";
            lib.add(sk);
            double r = coverage_radius(lib, corpus, emb);
            if (r > prev + 1e-12) return false;
            prev = r;
        }
    }
    return true;
}

// --------------------------------------------------------------------------
// criterion 10: utility bound after the randomized runs

bool check_utility_bound() {
    if (!g_chor) return false;
    for (const auto& [id, s] : g_chor->state.library.skills) {
        double u = s.utility.value();
        if (u < 0.0 || u > 1.0) return false;
        if (s.utility.samples() == 0) {
            if (u != 0.5) return false;
        } else {
            double expected = static_cast<double>(s.utility.n_succ) /
                              static_cast<double>(s.utility.n_succ + s.utility.n_fail);
            if (u != expected) return false;
        }
    }
    return true;
}

// --------------------------------------------------------------------------
// criterion 11: end-to-end CLI smoke

bool run_cmd(const std::string& cmd) {
    int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    if (rc != 0) std::printf("       command failed (%d): %s\n", rc, cmd.c_str());
    return rc == 0;
}

bool check_cli_smoke() {
    const std::string cli = EVOSKILL_CLI_PATH;
    const std::string fix = EVOSKILL_FIXTURES;
    fs::path work = fs::temp_directory_path() / "evoskill-acceptance-smoke";
    fs::remove_all(work);
    fs::create_directories(work);
    const std::string w = work.string();
    const std::string cfg = " --config " + fix + "/config.json ";

    if (!run_cmd(cli + " ingest --catalog " + fix + "/catalog.jsonl --min-stars 500 --out " + w +
                 "/skills"))
        return false;
    if (!run_cmd(cli + cfg + "synth-queries --skills " + w + "/skills --pos 2 --neg 1 --out " + w +
                 "/queries.jsonl"))
        return false;
    if (!run_cmd(cli + cfg + "train-router --pairs " + w + "/queries.jsonl --skills " + w +
                 "/skills --out " + w + "/adapter.json --tau 0.2 --epochs 5 --seed 3"))
        return false;
    if (!run_cmd(cli + cfg + "run --tasks " + fix + "/tasks.jsonl --rounds 2 --journal " + w +
                 "/journal.jsonl --skills " + w + "/skills --adapter " + w +
                 "/adapter.json --report " + w + "/report.json"))
        return false;
    if (!run_cmd(cli + cfg + "eval --tasks " + fix + "/tasks.jsonl --mode full --skills " + w +
                 "/skills --adapter " + w + "/adapter.json"))
        return false;
    if (!run_cmd(cli + cfg + "eval --tasks " + fix + "/tasks.jsonl --mode baseline --skills " + w +
                 "/skills --adapter " + w + "/adapter.json"))
        return false;
    if (!run_cmd(cli + " report --journal " + w + "/journal.jsonl --format json --out " + w +
                 "/replayed.json"))
        return false;

    auto from_run = import_report(w + "/report.json");
    auto replayed = replay_report(w + "/journal.jsonl");
    auto via_cli = import_report(w + "/replayed.json");
    if (!(from_run == replayed) || !(replayed == via_cli)) {
        std::printf("       journal replay does not match the exported report\n");
        return false;
    }
    fs::remove_all(work);
    return true;
}

}  // namespace

int main() {
    criterion(1, "InfoNCE loss and gradient correctness", check_infonce);
    criterion(2, "router direction-of-effect (trained > identity >= bm25)", check_router_direction);
    criterion(3, "learning-curve direction-of-effect", check_learning_curve);
    criterion(4, "full vs read-write-only ablation", check_ablation);
    criterion(5, "gate-failure rollback leaves folders byte-identical", check_rollback);
    criterion(6, "discovery guard (utility < delta and samples >= n_min)", check_discovery_guard);
    criterion(7, "retrieval oracle equivalence (bm25, dense, rrf)", check_retrieval_oracles);
    criterion(8, "catalog dedup tie-break conformance", check_dedup);
    criterion(9, "coverage-radius monotonicity", check_coverage_monotone);
    criterion(10, "utility estimates bounded and consistent", check_utility_bound);
    criterion(11, "end-to-end CLI smoke with journal replay", check_cli_smoke);

    if (failures) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
