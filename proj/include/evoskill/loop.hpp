#pragma once

#include <cassert>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoskill/gateway.hpp"
#include "evoskill/router.hpp"
#include "evoskill/skill_store.hpp"

namespace evoskill {

struct ReflectiveLoopConfig {
    double utility_threshold = 0.3;  // delta: below this, patching escalates to discovery
    int min_samples = 3;             // n_min
    int max_feedback_rounds = 3;     // K
    bool create_on_miss = true;
    int tip_context_cap = 20;         // most-recent tips injected into prompts
    std::size_t tip_length_cap = 200;
    int step_cap = 6;
    int judge_retries = 2;
    bool gate_enabled = true;
    bool mutations_enabled = true;   // off in the read-write-only ablation
    bool record_utility = true;      // frozen in test mode
    bool persist = false;            // mirror library mutations to disk
    bool stochastic_routing = false;
    std::uint64_t routing_seed = 0;

    void validate() const {
        if (utility_threshold <= 0 || utility_threshold >= 1)
            throw std::invalid_argument("utility_threshold must be in (0,1)");
        if (min_samples < 1) throw std::invalid_argument("min_samples must be positive");
        if (max_feedback_rounds < 1) throw std::invalid_argument("max_feedback_rounds must be >= 1");
    }
};

struct Tip {
    std::string text;
    std::string task_id;
    int round = 0;
};

// Append-only within a run.
struct TipMemory {
    std::vector<Tip> tips;
    std::size_t length_cap = 200;

    void append(std::string text, const std::string& task_id, int round) {
        if (text.size() > length_cap) text.resize(length_cap);
        tips.push_back({std::move(text), task_id, round});
    }

    std::vector<Tip> recent(int cap) const {
        if (cap <= 0 || tips.size() <= static_cast<std::size_t>(cap)) return tips;
        return std::vector<Tip>(tips.end() - cap, tips.end());
    }
};

struct Task {
    std::string id;
    std::string question;
    std::string answer;  // gold
    std::string category = "uncategorised";
};

struct AugmentedInput {
    std::string goal;
    std::vector<Tip> tips;
};

struct ExecutionTrace {
    std::string task_id;
    std::string skill_id;  // skill used, or empty
    std::vector<ChatMessage> steps;
    std::vector<std::string> extra_skills;
    std::string final_answer;
    bool truncated = false;
    bool failed = false;
};

struct JudgeVerdict {
    bool correct = false;
    std::string rationale;
};

struct LoopKernels {
    ChatKernel* chat = nullptr;     // task execution
    ChatKernel* judge = nullptr;    // verdicts
    ChatKernel* reflect = nullptr;  // tips, attribution, rewriting, discovery, test gen
};

struct LoopState {
    SkillLibrary library;
    SkillLibrary seed_library;  // pristine atomic seeds, kept for the ablation
    TipMemory tips;
    RoutingPolicy policy;
    ReflectiveLoopConfig config;
    LoopKernels kernels;
    Embedder* embedder = nullptr;
    std::filesystem::path library_root;  // used when config.persist

    void persist_skill(const std::string& id) {
        if (config.persist) save_skill(library_root, library.at(id));
    }
};

inline constexpr const char* kFinalAnswerMarker = "FINAL ANSWER:";

// ---------------------------------------------------------------------------
// (1) Observe

inline AugmentedInput observe(const Task& task, const TipMemory& tips, int tip_cap = 20) {
    return {task.question, tips.recent(tip_cap)};
}

// ---------------------------------------------------------------------------
// (2) Read

namespace detail {

inline std::optional<SkillRecord> parse_skill_proposal(const std::string& response,
                                                       const SkillLibrary& library) {
    std::string body;
    if (!extract_json_object(response, body)) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        return std::nullopt;
    }
    if (!j.contains("name") || !j.contains("description")) return std::nullopt;
    SkillRecord s;
    try {
        s.name = j.at("name").get<std::string>();
        s.description = j.at("description").get<std::string>();
        s.spec_text = j.value("skill_md", "# " + s.name + "\n\n" + s.description + "\n");
        std::string base = j.value("id", std::string());
        if (base.empty()) {
            for (char c : tokenize(s.name).empty() ? std::string("skill") : s.name) {
                if (std::isalnum(static_cast<unsigned char>(c)))
                    base.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
                else if (!base.empty() && base.back() != '-')
                    base.push_back('-');
            }
            if (base.empty()) base = "skill";
        }
        s.id = library.fresh_id(base);
        if (j.contains("prompts"))
            for (const auto& [n, t] : j.at("prompts").items())
                s.prompt_files[n] = t.get<std::string>();
        if (j.contains("scripts"))
            for (const auto& [n, t] : j.at("scripts").items())
                s.script_files[n] = t.get<std::string>();
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    if (s.spec_text.empty()) return std::nullopt;
    return s;
}

inline std::string goal_with_tips(const AugmentedInput& input) {
    std::string text = input.goal;
    for (const auto& t : input.tips) text += "\n" + t.text;
    return text;
}

}  // namespace detail

struct ReadResult {
    std::string skill_id;
    bool created = false;  // CreateOnMiss fired
    bool missed = false;   // router returned no confident candidate
};

// Routes the augmented input to a skill. On a router miss, either creates a
// new skill (CreateOnMiss) or falls back to the best atomic skill.
inline ReadResult read(const AugmentedInput& input, LoopState& state) {
    std::string goal_text = detail::goal_with_tips(input);
    ReadResult res;
    std::optional<std::string> routed;
    if (!state.library.skills.empty()) {
        auto pipeline = RouterPipeline::build(state.library, *state.embedder);
        Vec goal_vec = state.embedder->embed_one(goal_text);
        auto candidates = pipeline.route_candidates(state.policy, goal_text, goal_vec, 5);
        routed = route(state.policy, candidates);
    }
    if (routed) {
        res.skill_id = *routed;
        return res;
    }
    res.missed = true;
    if (state.config.create_on_miss) {
        std::string prompt =
            "Create a new skill for this goal.\n\nGoal:\n" + input.goal +
            "\n\nReturn ONLY JSON: {\"id\": \"...\", \"name\": \"...\", "
            "\"description\": \"...\", \"skill_md\": \"...\", "
            "\"scripts\": {\"name\": \"content\"}}";
        auto proposal =
            detail::parse_skill_proposal(state.kernels.reflect->complete({{"user", prompt}}),
                                         state.library);
        if (!proposal) throw std::runtime_error("skill creation failed for goal: " + input.goal);
        res.skill_id = proposal->id;
        res.created = true;
        state.library.add(std::move(*proposal));
        state.persist_skill(res.skill_id);
        return res;
    }
    // Fallback: highest adapter-scored atomic skill, then smallest id.
    if (state.library.atomic_ids.empty())
        throw std::runtime_error("router miss with no atomic skills and create_on_miss off");
    Vec goal_vec = state.embedder->embed_one(goal_text);
    std::string best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& id : state.library.atomic_ids) {
        Vec doc = state.embedder->embed_one(state.library.at(id).document());
        double s = adapter_score(state.policy.adapter, doc, goal_vec);
        if (s > best_score || (s == best_score && id < best)) {
            best = id;
            best_score = s;
        }
    }
    res.skill_id = best;
    return res;
}

// ---------------------------------------------------------------------------
// (3) Execute

inline ExecutionTrace execute(const AugmentedInput& input, const SkillRecord& skill,
                              ChatKernel& kernel, int step_cap, const std::string& task_id = "") {
    if (step_cap < 1) throw std::invalid_argument("step cap must be >= 1");
    std::string system = "You are executing the skill \"" + skill.name + "\".\n\n" +
                         skill.spec_text + "\n";
    for (const auto& [n, t] : skill.prompt_files)
        system += "\nPrompt " + n + ":\n" + t + "\n";
    for (const auto& [n, t] : skill.script_files)
        system += "\nScript " + n + " (context only, not executed):\n" + t + "\n";
    if (!input.tips.empty()) {
        system += "\nTips from past failures:\n";
        for (const auto& t : input.tips) system += "- " + t.text + "\n";
    }
    system += "\nWhen finished, reply with \"" + std::string(kFinalAnswerMarker) + " <answer>\".";

    ExecutionTrace trace;
    trace.task_id = task_id;
    trace.skill_id = skill.id;
    trace.steps.push_back({"system", system});
    trace.steps.push_back({"user", input.goal});
    for (int step = 0; step < step_cap; ++step) {
        std::string reply;
        try {
            reply = kernel.complete(trace.steps);
        } catch (const std::exception& e) {
            trace.failed = true;
            trace.final_answer = "";
            trace.steps.push_back({"assistant", std::string("<kernel failure: ") + e.what() + ">"});
            return trace;
        }
        trace.steps.push_back({"assistant", reply});
        auto pos = reply.find(kFinalAnswerMarker);
        if (pos != std::string::npos) {
            trace.final_answer = trim(reply.substr(pos + std::string(kFinalAnswerMarker).size()));
            return trace;
        }
        if (step + 1 < step_cap)
            trace.steps.push_back(
                {"user", "Continue. When finished, reply with " + std::string(kFinalAnswerMarker) +
                             " <answer>."});
    }
    // Cap reached without a marker.
    trace.truncated = true;
    trace.final_answer = trim(trace.steps.back().content);
    return trace;
}

// ---------------------------------------------------------------------------
// (4) Judge

inline JudgeVerdict judge(const Task& task, const std::string& answer, ChatKernel& kernel,
                          int retries = 2) {
    if (trim(answer) == trim(task.answer)) return {true, ""};
    std::string prompt =
        "Question:\n" + task.question + "\n\nGold answer:\n" + task.answer +
        "\n\nCandidate answer:\n" + answer +
        "\n\nIs the candidate answer correct? Reply with CORRECT or INCORRECT, "
        "then a one-sentence rationale.";
    for (int attempt = 0; attempt <= retries; ++attempt) {
        std::string reply = kernel.complete({{"user", prompt}});
        auto inc = reply.find("INCORRECT");
        if (inc != std::string::npos) {
            std::string rationale = trim(reply.substr(inc + 9));
            if (rationale.empty()) rationale = "judged incorrect";
            return {false, rationale};
        }
        auto cor = reply.find("CORRECT");
        if (cor != std::string::npos) return {true, trim(reply.substr(cor + 7))};
    }
    return {false, "unparseable verdict"};
}

// ---------------------------------------------------------------------------
// (5c) helpers: attribution, rewriting, discovery, gate

inline std::string select_target(const ExecutionTrace& trace, const JudgeVerdict& verdict,
                                 ChatKernel& kernel, std::vector<std::string>* warnings = nullptr) {
    std::vector<std::string> touched = {trace.skill_id};
    for (const auto& id : trace.extra_skills)
        if (std::find(touched.begin(), touched.end(), id) == touched.end()) touched.push_back(id);
    if (touched.size() == 1) return touched.front();

    std::string trace_text;
    for (const auto& m : trace.steps) trace_text += "[" + m.role + "] " + m.content + "\n";
    std::string list;
    for (const auto& id : touched) list += "- " + id + "\n";
    std::string prompt =
        "Select the skill most responsible for this failure.\n\nTrace:\n" + trace_text +
        "\nJudge rationale: " + verdict.rationale + "\n\nTouched skills:\n" + list +
        "\nReply with exactly one skill id from the list.";
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply = trim(kernel.complete({{"user", prompt}}));
        for (const auto& id : touched)
            if (reply.find(id) != std::string::npos) return id;
    }
    if (warnings) warnings->push_back("target selector returned unknown id; using routed skill");
    return trace.skill_id;
}

// Structured edit set: full replacement text per file. Name and id are
// immutable; a returned name change is ignored.
inline std::optional<SkillRecord> optimise_skill(const SkillRecord& target,
                                                 const AugmentedInput& input,
                                                 const ExecutionTrace& trace,
                                                 const JudgeVerdict& verdict,
                                                 ChatKernel& kernel) {
    std::string trace_text;
    for (const auto& m : trace.steps) trace_text += "[" + m.role + "] " + m.content + "\n";
    std::string prompt =
        "You are a skill rewriter. Propose targeted file-level updates that add "
        "guardrails or alternative strategies for the observed failure while "
        "preserving the skill's generality.\n\nGoal:\n" + input.goal +
        "\n\nSkill \"" + target.name + "\" SKILL.md:\n" + target.spec_text +
        "\n\nFailed trace:\n" + trace_text + "\nJudge rationale: " + verdict.rationale +
        "\n\nReturn ONLY JSON mapping file paths to full replacement text, e.g. "
        "{\"SKILL.md\": \"...\", \"prompts/hints.md\": \"...\"}.";
    std::string body;
    if (!extract_json_object(kernel.complete({{"user", prompt}}), body)) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        return std::nullopt;
    }
    if (!j.is_object() || j.empty()) return std::nullopt;

    SkillRecord updated = target;
    bool any = false;
    try {
        for (const auto& [path, text] : j.items()) {
            if (!text.is_string()) return std::nullopt;
            if (path == "SKILL.md") {
                updated.spec_text = text.get<std::string>();
                any = true;
            } else if (path == "description") {
                updated.description = text.get<std::string>();
                any = true;
            } else if (path.rfind("prompts/", 0) == 0) {
                updated.prompt_files[path.substr(8)] = text.get<std::string>();
                any = true;
            } else if (path.rfind("scripts/", 0) == 0) {
                updated.script_files[path.substr(8)] = text.get<std::string>();
                any = true;
            }
            // name/id changes and unknown paths are ignored
        }
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    if (!any || updated.spec_text.empty()) return std::nullopt;
    updated.version = target.version + 1;
    return updated;
}

inline std::optional<SkillRecord> discover_skill(const SkillRecord& target,
                                                 const AugmentedInput& input,
                                                 const ExecutionTrace& trace, ChatKernel& kernel,
                                                 const SkillLibrary& library) {
    std::string trace_text;
    for (const auto& m : trace.steps) trace_text += "[" + m.role + "] " + m.content + "\n";
    std::string prompt =
        "The skill \"" + target.name + "\" keeps failing. Propose a new skill with a "
        "fundamentally different approach for goals like this one.\n\nGoal:\n" + input.goal +
        "\n\nFailing skill SKILL.md:\n" + target.spec_text + "\n\nFailed trace:\n" + trace_text +
        "\n\nReturn ONLY JSON: {\"id\": \"...\", \"name\": \"...\", \"description\": \"...\", "
        "\"skill_md\": \"...\", \"prompts\": {}, \"scripts\": {}}";
    auto proposal = detail::parse_skill_proposal(kernel.complete({{"user", prompt}}), library);
    if (!proposal) return std::nullopt;
    proposal->version = 1;
    proposal->utility = UtilityStats{};  // fresh prior 0.5
    return proposal;
}

struct GateResult {
    bool passed = false;
    bool skipped = false;
    std::string reason;
};

// Generate one synthetic test task, run it through the candidate skill, and
// judge the result. Generation failure fails the gate (conservative).
inline GateResult unit_test_gate(const SkillRecord& skill, const AugmentedInput& input,
                                 const LoopKernels& kernels, const ReflectiveLoopConfig& config) {
    if (!config.gate_enabled) return {true, true, "gate skipped"};
    std::string prompt =
        "Generate one synthetic unit test for the skill \"" + skill.name + "\".\n\n" +
        skill.spec_text +
        "\n\nReturn ONLY JSON: {\"question\": \"...\", \"expected\": \"...\"}";
    std::string body;
    std::string response;
    try {
        response = kernels.reflect->complete({{"user", prompt}});
    } catch (const std::exception&) {
        return {false, false, "no test case"};
    }
    if (!extract_json_object(response, body)) return {false, false, "no test case"};
    Task test_task;
    try {
        auto j = nlohmann::json::parse(body);
        test_task.question = j.at("question").get<std::string>();
        test_task.answer = j.at("expected").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        return {false, false, "no test case"};
    }
    test_task.id = "gate:" + skill.id;
    AugmentedInput test_input{test_task.question, input.tips};
    auto trace = execute(test_input, skill, *kernels.chat, config.step_cap, test_task.id);
    if (trace.failed) return {false, false, "execution failed"};
    auto verdict = judge(test_task, trace.final_answer, *kernels.judge, config.judge_retries);
    if (verdict.correct) return {true, false, ""};
    return {false, false, verdict.rationale};
}

// ---------------------------------------------------------------------------
// (5) Write

struct MutationRecord {
    std::string type;  // optimised | discovered | created
    std::string skill_id;
    std::int64_t version_from = 0;
    std::int64_t version_to = 0;
    std::string gate;  // passed | failed | skipped
    bool rolled_back = false;
};

struct WriteOutcome {
    double utility_after = 0.0;
    bool tip_added = false;
    std::string mutation = "none";  // none | optimised | discovered
    bool rolled_back = false;
    std::string target_id;           // skill the mutation applied to
    std::string updated_id;          // skill to retry with
    std::vector<MutationRecord> mutations;
    std::vector<std::string> warnings;
};

// Reflective update: utility bookkeeping always persists; on failure a tip
// is recorded and the responsible skill is patched or superseded, guarded by
// the unit-test gate with byte-identical rollback.
inline WriteOutcome write(const ExecutionTrace& trace, const JudgeVerdict& verdict,
                          LoopState& state, const AugmentedInput& input, int round,
                          bool allow_mutation = true) {
    WriteOutcome out;
    out.updated_id = trace.skill_id;

    // (5a) utility update
    if (state.config.record_utility && !trace.skill_id.empty()) {
        out.utility_after = record_outcome(state.library, trace.skill_id, verdict.correct);
        state.persist_skill(trace.skill_id);
    } else if (!trace.skill_id.empty()) {
        out.utility_after = state.library.at(trace.skill_id).utility.value();
    }
    if (verdict.correct) return out;

    // (5b) tip memory
    try {
        std::string prompt =
            "A task attempt failed. Give ONE short transferable sentence (max 200 "
            "characters) of generic guidance that would have prevented this failure. "
            "Do not mention task-specific facts.\n\nTask:\n" + input.goal +
            "\nFailed answer:\n" + trace.final_answer + "\nJudge rationale: " + verdict.rationale;
        std::string tip = trim(state.kernels.reflect->complete({{"user", prompt}}));
        if (!tip.empty()) {
            state.tips.length_cap = state.config.tip_length_cap;
            state.tips.append(tip, trace.task_id, round);
            out.tip_added = true;
        }
    } catch (const std::exception& e) {
        out.warnings.push_back(std::string("tip generation failed: ") + e.what());
    }

    if (!allow_mutation || !state.config.mutations_enabled || trace.skill_id.empty()) return out;

    // (5c) skill evolution
    try {
        std::string target_id =
            select_target(trace, verdict, *state.kernels.reflect, &out.warnings);
        out.target_id = target_id;
        const SkillRecord target = state.library.at(target_id);  // pre-mutation snapshot

        const bool escalate = target.utility.value() < state.config.utility_threshold &&
                              target.utility.samples() >= state.config.min_samples;
        if (escalate) {
            assert(target.utility.value() < state.config.utility_threshold &&
                   target.utility.samples() >= state.config.min_samples);
            auto discovered =
                discover_skill(target, input, trace, *state.kernels.reflect, state.library);
            if (discovered) {
                auto gate = unit_test_gate(*discovered, input, state.kernels, state.config);
                MutationRecord rec{"discovered", discovered->id, 0, discovered->version,
                                   gate.skipped ? "skipped" : (gate.passed ? "passed" : "failed"),
                                   !gate.passed};
                if (gate.passed) {
                    out.mutation = "discovered";
                    out.updated_id = discovered->id;
                    state.library.add(*discovered);
                    state.persist_skill(discovered->id);
                } else {
                    out.rolled_back = true;
                    out.warnings.push_back("discovery rejected by gate: " + gate.reason);
                }
                out.mutations.push_back(rec);
            } else {
                out.warnings.push_back("malformed discovery proposal; library unchanged");
            }
        } else {
            auto updated =
                optimise_skill(target, input, trace, verdict, *state.kernels.reflect);
            if (updated) {
                auto gate = unit_test_gate(*updated, input, state.kernels, state.config);
                MutationRecord rec{"optimised", target_id, target.version, updated->version,
                                   gate.skipped ? "skipped" : (gate.passed ? "passed" : "failed"),
                                   !gate.passed};
                if (gate.passed) {
                    out.mutation = "optimised";
                    out.updated_id = target_id;
                    state.library.at(target_id) = *updated;
                    state.persist_skill(target_id);
                } else {
                    // pre-mutation record never left `target`; nothing to restore
                    out.rolled_back = true;
                    out.warnings.push_back("optimisation rejected by gate: " + gate.reason);
                }
                out.mutations.push_back(rec);
            } else {
                out.warnings.push_back("malformed edit set; skill unchanged");
            }
        }
    } catch (const std::exception& e) {
        out.warnings.push_back(std::string("write phase degraded: ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Episode and rounds

struct EpisodeResult {
    std::string task_id;
    std::string category;
    std::string skill_id;  // routed (or created) skill
    bool created = false;
    bool first_correct = false;
    bool final_correct = false;
    int rounds_used = 0;
    bool failed = false;  // unrecoverable kernel failure
    std::vector<WriteOutcome> writes;
};

// One pass of observe -> read -> execute -> judge, then up to K reflective
// feedback rounds of write -> re-execute -> re-judge.
inline EpisodeResult run_episode(const Task& task, LoopState& state) {
    state.config.validate();
    EpisodeResult res;
    res.task_id = task.id;
    res.category = task.category;

    AugmentedInput input = observe(task, state.tips, state.config.tip_context_cap);
    ReadResult read_res;
    try {
        read_res = read(input, state);
    } catch (const std::exception&) {
        res.failed = true;
        return res;
    }
    res.skill_id = read_res.skill_id;
    res.created = read_res.created;

    auto attempt = [&](const std::string& skill_id) {
        return execute(input, state.library.at(skill_id), *state.kernels.chat,
                       state.config.step_cap, task.id);
    };

    ExecutionTrace trace = attempt(read_res.skill_id);
    JudgeVerdict verdict =
        trace.failed ? JudgeVerdict{false, "execution failed"}
                     : judge(task, trace.final_answer, *state.kernels.judge,
                             state.config.judge_retries);
    res.first_correct = verdict.correct;

    int round = 0;
    while (true) {
        bool budget_left = !verdict.correct && round < state.config.max_feedback_rounds;
        WriteOutcome w = write(trace, verdict, state, input, round, budget_left);
        res.writes.push_back(w);
        if (!budget_left) break;
        ++round;
        trace = attempt(w.updated_id);
        verdict = trace.failed ? JudgeVerdict{false, "execution failed"}
                               : judge(task, trace.final_answer, *state.kernels.judge,
                                       state.config.judge_retries);
    }
    res.rounds_used = round;
    res.final_correct = verdict.correct;
    res.failed = res.failed || trace.failed;
    return res;
}

}  // namespace evoskill
