#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoskill/gateway.hpp"
#include "evoskill/router.hpp"
#include "evoskill/skill_store.hpp"

namespace evoskill {

namespace detail {

inline std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

}  // namespace detail

// Template for synthetic router goals. Filled verbatim with the skill's
// name, description, keywords, needed counts, and already-accepted queries.
inline constexpr const char* kSynthQueryPromptTemplate = R"(Target skill:
- name: {skill_name}
- description: {description}
- keywords: {keywords_block}

Task:
Generate synthetic router goals (queries) for this target skill.
The router state is ONLY a text goal (routing_goal).
Write realistic user-style goals.

Need:
- {need_pos} positive queries: target skill SHOULD be selected.
- {need_neg} hard negative queries: relevant to the same domain
  BUT target skill is not useful / not the best tool.

Hard negative requirements:
- Must look plausible and close to the target domain.
- Must share terminology/theme with the skill.
- Must be "relevant but useless" for THIS target skill.
- Avoid obvious cues like "do not use <skill>".

Style requirements:
- Do not mention the skill name directly.
- Keep each query concrete, actionable, and non-trivial.
- Mix concise and mildly noisy phrasing.
- English only (to match downstream tokenizer).

Already accepted positive queries (avoid duplicates):
{existing_pos_block}

Already accepted negative queries (avoid duplicates):
{existing_neg_block}

Return ONLY JSON in this schema:
{
  "positive_queries": [
    {"query": "...", "why_fit": "..."}
  ],
  "negative_queries": [
    {"query": "...", "why_relevant": "...", "why_useless": "..."}
  ]
}
)";

inline std::string build_synth_prompt(const SkillRecord& skill, int need_pos, int need_neg,
                                      const std::vector<QueryPair>& existing,
                                      const std::vector<std::string>& keywords = {}) {
    std::string kw;
    for (const auto& k : keywords) kw += (kw.empty() ? "" : ", ") + k;
    std::string pos_block, neg_block;
    for (const auto& p : existing) {
        auto& block = p.polarity == Polarity::positive ? pos_block : neg_block;
        block += "- " + p.query + "\n";
    }
    if (pos_block.empty()) pos_block = "(none)\n";
    if (neg_block.empty()) neg_block = "(none)\n";

    std::string prompt = kSynthQueryPromptTemplate;
    prompt = detail::replace_all(prompt, "{skill_name}", skill.name);
    prompt = detail::replace_all(prompt, "{description}", skill.description);
    prompt = detail::replace_all(prompt, "{keywords_block}", kw);
    prompt = detail::replace_all(prompt, "{need_pos}", std::to_string(need_pos));
    prompt = detail::replace_all(prompt, "{need_neg}", std::to_string(need_neg));
    prompt = detail::replace_all(prompt, "{existing_pos_block}", pos_block);
    prompt = detail::replace_all(prompt, "{existing_neg_block}", neg_block);
    return prompt;
}

// Calls the kernel with the query-synthesis prompt, extracts the JSON object
// from the response (tolerating surrounding prose), and maps it to
// QueryPairs. Duplicates of already-accepted queries are dropped.
inline std::vector<QueryPair> generate_synthetic_queries(const SkillRecord& skill,
                                                         ChatKernel& llm, int need_pos,
                                                         int need_neg,
                                                         const std::vector<QueryPair>& existing,
                                                         int max_retries = 2) {
    std::string prompt = build_synth_prompt(skill, need_pos, need_neg, existing);
    std::set<std::string> seen;
    for (const auto& p : existing) seen.insert(p.query);

    std::string last_response;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        last_response = llm.complete({{"user", prompt}});
        std::string body;
        if (!extract_json_object(last_response, body)) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error&) {
            continue;
        }
        if (!j.contains("positive_queries") || !j.contains("negative_queries")) continue;
        try {
            std::vector<QueryPair> out;
            for (const auto& q : j.at("positive_queries")) {
                QueryPair p;
                p.skill_id = skill.id;
                p.query = q.at("query").get<std::string>();
                p.polarity = Polarity::positive;
                p.rationale = q.value("why_fit", "");
                if (p.query.empty() || !seen.insert(p.query).second) continue;
                out.push_back(std::move(p));
            }
            for (const auto& q : j.at("negative_queries")) {
                QueryPair p;
                p.skill_id = skill.id;
                p.query = q.at("query").get<std::string>();
                p.polarity = Polarity::hard_negative;
                p.rationale = q.value("why_relevant", "") + "; " + q.value("why_useless", "");
                if (p.query.empty() || !seen.insert(p.query).second) continue;
                out.push_back(std::move(p));
            }
            return out;
        } catch (const nlohmann::json::exception&) {
            continue;
        }
    }
    throw std::runtime_error("synthetic query generation failed; last response: " + last_response);
}

// Quality gate: the judge reads the full skill artefacts and accepts or
// rejects each pair. A malformed verdict rejects the pair (conservative).
inline std::vector<QueryPair> judge_filter_queries(const std::vector<QueryPair>& pairs,
                                                   const SkillRecord& skill, ChatKernel& judge,
                                                   std::vector<std::string>* warnings = nullptr) {
    std::string artefacts = "SKILL.md:\n" + skill.spec_text + "\n";
    for (const auto& [n, t] : skill.prompt_files) artefacts += "prompts/" + n + ":\n" + t + "\n";
    for (const auto& [n, t] : skill.script_files) artefacts += "scripts/" + n + ":\n" + t + "\n";

    std::vector<QueryPair> accepted;
    for (const auto& p : pairs) {
        std::string prompt =
            "Judge a synthetic routing query against the full skill artefacts.\n\n"
            "Skill: " + skill.name + "\nDescription: " + skill.description + "\n\n" +
            artefacts +
            "\nQuery: " + p.query +
            "\nClaimed polarity: " +
            (p.polarity == Polarity::positive ? "positive" : "hard_negative") +
            "\nRationale: " + p.rationale +
            "\n\nReply with exactly ACCEPT or REJECT on the first line.";
        std::string verdict = judge.complete({{"user", prompt}});
        std::string head = trim(verdict.substr(0, verdict.find('\n')));
        if (head.rfind("ACCEPT", 0) == 0) {
            accepted.push_back(p);
        } else if (head.rfind("REJECT", 0) == 0) {
            continue;
        } else if (warnings) {
            warnings->push_back("malformed judge verdict for query '" + p.query +
                                "'; pair rejected");
        }
    }
    return accepted;
}

}  // namespace evoskill
