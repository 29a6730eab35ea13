#pragma once

#include <chrono>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoskill/loop.hpp"

namespace evoskill {

// Append-only JSONL audit trail, one record per episode.
class Journal {
public:
    explicit Journal(const std::string& path) : out_(path, std::ios::app), path_(path) {
        if (!out_) throw std::runtime_error("cannot open journal: " + path);
    }

    void record(const EpisodeResult& episode, int round, std::size_t library_size) {
        nlohmann::json mutations = nlohmann::json::array();
        for (const auto& w : episode.writes)
            for (const auto& m : w.mutations)
                mutations.push_back({{"type", m.type},
                                     {"skill_id", m.skill_id},
                                     {"version_from", m.version_from},
                                     {"version_to", m.version_to},
                                     {"gate", m.gate},
                                     {"rolled_back", m.rolled_back}});
        auto now = std::chrono::system_clock::now().time_since_epoch();
        nlohmann::json j = {
            {"task_id", episode.task_id},
            {"category", episode.category},
            {"round", round},
            {"skill_id", episode.skill_id},
            {"created", episode.created},
            {"first_verdict", episode.first_correct},
            {"final_verdict", episode.final_correct},
            {"rounds_used", episode.rounds_used},
            {"mutations", mutations},
            {"library_size", library_size},
            {"timestamp_ms",
             std::chrono::duration_cast<std::chrono::milliseconds>(now).count()},
        };
        out_ << j.dump() << "\n";
        out_.flush();
    }

    const std::string& path() const { return path_; }

private:
    std::ofstream out_;
    std::string path_;
};

struct JournalRecord {
    std::string task_id;
    std::string category;
    int round = 0;
    std::string skill_id;
    bool created = false;
    bool first_verdict = false;
    bool final_verdict = false;
    int rounds_used = 0;
    std::size_t library_size = 0;
    std::size_t n_optimised = 0;
    std::size_t n_discovered = 0;
    std::size_t n_rolled_back = 0;
};

inline std::vector<JournalRecord> read_journal(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read journal: " + path);
    std::vector<JournalRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        JournalRecord r;
        r.task_id = j.at("task_id").get<std::string>();
        r.category = j.value("category", "uncategorised");
        r.round = j.at("round").get<int>();
        r.skill_id = j.value("skill_id", "");
        r.created = j.value("created", false);
        r.first_verdict = j.at("first_verdict").get<bool>();
        r.final_verdict = j.at("final_verdict").get<bool>();
        r.rounds_used = j.value("rounds_used", 0);
        r.library_size = j.value("library_size", std::size_t{0});
        for (const auto& m : j.value("mutations", nlohmann::json::array())) {
            if (m.value("rolled_back", false)) ++r.n_rolled_back;
            else if (m.value("type", "") == "optimised") ++r.n_optimised;
            else if (m.value("type", "") == "discovered") ++r.n_discovered;
        }
        records.push_back(std::move(r));
    }
    return records;
}

// Tip memory persisted alongside the journal.
inline void save_tips(const TipMemory& tips, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write tips: " + path);
    for (const auto& t : tips.tips) {
        nlohmann::json j = {{"text", t.text}, {"task_id", t.task_id}, {"round", t.round}};
        out << j.dump() << "\n";
    }
}

inline TipMemory load_tips(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read tips: " + path);
    TipMemory tips;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        tips.tips.push_back(
            {j.at("text").get<std::string>(), j.value("task_id", ""), j.value("round", 0)});
    }
    return tips;
}

}  // namespace evoskill
