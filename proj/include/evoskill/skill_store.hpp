#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace evoskill {

struct UtilityStats {
    std::int64_t n_succ = 0;
    std::int64_t n_fail = 0;
    double prior_utility = 0.5;

    std::int64_t samples() const { return n_succ + n_fail; }

    // Empirical success rate, prior before any evidence.
    double value() const {
        if (samples() == 0) return prior_utility;
        return static_cast<double>(n_succ) / static_cast<double>(samples());
    }

    bool operator==(const UtilityStats&) const = default;
};

struct SkillRecord {
    std::string id;
    std::string name;
    std::string description;
    std::string spec_text;                        // SKILL.md body
    std::map<std::string, std::string> prompt_files;  // name -> text
    std::map<std::string, std::string> script_files;  // name -> text
    std::int64_t version = 1;
    UtilityStats utility;

    // Text indexed for retrieval: name + description + spec.
    std::string document() const { return name + "\n" + description + "\n" + spec_text; }

    bool operator==(const SkillRecord&) const = default;
};

struct SkillLibrary {
    std::map<std::string, SkillRecord> skills;
    std::set<std::string> atomic_ids;

    bool contains(const std::string& id) const { return skills.count(id) > 0; }

    const SkillRecord& at(const std::string& id) const {
        auto it = skills.find(id);
        if (it == skills.end()) throw std::runtime_error("unknown skill id: " + id);
        return it->second;
    }

    SkillRecord& at(const std::string& id) {
        auto it = skills.find(id);
        if (it == skills.end()) throw std::runtime_error("unknown skill id: " + id);
        return it->second;
    }

    void add(SkillRecord skill, bool atomic = false) {
        if (skills.count(skill.id)) throw std::runtime_error("duplicate skill id: " + skill.id);
        if (atomic) atomic_ids.insert(skill.id);
        skills.emplace(skill.id, std::move(skill));
    }

    // Appends "-2", "-3", ... until the id is free.
    std::string fresh_id(const std::string& base) const {
        if (!skills.count(base)) return base;
        for (int i = 2;; ++i) {
            std::string cand = base + "-" + std::to_string(i);
            if (!skills.count(cand)) return cand;
        }
    }
};

// Utility bookkeeping for one judged outcome. Returns the empirical rate.
inline double record_outcome(SkillLibrary& library, const std::string& skill_id, bool success) {
    auto& s = library.at(skill_id);
    if (success) ++s.utility.n_succ;
    else ++s.utility.n_fail;
    return static_cast<double>(s.utility.n_succ) / static_cast<double>(s.utility.samples());
}

// Test hook: invoked between write stages, may throw to simulate I/O faults.
using SaveFaultHook = std::function<void(const std::string& stage)>;

// Persists a skill folder atomically: everything lands in a temp dir first,
// then the temp dir is swapped in. A crash mid-write leaves the previous
// version intact.
inline void save_skill(const std::filesystem::path& library_root, const SkillRecord& skill,
                       const SaveFaultHook& fault = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(library_root);
    fs::path dest = library_root / skill.id;
    fs::path tmp = library_root / (".tmp-" + skill.id);
    fs::path old = library_root / (".old-" + skill.id);
    fs::remove_all(tmp);
    fs::remove_all(old);

    auto write_file = [&](const fs::path& p, const std::string& content) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + p.string());
        out << content;
        if (!out) throw std::runtime_error("write failed: " + p.string());
    };

    try {
        fs::create_directories(tmp / "prompts");
        fs::create_directories(tmp / "scripts");
        write_file(tmp / "SKILL.md", skill.spec_text);
        if (fault) fault("after-skill-md");
        for (const auto& [name, text] : skill.prompt_files) write_file(tmp / "prompts" / name, text);
        for (const auto& [name, text] : skill.script_files) write_file(tmp / "scripts" / name, text);
        nlohmann::json meta = {
            {"version", skill.version},
            {"n_succ", skill.utility.n_succ},
            {"n_fail", skill.utility.n_fail},
            {"name", skill.name},
            {"description", skill.description},
            {"prior_utility", skill.utility.prior_utility},
        };
        write_file(tmp / "meta.json", meta.dump(2) + "\n");
        if (fault) fault("before-swap");
    } catch (...) {
        fs::remove_all(tmp);
        throw;
    }

    // Swap: old version moves aside, temp takes its place.
    if (fs::exists(dest)) fs::rename(dest, old);
    fs::rename(tmp, dest);
    fs::remove_all(old);
}

inline SkillRecord load_skill(const std::filesystem::path& library_root, const std::string& id) {
    namespace fs = std::filesystem;
    fs::path dir = library_root / id;
    if (!fs::exists(dir / "meta.json")) throw std::runtime_error("no such skill on disk: " + id);

    auto read_file = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read " + p.string());
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };

    SkillRecord s;
    s.id = id;
    s.spec_text = read_file(dir / "SKILL.md");
    auto meta = nlohmann::json::parse(read_file(dir / "meta.json"));
    s.version = meta.at("version").get<std::int64_t>();
    s.utility.n_succ = meta.at("n_succ").get<std::int64_t>();
    s.utility.n_fail = meta.at("n_fail").get<std::int64_t>();
    s.name = meta.value("name", id);
    s.description = meta.value("description", "");
    s.utility.prior_utility = meta.value("prior_utility", 0.5);
    for (const char* sub : {"prompts", "scripts"}) {
        fs::path d = dir / sub;
        if (!fs::exists(d)) continue;
        for (const auto& entry : fs::directory_iterator(d)) {
            if (!entry.is_regular_file()) continue;
            auto& files = std::string(sub) == "prompts" ? s.prompt_files : s.script_files;
            files[entry.path().filename().string()] = read_file(entry.path());
        }
    }
    return s;
}

inline SkillLibrary load_library(const std::filesystem::path& library_root,
                                 const std::set<std::string>& atomic_ids = {}) {
    namespace fs = std::filesystem;
    SkillLibrary lib;
    if (!fs::exists(library_root)) return lib;
    for (const auto& entry : fs::directory_iterator(library_root)) {
        if (!entry.is_directory()) continue;
        std::string id = entry.path().filename().string();
        if (id.starts_with(".")) continue;
        lib.add(load_skill(library_root, id), atomic_ids.count(id) > 0);
    }
    return lib;
}

}  // namespace evoskill
