#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "evoskill/text.hpp"

namespace evoskill {

struct CatalogEntry {
    std::string id;
    std::string name;
    std::string description;
    std::vector<std::string> keywords;
    std::int64_t stars = 0;
    std::string updated_at;  // ISO-8601

    bool operator==(const CatalogEntry&) const = default;
};

struct IngestResult {
    std::vector<CatalogEntry> entries;
    std::size_t skipped = 0;  // malformed lines
    std::vector<std::string> warnings;
};

// Reads a JSONL catalog, keeping entries with stars strictly above min_stars.
// Malformed lines are skipped with a warning; an unreadable file throws.
inline IngestResult ingest_catalog(const std::string& path, std::int64_t min_stars) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read catalog file: " + path);
    IngestResult res;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            CatalogEntry e;
            e.id = j.at("id").get<std::string>();
            e.name = j.at("name").get<std::string>();
            e.description = j.at("description").get<std::string>();
            if (j.contains("keywords"))
                e.keywords = j.at("keywords").get<std::vector<std::string>>();
            e.stars = j.at("stars").get<std::int64_t>();
            e.updated_at = j.at("updatedAt").get<std::string>();
            if (e.id.empty() || e.stars < 0) throw std::runtime_error("invalid entry");
            if (e.stars > min_stars) res.entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            ++res.skipped;
            res.warnings.push_back("line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return res;
}

namespace detail {

// Sort key for picking one representative per duplicate group:
// higher stars, then newer updatedAt, then lexicographically larger id.
// Unparseable timestamps sort as oldest.
inline bool better_representative(const CatalogEntry& a, const CatalogEntry& b) {
    if (a.stars != b.stars) return a.stars > b.stars;
    std::int64_t ta = INT64_MIN, tb = INT64_MIN;
    parse_iso8601(a.updated_at, ta);
    parse_iso8601(b.updated_at, tb);
    if (ta != tb) return ta > tb;
    return a.id > b.id;
}

inline std::vector<CatalogEntry> dedup_by_key(
    const std::vector<CatalogEntry>& entries,
    std::string (*key)(const CatalogEntry&)) {
    std::map<std::string, CatalogEntry> best;
    for (const auto& e : entries) {
        auto k = key(e);
        auto it = best.find(k);
        if (it == best.end() || better_representative(e, it->second)) best[k] = e;
    }
    std::vector<CatalogEntry> out;
    out.reserve(best.size());
    for (auto& [k, e] : best) out.push_back(std::move(e));
    return out;
}

}  // namespace detail

// One representative per description hash (and optionally per exact name),
// chosen by the stars/updatedAt/id chain. Output sorted by id.
inline std::vector<CatalogEntry> dedup_catalog(const std::vector<CatalogEntry>& entries,
                                               bool name_pass = true) {
    auto out = detail::dedup_by_key(entries, +[](const CatalogEntry& e) {
        return sha256_hex(normalize_whitespace(e.description));
    });
    if (name_pass) {
        out = detail::dedup_by_key(out, +[](const CatalogEntry& e) { return e.name; });
    }
    std::sort(out.begin(), out.end(),
              [](const CatalogEntry& a, const CatalogEntry& b) { return a.id < b.id; });
    return out;
}

}  // namespace evoskill
