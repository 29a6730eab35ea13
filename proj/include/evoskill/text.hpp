#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <ctime>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

namespace evoskill {

// Lowercase, split on non-alphanumeric runs, drop empties.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// Collapse whitespace runs to single spaces, strip ends. No case folding.
inline std::string normalize_whitespace(std::string_view text) {
    std::string out;
    bool in_ws = true;  // swallow leading whitespace
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            in_ws = true;
        } else {
            if (in_ws && !out.empty()) out.push_back(' ');
            out.push_back(static_cast<char>(c));
            in_ws = false;
        }
    }
    return out;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

// FNV-1a, 64-bit. std::hash is not stable across runs/platforms.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Parses "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS[Z]" to seconds since epoch.
// Returns false on anything else; callers treat unparseable as oldest.
inline bool parse_iso8601(const std::string& s, std::int64_t& out) {
    std::tm tm{};
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
    int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &se);
    if (n != 3 && n != 6) return false;
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return false;
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = se;
    std::time_t t = timegm(&tm);
    if (t == static_cast<std::time_t>(-1)) return false;
    out = static_cast<std::int64_t>(t);
    return true;
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Extracts the outermost {...} block, tolerating prose around it.
inline bool extract_json_object(std::string_view text, std::string& out) {
    size_t start = text.find('{');
    if (start == std::string_view::npos) return false;
    int depth = 0;
    bool in_str = false;
    bool esc = false;
    for (size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_str) {
            if (esc) esc = false;
            else if (c == '\\') esc = true;
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        else if (c == '{') ++depth;
        else if (c == '}') {
            if (--depth == 0) {
                out = std::string(text.substr(start, i - start + 1));
                return true;
            }
        }
    }
    return false;
}

}  // namespace evoskill
