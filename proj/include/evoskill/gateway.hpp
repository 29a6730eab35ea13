#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "evoskill/text.hpp"

namespace evoskill {

using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Config

struct ProviderProfile {
    std::string model;
    std::string api_key;
    std::string base_url;
};

struct OfflineEmbeddingConfig {
    Eigen::Index dimension = 64;
    std::uint64_t seed = 42;
};

struct GatewayConfig {
    std::string active_profile;
    std::map<std::string, ProviderProfile> profiles;
    std::map<std::string, std::string> env;
    OfflineEmbeddingConfig offline_embedding;
    nlohmann::json raw;  // unknown keys preserved

    const ProviderProfile& active() const {
        auto it = profiles.find(active_profile);
        if (it == profiles.end())
            throw std::runtime_error("active_profile not found: " + active_profile);
        return it->second;
    }
};

inline GatewayConfig parse_config(const nlohmann::json& j) {
    GatewayConfig cfg;
    cfg.raw = j;
    const auto& llm = j.at("llm");
    cfg.active_profile = llm.at("active_profile").get<std::string>();
    for (const auto& [name, p] : llm.at("profiles").items()) {
        ProviderProfile prof;
        prof.model = p.value("model", "");
        prof.api_key = p.value("api_key", "");
        prof.base_url = p.value("base_url", "");
        cfg.profiles[name] = prof;
    }
    if (j.contains("env"))
        cfg.env = j.at("env").get<std::map<std::string, std::string>>();
    if (j.contains("embedding")) {
        const auto& e = j.at("embedding");
        cfg.offline_embedding.dimension = e.value("dimension", std::int64_t{64});
        cfg.offline_embedding.seed = e.value("seed", std::uint64_t{42});
    }
    if (!cfg.profiles.count(cfg.active_profile))
        throw std::runtime_error("active_profile names missing profile: " + cfg.active_profile);
    return cfg;
}

inline GatewayConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("malformed config " + path + ": " + e.what());
    }
    return parse_config(j);
}

inline void export_env(const GatewayConfig& cfg) {
    for (const auto& [k, v] : cfg.env) ::setenv(k.c_str(), v.c_str(), 1);
}

// ---------------------------------------------------------------------------
// Chat kernels

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

struct ChatExchange {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 2048;
};

class ChatKernel {
public:
    virtual ~ChatKernel() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

// Deterministic test double: first matching rule wins. A rule matches when
// `match` occurs in the last user message (or anywhere in the conversation
// when scope is "any") and, if set, `requires` occurs somewhere in the
// conversation.
struct ScriptedRule {
    std::string match;
    std::string response;
    std::string scope = "last_user";  // last_user | any
    std::string requires_anywhere;    // empty = no extra condition
};

class ScriptedKernel : public ChatKernel {
public:
    ScriptedKernel() = default;
    ScriptedKernel(std::vector<ScriptedRule> rules, std::string default_response)
        : rules_(std::move(rules)), default_response_(std::move(default_response)) {}

    void add_rule(ScriptedRule r) { rules_.push_back(std::move(r)); }
    void set_default(std::string r) { default_response_ = std::move(r); }

    std::string complete(const std::vector<ChatMessage>& messages) override {
        std::string last_user;
        std::string all;
        for (const auto& m : messages) {
            all += m.content;
            all += '\n';
            if (m.role == "user") last_user = m.content;
        }
        for (const auto& r : rules_) {
            const std::string& haystack = r.scope == "any" ? all : last_user;
            if (haystack.find(r.match) == std::string::npos) continue;
            if (!r.requires_anywhere.empty() &&
                all.find(r.requires_anywhere) == std::string::npos)
                continue;
            return r.response;
        }
        return default_response_;
    }

    static ScriptedKernel from_json(const nlohmann::json& j) {
        ScriptedKernel k;
        for (const auto& r : j.value("rules", nlohmann::json::array())) {
            ScriptedRule rule;
            rule.match = r.at("match").get<std::string>();
            rule.response = r.at("response").get<std::string>();
            rule.scope = r.value("scope", "last_user");
            rule.requires_anywhere = r.value("requires", "");
            k.add_rule(std::move(rule));
        }
        k.set_default(j.value("default", ""));
        return k;
    }

    static ScriptedKernel from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read scripted rules: " + path);
        return from_json(nlohmann::json::parse(in));
    }

private:
    std::vector<ScriptedRule> rules_;
    std::string default_response_;
};

// ---------------------------------------------------------------------------
// HTTP transport

struct HttpResponse {
    int status = 0;
    std::string body;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    // Throws on transport-level failure (connection refused etc.).
    virtual HttpResponse post(const std::string& base_url, const std::string& path,
                              const std::map<std::string, std::string>& headers,
                              const std::string& body) = 0;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds backoff_base{200};
};

class AuthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

// Retries transport errors and 5xx with exponential backoff; 401/403 fail fast.
inline HttpResponse post_with_retries(HttpTransport& transport, const std::string& base_url,
                                      const std::string& path,
                                      const std::map<std::string, std::string>& headers,
                                      const std::string& body, const RetryPolicy& retry) {
    std::string last_error;
    for (int attempt = 0; attempt < retry.attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(retry.backoff_base * (1 << (attempt - 1)));
        try {
            HttpResponse resp = transport.post(base_url, path, headers, body);
            if (resp.status == 401 || resp.status == 403)
                throw AuthError("auth failure, HTTP " + std::to_string(resp.status));
            if (resp.status >= 500) {
                last_error = "HTTP " + std::to_string(resp.status);
                continue;
            }
            if (resp.status >= 400)
                throw std::runtime_error("HTTP " + std::to_string(resp.status) + ": " + resp.body);
            return resp;
        } catch (const AuthError&) {
            throw;
        } catch (const std::runtime_error& e) {
            if (std::string(e.what()).rfind("HTTP 4", 0) == 0) throw;
            last_error = e.what();
        }
    }
    throw std::runtime_error("retries exhausted: " + last_error);
}

}  // namespace detail

inline std::string chat(const GatewayConfig& cfg, const ChatExchange& exchange,
                        HttpTransport& transport, const RetryPolicy& retry = {}) {
    if (exchange.messages.empty()) throw std::invalid_argument("empty exchange");
    const auto& prof = cfg.active();
    nlohmann::json req = {
        {"model", prof.model},
        {"temperature", exchange.temperature},
        {"max_tokens", exchange.max_tokens},
        {"messages", nlohmann::json::array()},
    };
    for (const auto& m : exchange.messages)
        req["messages"].push_back({{"role", m.role}, {"content", m.content}});
    std::map<std::string, std::string> headers = {
        {"Authorization", "Bearer " + prof.api_key},
        {"Content-Type", "application/json"},
    };
    auto resp = detail::post_with_retries(transport, prof.base_url, "/chat/completions", headers,
                                          req.dump(), retry);
    auto j = nlohmann::json::parse(resp.body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

// Chat kernel backed by the OpenAI-compatible wire format.
class HttpChatKernel : public ChatKernel {
public:
    HttpChatKernel(GatewayConfig cfg, std::shared_ptr<HttpTransport> transport,
                   RetryPolicy retry = {})
        : cfg_(std::move(cfg)), transport_(std::move(transport)), retry_(retry) {}

    std::string complete(const std::vector<ChatMessage>& messages) override {
        ChatExchange ex;
        ex.messages = messages;
        return chat(cfg_, ex, *transport_, retry_);
    }

private:
    GatewayConfig cfg_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
};

// ---------------------------------------------------------------------------
// Embeddings

class Embedder {
public:
    virtual ~Embedder() = default;
    // One unit-normalised vector per text, order-preserving.
    virtual std::vector<Vec> embed(const std::vector<std::string>& texts) = 0;

    Vec embed_one(const std::string& text) { return embed({text}).front(); }
};

// Deterministic offline fallback: seeded feature hashing of unigrams and
// bigrams into a fixed dimension, then unit normalisation. No network, no
// model weights.
class OfflineHashEmbedder : public Embedder {
public:
    explicit OfflineHashEmbedder(Eigen::Index dimension = 64, std::uint64_t seed = 42)
        : dim_(dimension), seed_(seed) {
        if (dimension < 1) throw std::invalid_argument("dimension must be positive");
    }

    Eigen::Index dimension() const { return dim_; }

    std::vector<Vec> embed(const std::vector<std::string>& texts) override {
        std::vector<Vec> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_text(t));
        return out;
    }

private:
    Vec embed_text(const std::string& text) const {
        Vec v = Vec::Zero(dim_);
        auto tokens = tokenize(text);
        auto bump = [&](const std::string& feature, double w) {
            std::uint64_t h = fnv1a64(feature, seed_ ^ 0x9e3779b97f4a7c15ULL);
            double sign = (h >> 63) ? 1.0 : -1.0;
            v[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))] += sign * w;
        };
        for (const auto& t : tokens) bump(t, 1.0);
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
            bump(tokens[i] + " " + tokens[i + 1], 0.5);
        double n = v.norm();
        if (n == 0) {
            // empty text still needs a deterministic unit vector
            v[0] = 1.0;
            return v;
        }
        return v / n;
    }

    Eigen::Index dim_;
    std::uint64_t seed_;
};

class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(GatewayConfig cfg, std::shared_ptr<HttpTransport> transport,
                 RetryPolicy retry = {}, std::size_t batch_size = 64)
        : cfg_(std::move(cfg)), transport_(std::move(transport)), retry_(retry),
          batch_size_(batch_size) {}

    std::vector<Vec> embed(const std::vector<std::string>& texts) override {
        if (texts.empty()) throw std::invalid_argument("texts must be non-empty");
        const auto& prof = cfg_.active();
        std::map<std::string, std::string> headers = {
            {"Authorization", "Bearer " + prof.api_key},
            {"Content-Type", "application/json"},
        };
        std::vector<Vec> out;
        for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
            std::size_t end = std::min(texts.size(), start + batch_size_);
            nlohmann::json req = {
                {"model", prof.model},
                {"input", std::vector<std::string>(texts.begin() + start, texts.begin() + end)},
            };
            auto resp = detail::post_with_retries(*transport_, prof.base_url, "/embeddings",
                                                  headers, req.dump(), retry_);
            auto j = nlohmann::json::parse(resp.body);
            for (const auto& item : j.at("data")) {
                auto values = item.at("embedding").get<std::vector<double>>();
                Vec v = Eigen::Map<Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
                if (!out.empty() && v.size() != out.front().size())
                    throw std::runtime_error("inconsistent embedding dimension in batch");
                double n = v.norm();
                out.push_back(n > 0 ? Vec(v / n) : v);
            }
        }
        if (out.size() != texts.size())
            throw std::runtime_error("embedding count mismatch");
        return out;
    }

private:
    GatewayConfig cfg_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
    std::size_t batch_size_;
};

}  // namespace evoskill
