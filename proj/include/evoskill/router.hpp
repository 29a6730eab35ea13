#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "evoskill/gateway.hpp"
#include "evoskill/retrieval.hpp"

namespace evoskill {

using Mat = Eigen::MatrixXd;

// Trainable square matrix applied to both skill and query embeddings before
// the dot product. Identity-initialised, so an untrained router scores by
// plain cosine.
struct RouterAdapter {
    Mat matrix;

    explicit RouterAdapter(Eigen::Index dimension = 0) {
        if (dimension > 0) matrix = Mat::Identity(dimension, dimension);
    }

    Eigen::Index dimension() const { return matrix.rows(); }
};

// s(d, q) = (A e_d)^T (A u_q)
inline double adapter_score(const RouterAdapter& adapter, const Vec& skill_vec,
                            const Vec& query_vec) {
    if (skill_vec.size() != adapter.dimension() || query_vec.size() != adapter.dimension())
        throw std::invalid_argument("adapter/vector dimension mismatch");
    return (adapter.matrix * skill_vec).dot(adapter.matrix * query_vec);
}

enum class Polarity { positive, hard_negative };

struct QueryPair {
    std::string skill_id;
    std::string query;
    Polarity polarity = Polarity::positive;
    std::string rationale;
};

struct TrainingBatch {
    std::vector<Vec> skills;                  // d_i, i < B
    std::vector<std::vector<Vec>> positives;  // Q_i+
    std::vector<std::vector<Vec>> negatives;  // Q_i-
    double temperature = 0.07;

    void validate() const {
        if (temperature <= 0) throw std::invalid_argument("temperature must be positive");
        if (skills.empty()) throw std::invalid_argument("batch must contain at least one skill");
        if (positives.size() != skills.size() || negatives.size() != skills.size())
            throw std::invalid_argument("per-skill query sets must match batch size");
        for (const auto& p : positives)
            if (p.empty()) throw std::invalid_argument("every skill needs at least one positive");
    }
};

namespace detail {

struct PoolEntry {
    const Vec* vec;
    std::size_t owner;  // index of the skill the query was generated for
    bool positive;
};

inline std::vector<PoolEntry> build_pool(const TrainingBatch& batch) {
    std::vector<PoolEntry> pool;
    for (std::size_t i = 0; i < batch.skills.size(); ++i) {
        for (const auto& q : batch.positives[i]) pool.push_back({&q, i, true});
        for (const auto& q : batch.negatives[i]) pool.push_back({&q, i, false});
    }
    return pool;
}

}  // namespace detail

// Multi-positive InfoNCE over the in-batch pool Q = union of all positives
// and negatives:  L_i = -log( sum_{q in Q_i+} exp(s_i,q / tau)
//                            / sum_{q in Q} exp(s_i,q / tau) ),
// batch loss = mean over i. Stabilised by max-subtraction.
inline double infonce_loss(const TrainingBatch& batch, const RouterAdapter& adapter) {
    batch.validate();
    auto pool = detail::build_pool(batch);
    const double tau = batch.temperature;
    double total = 0.0;
    for (std::size_t i = 0; i < batch.skills.size(); ++i) {
        std::vector<double> scores(pool.size());
        double max_s = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pool.size(); ++j) {
            scores[j] = adapter_score(adapter, batch.skills[i], *pool[j].vec) / tau;
            max_s = std::max(max_s, scores[j]);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            double e = std::exp(scores[j] - max_s);
            den += e;
            if (pool[j].owner == i && pool[j].positive) num += e;
        }
        total += -std::log(num / den);
    }
    return total / static_cast<double>(batch.skills.size());
}

// Analytic dL/dA. For each (skill i, query q) the score contributes
// dS/dA = A (e_i u_q^T + u_q e_i^T), weighted by the softmax residual
// p_all(q) - 1[q in Q_i+] p_pos(q), scaled by 1/(B tau).
inline Mat infonce_gradient(const TrainingBatch& batch, const RouterAdapter& adapter) {
    batch.validate();
    auto pool = detail::build_pool(batch);
    const double tau = batch.temperature;
    const Eigen::Index m = adapter.dimension();
    Mat outer_sum = Mat::Zero(m, m);
    for (std::size_t i = 0; i < batch.skills.size(); ++i) {
        std::vector<double> scores(pool.size());
        double max_s = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pool.size(); ++j) {
            scores[j] = adapter_score(adapter, batch.skills[i], *pool[j].vec) / tau;
            max_s = std::max(max_s, scores[j]);
        }
        double den = 0.0, num = 0.0;
        for (std::size_t j = 0; j < pool.size(); ++j) {
            double e = std::exp(scores[j] - max_s);
            den += e;
            if (pool[j].owner == i && pool[j].positive) num += e;
        }
        Vec weighted = Vec::Zero(m);
        for (std::size_t j = 0; j < pool.size(); ++j) {
            double e = std::exp(scores[j] - max_s);
            double w = e / den;
            if (pool[j].owner == i && pool[j].positive) w -= e / num;
            weighted += w * (*pool[j].vec);
        }
        outer_sum += batch.skills[i] * weighted.transpose() + weighted * batch.skills[i].transpose();
    }
    const double scale = 1.0 / (tau * static_cast<double>(batch.skills.size()));
    return scale * (adapter.matrix * outer_sum);
}

struct TrainConfig {
    double temperature = 0.07;
    double learning_rate = 0.05;
    int epochs = 30;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
};

struct TrainLog {
    std::vector<double> epoch_loss;
};

// Plain gradient descent on the InfoNCE loss with deterministic seeded
// shuffling. Skill and query texts are embedded once up front.
inline RouterAdapter train_adapter(const std::vector<QueryPair>& pairs,
                                   const std::map<std::string, std::string>& skill_texts,
                                   Embedder& embedder, const TrainConfig& config,
                                   TrainLog* log = nullptr) {
    // Group queries by skill.
    std::map<std::string, std::vector<const QueryPair*>> by_skill;
    for (const auto& p : pairs) by_skill[p.skill_id].push_back(&p);
    for (const auto& [id, ps] : by_skill) {
        if (!skill_texts.count(id))
            throw std::runtime_error("no skill text for id: " + id);
        bool has_pos = std::any_of(ps.begin(), ps.end(), [](const QueryPair* p) {
            return p->polarity == Polarity::positive;
        });
        if (!has_pos)
            throw std::runtime_error("skill has no positive training queries: " + id);
    }

    std::vector<std::string> skill_ids;
    for (const auto& [id, ps] : by_skill) skill_ids.push_back(id);

    // Embed everything once.
    std::map<std::string, Vec> skill_vecs;
    for (const auto& id : skill_ids) {
        try {
            skill_vecs[id] = embedder.embed_one(skill_texts.at(id));
        } catch (const std::exception& e) {
            throw std::runtime_error("embedding failed for skill " + id + ": " + e.what());
        }
    }
    std::map<std::string, std::vector<std::pair<Vec, bool>>> query_vecs;  // (vec, positive)
    for (const auto& id : skill_ids) {
        for (const QueryPair* p : by_skill[id]) {
            try {
                query_vecs[id].emplace_back(embedder.embed_one(p->query),
                                            p->polarity == Polarity::positive);
            } catch (const std::exception& e) {
                throw std::runtime_error("embedding failed for query '" + p->query +
                                         "': " + e.what());
            }
        }
    }

    Eigen::Index dim = skill_vecs.begin()->second.size();
    RouterAdapter adapter(dim);
    std::mt19937_64 rng(config.seed);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::string> order = skill_ids;
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(order.size(), start + config.batch_size);
            TrainingBatch batch;
            batch.temperature = config.temperature;
            for (std::size_t i = start; i < end; ++i) {
                const auto& id = order[i];
                batch.skills.push_back(skill_vecs[id]);
                std::vector<Vec> pos, neg;
                for (const auto& [v, is_pos] : query_vecs[id])
                    (is_pos ? pos : neg).push_back(v);
                batch.positives.push_back(std::move(pos));
                batch.negatives.push_back(std::move(neg));
            }
            epoch_loss += infonce_loss(batch, adapter);
            ++n_batches;
            adapter.matrix -= config.learning_rate * infonce_gradient(batch, adapter);
        }
        if (log && n_batches) log->epoch_loss.push_back(epoch_loss / n_batches);
    }
    return adapter;
}

// ---------------------------------------------------------------------------
// Routing policy

struct RoutingPolicy {
    RouterAdapter adapter;
    double temperature = 0.07;
    double miss_threshold = 0.15;  // minimum acceptable top-1 adapter score
};

// Softmax over adapter scores with temperature, max-subtracted.
inline std::vector<std::pair<std::string, double>> boltzmann_policy(
    const RoutingPolicy& policy, const Vec& query_vec,
    const std::vector<std::pair<std::string, Vec>>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("no candidates");
    if (policy.temperature <= 0) throw std::invalid_argument("temperature must be positive");
    std::vector<double> scores;
    scores.reserve(candidates.size());
    double max_s = -std::numeric_limits<double>::infinity();
    for (const auto& [id, v] : candidates) {
        scores.push_back(adapter_score(policy.adapter, v, query_vec) / policy.temperature);
        max_s = std::max(max_s, scores.back());
    }
    double den = 0.0;
    for (double s : scores) den += std::exp(s - max_s);
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        out.emplace_back(candidates[i].first, std::exp(scores[i] - max_s) / den);
    return out;
}

// MISS is a value, not an error: nullopt when nothing clears the threshold.
inline std::optional<std::string> route(const RoutingPolicy& policy, const RankedList& rescored) {
    if (rescored.empty()) return std::nullopt;
    RankedList sorted = rescored;
    sort_ranked(sorted);
    if (sorted.front().score < policy.miss_threshold) return std::nullopt;
    return sorted.front().id;
}

// ---------------------------------------------------------------------------
// Pipeline helpers

struct RouterPipeline {
    const SkillLibrary* library = nullptr;
    SparseIndex sparse;
    DenseIndex dense{1};
    std::map<std::string, Vec> doc_vecs;

    static RouterPipeline build(const SkillLibrary& library, Embedder& embedder) {
        RouterPipeline p;
        p.library = &library;
        p.sparse = build_sparse_index(library);
        Eigen::Index dim = 1;
        std::vector<std::string> ids;
        std::vector<std::string> docs;
        for (const auto& [id, s] : library.skills) {
            ids.push_back(id);
            docs.push_back(s.document());
        }
        if (!ids.empty()) {
            auto vecs = embedder.embed(docs);
            dim = vecs.front().size();
            p.dense = DenseIndex(dim);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                p.dense.add(ids[i], vecs[i]);
                p.doc_vecs[ids[i]] = vecs[i];
            }
        }
        return p;
    }

    // Full retrieve + adapter rescore. Scores in the reranked window are
    // adapter scores, so the miss threshold applies directly.
    RankedList route_candidates(const RoutingPolicy& policy, const std::string& goal,
                                const Vec& goal_vec, std::size_t k,
                                const RetrieveParams& params = {}) const {
        if (library->skills.empty()) return {};
        // Evaluate the pipeline with a floor on the candidate pool so the
        // rescoring stage has room to reorder; truncate to k afterwards.
        std::size_t k_eff = std::max<std::size_t>(k, std::min<std::size_t>(8, library->skills.size()));
        Reranker rescore = [&](const std::string&, const SkillRecord& s) {
            return adapter_score(policy.adapter, doc_vecs.at(s.id), goal_vec);
        };
        RankedList out =
            retrieve(*library, sparse, dense, goal, goal_vec, k_eff, rescore, params);
        if (out.size() > k) out.resize(k);
        return out;
    }
};

// Fraction of queries whose gold skill lands in the top-k of the full
// retrieve + rescore pipeline.
inline double recall_at_k(const RoutingPolicy& policy,
                          const std::vector<std::pair<std::string, std::string>>& eval_pairs,
                          const SkillLibrary& library, Embedder& embedder, std::size_t k) {
    if (eval_pairs.empty()) throw std::invalid_argument("no eval pairs");
    for (const auto& [q, gold] : eval_pairs)
        if (!library.contains(gold)) throw std::runtime_error("unknown gold skill id: " + gold);
    auto pipeline = RouterPipeline::build(library, embedder);
    std::size_t hits = 0;
    for (const auto& [query, gold] : eval_pairs) {
        auto top = pipeline.route_candidates(policy, query, embedder.embed_one(query), k);
        for (const auto& e : top)
            if (e.id == gold) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / eval_pairs.size();
}

// Lexical baseline for the same metric.
inline double recall_at_k_bm25(const std::vector<std::pair<std::string, std::string>>& eval_pairs,
                               const SkillLibrary& library, std::size_t k) {
    if (eval_pairs.empty()) throw std::invalid_argument("no eval pairs");
    auto sparse = build_sparse_index(library);
    std::size_t hits = 0;
    for (const auto& [query, gold] : eval_pairs) {
        if (!library.contains(gold)) throw std::runtime_error("unknown gold skill id: " + gold);
        auto top = sparse.search(query, k);
        for (const auto& e : top)
            if (e.id == gold) {
                ++hits;
                break;
            }
    }
    return static_cast<double>(hits) / eval_pairs.size();
}

// ---------------------------------------------------------------------------
// Persistence

inline void save_adapter(const RouterAdapter& adapter, const TrainConfig& config,
                         const std::string& path) {
    nlohmann::json j;
    j["dimension"] = adapter.dimension();
    std::vector<double> entries;
    entries.reserve(adapter.matrix.size());
    for (Eigen::Index r = 0; r < adapter.matrix.rows(); ++r)
        for (Eigen::Index c = 0; c < adapter.matrix.cols(); ++c)
            entries.push_back(adapter.matrix(r, c));
    j["matrix"] = entries;  // row-major
    j["training"] = {{"temperature", config.temperature},
                     {"learning_rate", config.learning_rate},
                     {"epochs", config.epochs},
                     {"batch_size", config.batch_size},
                     {"seed", config.seed}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write adapter: " + path);
    out << j.dump(2) << "\n";
}

inline RouterAdapter load_adapter(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read adapter: " + path);
    auto j = nlohmann::json::parse(in);
    Eigen::Index dim = j.at("dimension").get<Eigen::Index>();
    auto entries = j.at("matrix").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(entries.size()) != dim * dim)
        throw std::runtime_error("adapter matrix size mismatch");
    RouterAdapter adapter(dim);
    for (Eigen::Index r = 0; r < dim; ++r)
        for (Eigen::Index c = 0; c < dim; ++c)
            adapter.matrix(r, c) = entries[static_cast<std::size_t>(r * dim + c)];
    return adapter;
}

// JSONL dataset of {skill_id, query, polarity, rationale}.
inline void save_query_pairs(const std::vector<QueryPair>& pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write query pairs: " + path);
    for (const auto& p : pairs) {
        nlohmann::json j = {
            {"skill_id", p.skill_id},
            {"query", p.query},
            {"polarity", p.polarity == Polarity::positive ? "positive" : "hard_negative"},
            {"rationale", p.rationale},
        };
        out << j.dump() << "\n";
    }
}

inline std::vector<QueryPair> load_query_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read query pairs: " + path);
    std::vector<QueryPair> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        QueryPair p;
        p.skill_id = j.at("skill_id").get<std::string>();
        p.query = j.at("query").get<std::string>();
        p.polarity = j.at("polarity").get<std::string>() == "positive" ? Polarity::positive
                                                                       : Polarity::hard_negative;
        p.rationale = j.value("rationale", "");
        if (p.query.empty()) throw std::runtime_error("empty query in pair dataset");
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace evoskill
