#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "evoskill/skill_store.hpp"
#include "evoskill/text.hpp"

namespace evoskill {

using Vec = Eigen::VectorXd;

struct ScoredId {
    std::string id;
    double score = 0.0;
};

// Ordered best-first, ties broken by lexicographically smaller id.
using RankedList = std::vector<ScoredId>;

inline void sort_ranked(RankedList& list) {
    std::stable_sort(list.begin(), list.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
}

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

class SparseIndex {
public:
    void add(const std::string& id, const std::string& text) {
        auto tokens = tokenize(text);
        auto& tf = postings_cache_[id];
        for (const auto& t : tokens) ++tf[t];
        doc_lengths_[id] = tokens.size();
        for (const auto& [t, n] : tf) {
            postings_[t].emplace_back(id, n);
            // document frequency
        }
        for (const auto& [t, n] : tf) ++vocabulary_[t];
        total_len_ += tokens.size();
    }

    std::size_t size() const { return doc_lengths_.size(); }

    double avg_doc_length() const {
        return doc_lengths_.empty() ? 0.0
                                    : static_cast<double>(total_len_) / doc_lengths_.size();
    }

    RankedList search(const std::string& query, std::size_t k, Bm25Params params = {}) const {
        if (k < 1) throw std::invalid_argument("k must be >= 1");
        RankedList out;
        if (doc_lengths_.empty()) return out;
        const double n_docs = static_cast<double>(doc_lengths_.size());
        const double avgdl = avg_doc_length();
        std::map<std::string, double> scores;
        for (const auto& term : tokenize(query)) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const double df = static_cast<double>(vocabulary_.at(term));
            const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
            for (const auto& [id, tf] : it->second) {
                const double dl = static_cast<double>(doc_lengths_.at(id));
                const double denom = tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl);
                scores[id] += idf * tf * (params.k1 + 1.0) / denom;
            }
        }
        for (const auto& [id, s] : scores) out.push_back({id, s});
        sort_ranked(out);
        if (out.size() > k) out.resize(k);
        return out;
    }

private:
    std::map<std::string, std::size_t> vocabulary_;  // token -> doc frequency
    std::map<std::string, std::vector<std::pair<std::string, std::size_t>>> postings_;
    std::map<std::string, std::size_t> doc_lengths_;
    std::map<std::string, std::map<std::string, std::size_t>> postings_cache_;
    std::size_t total_len_ = 0;
};

class DenseIndex {
public:
    explicit DenseIndex(Eigen::Index dimension) : dimension_(dimension) {
        if (dimension < 1) throw std::invalid_argument("dimension must be positive");
    }

    Eigen::Index dimension() const { return dimension_; }
    std::size_t size() const { return vectors_.size(); }

    // Vectors are unit-normalised at insert.
    void add(const std::string& id, const Vec& v) {
        if (v.size() != dimension_) throw std::invalid_argument("dimension mismatch on insert");
        double n = v.norm();
        vectors_[id] = n > 0 ? Vec(v / n) : v;
    }

    const std::map<std::string, Vec>& vectors() const { return vectors_; }

    RankedList search(const Vec& query, std::size_t k) const {
        if (k < 1) throw std::invalid_argument("k must be >= 1");
        if (query.size() != dimension_) throw std::invalid_argument("query dimension mismatch");
        RankedList out;
        out.reserve(vectors_.size());
        for (const auto& [id, v] : vectors_) out.push_back({id, v.dot(query)});
        sort_ranked(out);
        if (out.size() > k) out.resize(k);
        return out;
    }

private:
    Eigen::Index dimension_;
    std::map<std::string, Vec> vectors_;
};

// Score-aware reciprocal rank fusion: a weighted blend of the RRF rank term
// and the per-list min-max normalised score. Degenerate lists (all scores
// equal) normalise to 1.0 for every member.
inline RankedList rrf_fuse(const std::vector<RankedList>& lists, std::size_t k_rrf,
                           double weight) {
    if (k_rrf < 1) throw std::invalid_argument("k_rrf must be >= 1");
    std::map<std::string, double> fused;
    for (const auto& list : lists) {
        if (list.empty()) continue;
        double lo = list.front().score, hi = list.front().score;
        for (const auto& e : list) {
            lo = std::min(lo, e.score);
            hi = std::max(hi, e.score);
        }
        const double span = hi - lo;
        for (std::size_t r = 0; r < list.size(); ++r) {
            const double rank_term = 1.0 / (static_cast<double>(k_rrf) + (r + 1));
            const double norm = span > 0 ? (list[r].score - lo) / span : 1.0;
            fused[list[r].id] += weight * rank_term + (1.0 - weight) * norm;
        }
    }
    RankedList out;
    for (const auto& [id, s] : fused) out.push_back({id, s});
    sort_ranked(out);
    return out;
}

// Reranker contract: receives the query and the full record, returns a score.
using Reranker = std::function<double(const std::string& query, const SkillRecord&)>;

struct RetrieveParams {
    std::size_t k_rrf = 60;
    double rrf_weight = 0.7;
    Bm25Params bm25;
};

// Hybrid pipeline: BM25 and dense each recall top-4k, fusion merges them,
// and when a reranker is present the fused top-2k are rescored.
inline RankedList retrieve(const SkillLibrary& snapshot, const SparseIndex& sparse,
                           const DenseIndex& dense, const std::string& query,
                           const Vec& query_vector, std::size_t k,
                           const Reranker& reranker = nullptr,
                           const RetrieveParams& params = {}) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    RankedList lexical = sparse.size() ? sparse.search(query, 4 * k, params.bm25) : RankedList{};
    RankedList semantic = dense.size() ? dense.search(query_vector, 4 * k) : RankedList{};
    RankedList fused = rrf_fuse({lexical, semantic}, params.k_rrf, params.rrf_weight);
    if (reranker) {
        std::size_t window = std::min(fused.size(), 2 * k);
        RankedList rescored(fused.begin(), fused.begin() + window);
        for (auto& e : rescored) e.score = reranker(query, snapshot.at(e.id));
        sort_ranked(rescored);
        std::copy(fused.begin() + window, fused.end(), std::back_inserter(rescored));
        fused = std::move(rescored);
    }
    if (fused.size() > k) fused.resize(k);
    return fused;
}

inline SparseIndex build_sparse_index(const SkillLibrary& library) {
    SparseIndex idx;
    for (const auto& [id, s] : library.skills) idx.add(id, s.document());
    return idx;
}

}  // namespace evoskill
