#pragma once

// Filtered link-prediction ranking and MRR / Hit@K aggregation. Head queries
// (?, r, t) are evaluated as tail queries (t, r^-1, ?), so everything here is
// expressed in terms of tail ranking.

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mhyper {

struct RankResult {
    std::int32_t relation = 0; // original relation of the test triple
    std::int64_t head_rank = 0;
    std::int64_t tail_rank = 0;
};

struct Metrics {
    double mrr = 0.0;
    double hit1 = 0.0;
    double hit3 = 0.0;
    double hit10 = 0.0;
};

// Pessimistic rank of true_id among the unmasked candidates: ties count
// against the model. mask entries are 1 for candidates kept; true_id must be
// kept (the filter always keeps self).
template <typename S>
std::int64_t rank_query(std::span<const S> scores, std::int32_t true_id,
                        std::span<const std::uint8_t> mask) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(true_id)]) {
        throw std::logic_error("rank_query: true candidate is masked out");
    }
    const S true_score = scores[static_cast<std::size_t>(true_id)];
    std::int64_t rank = 1;
    for (std::size_t e = 0; e < scores.size(); ++e) {
        if (static_cast<std::int32_t>(e) == true_id) continue;
        if (!mask.empty() && !mask[e]) continue;
        if (scores[e] >= true_score) ++rank;
    }
    return rank;
}

// Paper-style sums over head and tail predictions, normalized by 2*|results|
// so a perfect model scores 1.0 on every metric.
inline Metrics aggregate(const std::vector<RankResult>& results) {
    if (results.empty()) {
        throw std::invalid_argument("aggregate: empty result set");
    }
    Metrics m;
    for (const auto& r : results) {
        m.mrr += 1.0 / static_cast<double>(r.head_rank) +
                 1.0 / static_cast<double>(r.tail_rank);
        m.hit1 += (r.head_rank <= 1) + (r.tail_rank <= 1);
        m.hit3 += (r.head_rank <= 3) + (r.tail_rank <= 3);
        m.hit10 += (r.head_rank <= 10) + (r.tail_rank <= 10);
    }
    const double denom = 2.0 * static_cast<double>(results.size());
    m.mrr /= denom;
    m.hit1 /= denom;
    m.hit3 /= denom;
    m.hit10 /= denom;
    return m;
}

struct RelationMetrics {
    std::int32_t relation = 0;
    std::size_t count = 0;
    double mrr = 0.0;
};

// Per-relation MRR (Table-style breakdown); count-weighted mean of the rows
// equals the overall MRR.
inline std::vector<RelationMetrics> per_relation_mrr(const std::vector<RankResult>& results) {
    std::map<std::int32_t, std::pair<std::size_t, double>> acc;
    for (const auto& r : results) {
        auto& [count, sum] = acc[r.relation];
        ++count;
        sum += 1.0 / static_cast<double>(r.head_rank) +
               1.0 / static_cast<double>(r.tail_rank);
    }
    std::vector<RelationMetrics> out;
    out.reserve(acc.size());
    for (const auto& [rel, cs] : acc) {
        out.push_back(RelationMetrics{rel, cs.first,
                                      cs.second / (2.0 * static_cast<double>(cs.first))});
    }
    return out;
}

// Machine-readable metric block, percent scale.
std::string format_metrics(const Metrics& m);

} // namespace mhyper
