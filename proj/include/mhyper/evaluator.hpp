#pragma once

// Link-prediction evaluation driver: every test triple yields a tail query
// (h, r, ?) and a head query evaluated as the tail query (t, r^-1, ?).
// Queries are grouped by relation so candidate fusion happens once per
// relation, and are embarrassingly parallel within a group.

#include <atomic>
#include <thread>
#include <vector>

#include "mhyper/eval.hpp"
#include "mhyper/kgdata.hpp"
#include "mhyper/model.hpp"

namespace mhyper {

struct EvalOptions {
    Ablation ablation;
    ScoreVariant variant = ScoreVariant::Full;
    int threads = 1;
    bool filtered = true;
};

template <typename S>
std::vector<RankResult> evaluate_triples(const std::vector<Triple>& triples,
                                         const ModelParams<S>& params,
                                         const ModelData<S>& data,
                                         const KnowledgeGraph& graph,
                                         const FilterIndex& index,
                                         const EvalOptions& opts = {}) {
    struct Query {
        std::int32_t head, rel, truth;
        std::size_t triple_idx;
        bool is_head_side;
    };
    std::vector<Query> queries;
    queries.reserve(2 * triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const Triple& t = triples[i];
        queries.push_back(Query{t.h, t.r, t.t, i, false});
        queries.push_back(Query{t.t, graph.inverse_of(t.r), t.h, i, true});
    }
    std::stable_sort(queries.begin(), queries.end(),
                     [](const Query& a, const Query& b) { return a.rel < b.rel; });

    std::vector<RankResult> results(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) results[i].relation = triples[i].r;

    auto ids = all_entity_ids(params);
    FerfRows<S> ferf = ferf_forward<S>(params, data, ids, nullptr, opts.ablation);

    static constexpr int kAllBlocks[4] = {0, 1, 2, 3};
    static constexpr int kJointBlock[1] = {0};

    std::size_t at = 0;
    while (at < queries.size()) {
        const std::int32_t rel = queries[at].rel;
        std::size_t end = at;
        while (end < queries.size() && queries[end].rel == rel) ++end;

        GateFusion<S> fusion = gate_fuse(params, ferf, ids, rel, opts.ablation);
        Mat<S> candidates = assemble_all(params, ferf, fusion, opts.ablation);

        auto run_range = [&](std::size_t lo, std::size_t hi) {
            std::vector<S> translated(static_cast<std::size_t>(params.point8d()));
            std::vector<S> rotated(static_cast<std::size_t>(params.point8d()));
            std::vector<S> scores(static_cast<std::size_t>(params.n_entities));
            for (std::size_t q = lo; q < hi; ++q) {
                const Query& query = queries[q];
                const S* head = candidates.row(query.head).data();
                switch (opts.variant) {
                    case ScoreVariant::Full:
                        transform_query(params, head, rel, opts.ablation,
                                        translated.data(), rotated.data());
                        score_row(candidates, rotated.data(), scores.data());
                        break;
                    case ScoreVariant::Fusion:
                        score_row_complex_blocks(params, head, rel, candidates,
                                                 std::span<const int>(kJointBlock, 1),
                                                 scores.data());
                        break;
                    case ScoreVariant::Ensemble:
                        score_row_complex_blocks(params, head, rel, candidates,
                                                 std::span<const int>(kAllBlocks, 4),
                                                 scores.data());
                        break;
                }
                std::vector<std::uint8_t> mask;
                if (opts.filtered) {
                    mask = filtered_candidates(query.head, rel, query.truth, index,
                                               params.n_entities);
                }
                const std::int64_t rank = rank_query<S>(
                    std::span<const S>(scores.data(), scores.size()), query.truth,
                    std::span<const std::uint8_t>(mask.data(), mask.size()));
                if (query.is_head_side) {
                    results[query.triple_idx].head_rank = rank;
                } else {
                    results[query.triple_idx].tail_rank = rank;
                }
            }
        };

        const std::size_t count = end - at;
        if (opts.threads <= 1 || count < 2) {
            run_range(at, end);
        } else {
            const int n_threads = std::min<int>(opts.threads, static_cast<int>(count));
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(n_threads));
            const std::size_t chunk = (count + static_cast<std::size_t>(n_threads) - 1) /
                                      static_cast<std::size_t>(n_threads);
            for (int w = 0; w < n_threads; ++w) {
                const std::size_t lo = at + static_cast<std::size_t>(w) * chunk;
                const std::size_t hi = std::min(end, lo + chunk);
                if (lo >= hi) break;
                pool.emplace_back(run_range, lo, hi);
            }
            for (auto& th : pool) th.join();
        }
        at = end;
    }
    return results;
}

} // namespace mhyper
