#pragma once

// Release-gate identity suites: algebra identities, the pairwise-expansion
// score equivalence, gradient finite-difference checks, and metric oracle
// tests. Shared by the `selfcheck` CLI command and the acceptance suite.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "mhyper/eval.hpp"
#include "mhyper/gradients.hpp"
#include "mhyper/hypercomplex.hpp"
#include "mhyper/train.hpp"

namespace mhyper::selfcheck {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

template <typename S>
hc::Biquat<S> random_biquat(Rng& rng, std::size_t d) {
    hc::Biquat<S> q(d);
    for (auto& v : q.flat) v = static_cast<S>(rng.uniform(-1, 1));
    return q;
}

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30});
}

template <typename S>
double max_rel_diff(const hc::Biquat<S>& a, const hc::Biquat<S>& b) {
    double worst = 0;
    for (std::size_t i = 0; i < a.flat.size(); ++i) {
        const double denom = std::max({std::abs(static_cast<double>(a.flat[i])),
                                       std::abs(static_cast<double>(b.flat[i])), 1.0});
        worst = std::max(worst,
                         std::abs(static_cast<double>(a.flat[i] - b.flat[i])) / denom);
    }
    return worst;
}

inline ModalityFeatures random_features(int n_entities, int dim, std::uint64_t seed,
                                        const char* tag, int mask_every = 4) {
    ModalityFeatures f;
    f.dim = dim;
    f.rows = MatF::Zero(n_entities, dim);
    f.present.assign(static_cast<std::size_t>(n_entities), 1);
    Rng rng = Rng::stream(seed, "selfcheck-features", Rng::mix(0, tag));
    for (int e = 0; e < n_entities; ++e) {
        if (mask_every > 0 && e % mask_every == 0) {
            f.present[static_cast<std::size_t>(e)] = 0;
            continue;
        }
        for (int x = 0; x < dim; ++x) f.rows(e, x) = static_cast<float>(rng.uniform(-1, 1));
    }
    return f;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Algebra identities: unit, associativity, distributivity, anti-commutation,
// quaternion norm multiplicativity.
// ---------------------------------------------------------------------------

inline SuiteResult algebra_suite(const hc::StructureConstants& sc, int cases,
                                 std::initializer_list<std::size_t> dims, double tol) {
    using hc::Biquat;
    SuiteResult result;
    result.name = "algebra";
    double worst = 0;
    Rng rng(20240601);

    // anti-commutation of the pure imaginary bases
    for (int i = 1; i <= 3; ++i) {
        const int k = i % 3 + 1;
        Biquat<double> qi(1), qk(1);
        qi.re(i)[0] = 1;
        qk.re(k)[0] = 1;
        auto ik = hamilton_product(qi, qk, sc);
        auto ki = hamilton_product(qk, qi, sc);
        for (std::size_t x = 0; x < ik.flat.size(); ++x) {
            worst = std::max(worst, std::abs(ik.flat[x] + ki.flat[x]));
        }
    }

    for (std::size_t d : dims) {
        const auto unit = Biquat<double>::one(d);
        for (int rep = 0; rep < cases; ++rep) {
            auto a = detail::random_biquat<double>(rng, d);
            auto b = detail::random_biquat<double>(rng, d);
            auto c = detail::random_biquat<double>(rng, d);

            worst = std::max(worst, detail::max_rel_diff(hamilton_product(unit, a, sc), a));
            worst = std::max(worst, detail::max_rel_diff(hamilton_product(a, unit, sc), a));
            worst = std::max(
                worst, detail::max_rel_diff(
                           hamilton_product(hamilton_product(a, b, sc), c, sc),
                           hamilton_product(a, hamilton_product(b, c, sc), sc)));
            worst = std::max(
                worst, detail::max_rel_diff(
                           hamilton_product(a, biquat_add(b, c), sc),
                           biquat_add(hamilton_product(a, b, sc), hamilton_product(a, c, sc))));

            // norm multiplicativity per d-slice in the real sub-algebra
            Biquat<double> ra(d), rb(d);
            for (int coeff = 0; coeff < 4; ++coeff) {
                for (std::size_t x = 0; x < d; ++x) {
                    ra.re(coeff)[x] = rng.uniform(-1, 1);
                    rb.re(coeff)[x] = rng.uniform(-1, 1);
                }
            }
            auto rp = hamilton_product(ra, rb, sc);
            for (std::size_t x = 0; x < d; ++x) {
                double na = 0, nb = 0, np = 0;
                for (int coeff = 0; coeff < 4; ++coeff) {
                    na += ra.re(coeff)[x] * ra.re(coeff)[x];
                    nb += rb.re(coeff)[x] * rb.re(coeff)[x];
                    np += rp.re(coeff)[x] * rp.re(coeff)[x];
                }
                worst = std::max(worst, detail::rel_diff(np, na * nb));
            }
        }
    }
    result.passed = worst <= tol;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max relative error %.3e (tolerance %.0e)", worst, tol);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Pairwise-expansion equivalence of the composed score.
// ---------------------------------------------------------------------------

template <typename S>
SuiteResult theorem1_suite(const hc::StructureConstants& sc, int cases,
                           std::initializer_list<std::size_t> dims, double tol) {
    SuiteResult result;
    result.name = "score-expansion";
    double worst = 0;
    Rng rng(20240602);
    for (std::size_t d : dims) {
        for (int rep = 0; rep < cases; ++rep) {
            auto qh = detail::random_biquat<S>(rng, d);
            auto qtr = detail::random_biquat<S>(rng, d);
            auto qrot = detail::random_biquat<S>(rng, d);
            auto qt = detail::random_biquat<S>(rng, d);
            const double composed = static_cast<double>(biquat_score(qh, qtr, qrot, qt, sc));
            const double expanded =
                static_cast<double>(hc::score_expansion_oracle(qh, qtr, qrot, qt));
            worst = std::max(worst, detail::rel_diff(composed, expanded));
        }
    }
    result.passed = worst <= tol;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max relative error %.3e (tolerance %.0e)", worst, tol);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Gradient finite-difference check on a 5-entity / 2-relation / d=4 instance
// with all loss terms active at beta = 0.5.
// ---------------------------------------------------------------------------

struct GradCheckInstance {
    ModalityFeatures vis, txt;
    ModelData<double> data;
    ModelParams<double> params;
    std::vector<Triple> batch;
    BatchNoise<double> noise;
};

// Seed 12342 keeps every rectifier pre-activation well clear of the
// finite-difference step.
inline GradCheckInstance grad_check_instance(std::uint64_t seed = 12342) {
    GradCheckInstance g;
    g.vis = detail::random_features(5, 6, seed, "vis");
    g.txt = detail::random_features(5, 5, seed, "txt");
    g.data = ModelData<double>::from(g.vis, g.txt);
    g.params = init_params<double>(5, 2, 4, g.vis, g.txt, seed);
    g.batch = {{0, 0, 1}, {2, 1, 3}, {4, 0, 0}, {1, 1, 1}, {3, 0, 2}, {2, 0, 2}};
    NoiseModel<double> nm = refresh_noise_model<double>(g.params, g.data, 0.5);
    Rng rng = Rng::stream(seed, "noise", 1, 0);
    g.noise = sample_batch_noise<double>(static_cast<int>(g.batch.size()), nm, rng);
    return g;
}

struct TableError {
    std::string table;
    double rel_err = 0;
};

// Central finite differences at step 1e-4 against the analytic gradients,
// per-table norm-relative error. The distillation teacher is pinned to the
// unperturbed parameters, matching its stop-gradient semantics.
inline std::vector<TableError> finite_difference_errors(GradCheckInstance& g,
                                                        double lambda,
                                                        const LossWeights<double>& weights) {
    ModelParams<double> grads = ModelParams<double>::zeros_like(g.params);
    compute_gradients<double>(g.batch, g.params, g.data, &g.noise, lambda, weights, grads);

    const ModelParams<double> frozen = g.params;
    const double h = 1e-4;
    std::vector<TableError> out;
    auto tables = g.params.table_list();
    auto gtables = grads.table_list();
    for (std::size_t t = 0; t < tables.size(); ++t) {
        Mat<double>& table = *tables[t].second;
        const Mat<double>& analytic = *gtables[t].second;
        double num = 0, den_a = 0, den_f = 0;
        for (Eigen::Index i = 0; i < table.size(); ++i) {
            const double saved = table.data()[i];
            table.data()[i] = saved + h;
            const double up = run_batch<double>(g.batch, g.params, g.data, &g.noise,
                                                lambda, weights, nullptr, &frozen)
                                  .total;
            table.data()[i] = saved - h;
            const double down = run_batch<double>(g.batch, g.params, g.data, &g.noise,
                                                  lambda, weights, nullptr, &frozen)
                                    .total;
            table.data()[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double diff = analytic.data()[i] - fd;
            num += diff * diff;
            den_a += analytic.data()[i] * analytic.data()[i];
            den_f += fd * fd;
        }
        const double denom = std::max(std::sqrt(den_a) + std::sqrt(den_f), 1e-10);
        out.push_back(TableError{tables[t].first, std::sqrt(num) / denom});
    }
    return out;
}

inline SuiteResult gradient_suite() {
    SuiteResult result;
    result.name = "gradients";
    auto g = grad_check_instance();
    auto errors = finite_difference_errors(g, 0.01, {});
    double worst = 0;
    std::string worst_table = "-";
    for (const auto& e : errors) {
        if (e.rel_err > worst) {
            worst = e.rel_err;
            worst_table = e.table;
        }
    }
    result.passed = worst <= 1e-4;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "worst table %s: relative error %.3e (tolerance 1e-04)",
                  worst_table.c_str(), worst);
    result.detail = buf;
    return result;
}

// ---------------------------------------------------------------------------
// Metric oracle: pessimistic ranking vs an exhaustive sort-based oracle, plus
// Hit@K monotonicity.
// ---------------------------------------------------------------------------

inline SuiteResult metric_suite() {
    SuiteResult result;
    result.name = "metrics";
    Rng rng(20240603);
    bool ok = true;

    for (int rep = 0; rep < 1000 && ok; ++rep) {
        std::vector<double> scores(10);
        for (auto& s : scores) s = static_cast<double>(rng.below(5));
        std::vector<std::uint8_t> mask(10, 1);
        for (auto& v : mask) v = rng.below(4) ? 1 : 0;
        const std::int32_t truth = static_cast<std::int32_t>(rng.below(10));
        mask[static_cast<std::size_t>(truth)] = 1;

        std::vector<double> kept;
        for (std::size_t e = 0; e < scores.size(); ++e) {
            if (mask[e]) kept.push_back(scores[e]);
        }
        std::sort(kept.begin(), kept.end(), std::greater<double>());
        const double target = scores[static_cast<std::size_t>(truth)];
        auto it = std::upper_bound(kept.begin(), kept.end(), target, std::greater<double>());
        const auto oracle = static_cast<std::int64_t>(std::distance(kept.begin(), it));
        ok = rank_query<double>(scores, truth,
                                std::span<const std::uint8_t>(mask.data(), mask.size())) ==
             oracle;
    }

    for (int rep = 0; rep < 1000 && ok; ++rep) {
        std::vector<RankResult> results(1 + rng.below(24));
        for (auto& r : results) {
            r.head_rank = 1 + static_cast<std::int64_t>(rng.below(60));
            r.tail_rank = 1 + static_cast<std::int64_t>(rng.below(60));
        }
        auto m = aggregate(results);
        ok = m.hit1 <= m.hit3 + 1e-12 && m.hit3 <= m.hit10 + 1e-12 &&
             m.hit10 <= 1.0 + 1e-12 && m.hit1 <= m.mrr + 1e-12 && m.mrr <= 1.0 + 1e-12;
    }

    result.passed = ok;
    result.detail = ok ? "rank oracle and Hit@K monotonicity hold"
                       : "rank oracle or monotonicity violated";
    return result;
}

// The selfcheck command's suite set. A corrupted structure-constant table
// (test hook) must break the score-expansion suite.
inline std::vector<SuiteResult> run_all(const hc::StructureConstants& sc, bool use_f64) {
    std::vector<SuiteResult> out;
    out.push_back(algebra_suite(sc, 1000, {1, 4, 32}, 1e-9));
    if (use_f64) {
        out.push_back(theorem1_suite<double>(sc, 100, {1, 2, 8}, 1e-9));
    } else {
        out.push_back(theorem1_suite<float>(sc, 100, {1, 2, 8}, 1e-4));
    }
    out.push_back(gradient_suite());
    out.push_back(metric_suite());
    return out;
}

} // namespace mhyper::selfcheck
