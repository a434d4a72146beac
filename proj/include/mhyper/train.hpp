#pragma once

// Adagrad optimizer, the gradient-computation contract (exact gradients of
// the total loss, finite-difference checked), and the epoch/batch training
// loop with seeded shuffling and per-epoch noise-statistic refresh.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mhyper/evaluator.hpp"
#include "mhyper/gradients.hpp"
#include "mhyper/model.hpp"

namespace mhyper {

struct TrainConfig {
    std::string dataset_dir;
    std::string out_dir = "run";
    double learning_rate = 0.1;
    int dim = 128;
    double lambda = 0.005;
    double beta = 0.2;
    int batch_size = 1000;
    int epochs = 100;
    int eval_every = 10;
    std::uint64_t seed = 1;
    std::string precision = "f32";
    int threads = 1;
    double weight_recon = 1.0;
    double weight_distill = 1.0;
    double weight_triple = 1.0;
    double weight_reg = 1.0;
    double grad_clip = 0.0;        // elementwise cap, 0 = off
    bool early_stop = false;       // patience of 20 evaluations when on
    int early_stop_patience = 20;

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
        if (dim < 1) throw ConfigError("dim must be >= 1");
        if (lambda < 0) throw ConfigError("lambda must be >= 0");
        if (beta < 0 || beta > 1) throw ConfigError("beta must be in [0, 1]");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        if (grad_clip < 0) throw ConfigError("grad_clip must be >= 0");
        if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
        if (precision != "f32" && precision != "f64") {
            throw ConfigError("precision must be f32 or f64");
        }
    }

    template <typename S>
    LossWeights<S> loss_weights() const {
        LossWeights<S> w;
        w.recon = static_cast<S>(weight_recon);
        w.distill = static_cast<S>(weight_distill);
        w.triple = static_cast<S>(weight_triple);
        w.reg = static_cast<S>(weight_reg);
        return w;
    }
};

// ---------------------------------------------------------------------------
// Adagrad
// ---------------------------------------------------------------------------

template <typename S>
struct AdagradState {
    ModelParams<S> accum; // squared-gradient accumulators, same shapes
    S eps = static_cast<S>(1e-10);

    static AdagradState init(const ModelParams<S>& params) {
        AdagradState st;
        st.accum = ModelParams<S>::zeros_like(params);
        return st;
    }
};

// accumulator += g^2; param -= alpha * g / (sqrt(accumulator) + eps).
// Zero-gradient entries leave both the accumulator and the parameter
// untouched, so sparse embedding rows stay as they are.
template <typename S>
void adagrad_step(ModelParams<S>& params, const ModelParams<S>& grads,
                  AdagradState<S>& state, S alpha) {
    auto ptables = params.table_list();
    auto gtables = const_cast<ModelParams<S>&>(grads).table_list();
    auto atables = state.accum.table_list();
    for (std::size_t t = 0; t < ptables.size(); ++t) {
        Mat<S>& p = *ptables[t].second;
        const Mat<S>& g = *gtables[t].second;
        Mat<S>& a = *atables[t].second;
        if (p.rows() != g.rows() || p.cols() != g.cols()) {
            throw DataError("adagrad_step: shape mismatch for table " + ptables[t].first);
        }
        S* pd = p.data();
        const S* gd = g.data();
        S* ad = a.data();
        const Eigen::Index n = p.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (gd[i] == S(0)) continue;
            ad[i] += gd[i] * gd[i];
            pd[i] -= alpha * gd[i] / (std::sqrt(ad[i]) + state.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient contract
// ---------------------------------------------------------------------------

// Exact gradients of the weighted total loss for one batch. Throws with the
// offending table named if any gradient entry is non-finite.
template <typename S>
LossBreakdown<S> compute_gradients(std::span<const Triple> batch,
                                   const ModelParams<S>& params,
                                   const ModelData<S>& data,
                                   const BatchNoise<S>* noise, S lambda,
                                   const LossWeights<S>& weights,
                                   ModelParams<S>& grads) {
    grads.for_each_table([](const char*, Mat<S>& t) { t.setZero(); });
    LossBreakdown<S> loss = run_batch<S>(batch, params, data, noise, lambda, weights, &grads);
    grads.for_each_table([](const char* name, Mat<S>& t) {
        if (!t.allFinite()) {
            throw DataError(std::string("non-finite gradient in table ") + name);
        }
    });
    return loss;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochLog {
    int epoch = 0;
    double total = 0, triple = 0, recon = 0, distill = 0, reg = 0;
    double seconds = 0;
};

struct ValPoint {
    int epoch = 0;
    double mrr = 0;
};

template <typename S>
struct TrainResult {
    ModelParams<S> best_params;
    std::vector<EpochLog> history;
    std::vector<ValPoint> val_history;
    double best_mrr = -1.0;
    int best_epoch = 0;
    bool aborted = false;
    std::string abort_reason;
};

// Epochs of seeded shuffled batches. Per epoch: refresh the noise statistics,
// run loss/gradient/Adagrad per batch, log the loss breakdown; every
// eval_every epochs compute validation MRR and retain the best parameters.
template <typename S>
TrainResult<S> train(const TrainConfig& cfg, const Dataset& dataset,
                     const std::function<void(const EpochLog&)>& on_epoch = {}) {
    cfg.validate();
    const KnowledgeGraph& graph = dataset.graph;
    ModelData<S> data = ModelData<S>::from(dataset.visual, dataset.textual);
    ModelParams<S> params = init_params<S>(graph.num_entities(), graph.num_relations(),
                                           cfg.dim, dataset.visual, dataset.textual,
                                           cfg.seed);
    AdagradState<S> opt = AdagradState<S>::init(params);
    ModelParams<S> grads = ModelParams<S>::zeros_like(params);
    const LossWeights<S> weights = cfg.loss_weights<S>();
    const S lambda = static_cast<S>(cfg.lambda);

    FilterIndex index = build_filter_index(graph);
    TrainResult<S> result;
    result.best_params = params;

    const std::size_t n_train = graph.train.size();
    std::vector<std::size_t> perm(n_train);
    for (std::size_t i = 0; i < n_train; ++i) perm[i] = i;

    auto run_validation = [&](int epoch) {
        if (graph.valid.empty()) return;
        EvalOptions opts;
        opts.threads = cfg.threads;
        auto ranks = evaluate_triples<S>(graph.valid, params, data, graph, index, opts);
        const double mrr = aggregate(ranks).mrr;
        result.val_history.push_back(ValPoint{epoch, mrr});
        if (mrr > result.best_mrr) {
            result.best_mrr = mrr;
            result.best_epoch = epoch;
            result.best_params = params;
        }
    };

    int evals_since_best = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        NoiseModel<S> noise_model;
        if (cfg.beta > 0) {
            noise_model = refresh_noise_model<S>(params, data, static_cast<S>(cfg.beta));
        }

        Rng shuffle_rng = Rng::stream(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
        for (std::size_t i = n_train; i > 1; --i) {
            std::size_t j = shuffle_rng.below(i);
            std::swap(perm[i - 1], perm[j]);
        }

        EpochLog log;
        log.epoch = epoch;
        std::size_t rows_done = 0;
        std::uint64_t batch_index = 0;
        std::vector<Triple> batch;
        batch.reserve(static_cast<std::size_t>(cfg.batch_size));
        while (rows_done < n_train) {
            const std::size_t take =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n_train - rows_done);
            batch.clear();
            for (std::size_t i = 0; i < take; ++i) {
                batch.push_back(graph.train[perm[rows_done + i]]);
            }

            BatchNoise<S> bn;
            const BatchNoise<S>* bn_ptr = nullptr;
            if (cfg.beta > 0) {
                Rng noise_rng = Rng::stream(cfg.seed, "noise",
                                            static_cast<std::uint64_t>(epoch), batch_index);
                bn = sample_batch_noise<S>(static_cast<int>(take), noise_model, noise_rng);
                bn_ptr = &bn;
            }

            LossBreakdown<S> loss;
            try {
                loss = compute_gradients<S>(batch, params, data, bn_ptr, lambda, weights, grads);
            } catch (const DataError& e) {
                result.aborted = true;
                result.abort_reason = e.what();
                return result;
            }
            if (!std::isfinite(static_cast<double>(loss.total))) {
                result.aborted = true;
                result.abort_reason = "non-finite loss at epoch " + std::to_string(epoch);
                return result;
            }
            if (cfg.grad_clip > 0) {
                const S cap = static_cast<S>(cfg.grad_clip);
                grads.for_each_table([cap](const char*, Mat<S>& t) {
                    t = t.cwiseMax(-cap).cwiseMin(cap);
                });
            }
            adagrad_step<S>(params, grads, opt, static_cast<S>(cfg.learning_rate));

            const double w = static_cast<double>(take);
            log.total += w * static_cast<double>(loss.total);
            log.triple += w * static_cast<double>(loss.triple);
            log.recon += w * static_cast<double>(loss.recon);
            log.distill += w * static_cast<double>(loss.distill);
            log.reg += w * static_cast<double>(loss.reg);
            rows_done += take;
            ++batch_index;
        }
        const double denom = static_cast<double>(n_train);
        log.total /= denom;
        log.triple /= denom;
        log.recon /= denom;
        log.distill /= denom;
        log.reg /= denom;
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(log);
        if (on_epoch) on_epoch(log);

        if (epoch % cfg.eval_every == 0) {
            const double prev_best = result.best_mrr;
            run_validation(epoch);
            if (result.best_mrr > prev_best) {
                evals_since_best = 0;
            } else {
                ++evals_since_best;
            }
            if (cfg.early_stop && evals_since_best >= cfg.early_stop_patience) break;
        }
    }

    if (result.val_history.empty()) {
        // never evaluated: the final parameters are the checkpoint
        result.best_params = params;
        result.best_epoch = cfg.epochs;
    }
    return result;
}

} // namespace mhyper
