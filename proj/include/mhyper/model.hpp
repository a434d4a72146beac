#pragma once

// Learnable tables and the forward computation: entity representation
// factorization (modality-specific + task-specific parts tied by a
// reconstruction loss), relation-aware gated fusion with a learnable
// per-relation softmax temperature, biquaternion assembly and scoring, and
// the individual loss terms.

#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "mhyper/errors.hpp"
#include "mhyper/hypercomplex.hpp"
#include "mhyper/kgdata.hpp"
#include "mhyper/rng.hpp"
#include "mhyper/stats.hpp"

namespace mhyper {

// modality indices used everywhere: structural, visual, textual
inline constexpr int kModS = 0;
inline constexpr int kModV = 1;
inline constexpr int kModT = 2;
inline constexpr const char* kModNames[3] = {"s", "v", "t"};

template <typename S>
inline S softplus(S x) {
    return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename S>
inline S logistic(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

// softplus(raw) == 1
template <typename S>
inline S inverse_softplus_one() {
    return static_cast<S>(0.5413248546129181);
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

template <typename S>
struct ModelParams {
    int d = 0;           // complex half-width per coefficient block
    int n_entities = 0;
    int n_relations = 0; // inverses included
    int dim_visual = 0;
    int dim_textual = 0;

    Mat<S> ent_struct_modal;               // E x 2d
    std::array<Mat<S>, 3> ent_task;        // e^m_t, m in {s,v,t}: E x 2d
    Mat<S> ent_task_joint;                 // e^j_t: E x 2d
    std::array<Mat<S>, 2> proj_w;          // visual/textual: 2d x d^m
    std::array<Mat<S>, 2> proj_b;          // 2d x 1
    std::array<Mat<S>, 3> recon_w1;        // 2d x 6d
    std::array<Mat<S>, 3> recon_b1;        // 2d x 1
    std::array<Mat<S>, 3> recon_w2;        // 2d x 2d
    std::array<Mat<S>, 3> recon_b2;        // 2d x 1
    std::array<Mat<S>, 3> gate_w;          // 1 x 18d
    std::array<Mat<S>, 3> gate_b;          // 1 x 1
    Mat<S> rel_trans;                      // R x 8d
    Mat<S> rel_rot;                        // R x 8d
    Mat<S> rel_temp_raw;                   // R x 1, tau_r = softplus(raw)

    int block2d() const { return 2 * d; }
    int point8d() const { return 8 * d; }
    int gate_in() const { return 18 * d; }

    S tau(std::int32_t rel) const { return softplus(rel_temp_raw(rel, 0)); }

    template <typename F>
    void for_each_table(F&& f) {
        f("ent_struct_modal", ent_struct_modal);
        f("ent_task_s", ent_task[kModS]);
        f("ent_task_v", ent_task[kModV]);
        f("ent_task_t", ent_task[kModT]);
        f("ent_task_j", ent_task_joint);
        f("proj_v_w", proj_w[0]);
        f("proj_v_b", proj_b[0]);
        f("proj_t_w", proj_w[1]);
        f("proj_t_b", proj_b[1]);
        for (int m = 0; m < 3; ++m) {
            const std::string base = std::string("recon_") + kModNames[m];
            f((base + "_w1").c_str(), recon_w1[m]);
            f((base + "_b1").c_str(), recon_b1[m]);
            f((base + "_w2").c_str(), recon_w2[m]);
            f((base + "_b2").c_str(), recon_b2[m]);
        }
        for (int m = 0; m < 3; ++m) {
            const std::string base = std::string("gate_") + kModNames[m];
            f((base + "_w").c_str(), gate_w[m]);
            f((base + "_b").c_str(), gate_b[m]);
        }
        f("rel_trans", rel_trans);
        f("rel_rot", rel_rot);
        f("rel_temp_raw", rel_temp_raw);
    }

    template <typename F>
    void for_each_table(F&& f) const {
        const_cast<ModelParams*>(this)->for_each_table(
            [&](const char* name, Mat<S>& table) { f(name, static_cast<const Mat<S>&>(table)); });
    }

    std::vector<std::pair<std::string, Mat<S>*>> table_list() {
        std::vector<std::pair<std::string, Mat<S>*>> out;
        for_each_table([&](const char* name, Mat<S>& t) { out.emplace_back(name, &t); });
        return out;
    }

    static ModelParams zeros_like(const ModelParams& other) {
        ModelParams z = other;
        z.for_each_table([](const char*, Mat<S>& t) { t.setZero(); });
        return z;
    }
};

// Entity features cast to the working precision.
template <typename S>
struct ModelData {
    Mat<S> visual;  // E x d^v
    Mat<S> textual; // E x d^t
    std::vector<std::uint8_t> visual_present;
    std::vector<std::uint8_t> textual_present;

    static ModelData from(const ModalityFeatures& vis, const ModalityFeatures& txt) {
        ModelData d;
        d.visual = vis.rows.template cast<S>();
        d.textual = txt.rows.template cast<S>();
        d.visual_present = vis.present;
        d.textual_present = txt.present;
        return d;
    }
};

// ---------------------------------------------------------------------------
// PCA initialization for the visual/textual task-specific tables
// ---------------------------------------------------------------------------

// Present rows are centered and projected onto the top-k covariance
// eigenvectors (raw signed coordinates, so antipodal points +-v land on
// +-|v|). Dimensions past the feature width and rows without features get
// small seeded random values.
template <typename S>
Mat<S> pca_init(const ModalityFeatures& features, int k, std::uint64_t seed,
                const char* stream_tag) {
    const int n_entities = static_cast<int>(features.present.size());
    Mat<S> out(n_entities, k);
    Rng rng = Rng::stream(seed, "init", Rng::mix(0, stream_tag));
    auto small_random = [&]() { return static_cast<S>(rng.uniform(-1e-3, 1e-3)); };

    auto present = features.present_rows();
    if (present.empty()) {
        std::cerr << "warning: PCA init for '" << stream_tag
                  << "': no feature rows present, falling back to random init\n";
        for (int e = 0; e < n_entities; ++e)
            for (int c = 0; c < k; ++c) out(e, c) = small_random();
        return out;
    }

    const int n = static_cast<int>(present.size());
    const int dm = features.dim;
    Mat<double> x(n, dm);
    for (int i = 0; i < n; ++i) x.row(i) = features.rows.row(present[static_cast<std::size_t>(i)]).template cast<double>();
    Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;

    Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw DataError("PCA eigendecomposition failed");
    }

    const int kk = std::min(k, dm);
    Mat<double> proj(n, kk);
    for (int c = 0; c < kk; ++c) {
        const int src = dm - 1 - c; // eigenvalues ascend; take from the top
        proj.col(c) = x * solver.eigenvectors().col(src);
    }

    std::vector<std::uint8_t> is_present(static_cast<std::size_t>(n_entities), 0);
    for (int i = 0; i < n; ++i) is_present[static_cast<std::size_t>(present[static_cast<std::size_t>(i)])] = 1;

    int row_of = 0;
    for (int e = 0; e < n_entities; ++e) {
        if (is_present[static_cast<std::size_t>(e)]) {
            for (int c = 0; c < kk; ++c) out(e, c) = static_cast<S>(proj(row_of, c));
            for (int c = kk; c < k; ++c) out(e, c) = small_random();
            ++row_of;
        } else {
            for (int c = 0; c < k; ++c) out(e, c) = small_random();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

template <typename S>
ModelParams<S> init_params(int n_entities, int n_relations, int d,
                           const ModalityFeatures& visual,
                           const ModalityFeatures& textual, std::uint64_t seed) {
    ModelParams<S> p;
    p.d = d;
    p.n_entities = n_entities;
    p.n_relations = n_relations;
    p.dim_visual = visual.dim;
    p.dim_textual = textual.dim;
    const int b2 = p.block2d();

    p.ent_struct_modal.resize(n_entities, b2);
    for (auto& t : p.ent_task) t.resize(n_entities, b2);
    p.ent_task_joint.resize(n_entities, b2);
    p.proj_w[0].resize(b2, visual.dim);
    p.proj_w[1].resize(b2, textual.dim);
    p.proj_b[0].resize(b2, 1);
    p.proj_b[1].resize(b2, 1);
    for (int m = 0; m < 3; ++m) {
        p.recon_w1[m].resize(b2, 3 * b2);
        p.recon_b1[m].resize(b2, 1);
        p.recon_w2[m].resize(b2, b2);
        p.recon_b2[m].resize(b2, 1);
        p.gate_w[m].resize(1, p.gate_in());
        p.gate_b[m].resize(1, 1);
    }
    p.rel_trans.resize(n_relations, p.point8d());
    p.rel_rot.resize(n_relations, p.point8d());
    p.rel_temp_raw.resize(n_relations, 1);

    auto fill_uniform = [&](Mat<S>& t, const char* name, double scale) {
        Rng rng = Rng::stream(seed, "init", Rng::mix(0, name));
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c)
                t(r, c) = static_cast<S>(rng.uniform(-scale, scale));
    };
    auto fill_fan_in = [&](Mat<S>& t, const char* name) {
        fill_uniform(t, name, 1.0 / std::sqrt(static_cast<double>(t.cols())));
    };

    fill_uniform(p.ent_struct_modal, "ent_struct_modal", 0.05);
    fill_uniform(p.ent_task[kModS], "ent_task_s", 0.05);
    fill_uniform(p.ent_task_joint, "ent_task_j", 0.05);
    p.ent_task[kModV] = pca_init<S>(visual, b2, seed, "pca_visual");
    p.ent_task[kModT] = pca_init<S>(textual, b2, seed, "pca_textual");
    fill_fan_in(p.proj_w[0], "proj_v_w");
    fill_fan_in(p.proj_w[1], "proj_t_w");
    p.proj_b[0].setZero();
    p.proj_b[1].setZero();
    for (int m = 0; m < 3; ++m) {
        const std::string base = std::string("recon_") + kModNames[m];
        fill_fan_in(p.recon_w1[m], (base + "_w1").c_str());
        fill_fan_in(p.recon_w2[m], (base + "_w2").c_str());
        p.recon_b1[m].setZero();
        p.recon_b2[m].setZero();
        fill_fan_in(p.gate_w[m], (std::string("gate_") + kModNames[m] + "_w").c_str());
        p.gate_b[m].setZero();
    }
    fill_uniform(p.rel_trans, "rel_trans", 0.05);
    fill_uniform(p.rel_rot, "rel_rot", 0.05);
    p.rel_temp_raw.setConstant(inverse_softplus_one<S>());
    return p;
}

// ---------------------------------------------------------------------------
// Noise model for the self-distillation path
// ---------------------------------------------------------------------------

// Per-modality mean/variance of the raw-stage representations: the structural
// table rows, and the pooled visual/textual feature rows (present rows only).
template <typename S>
struct NoiseModel {
    std::array<Vec<S>, 3> mean; // dims: 2d, d^v, d^t
    std::array<Vec<S>, 3> var;
    S beta = S(0);
};

template <typename S>
void noise_stats(const Mat<S>& raw_rows, const std::vector<int>* rows,
                 Vec<S>& mean, Vec<S>& var) {
    column_stats(raw_rows, rows, mean, var);
}

template <typename S>
NoiseModel<S> refresh_noise_model(const ModelParams<S>& params,
                                  const ModelData<S>& data, S beta) {
    NoiseModel<S> nm;
    nm.beta = beta;
    noise_stats<S>(params.ent_struct_modal, nullptr, nm.mean[kModS], nm.var[kModS]);
    std::vector<int> vis_rows, txt_rows;
    for (std::size_t e = 0; e < data.visual_present.size(); ++e)
        if (data.visual_present[e]) vis_rows.push_back(static_cast<int>(e));
    for (std::size_t e = 0; e < data.textual_present.size(); ++e)
        if (data.textual_present[e]) txt_rows.push_back(static_cast<int>(e));
    noise_stats<S>(data.visual, &vis_rows, nm.mean[kModV], nm.var[kModV]);
    noise_stats<S>(data.textual, &txt_rows, nm.mean[kModT], nm.var[kModT]);
    return nm;
}

// Noise draws for one batch: a seeded beta-fraction of rows is selected and
// every selected row gets one Gaussian draw per raw-stage dimension of each
// modality.
template <typename S>
struct BatchNoise {
    std::vector<std::uint8_t> selected;  // per batch row
    std::array<Mat<S>, 3> eps;           // B x {2d, d^v, d^t}
    bool any = false;
};

template <typename S>
BatchNoise<S> sample_batch_noise(int batch_size, const NoiseModel<S>& nm, Rng& rng) {
    BatchNoise<S> bn;
    bn.selected.assign(static_cast<std::size_t>(batch_size), 0);
    const int k = static_cast<int>(std::llround(static_cast<double>(nm.beta) * batch_size));
    std::vector<int> idx(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(batch_size - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    for (int i = 0; i < k; ++i) bn.selected[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
    for (int m = 0; m < 3; ++m) {
        bn.eps[m] = Mat<S>::Zero(batch_size, nm.mean[m].size());
    }
    for (int row = 0; row < batch_size; ++row) {
        if (!bn.selected[static_cast<std::size_t>(row)]) continue;
        bn.any = true;
        for (int m = 0; m < 3; ++m) {
            for (Eigen::Index x = 0; x < nm.mean[m].size(); ++x) {
                bn.eps[m](row, x) = nm.mean[m](x) +
                                    std::sqrt(nm.var[m](x)) * static_cast<S>(rng.gaussian());
            }
        }
    }
    return bn;
}

// ---------------------------------------------------------------------------
// Ablation switches (evaluation-time mechanics for the ablation study)
// ---------------------------------------------------------------------------

struct Ablation {
    bool zero_joint = false;
    bool zero_struct = false;
    bool zero_vision = false;
    bool zero_text = false;
    bool no_ferf = false;        // ehat^m = modality-specific part only
    bool uniform_gate = false;   // fusion weights fixed at 1/3
    bool no_translation = false; // skip the relation translation
    bool no_rotation = false;    // skip the Hamilton rotation
    bool force_rotation_identity = false; // overwrite r^R with the unit biquaternion
};

// ---------------------------------------------------------------------------
// FERF forward
// ---------------------------------------------------------------------------

template <typename S>
struct FerfRows {
    std::array<Mat<S>, 3> ehat;  // n x 2d
    std::array<Mat<S>, 3> modal; // n x 2d (modality-specific parts)
};

// ehat^m = e^m_modal + e^m_task for each requested entity. When `noise` is
// given, row i of the noise (if selected) is added to entity ids[i]'s
// raw-stage representation: the structural table row directly, the pooled
// features before projection.
template <typename S>
FerfRows<S> ferf_forward(const ModelParams<S>& params, const ModelData<S>& data,
                         std::span<const std::int32_t> ids,
                         const BatchNoise<S>* noise = nullptr,
                         const Ablation& ablation = {}) {
    const int n = static_cast<int>(ids.size());
    const int b2 = params.block2d();
    FerfRows<S> out;
    for (int m = 0; m < 3; ++m) {
        out.ehat[m].resize(n, b2);
        out.modal[m].resize(n, b2);
    }
    for (int i = 0; i < n; ++i) {
        const std::int32_t e = ids[static_cast<std::size_t>(i)];
        if (e < 0 || e >= params.n_entities) {
            throw DataError("ferf_forward: entity id out of range: " + std::to_string(e));
        }
        const bool noisy = noise && noise->selected[static_cast<std::size_t>(i)];

        // structural raw-stage: table row (+ noise)
        out.modal[kModS].row(i) = params.ent_struct_modal.row(e);
        if (noisy) out.modal[kModS].row(i) += noise->eps[kModS].row(i);

        // visual / textual raw-stage: pooled features (+ noise), then affine
        Vec<S> fv = data.visual.row(e).transpose();
        Vec<S> ft = data.textual.row(e).transpose();
        if (noisy) {
            fv += noise->eps[kModV].row(i).transpose();
            ft += noise->eps[kModT].row(i).transpose();
        }
        out.modal[kModV].row(i) =
            (params.proj_w[0] * fv + params.proj_b[0].col(0)).transpose();
        out.modal[kModT].row(i) =
            (params.proj_w[1] * ft + params.proj_b[1].col(0)).transpose();

        for (int m = 0; m < 3; ++m) {
            if (ablation.no_ferf) {
                out.ehat[m].row(i) = out.modal[m].row(i);
            } else {
                out.ehat[m].row(i) = out.modal[m].row(i) + params.ent_task[m].row(e);
            }
        }
    }
    if (ablation.zero_struct) out.ehat[kModS].setZero();
    if (ablation.zero_vision) out.ehat[kModV].setZero();
    if (ablation.zero_text) out.ehat[kModT].setZero();
    return out;
}

template <typename S>
std::vector<std::int32_t> all_entity_ids(const ModelParams<S>& params) {
    std::vector<std::int32_t> ids(static_cast<std::size_t>(params.n_entities));
    for (int e = 0; e < params.n_entities; ++e) ids[static_cast<std::size_t>(e)] = e;
    return ids;
}

// ---------------------------------------------------------------------------
// Relation-aware gated fusion
// ---------------------------------------------------------------------------

template <typename S>
struct GateFusion {
    S tau = S(1);
    Mat<S> logits; // n x 3
    Mat<S> what;   // n x 3
    Mat<S> fused;  // n x 2d
};

// One row: logits from the three affine gates over [ehat^m; r^T; r^R],
// temperature-scaled softmax, convex combination plus the joint task row.
template <typename S>
void gate_fuse_row(const ModelParams<S>& params, const S* es, const S* ev,
                   const S* et, std::int32_t entity, std::int32_t rel,
                   const Ablation& ablation, S tau, S* logits, S* what, S* fused) {
    const int b2 = params.block2d();
    const int p8 = params.point8d();
    const S* ehat[3] = {es, ev, et};
    const S* rt = params.rel_trans.row(rel).data();
    const S* rr = params.rel_rot.row(rel).data();

    for (int m = 0; m < 3; ++m) {
        const S* w = params.gate_w[m].data();
        S acc = params.gate_b[m](0, 0);
        for (int x = 0; x < b2; ++x) acc += w[x] * ehat[m][x];
        for (int x = 0; x < p8; ++x) acc += w[b2 + x] * rt[x];
        for (int x = 0; x < p8; ++x) acc += w[b2 + p8 + x] * rr[x];
        logits[m] = acc;
    }
    if (ablation.uniform_gate) {
        what[0] = what[1] = what[2] = S(1) / S(3);
    } else {
        S zmax = std::max({logits[0], logits[1], logits[2]}) / tau;
        S denom = S(0);
        for (int m = 0; m < 3; ++m) {
            what[m] = std::exp(logits[m] / tau - zmax);
            denom += what[m];
        }
        for (int m = 0; m < 3; ++m) what[m] /= denom;
    }
    const S* task_j = params.ent_task_joint.row(entity).data();
    for (int x = 0; x < b2; ++x) {
        fused[x] = what[0] * es[x] + what[1] * ev[x] + what[2] * et[x] + task_j[x];
    }
}

// All rows of `ferf` fused under one relation; row i belongs to entity ids[i].
template <typename S>
GateFusion<S> gate_fuse(const ModelParams<S>& params, const FerfRows<S>& ferf,
                        std::span<const std::int32_t> ids, std::int32_t rel,
                        const Ablation& ablation = {}) {
    const int n = static_cast<int>(ids.size());
    GateFusion<S> out;
    out.tau = params.tau(rel);
    out.logits.resize(n, 3);
    out.what.resize(n, 3);
    out.fused.resize(n, params.block2d());
    for (int i = 0; i < n; ++i) {
        gate_fuse_row(params, ferf.ehat[kModS].row(i).data(),
                      ferf.ehat[kModV].row(i).data(), ferf.ehat[kModT].row(i).data(),
                      ids[static_cast<std::size_t>(i)], rel, ablation, out.tau,
                      out.logits.row(i).data(), out.what.row(i).data(),
                      out.fused.row(i).data());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Biquaternion assembly and scoring
// ---------------------------------------------------------------------------

// Fixed basis assignment (1 <- joint, i <- structural, j <- visual,
// k <- textual); each 2d block is [real(d); imag(d)], giving the flat 8d
// entity layout.
template <typename S>
void assemble_row(const S* fused, const S* es, const S* ev, const S* et, int b2,
                  bool zero_joint, S* out8d) {
    for (int x = 0; x < b2; ++x) out8d[x] = zero_joint ? S(0) : fused[x];
    for (int x = 0; x < b2; ++x) out8d[b2 + x] = es[x];
    for (int x = 0; x < b2; ++x) out8d[2 * b2 + x] = ev[x];
    for (int x = 0; x < b2; ++x) out8d[3 * b2 + x] = et[x];
}

template <typename S>
hc::Biquat<S> assemble_entity(const hc::ComplexBlock<S>& joint,
                              const hc::ComplexBlock<S>& structural,
                              const hc::ComplexBlock<S>& visual,
                              const hc::ComplexBlock<S>& textual) {
    return hc::pack(joint, structural, visual, textual);
}

// All candidates fused and assembled under one relation: rows are flat 8d
// entity points Q(e, rel).
template <typename S>
Mat<S> assemble_all(const ModelParams<S>& params, const FerfRows<S>& ferf,
                    const GateFusion<S>& fusion, const Ablation& ablation = {}) {
    const int n = static_cast<int>(fusion.fused.rows());
    Mat<S> out(n, params.point8d());
    for (int i = 0; i < n; ++i) {
        assemble_row(fusion.fused.row(i).data(), ferf.ehat[kModS].row(i).data(),
                     ferf.ehat[kModV].row(i).data(), ferf.ehat[kModT].row(i).data(),
                     params.block2d(), ablation.zero_joint, out.row(i).data());
    }
    return out;
}

enum class ScoreVariant { Full, Fusion, Ensemble };

inline ScoreVariant parse_score_variant(const std::string& name) {
    if (name == "full") return ScoreVariant::Full;
    if (name == "fusion") return ScoreVariant::Fusion;
    if (name == "ensemble") return ScoreVariant::Ensemble;
    throw ConfigError("unknown score variant: " + name);
}

// Query-side transform for the full biquaternion score: translate by r^T,
// rotate by r^R via the Hamilton product. Writes the rotated flat point.
template <typename S>
void transform_query(const ModelParams<S>& params, const S* head8d, std::int32_t rel,
                     const Ablation& ablation, S* translated, S* rotated) {
    const int p8 = params.point8d();
    const std::size_t d = static_cast<std::size_t>(params.d);
    const S* rt = params.rel_trans.row(rel).data();
    for (int x = 0; x < p8; ++x) {
        translated[x] = ablation.no_translation ? head8d[x] : head8d[x] + rt[x];
    }
    if (ablation.no_rotation) {
        for (int x = 0; x < p8; ++x) rotated[x] = translated[x];
        return;
    }
    std::vector<S> identity;
    const S* rr = params.rel_rot.row(rel).data();
    if (ablation.force_rotation_identity) {
        identity.assign(static_cast<std::size_t>(p8), S(0));
        for (std::size_t x = 0; x < d; ++x) identity[x] = S(1);
        rr = identity.data();
    }
    for (int x = 0; x < p8; ++x) rotated[x] = S(0);
    hc::hamilton_flat(translated, rr, rotated, d, hc::canonical_structure_constants());
}

// Scores of one transformed query against every candidate row (full variant:
// plain flat dot product).
template <typename S>
void score_row(const Mat<S>& candidates, const S* rotated, S* out) {
    const Eigen::Index n = candidates.rows();
    const Eigen::Index p8 = candidates.cols();
    Eigen::Map<const Vec<S>> q(rotated, p8);
    Eigen::Map<Vec<S>> o(out, n);
    o.noalias() = candidates * q;
}

// Per-block complex-field transform used by the fusion/ensemble variants:
// block m of the query is (head_m + rT_m) (*) rR_m, scored against block m of
// each candidate. `blocks` selects which of the four coefficients take part.
template <typename S>
void score_row_complex_blocks(const ModelParams<S>& params, const S* head8d,
                              std::int32_t rel, const Mat<S>& candidates,
                              std::span<const int> blocks, S* out) {
    const int b2 = params.block2d();
    const std::size_t d = static_cast<std::size_t>(params.d);
    const Eigen::Index n = candidates.rows();
    const S* rt = params.rel_trans.row(rel).data();
    const S* rr = params.rel_rot.row(rel).data();
    for (Eigen::Index c = 0; c < n; ++c) out[c] = S(0);
    std::vector<S> q(static_cast<std::size_t>(b2));
    for (int m : blocks) {
        const S* h = head8d + m * b2;
        const S* t = rt + m * b2;
        const S* r = rr + m * b2;
        for (std::size_t x = 0; x < d; ++x) {
            const S are = h[x] + t[x];
            const S aim = h[d + x] + t[d + x];
            q[x] = are * r[x] - aim * r[d + x];
            q[d + x] = are * r[d + x] + aim * r[x];
        }
        for (Eigen::Index c = 0; c < n; ++c) {
            const S* cand = candidates.row(c).data() + m * b2;
            S acc = S(0);
            for (int x = 0; x < b2; ++x) acc += q[static_cast<std::size_t>(x)] * cand[x];
            out[c] += acc;
        }
    }
}

// Batch scoring: one row per query, all entities as candidates, candidates
// fused under the query's relation. Used by tests and evaluation; training
// streams the same computation per relation group.
template <typename S>
Mat<S> score_batch(std::span<const std::int32_t> head_ids,
                   std::span<const std::int32_t> rel_ids,
                   const ModelParams<S>& params, const ModelData<S>& data,
                   const Ablation& ablation = {},
                   ScoreVariant variant = ScoreVariant::Full) {
    if (head_ids.size() != rel_ids.size()) {
        throw DataError("score_batch: head/relation count mismatch");
    }
    const int batch = static_cast<int>(head_ids.size());
    auto ids = all_entity_ids(params);
    FerfRows<S> ferf = ferf_forward<S>(params, data, ids, nullptr, ablation);
    Mat<S> scores(batch, params.n_entities);

    // group rows by relation so each candidate fusion happens once
    std::vector<int> order(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return rel_ids[static_cast<std::size_t>(a)] < rel_ids[static_cast<std::size_t>(b)];
    });

    std::vector<S> translated(static_cast<std::size_t>(params.point8d()));
    std::vector<S> rotated(static_cast<std::size_t>(params.point8d()));
    static constexpr int kAllBlocks[4] = {0, 1, 2, 3};
    static constexpr int kJointBlock[1] = {0};

    std::size_t at = 0;
    while (at < order.size()) {
        const std::int32_t rel = rel_ids[static_cast<std::size_t>(order[at])];
        GateFusion<S> fusion = gate_fuse(params, ferf, ids, rel, ablation);
        Mat<S> candidates = assemble_all(params, ferf, fusion, ablation);
        while (at < order.size() && rel_ids[static_cast<std::size_t>(order[at])] == rel) {
            const int row = order[at];
            const S* head = candidates.row(head_ids[static_cast<std::size_t>(row)]).data();
            switch (variant) {
                case ScoreVariant::Full:
                    transform_query(params, head, rel, ablation, translated.data(),
                                    rotated.data());
                    score_row(candidates, rotated.data(), scores.row(row).data());
                    break;
                case ScoreVariant::Fusion:
                    score_row_complex_blocks(params, head, rel, candidates,
                                             std::span<const int>(kJointBlock, 1),
                                             scores.row(row).data());
                    break;
                case ScoreVariant::Ensemble:
                    score_row_complex_blocks(params, head, rel, candidates,
                                             std::span<const int>(kAllBlocks, 4),
                                             scores.row(row).data());
                    break;
            }
            ++at;
        }
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Loss primitives
// ---------------------------------------------------------------------------

// Full-vocabulary logistic loss: y = -1 for the true tail, +1 otherwise;
// sum of softplus(y * score) over candidates, mean over queries.
template <typename S>
S triple_loss(const Mat<S>& scores, std::span<const std::int32_t> true_ids) {
    if (static_cast<std::size_t>(scores.rows()) != true_ids.size()) {
        throw DataError("triple_loss: row/true-id count mismatch");
    }
    S total = S(0);
    for (Eigen::Index q = 0; q < scores.rows(); ++q) {
        const std::int32_t truth = true_ids[static_cast<std::size_t>(q)];
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            const S y = (static_cast<std::int32_t>(c) == truth) ? S(-1) : S(1);
            total += softplus(y * scores(q, c));
        }
    }
    return total / static_cast<S>(scores.rows());
}

template <typename S>
S n3_norm(std::span<const S> x) {
    S acc = S(0);
    for (S v : x) {
        const S a = std::abs(v);
        acc += a * a * a;
    }
    return acc;
}

} // namespace mhyper
