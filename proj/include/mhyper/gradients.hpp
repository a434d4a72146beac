#pragma once

// Forward pass of the total training objective and its hand-derived
// reverse-mode gradients. The computation per batch streams one relation
// group at a time: candidates are fused once per distinct relation, queries
// of that relation are scored 1-vs-all, and gradients flow back through the
// Hamilton product, the temperature-scaled gate, the reconstruction networks
// and the distillation path into every parameter table.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mhyper/model.hpp"

namespace mhyper {

template <typename S>
struct LossWeights {
    S recon = S(1);
    S distill = S(1);
    S triple = S(1);
    S reg = S(1);
};

template <typename S>
struct LossBreakdown {
    S recon = S(0);
    S distill = S(0);
    S triple = S(0);
    S reg = S(0);
    S total = S(0);
};

namespace detail {

// o += sign * (g (*) conj(x)) — the adjoint of one complex block factor.
template <typename S>
inline void cmul_conj_acc(S sign, const S* gre, const S* gim, const S* xre,
                          const S* xim, S* ore, S* oim, std::size_t d) {
    for (std::size_t i = 0; i < d; ++i) {
        ore[i] += sign * (gre[i] * xre[i] + gim[i] * xim[i]);
        oim[i] += sign * (gim[i] * xre[i] - gre[i] * xim[i]);
    }
}

// Adjoint of out = a (x) b on flat 8d layouts: accumulates dL/da and dL/db
// given g = dL/dout.
template <typename S>
inline void hamilton_backward_flat(const S* a, const S* b, const S* g, S* ga,
                                   S* gb, std::size_t d,
                                   const hc::StructureConstants& sc) {
    for (const auto& t : sc.nonzero) {
        if (t.sign == 0) continue;
        const std::size_t ia = 2 * static_cast<std::size_t>(t.i) * d;
        const std::size_t kb = 2 * static_cast<std::size_t>(t.k) * d;
        const std::size_t mg = 2 * static_cast<std::size_t>(t.m) * d;
        cmul_conj_acc<S>(S(t.sign), g + mg, g + mg + d, b + kb, b + kb + d,
                         ga + ia, ga + ia + d, d);
        cmul_conj_acc<S>(S(t.sign), g + mg, g + mg + d, a + ia, a + ia + d,
                         gb + kb, gb + kb + d, d);
    }
}

// acc += scale * d/dx sum |x|^3 = scale * 3 * sign(x) * x^2
template <typename S>
inline void n3_grad_acc(const S* x, S scale, S* acc, int n) {
    for (int i = 0; i < n; ++i) {
        const S s = x[i] > S(0) ? S(1) : (x[i] < S(0) ? S(-1) : S(0));
        acc[i] += scale * S(3) * s * x[i] * x[i];
    }
}

// Backward through one gated fusion row. dfused is dL/d(fused row); direct
// per-modality gradients (from assembly) are passed in dehat_direct and the
// full dL/dehat^m is written to dehat_out. Relation-side gradients accumulate
// into grT/grR/dtau_acc; gate gradients into the tables.
template <typename S>
inline void gate_backward_row(const ModelParams<S>& params, const S* ehat[3],
                              std::int32_t entity, std::int32_t rel,
                              const S* logits, const S* what, S tau,
                              const S* dfused, const S* dehat_direct[3],
                              ModelParams<S>& grads, S* dehat_out[3], S* grT,
                              S* grR, S& dtau_acc) {
    const int b2 = params.block2d();
    const int p8 = params.point8d();

    // joint task embedding and convex combination
    {
        S* gtj = grads.ent_task_joint.row(entity).data();
        for (int x = 0; x < b2; ++x) gtj[x] += dfused[x];
    }
    S a[3];
    S abar = S(0);
    for (int m = 0; m < 3; ++m) {
        S acc = S(0);
        for (int x = 0; x < b2; ++x) acc += dfused[x] * ehat[m][x];
        a[m] = acc;
        abar += a[m] * what[m];
        for (int x = 0; x < b2; ++x) {
            dehat_out[m][x] = what[m] * dfused[x] +
                              (dehat_direct[m] ? dehat_direct[m][x] : S(0));
        }
    }
    // softmax with temperature
    const S* rt = params.rel_trans.row(rel).data();
    const S* rr = params.rel_rot.row(rel).data();
    for (int m = 0; m < 3; ++m) {
        const S bm = what[m] * (a[m] - abar);
        const S dlogit = bm / tau;
        dtau_acc += bm * (-logits[m] / (tau * tau));
        S* gw = grads.gate_w[m].data();
        const S* w = params.gate_w[m].data();
        for (int x = 0; x < b2; ++x) {
            gw[x] += dlogit * ehat[m][x];
            dehat_out[m][x] += dlogit * w[x];
        }
        for (int x = 0; x < p8; ++x) {
            gw[b2 + x] += dlogit * rt[x];
            grT[x] += dlogit * w[b2 + x];
        }
        for (int x = 0; x < p8; ++x) {
            gw[b2 + p8 + x] += dlogit * rr[x];
            grR[x] += dlogit * w[b2 + p8 + x];
        }
        grads.gate_b[m](0, 0) += dlogit;
    }
}

// the two modalities other than m, in canonical (s, v, t) order
inline void other_modalities(int m, int& o1, int& o2) {
    switch (m) {
        case kModS: o1 = kModV; o2 = kModT; break;
        case kModV: o1 = kModS; o2 = kModT; break;
        default:    o1 = kModS; o2 = kModV; break;
    }
}

} // namespace detail

// Forward pass over one batch, optionally accumulating exact gradients of the
// weighted total loss into `grads` (which must be zeros_like(params)).
// `noise` supplies the per-row draws for the self-distillation student path;
// pass nullptr (or a draw with no selected rows) to disable distillation.
//
// The distillation teacher is gradient-blocked. `teacher_params` pins the
// teacher to a parameter snapshot; finite-difference checks pass the
// unperturbed parameters here so the differentiated function and the
// stop-gradient semantics agree. Default: the live parameters.
template <typename S>
LossBreakdown<S> run_batch(std::span<const Triple> batch,
                           const ModelParams<S>& params, const ModelData<S>& data,
                           const BatchNoise<S>* noise, S lambda,
                           const LossWeights<S>& weights,
                           ModelParams<S>* grads = nullptr,
                           const ModelParams<S>* teacher_params = nullptr) {
    if (batch.empty()) throw DataError("run_batch: empty batch");
    if (lambda < S(0)) throw ConfigError("regularization weight must be >= 0");
    const int batch_size = static_cast<int>(batch.size());
    const int b2 = params.block2d();
    const int p8 = params.point8d();
    const std::size_t dd = static_cast<std::size_t>(params.d);
    const auto& sc = hc::canonical_structure_constants();
    const S inv_b = S(1) / static_cast<S>(batch_size);

    auto ids = all_entity_ids(params);
    FerfRows<S> ferf = ferf_forward<S>(params, data, ids);

    std::array<Mat<S>, 3> g_ehat;
    if (grads) {
        for (int m = 0; m < 3; ++m) g_ehat[m] = Mat<S>::Zero(params.n_entities, b2);
    }

    LossBreakdown<S> loss;

    // ---- reconstruction term over the batch heads --------------------------
    {
        Vec<S> in(3 * b2), hpre(b2), hid(b2), out(b2), diff(b2);
        for (const Triple& triple : batch) {
            const std::int32_t h = triple.h;
            for (int m = 0; m < 3; ++m) {
                int o1, o2;
                detail::other_modalities(m, o1, o2);
                in.segment(0, b2) = params.ent_task[m].row(h).transpose();
                in.segment(b2, b2) = ferf.modal[o1].row(h).transpose();
                in.segment(2 * b2, b2) = ferf.modal[o2].row(h).transpose();
                hpre = params.recon_w1[m] * in + params.recon_b1[m].col(0);
                hid = hpre.cwiseMax(S(0));
                out = params.recon_w2[m] * hid + params.recon_b2[m].col(0);
                diff = out - ferf.modal[m].row(h).transpose();
                loss.recon += diff.squaredNorm();

                if (grads) {
                    const S scale = weights.recon * S(2) * inv_b;
                    Vec<S> dout = scale * diff;
                    grads->recon_w2[m].noalias() += dout * hid.transpose();
                    grads->recon_b2[m].col(0) += dout;
                    Vec<S> dhid = params.recon_w2[m].transpose() * dout;
                    for (int x = 0; x < b2; ++x)
                        if (hpre(x) <= S(0)) dhid(x) = S(0);
                    grads->recon_w1[m].noalias() += dhid * in.transpose();
                    grads->recon_b1[m].col(0) += dhid;
                    Vec<S> din = params.recon_w1[m].transpose() * dhid;

                    grads->ent_task[m].row(h) += din.segment(0, b2).transpose();
                    // reconstruction inputs and target are modality-specific
                    // parts; route their gradients below via g_modal
                    auto route_modal = [&](int mod, const Vec<S>& g) {
                        if (mod == kModS) {
                            grads->ent_struct_modal.row(h) += g.transpose();
                        } else {
                            const int pi = (mod == kModV) ? 0 : 1;
                            const auto& feats = (mod == kModV) ? data.visual : data.textual;
                            grads->proj_w[pi].noalias() +=
                                g * feats.row(h);
                            grads->proj_b[pi].col(0) += g;
                        }
                    };
                    route_modal(o1, Vec<S>(din.segment(b2, b2)));
                    route_modal(o2, Vec<S>(din.segment(2 * b2, b2)));
                    route_modal(m, Vec<S>(-scale * diff));
                }
            }
        }
        loss.recon *= inv_b;
    }

    // ---- relation groups: scoring, regularization, distillation ------------
    std::vector<int> order(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return batch[static_cast<std::size_t>(x)].r < batch[static_cast<std::size_t>(y)].r;
    });

    std::vector<S> translated(static_cast<std::size_t>(p8));
    std::vector<S> rotated(static_cast<std::size_t>(p8));
    Vec<S> scores(params.n_entities);
    Vec<S> coeff(params.n_entities);

    std::size_t at = 0;
    while (at < order.size()) {
        const std::int32_t rel = batch[static_cast<std::size_t>(order[at])].r;
        GateFusion<S> fusion = gate_fuse(params, ferf, ids, rel);
        Mat<S> assembled = assemble_all(params, ferf, fusion);
        const S tau = fusion.tau;

        Mat<S> g_assembled;
        std::vector<S> g_rT(static_cast<std::size_t>(p8), S(0));
        std::vector<S> g_rR(static_cast<std::size_t>(p8), S(0));
        S g_tau = S(0);
        if (grads) g_assembled = Mat<S>::Zero(params.n_entities, p8);

        const std::size_t group_begin = at;
        while (at < order.size() &&
               batch[static_cast<std::size_t>(order[at])].r == rel) {
            const int row = order[at];
            const Triple& triple = batch[static_cast<std::size_t>(row)];
            const S* head = assembled.row(triple.h).data();
            const S* rt = params.rel_trans.row(rel).data();
            const S* rr = params.rel_rot.row(rel).data();

            for (int x = 0; x < p8; ++x) translated[static_cast<std::size_t>(x)] = head[x] + rt[x];
            std::fill(rotated.begin(), rotated.end(), S(0));
            hc::hamilton_flat(translated.data(), rr, rotated.data(), dd, sc);
            scores.noalias() = assembled * Eigen::Map<const Vec<S>>(rotated.data(), p8);

            for (int c = 0; c < params.n_entities; ++c) {
                const S y = (c == triple.t) ? S(-1) : S(1);
                loss.triple += softplus(y * scores(c));
                if (grads) coeff(c) = weights.triple * y * logistic(y * scores(c)) * inv_b;
            }

            // N3 term on the assembled head/tail points and the relation rows
            loss.reg += lambda * (n3_norm(std::span<const S>(head, static_cast<std::size_t>(p8))) +
                                  n3_norm(std::span<const S>(rt, static_cast<std::size_t>(p8))) +
                                  n3_norm(std::span<const S>(rr, static_cast<std::size_t>(p8))) +
                                  n3_norm(std::span<const S>(assembled.row(triple.t).data(),
                                                             static_cast<std::size_t>(p8))));

            if (grads) {
                // candidate side of the dot product
                g_assembled.noalias() +=
                    coeff * Eigen::Map<const Vec<S>>(rotated.data(), p8).transpose();
                // query side, back through the Hamilton product
                Vec<S> g_rot = assembled.transpose() * coeff;
                std::vector<S> g_trans(static_cast<std::size_t>(p8), S(0));
                detail::hamilton_backward_flat(translated.data(), rr, g_rot.data(),
                                               g_trans.data(), g_rR.data(), dd, sc);
                for (int x = 0; x < p8; ++x) {
                    g_assembled(triple.h, x) += g_trans[static_cast<std::size_t>(x)];
                    g_rT[static_cast<std::size_t>(x)] += g_trans[static_cast<std::size_t>(x)];
                }
                const S rscale = weights.reg * lambda * inv_b;
                detail::n3_grad_acc(head, rscale, g_assembled.row(triple.h).data(), p8);
                detail::n3_grad_acc(assembled.row(triple.t).data(), rscale,
                                    g_assembled.row(triple.t).data(), p8);
                detail::n3_grad_acc(rt, rscale, g_rT.data(), p8);
                detail::n3_grad_acc(rr, rscale, g_rR.data(), p8);
            }
            ++at;
        }

        // ---- self-distillation rows of this relation group -----------------
        if (noise && noise->any) {
            Vec<S> ses(b2), sev(b2), set(b2), sfused(b2), diff(b2);
            Vec<S> teacher_row(b2);
            Vec<S> fv(data.visual.cols()), ft(data.textual.cols());
            S slogits[3], swhat[3];
            for (std::size_t g = group_begin; g < at; ++g) {
                const int row = order[g];
                if (!noise->selected[static_cast<std::size_t>(row)]) continue;
                const Triple& triple = batch[static_cast<std::size_t>(row)];
                const std::int32_t h = triple.h;

                if (teacher_params) {
                    // teacher recomputed from the pinned snapshot
                    const std::int32_t one_id[1] = {h};
                    FerfRows<S> tferf = ferf_forward<S>(*teacher_params, data, one_id);
                    S tlogits[3], twhat[3];
                    gate_fuse_row(*teacher_params, tferf.ehat[kModS].row(0).data(),
                                  tferf.ehat[kModV].row(0).data(),
                                  tferf.ehat[kModT].row(0).data(), h, rel, Ablation{},
                                  teacher_params->tau(rel), tlogits, twhat,
                                  teacher_row.data());
                } else {
                    teacher_row = fusion.fused.row(h).transpose();
                }

                // student raw stage: noisy structural row, noisy pooled
                // features through the shared projections
                ses = params.ent_struct_modal.row(h).transpose() +
                      noise->eps[kModS].row(row).transpose() +
                      params.ent_task[kModS].row(h).transpose();
                fv = data.visual.row(h).transpose() + noise->eps[kModV].row(row).transpose();
                ft = data.textual.row(h).transpose() + noise->eps[kModT].row(row).transpose();
                sev = params.proj_w[0] * fv + params.proj_b[0].col(0) +
                      params.ent_task[kModV].row(h).transpose();
                set = params.proj_w[1] * ft + params.proj_b[1].col(0) +
                      params.ent_task[kModT].row(h).transpose();

                gate_fuse_row(params, ses.data(), sev.data(), set.data(), h, rel,
                              Ablation{}, tau, slogits, swhat, sfused.data());

                // teacher is the clean fused row, gradient-blocked
                diff = sfused - teacher_row;
                loss.distill += diff.squaredNorm();

                if (grads) {
                    Vec<S> dfused = weights.distill * S(2) * inv_b * diff;
                    Vec<S> dses = Vec<S>::Zero(b2), dsev = Vec<S>::Zero(b2),
                           dset = Vec<S>::Zero(b2);
                    const S* ehat_rows[3] = {ses.data(), sev.data(), set.data()};
                    const S* direct[3] = {nullptr, nullptr, nullptr};
                    S* dehat[3] = {dses.data(), dsev.data(), dset.data()};
                    detail::gate_backward_row(params, ehat_rows, h, rel,
                                              slogits, swhat, tau, dfused.data(),
                                              direct, *grads, dehat, g_rT.data(),
                                              g_rR.data(), g_tau);
                    grads->ent_struct_modal.row(h) += dses.transpose();
                    grads->ent_task[kModS].row(h) += dses.transpose();
                    grads->ent_task[kModV].row(h) += dsev.transpose();
                    grads->ent_task[kModT].row(h) += dset.transpose();
                    grads->proj_w[0].noalias() += dsev * fv.transpose();
                    grads->proj_b[0].col(0) += dsev;
                    grads->proj_w[1].noalias() += dset * ft.transpose();
                    grads->proj_b[1].col(0) += dset;
                }
            }
        }

        // ---- candidate-side gate backward for the whole group --------------
        if (grads) {
            Vec<S> dses(b2), dsev(b2), dset(b2);
            for (int e = 0; e < params.n_entities; ++e) {
                const S* grow = g_assembled.row(e).data();
                const S* ehat_rows[3] = {ferf.ehat[kModS].row(e).data(),
                                         ferf.ehat[kModV].row(e).data(),
                                         ferf.ehat[kModT].row(e).data()};
                const S* direct[3] = {grow + b2, grow + 2 * b2, grow + 3 * b2};
                S* dehat[3] = {dses.data(), dsev.data(), dset.data()};
                detail::gate_backward_row(params, ehat_rows,
                                          static_cast<std::int32_t>(e), rel,
                                          fusion.logits.row(e).data(),
                                          fusion.what.row(e).data(), tau, grow,
                                          direct, *grads, dehat, g_rT.data(),
                                          g_rR.data(), g_tau);
                for (int m = 0; m < 3; ++m) {
                    g_ehat[m].row(e) += Eigen::Map<const Vec<S>>(dehat[m], b2).transpose();
                }
            }
            for (int x = 0; x < p8; ++x) {
                grads->rel_trans(rel, x) += g_rT[static_cast<std::size_t>(x)];
                grads->rel_rot(rel, x) += g_rR[static_cast<std::size_t>(x)];
            }
            grads->rel_temp_raw(rel, 0) += g_tau * logistic(params.rel_temp_raw(rel, 0));
        }
    }

    // ---- FERF backward ------------------------------------------------------
    if (grads) {
        grads->ent_struct_modal += g_ehat[kModS];
        grads->ent_task[kModS] += g_ehat[kModS];
        grads->ent_task[kModV] += g_ehat[kModV];
        grads->ent_task[kModT] += g_ehat[kModT];
        grads->proj_w[0].noalias() += g_ehat[kModV].transpose() * data.visual;
        grads->proj_b[0].col(0) += g_ehat[kModV].colwise().sum().transpose();
        grads->proj_w[1].noalias() += g_ehat[kModT].transpose() * data.textual;
        grads->proj_b[1].col(0) += g_ehat[kModT].colwise().sum().transpose();
    }

    loss.triple *= inv_b;
    loss.reg *= inv_b;
    loss.distill *= inv_b;
    loss.recon *= weights.recon;
    loss.distill *= weights.distill;
    loss.triple *= weights.triple;
    loss.reg *= weights.reg;
    loss.total = loss.recon + loss.distill + loss.triple + loss.reg;
    return loss;
}

// Unweighted-by-default sum of the four loss terms with the per-term
// breakdown for logging.
template <typename S>
LossBreakdown<S> total_loss(std::span<const Triple> batch,
                            const ModelParams<S>& params, const ModelData<S>& data,
                            const BatchNoise<S>* noise, S lambda,
                            const LossWeights<S>& weights = {}) {
    return run_batch<S>(batch, params, data, noise, lambda, weights, nullptr);
}

// Standalone reconstruction loss over the batch heads (mean over entities,
// summed over modalities).
template <typename S>
S reconstruction_loss(std::span<const std::int32_t> entity_ids,
                      const ModelParams<S>& params, const ModelData<S>& data) {
    FerfRows<S> ferf = ferf_forward<S>(params, data, entity_ids);
    const int b2 = params.block2d();
    Vec<S> in(3 * b2), hid(b2), out(b2);
    S loss = S(0);
    for (std::size_t i = 0; i < entity_ids.size(); ++i) {
        const std::int32_t h = entity_ids[i];
        for (int m = 0; m < 3; ++m) {
            int o1, o2;
            detail::other_modalities(m, o1, o2);
            in.segment(0, b2) = params.ent_task[m].row(h).transpose();
            in.segment(b2, b2) = ferf.modal[o1].row(static_cast<Eigen::Index>(i)).transpose();
            in.segment(2 * b2, b2) = ferf.modal[o2].row(static_cast<Eigen::Index>(i)).transpose();
            hid = (params.recon_w1[m] * in + params.recon_b1[m].col(0)).cwiseMax(S(0));
            out = params.recon_w2[m] * hid + params.recon_b2[m].col(0);
            loss += (out - ferf.modal[m].row(static_cast<Eigen::Index>(i)).transpose()).squaredNorm();
        }
    }
    return loss / static_cast<S>(entity_ids.size());
}

// Standalone self-distillation loss: clean teacher vs noised student fused
// embeddings, mean squared difference over the batch.
template <typename S>
S distill_loss(std::span<const Triple> batch, const ModelParams<S>& params,
               const ModelData<S>& data, const BatchNoise<S>& noise) {
    LossWeights<S> w;
    w.recon = S(0);
    w.triple = S(0);
    w.reg = S(0);
    return run_batch<S>(batch, params, data, &noise, S(0), w, nullptr).distill;
}

// N3 regularization term as used per batch: lambda times the cubed 3-norm of
// the assembled head, relation translation, relation rotation and true-tail
// vectors, averaged over the batch.
template <typename S>
S n3_reg(std::span<const Triple> batch, const ModelParams<S>& params,
         const ModelData<S>& data, S lambda) {
    if (lambda < S(0)) throw ConfigError("regularization weight must be >= 0");
    LossWeights<S> w;
    w.recon = S(0);
    w.triple = S(0);
    w.distill = S(0);
    return run_batch<S>(batch, params, data, nullptr, lambda, w, nullptr).reg;
}

} // namespace mhyper
