#pragma once

// Layout-fixed arithmetic for complex numbers, quaternions and biquaternions
// over length-d coefficient blocks. A biquaternion point is stored as one
// flat vector of 8 contiguous real blocks
//
//   [c0.re | c0.im | c1.re | c1.im | c2.re | c2.im | c3.re | c3.im]
//
// where c0..c3 are the complex coefficients on the basis (1, i, j, k). Entity
// embeddings use this exact layout with (1,i,j,k) <- (joint, structural,
// visual, textual).

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mhyper::hc {

inline void check_same_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) +
                                    ": dimension mismatch (" +
                                    std::to_string(a) + " vs " +
                                    std::to_string(b) + ")");
    }
}

// ---------------------------------------------------------------------------
// ComplexBlock: a length-d vector of complex numbers, struct-of-arrays.
// ---------------------------------------------------------------------------

template <typename S>
struct ComplexBlock {
    std::vector<S> re;
    std::vector<S> im;

    ComplexBlock() = default;
    explicit ComplexBlock(std::size_t d) : re(d, S(0)), im(d, S(0)) {}
    ComplexBlock(std::vector<S> r, std::vector<S> i)
        : re(std::move(r)), im(std::move(i)) {
        check_same_dim(re.size(), im.size(), "ComplexBlock");
    }

    std::size_t dim() const { return re.size(); }
};

// out += sign * (a (*) b), element-wise complex product over length-d spans.
template <typename S>
inline void cmul_acc(S sign, std::span<const S> are, std::span<const S> aim,
                     std::span<const S> bre, std::span<const S> bim,
                     std::span<S> ore, std::span<S> oim) {
    const std::size_t d = are.size();
    for (std::size_t x = 0; x < d; ++x) {
        ore[x] += sign * (are[x] * bre[x] - aim[x] * bim[x]);
        oim[x] += sign * (are[x] * bim[x] + aim[x] * bre[x]);
    }
}

template <typename S>
ComplexBlock<S> complex_mul(const ComplexBlock<S>& a, const ComplexBlock<S>& b) {
    check_same_dim(a.dim(), b.dim(), "complex_mul");
    ComplexBlock<S> out(a.dim());
    cmul_acc<S>(S(1), a.re, a.im, b.re, b.im,
                std::span<S>(out.re), std::span<S>(out.im));
    return out;
}

// ---------------------------------------------------------------------------
// Structure constants H[i][k][m]: u_i * u_k = sum_m H[i][k][m] u_m for the
// basis (1, i, j, k). Exactly 16 nonzero entries.
// ---------------------------------------------------------------------------

struct StructureConstants {
    std::int8_t h[4][4][4] = {};

    struct Term {
        int i, k, m;
        std::int8_t sign;
    };
    std::array<Term, 16> nonzero = {};

    static StructureConstants canonical() {
        StructureConstants sc;
        // 1*u = u*1 = u ; i^2 = j^2 = k^2 = -1 ; ij = k, jk = i, ki = j and
        // the anti-commuted counterparts.
        const int rules[16][4] = {
            {0, 0, 0, +1}, {0, 1, 1, +1}, {0, 2, 2, +1}, {0, 3, 3, +1},
            {1, 0, 1, +1}, {1, 1, 0, -1}, {1, 2, 3, +1}, {1, 3, 2, -1},
            {2, 0, 2, +1}, {2, 1, 3, -1}, {2, 2, 0, -1}, {2, 3, 1, +1},
            {3, 0, 3, +1}, {3, 1, 2, +1}, {3, 2, 1, -1}, {3, 3, 0, -1},
        };
        for (int n = 0; n < 16; ++n) {
            const int* r = rules[n];
            sc.h[r[0]][r[1]][r[2]] = static_cast<std::int8_t>(r[3]);
            sc.nonzero[n] = Term{r[0], r[1], r[2], static_cast<std::int8_t>(r[3])};
        }
        return sc;
    }

    // Refreshes the nonzero list after an entry of h was edited (test hook
    // for deliberate-corruption checks in selfcheck).
    void rebuild_nonzero() {
        std::size_t n = 0;
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < 4; ++k)
                for (int m = 0; m < 4; ++m)
                    if (h[i][k][m] != 0 && n < nonzero.size())
                        nonzero[n++] = Term{i, k, m, h[i][k][m]};
        for (; n < nonzero.size(); ++n) nonzero[n] = Term{0, 0, 0, 0};
    }
};

inline const StructureConstants& canonical_structure_constants() {
    static const StructureConstants sc = StructureConstants::canonical();
    return sc;
}

// ---------------------------------------------------------------------------
// Biquat: 4 complex coefficient blocks over a shared d, flat 8d storage.
// ---------------------------------------------------------------------------

template <typename S>
struct Biquat {
    std::size_t d = 0;
    std::vector<S> flat; // size 8d, blocks as documented above

    Biquat() = default;
    explicit Biquat(std::size_t dim) : d(dim), flat(8 * dim, S(0)) {}

    static Biquat from_flat(std::size_t dim, std::vector<S> data) {
        if (data.size() != 8 * dim) {
            throw std::invalid_argument("Biquat::from_flat: need 8*d values");
        }
        Biquat q;
        q.d = dim;
        q.flat = std::move(data);
        return q;
    }

    // coefficient c in {0..3}: real part block 2c, imaginary part block 2c+1
    std::span<S> re(int c) { return {flat.data() + (2 * c) * d, d}; }
    std::span<S> im(int c) { return {flat.data() + (2 * c + 1) * d, d}; }
    std::span<const S> re(int c) const { return {flat.data() + (2 * c) * d, d}; }
    std::span<const S> im(int c) const { return {flat.data() + (2 * c + 1) * d, d}; }

    ComplexBlock<S> coeff(int c) const {
        auto r = re(c);
        auto i = im(c);
        return ComplexBlock<S>(std::vector<S>(r.begin(), r.end()),
                               std::vector<S>(i.begin(), i.end()));
    }

    // Multiplicative identity: coefficient on 1 is the all-ones real block.
    static Biquat one(std::size_t dim) {
        Biquat q(dim);
        for (std::size_t x = 0; x < dim; ++x) q.flat[x] = S(1);
        return q;
    }
};

// pack(four coefficient blocks) -> flat layout; unpack is coeff(c).
template <typename S>
Biquat<S> pack(const ComplexBlock<S>& c0, const ComplexBlock<S>& c1,
               const ComplexBlock<S>& c2, const ComplexBlock<S>& c3) {
    const std::size_t d = c0.dim();
    check_same_dim(d, c1.dim(), "pack");
    check_same_dim(d, c2.dim(), "pack");
    check_same_dim(d, c3.dim(), "pack");
    Biquat<S> q(d);
    const ComplexBlock<S>* cs[4] = {&c0, &c1, &c2, &c3};
    for (int c = 0; c < 4; ++c) {
        std::copy(cs[c]->re.begin(), cs[c]->re.end(), q.re(c).begin());
        std::copy(cs[c]->im.begin(), cs[c]->im.end(), q.im(c).begin());
    }
    return q;
}

template <typename S>
Biquat<S> biquat_add(const Biquat<S>& a, const Biquat<S>& b) {
    check_same_dim(a.d, b.d, "biquat_add");
    Biquat<S> out(a.d);
    for (std::size_t x = 0; x < a.flat.size(); ++x) out.flat[x] = a.flat[x] + b.flat[x];
    return out;
}

// Table-driven Hamilton product over flat 8d block layouts. `out` must be
// zero-initialized; result coefficient m accumulates
// sum_{i,k} H[i][k][m] * (a.coeff(i) (*) b.coeff(k)).
template <typename S>
void hamilton_flat(const S* a, const S* b, S* out, std::size_t d,
                   const StructureConstants& sc) {
    for (const auto& t : sc.nonzero) {
        if (t.sign == 0) continue;
        cmul_acc<S>(S(t.sign),
                    std::span<const S>(a + 2 * static_cast<std::size_t>(t.i) * d, d),
                    std::span<const S>(a + (2 * static_cast<std::size_t>(t.i) + 1) * d, d),
                    std::span<const S>(b + 2 * static_cast<std::size_t>(t.k) * d, d),
                    std::span<const S>(b + (2 * static_cast<std::size_t>(t.k) + 1) * d, d),
                    std::span<S>(out + 2 * static_cast<std::size_t>(t.m) * d, d),
                    std::span<S>(out + (2 * static_cast<std::size_t>(t.m) + 1) * d, d));
    }
}

// Hamilton product driven by the structure-constant table; with all imaginary
// parts zero this reduces to the real quaternion product.
template <typename S>
Biquat<S> hamilton_product(const Biquat<S>& q1, const Biquat<S>& q2,
                           const StructureConstants& sc = canonical_structure_constants()) {
    check_same_dim(q1.d, q2.d, "hamilton_product");
    Biquat<S> out(q1.d);
    hamilton_flat(q1.flat.data(), q2.flat.data(), out.flat.data(), q1.d, sc);
    return out;
}

// Hand-unrolled form of the same product, kept as an independent second
// implementation for differential testing against the table-driven one.
template <typename S>
Biquat<S> hamilton_product_unrolled(const Biquat<S>& q1, const Biquat<S>& q2) {
    check_same_dim(q1.d, q2.d, "hamilton_product_unrolled");
    Biquat<S> out(q1.d);
    auto term = [&](int m, S sign, int i, int k) {
        cmul_acc<S>(sign, q1.re(i), q1.im(i), q2.re(k), q2.im(k),
                    out.re(m), out.im(m));
    };
    // (a1 a2 - b1 b2 - c1 c2 - d1 d2)
    term(0, S(+1), 0, 0); term(0, S(-1), 1, 1); term(0, S(-1), 2, 2); term(0, S(-1), 3, 3);
    // (a1 b2 + b1 a2 + c1 d2 - d1 c2) i
    term(1, S(+1), 0, 1); term(1, S(+1), 1, 0); term(1, S(+1), 2, 3); term(1, S(-1), 3, 2);
    // (a1 c2 - b1 d2 + c1 a2 + d1 b2) j
    term(2, S(+1), 0, 2); term(2, S(-1), 1, 3); term(2, S(+1), 2, 0); term(2, S(+1), 3, 1);
    // (a1 d2 + b1 c2 - c1 b2 + d1 a2) k
    term(3, S(+1), 0, 3); term(3, S(+1), 1, 2); term(3, S(-1), 2, 1); term(3, S(+1), 3, 0);
    return out;
}

template <typename S>
S flat_dot(const Biquat<S>& a, const Biquat<S>& b) {
    check_same_dim(a.d, b.d, "flat_dot");
    S acc = S(0);
    for (std::size_t x = 0; x < a.flat.size(); ++x) acc += a.flat[x] * b.flat[x];
    return acc;
}

// Composed score <(Qh (+) QrT) (x) QrR, Qt> over the flat layout.
template <typename S>
S biquat_score(const Biquat<S>& qh, const Biquat<S>& qr_trans,
               const Biquat<S>& qr_rot, const Biquat<S>& qt,
               const StructureConstants& sc = canonical_structure_constants()) {
    return flat_dot(hamilton_product(biquat_add(qh, qr_trans), qr_rot, sc), qt);
}

// Literal sum of the 16 expanded pairwise terms of the score: each term is a
// signed complex block product of (head coefficient + translation
// coefficient) with a rotation coefficient, flat-dotted against one tail
// coefficient. Test oracle only; independent of hamilton_product.
template <typename S>
S score_expansion_oracle(const Biquat<S>& qh, const Biquat<S>& qr_trans,
                         const Biquat<S>& qr_rot, const Biquat<S>& qt) {
    check_same_dim(qh.d, qr_trans.d, "score_expansion_oracle");
    check_same_dim(qh.d, qr_rot.d, "score_expansion_oracle");
    check_same_dim(qh.d, qt.d, "score_expansion_oracle");
    const std::size_t d = qh.d;

    // one pairwise term: sign * <(h_i + T_i) (*) R_k, t_m> on flat 2d blocks
    auto term = [&](S sign, int i, int k, int m) {
        auto hre = qh.re(i), him = qh.im(i);
        auto tre = qr_trans.re(i), tim = qr_trans.im(i);
        auto rre = qr_rot.re(k), rim = qr_rot.im(k);
        auto ore = qt.re(m), oim = qt.im(m);
        S acc = S(0);
        for (std::size_t x = 0; x < d; ++x) {
            const S are = hre[x] + tre[x];
            const S aim = him[x] + tim[x];
            acc += (are * rre[x] - aim * rim[x]) * ore[x];
            acc += (are * rim[x] + aim * rre[x]) * oim[x];
        }
        return sign * acc;
    };

    S score = S(0);
    // tail coefficient 0 (basis 1)
    score += term(S(+1), 0, 0, 0);
    score += term(S(-1), 1, 1, 0);
    score += term(S(-1), 2, 2, 0);
    score += term(S(-1), 3, 3, 0);
    // tail coefficient 1 (basis i)
    score += term(S(+1), 0, 1, 1);
    score += term(S(+1), 1, 0, 1);
    score += term(S(+1), 2, 3, 1);
    score += term(S(-1), 3, 2, 1);
    // tail coefficient 2 (basis j)
    score += term(S(+1), 0, 2, 2);
    score += term(S(-1), 1, 3, 2);
    score += term(S(+1), 2, 0, 2);
    score += term(S(+1), 3, 1, 2);
    // tail coefficient 3 (basis k)
    score += term(S(+1), 0, 3, 3);
    score += term(S(+1), 1, 2, 3);
    score += term(S(-1), 2, 1, 3);
    score += term(S(+1), 3, 0, 3);
    return score;
}

} // namespace mhyper::hc
