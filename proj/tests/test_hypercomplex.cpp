#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mhyper/hypercomplex.hpp"
#include "mhyper/rng.hpp"

using namespace mhyper;
using namespace mhyper::hc;

namespace {

template <typename S>
Biquat<S> random_biquat(Rng& rng, std::size_t d, double scale = 1.0) {
    Biquat<S> q(d);
    for (auto& v : q.flat) v = static_cast<S>(rng.uniform(-scale, scale));
    return q;
}

// real quaternion with d = 1
Biquat<double> quat1(double a, double b, double c, double d) {
    Biquat<double> q(1);
    q.re(0)[0] = a;
    q.re(1)[0] = b;
    q.re(2)[0] = c;
    q.re(3)[0] = d;
    return q;
}

double rel_err(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-30});
    return std::abs(got - want) / denom;
}

template <typename S>
double max_rel_diff(const Biquat<S>& a, const Biquat<S>& b) {
    double worst = 0;
    for (std::size_t i = 0; i < a.flat.size(); ++i) {
        const double denom = std::max({std::abs(static_cast<double>(a.flat[i])),
                                       std::abs(static_cast<double>(b.flat[i])), 1.0});
        worst = std::max(worst, std::abs(static_cast<double>(a.flat[i] - b.flat[i])) / denom);
    }
    return worst;
}

} // namespace

TEST_CASE("complex_mul examples") {
    ComplexBlock<double> one({1.0}, {0.0});
    ComplexBlock<double> xy({0.7}, {-2.5});
    auto r = complex_mul(one, xy);
    CHECK(r.re[0] == doctest::Approx(0.7));
    CHECK(r.im[0] == doctest::Approx(-2.5));

    ComplexBlock<double> i_unit({0.0}, {1.0});
    auto ii = complex_mul(i_unit, i_unit);
    CHECK(ii.re[0] == doctest::Approx(-1.0));
    CHECK(ii.im[0] == doctest::Approx(0.0));

    ComplexBlock<double> a({2.0}, {3.0});
    ComplexBlock<double> b({4.0}, {5.0});
    auto ab = complex_mul(a, b);
    CHECK(ab.re[0] == doctest::Approx(-7.0));
    CHECK(ab.im[0] == doctest::Approx(22.0));
}

TEST_CASE("complex_mul length mismatch") {
    ComplexBlock<double> a(2), b(3);
    CHECK_THROWS_AS(complex_mul(a, b), std::invalid_argument);
}

TEST_CASE("structure constants encode the basis table") {
    const auto& sc = canonical_structure_constants();
    int nonzero = 0;
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k)
            for (int m = 0; m < 4; ++m)
                if (sc.h[i][k][m] != 0) ++nonzero;
    CHECK(nonzero == 16);

    // spot checks: ij = k, ji = -k, i^2 = -1, 1j = j
    CHECK(sc.h[1][2][3] == 1);
    CHECK(sc.h[2][1][3] == -1);
    CHECK(sc.h[1][1][0] == -1);
    CHECK(sc.h[0][2][2] == 1);

    // every basis product u_i u_k lands on exactly one basis element
    for (int i = 0; i < 4; ++i) {
        for (int k = 0; k < 4; ++k) {
            int hits = 0;
            for (int m = 0; m < 4; ++m) hits += sc.h[i][k][m] != 0;
            CHECK(hits == 1);
        }
    }
}

TEST_CASE("hamilton product examples") {
    // real-unit identity, both sides
    Rng rng(7);
    for (std::size_t d : {1u, 4u, 32u}) {
        auto q = random_biquat<double>(rng, d);
        auto unit = Biquat<double>::one(d);
        CHECK(max_rel_diff(hamilton_product(unit, q), q) < 1e-15);
        CHECK(max_rel_diff(hamilton_product(q, unit), q) < 1e-15);
    }

    // ij = k
    auto qi = quat1(0, 1, 0, 0);
    auto qj = quat1(0, 0, 1, 0);
    auto qk = hamilton_product(qi, qj);
    CHECK(qk.re(3)[0] == doctest::Approx(1.0));
    CHECK(std::abs(qk.re(0)[0]) + std::abs(qk.re(1)[0]) + std::abs(qk.re(2)[0]) ==
          doctest::Approx(0.0));

    // brute-force expansion of the real product
    auto p = hamilton_product(quat1(1, 2, 3, 4), quat1(5, 6, 7, 8));
    CHECK(p.re(0)[0] == doctest::Approx(-60.0));
    CHECK(p.re(1)[0] == doctest::Approx(12.0));
    CHECK(p.re(2)[0] == doctest::Approx(30.0));
    CHECK(p.re(3)[0] == doctest::Approx(24.0));
}

TEST_CASE("table-driven and unrolled products agree") {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t d = 1 + rng.below(8);
        auto a = random_biquat<double>(rng, d);
        auto b = random_biquat<double>(rng, d);
        CHECK(max_rel_diff(hamilton_product(a, b), hamilton_product_unrolled(a, b)) < 1e-12);
    }
}

TEST_CASE("biquat_add examples and flat equivalence") {
    Rng rng(3);
    auto q = random_biquat<double>(rng, 5);
    Biquat<double> zero(5);
    CHECK(max_rel_diff(biquat_add(q, zero), q) == 0.0);

    auto neg = q;
    for (auto& v : neg.flat) v = -v;
    auto sum = biquat_add(q, neg);
    for (double v : sum.flat) CHECK(v == 0.0);

    auto a = random_biquat<double>(rng, 6);
    auto b = random_biquat<double>(rng, 6);
    auto s = biquat_add(a, b);
    for (std::size_t i = 0; i < s.flat.size(); ++i) {
        CHECK(s.flat[i] == a.flat[i] + b.flat[i]);
    }

    Biquat<double> wrong(7);
    CHECK_THROWS_AS(biquat_add(a, wrong), std::invalid_argument);
}

TEST_CASE("anti-commutation of pure basis quaternions") {
    auto qi = quat1(0, 1, 0, 0);
    auto qj = quat1(0, 0, 1, 0);
    auto qk = quat1(0, 0, 0, 1);
    auto pairs = {std::pair{qi, qj}, std::pair{qj, qk}, std::pair{qk, qi}};
    for (const auto& [x, y] : pairs) {
        auto xy = hamilton_product(x, y);
        auto yx = hamilton_product(y, x);
        for (std::size_t i = 0; i < xy.flat.size(); ++i) {
            CHECK(xy.flat[i] == doctest::Approx(-yx.flat[i]));
        }
    }
}

TEST_CASE("associativity and distributivity on random triples") {
    Rng rng(13);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t d = 1 + rng.below(6);
        auto a = random_biquat<double>(rng, d);
        auto b = random_biquat<double>(rng, d);
        auto c = random_biquat<double>(rng, d);
        CHECK(max_rel_diff(hamilton_product(hamilton_product(a, b), c),
                           hamilton_product(a, hamilton_product(b, c))) < 1e-9);
        CHECK(max_rel_diff(hamilton_product(a, biquat_add(b, c)),
                           biquat_add(hamilton_product(a, b), hamilton_product(a, c))) < 1e-9);
    }
}

TEST_CASE("norm multiplicativity in the real quaternion sub-algebra") {
    Rng rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t d = 1 + rng.below(6);
        Biquat<double> a(d), b(d);
        for (int c = 0; c < 4; ++c) {
            for (std::size_t x = 0; x < d; ++x) {
                a.re(c)[x] = rng.uniform(-1, 1);
                b.re(c)[x] = rng.uniform(-1, 1);
            }
        }
        auto p = hamilton_product(a, b);
        for (std::size_t x = 0; x < d; ++x) {
            double na = 0, nb = 0, np = 0;
            for (int c = 0; c < 4; ++c) {
                na += a.re(c)[x] * a.re(c)[x];
                nb += b.re(c)[x] * b.re(c)[x];
                np += p.re(c)[x] * p.re(c)[x];
            }
            CHECK(rel_err(np, na * nb) < 1e-9);
        }
    }
}

TEST_CASE("score expansion oracle: identity rotation, zero translation") {
    Rng rng(23);
    const std::size_t d = 4;
    auto qh = random_biquat<double>(rng, d);
    auto qt = random_biquat<double>(rng, d);
    Biquat<double> zero(d);
    auto unit = Biquat<double>::one(d);
    const double got = score_expansion_oracle(qh, zero, unit, qt);
    CHECK(rel_err(got, flat_dot(qh, qt)) < 1e-12);
}

TEST_CASE("score expansion oracle equals the composed score") {
    Rng rng(29);
    for (std::size_t d : {1u, 2u, 8u}) {
        for (int rep = 0; rep < 100; ++rep) {
            auto qh = random_biquat<double>(rng, d);
            auto qt = random_biquat<double>(rng, d);
            auto qtr = random_biquat<double>(rng, d);
            auto qrot = random_biquat<double>(rng, d);
            const double composed = biquat_score(qh, qtr, qrot, qt);
            const double expanded = score_expansion_oracle(qh, qtr, qrot, qt);
            CHECK(rel_err(composed, expanded) < 1e-9);
        }
    }
}

TEST_CASE("score expansion oracle, 32-bit") {
    Rng rng(31);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t d = 2;
        auto qh = random_biquat<float>(rng, d);
        auto qt = random_biquat<float>(rng, d);
        auto qtr = random_biquat<float>(rng, d);
        auto qrot = random_biquat<float>(rng, d);
        const double composed = biquat_score(qh, qtr, qrot, qt);
        const double expanded = score_expansion_oracle(qh, qtr, qrot, qt);
        CHECK(rel_err(composed, expanded) < 1e-4);
    }
}

TEST_CASE("selective-zero probe isolates the intra-structural term") {
    Rng rng(37);
    const std::size_t d = 3;
    Biquat<double> qh(d), qt(d), qtr(d);
    auto qrot = random_biquat<double>(rng, d);
    for (std::size_t x = 0; x < d; ++x) {
        qh.re(1)[x] = rng.uniform(-1, 1);
        qh.im(1)[x] = rng.uniform(-1, 1);
        qt.re(1)[x] = rng.uniform(-1, 1);
        qt.im(1)[x] = rng.uniform(-1, 1);
    }
    // only the (i=1, k=0, m=1) term survives: <h_s (*) rot_0, t_s>
    double want = 0;
    for (std::size_t x = 0; x < d; ++x) {
        const double cre = qh.re(1)[x] * qrot.re(0)[x] - qh.im(1)[x] * qrot.im(0)[x];
        const double cim = qh.re(1)[x] * qrot.im(0)[x] + qh.im(1)[x] * qrot.re(0)[x];
        want += cre * qt.re(1)[x] + cim * qt.im(1)[x];
    }
    CHECK(rel_err(score_expansion_oracle(qh, qtr, qrot, qt), want) < 1e-12);
    CHECK(rel_err(biquat_score(qh, qtr, qrot, qt), want) < 1e-12);
}

TEST_CASE("corrupting a structure constant breaks the equivalence") {
    StructureConstants sc = StructureConstants::canonical();
    sc.h[1][2][3] = -1; // flip the sign of ij = k
    sc.rebuild_nonzero();
    Rng rng(41);
    const std::size_t d = 2;
    auto qh = random_biquat<double>(rng, d);
    auto qt = random_biquat<double>(rng, d);
    auto qtr = random_biquat<double>(rng, d);
    auto qrot = random_biquat<double>(rng, d);
    const double good = biquat_score(qh, qtr, qrot, qt);
    const double bad = biquat_score(qh, qtr, qrot, qt, sc);
    CHECK(rel_err(good, score_expansion_oracle(qh, qtr, qrot, qt)) < 1e-9);
    CHECK(rel_err(bad, score_expansion_oracle(qh, qtr, qrot, qt)) > 1e-6);
}

TEST_CASE("pack/unpack round trip matches the flat layout") {
    Rng rng(43);
    const std::size_t d = 4;
    ComplexBlock<double> blocks[4];
    for (auto& blk : blocks) {
        blk = ComplexBlock<double>(d);
        for (std::size_t x = 0; x < d; ++x) {
            blk.re[x] = rng.uniform(-1, 1);
            blk.im[x] = rng.uniform(-1, 1);
        }
    }
    auto q = pack(blocks[0], blocks[1], blocks[2], blocks[3]);
    // flat order: [c0.re, c0.im, c1.re, c1.im, ...]
    for (int c = 0; c < 4; ++c) {
        for (std::size_t x = 0; x < d; ++x) {
            CHECK(q.flat[(2 * static_cast<std::size_t>(c)) * d + x] == blocks[c].re[x]);
            CHECK(q.flat[(2 * static_cast<std::size_t>(c) + 1) * d + x] == blocks[c].im[x]);
        }
        auto back = q.coeff(c);
        CHECK(back.re == blocks[c].re);
        CHECK(back.im == blocks[c].im);
    }
}
