// test_onep.cpp — grids, sine transform, form factor, indicators, commutator lab

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "sbs/commutator_lab.hpp"
#include "sbs/fit.hpp"
#include "sbs/krylov.hpp"
#include "sbs/onep.hpp"

using namespace sbs;
using namespace sbs::onep;

TEST_CASE("grid nodes and spacing") {
    const auto g = build_grid(4, 1.0);
    const RVec k = g.k_nodes();
    CHECK(k.size() == 4);
    for (int j = 0; j < 4; ++j) CHECK(k(j) == doctest::Approx(0.25 * (j + 1)).epsilon(1e-15));
    CHECK(g.dx() == doctest::Approx(kPi).epsilon(1e-15));
    CHECK(g.dk() * g.dx() == doctest::Approx(kPi / 4.0).epsilon(1e-15));
    CHECK_THROWS_AS(build_grid(1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(4, -1.0), std::invalid_argument);
}

TEST_CASE("sine transform is real, symmetric and unitary") {
    for (std::size_t n : {4u, 16u, 32u, 65u}) {
        const auto g = build_grid(n, 2.0);
        const auto tr = make_position_transform(g);
        const auto nn = static_cast<Eigen::Index>(n);
        CHECK((tr.u.transpose() * tr.u - RMat::Identity(nn, nn)).norm() <= 1e-12);
        CHECK((tr.u - tr.u.transpose()).norm() <= 1e-14);
        const Vec v = krylov::random_unit_vector(nn, 7 + n);
        CHECK(std::abs((tr.u.cast<cplx>() * v).norm() - 1.0) <= 1e-12);
    }
}

TEST_CASE("form factor values and coupling weights") {
    const FormFactor ff(0.5, 0.5, 1.0, 2.0);
    CHECK(ff(0.25) == doctest::Approx(1.41421356).epsilon(1e-8));
    CHECK(ff(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ff(2.0) == 0.0);
    CHECK(ff(3.0) == 0.0);
    // alpha = 1: flat profile below the cutoff
    const FormFactor flat(1.0, 1.0, 1.0, 2.0);
    const auto g = build_grid(16, 2.0);
    const RVec w = sample_coupling(flat, g);
    for (std::size_t j = 0; j < 8; ++j)
        CHECK(w(static_cast<Eigen::Index>(j)) == doctest::Approx(std::sqrt(4.0 * kPi * g.dk()) * g.k(j)).epsilon(1e-13));
    // hard cutoff at 1: sum g_j^2 -> 4 pi / 2.5
    const FormFactor hard(0.5, 0.5, 1.0, 1.0);
    const RVec wh = sample_coupling(hard, build_grid(4096, 1.0));
    CHECK(std::abs(wh.squaredNorm() / (4.0 * kPi / 2.5) - 1.0) <= 1e-3);
}

TEST_CASE("smooth indicator shape and indicator operators") {
    const SmoothIndicator th(0.6, 0.8);
    CHECK(th(0.0) == 1.0);
    CHECK(th(0.6) == 1.0);
    CHECK(th(0.8) == 0.0);
    CHECK(th(1.5) == 0.0);
    double prev = 1.0;
    for (double s = 0.0; s <= 1.0; s += 0.01) {
        CHECK(th(s) <= prev + 1e-15);
        CHECK(th(s) >= 0.0);
        prev = th(s);
    }
    CHECK(th.derivative(0.7) < 0.0);
    CHECK(th.derivative(0.5) == 0.0);

    const auto g = build_grid(32, 2.0);
    // node x_m = v1 t is on the plateau, x_m >= v2 t is outside the support
    const double t = g.x(5) / 0.6;
    const auto op = indicator_op(th, t, g);
    CHECK(op.rep == Representation::XDiagonal);
    CHECK(std::abs(op.matrix(5, 5) - 1.0) <= 1e-14);
    for (std::size_t m = 0; m < g.n_modes; ++m)
        if (g.x(m) >= 0.8 * t) CHECK(std::abs(op.matrix(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))) == 0.0);
    const auto big = indicator_op(th, 10.0 * g.x_max(), g);
    CHECK((big.matrix - Mat::Identity(32, 32)).norm() == 0.0);
    CHECK(op.is_hermitian(0.0));
    // monotone in t
    const auto later = indicator_op(th, 1.5 * t, g);
    for (Eigen::Index m = 0; m < 32; ++m) CHECK(later.matrix(m, m).real() >= op.matrix(m, m).real() - 1e-15);
    CHECK_THROWS_AS(indicator_op(th, 0.0, g), std::invalid_argument);
}

TEST_CASE("annulus excludes the origin") {
    const AnnularIndicator a{{0.15, 0.3}, {0.5, 0.7}};
    CHECK(a(0.0) == 0.0);
    CHECK(a(0.1) == 0.0);
    CHECK(a(0.4) == doctest::Approx(1.0));
    CHECK(a(0.8) == 0.0);
}

TEST_CASE("representation changes round trip") {
    const auto g = build_grid(16, 2.0);
    const auto tr = make_position_transform(g);
    const auto x = indicator_op(SmoothIndicator(0.6, 0.8), 10.0, g);
    const auto k = x.in_momentum(tr);
    CHECK(!is_position(k.rep));
    const auto back = k.in_position(tr);
    CHECK((back.matrix - x.matrix).norm() <= 1e-13);
    CHECK(k.is_hermitian(1e-13));
    const auto w = frequency_op(g);
    CHECK(w.rep == Representation::KDiagonal);
    CHECK(std::abs(w.matrix(3, 3).real() - g.k(3)) <= 1e-15);
    // nodes 0.125, 0.25 lie below 0.3
    const auto p = soft_projector(g, 0.3);
    CHECK(p.matrix.trace().real() == doctest::Approx(2.0));
}

TEST_CASE("h_alpha membership") {
    const auto g = build_grid(64, 2.0);
    const FormFactor ff(0.5, 0.5, 1.0, 2.0);
    const auto rep = h_alpha_membership_check(ff, g);
    CHECK(rep.consistent());
    CHECK(rep.max_ratio[0] == doctest::Approx(1.0).epsilon(1e-10));
    // step profile: first derivative blows up under refinement
    const auto step = [](double k) { return k < 0.5 ? 1.0 : 0.0; };
    const auto bad = h_alpha_membership_check(step, 0.5, 0.5, g);
    CHECK(bad.divergent[1]);
    CHECK(!bad.consistent());
    CHECK_THROWS_AS(h_alpha_membership_check(FormFactor(0.5, 0.4, 1.0, 2.0), g), std::invalid_argument);
}

TEST_CASE("commutator lab: trivial profile") {
    CommutatorLabConfig cfg;
    cfg.t_list = {4.0, 8.0};
    cfg.n_lab = 128;
    RadialProfile one{[](double) { return 1.0; }, [](double) { return 0.0; }};
    for (const auto& r : commutator_lab(cfg, one)) {
        CHECK(r.norm_remainder <= 1e-12);
        CHECK(r.norm_khat_comm <= 1e-12);
    }
    const auto w = w0_decomposition_check(cfg, one, 8.0);
    CHECK(w.norm_w0 <= 1e-11);
    CHECK(w.norm_b <= 1e-11);
    CHECK(w.norm_b_prime <= 1e-11);
}

TEST_CASE("commutator lab: exponents and norm symmetry") {
    CommutatorLabConfig cfg{0.5, {8.0, 16.0, 32.0, 64.0, 128.0, 256.0}, 512, kPi, 1};
    const auto rows = commutator_lab(cfg, SmoothIndicator(0.1, 1.0).profile());
    std::vector<double> t, o, oh, kh;
    for (const auto& r : rows) {
        t.push_back(r.t);
        o.push_back(r.norm_remainder);
        oh.push_back(r.norm_remainder_high);
        kh.push_back(r.norm_khat_comm_high);
        CHECK(std::abs(r.norm_remainder - r.norm_remainder_adjoint) <= 1e-10 * (1.0 + r.norm_remainder));
    }
    CHECK(std::abs(fit::fit_power_law(t, o).exponent + 1.0) <= 0.2);
    CHECK(fit::fit_power_law(t, oh).exponent <= -1.3);
    CHECK(fit::fit_power_law(t, kh).exponent <= -0.3);
    const auto w = w0_decomposition_check(cfg, SmoothIndicator(0.1, 1.0).profile(), 16.0);
    CHECK(w.norm_leading <= w.leading_bound + 1e-12);
}

TEST_CASE("commutator lab rejects an empty high band") {
    CommutatorLabConfig cfg;
    cfg.n_lab = 64;
    cfg.k_max = 1.0;
    cfg.t_list = {1e8};
    CHECK_THROWS(commutator_lab(cfg, SmoothIndicator(0.6, 0.8).profile()));
}
