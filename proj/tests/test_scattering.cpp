// test_scattering.cpp — splits, identification, H_as, Cook limits, Z and the AC residual

#include <algorithm>
#include <cmath>
#include <memory>

#include "doctest.h"
#include "sbs/krylov.hpp"
#include "sbs/model.hpp"
#include "sbs/scattering.hpp"
#include "sbs/solver.hpp"

using namespace sbs;
using namespace sbs::scattering;

namespace {

struct Setup {
    model::ModelInstance m;
    solver::GroundStateResult gs;
    std::unique_ptr<Context> ctx;

    Setup(std::size_t n_k, std::size_t n_max, double lambda, double k_max = 2.0) {
        auto s = model::desk_spec();
        s.n_k = n_k;
        s.n_max = n_max;
        s.lambda = lambda;
        s.k_max = k_max;
        m = model::assemble(s);
        gs = solver::ground_state(m);
        ctx = std::make_unique<Context>(m, gs);
    }
};

// psi (x) Omega on spin (x) doubled
Vec embed_first(const Context& ctx, const Vec& psi) {
    const auto& ds = ctx.doubled();
    const Eigen::Index d = ds.single.dim(), dd = ds.doubled.dim();
    Vec out = Vec::Zero(dd * static_cast<Eigen::Index>(ctx.spin_dim()));
    for (std::size_t s = 0; s < ctx.spin_dim(); ++s)
        for (Eigen::Index k = 0; k < dd; ++k)
            if (ds.second[static_cast<std::size_t>(k)] == 0)
                out(static_cast<Eigen::Index>(s) * dd + k) = psi(static_cast<Eigen::Index>(s) * d + ds.first[static_cast<std::size_t>(k)]);
    return out;
}

Vec spin_ground_times(const model::ModelInstance& m, const Vec& photons) {
    Vec out = Vec::Zero(m.dim());
    out.head(m.fock_dim()) = photons;
    return out;
}

}  // namespace

TEST_CASE("split and Cook grid") {
    const auto g = onep::build_grid(16, 2.0);
    const auto sp = make_split(onep::SmoothIndicator(0.6, 0.8), 10.0, g);
    CHECK(((sp.j0.matrix + sp.j_inf.matrix) - Mat::Identity(16, 16)).norm() == 0.0);
    CookConfig cfg;
    const auto grid = cook_grid(cfg, 40.2);
    CHECK(grid.front() == cfg.t0);
    CHECK(grid.back() == doctest::Approx(40.2).epsilon(1e-14));
    for (std::size_t i = 1; i < grid.size(); ++i) {
        CHECK(grid[i] > grid[i - 1]);
        CHECK(grid[i] / grid[i - 1] <= cfg.rho + 1e-12);
    }
    cfg.t_final = 20.0;
    CHECK(cook_grid(cfg, 40.2).back() == doctest::Approx(20.0));
}

TEST_CASE("I_ex J_ex,t is the identity and J_ex is a contraction") {
    Setup s(8, 3, 0.1);
    const onep::SmoothIndicator th(0.6, 0.8);
    double worst = 0.0;
    for (int r = 0; r < 20; ++r) {
        const Vec psi = krylov::random_unit_vector(s.m.dim(), 100 + r);
        for (double t : {1.0, 2.5, 5.0, 8.0, 12.0}) {
            const Vec x = apply_J_ex(*s.ctx, psi, make_split(th, t, s.m.grid));
            CHECK(x.norm() <= 1.0 + 1e-12);
            const auto back = fock::i_ex(s.ctx->doubled(), x, s.m.spin_dim());
            worst = std::max(worst, (back.state - psi).norm());
        }
    }
    CHECK(worst <= 1e-12);
    // every photon inside the plateau: J_ex psi = psi (x) Omega
    const Vec psi = krylov::random_unit_vector(s.m.dim(), 7);
    const Vec x = apply_J_ex(*s.ctx, psi, make_split(th, 1e6, s.m.grid));
    CHECK((x - embed_first(*s.ctx, psi)).norm() <= 1e-12);
}

TEST_CASE("block-wise exp(-i t H_as) equals the assembled H_as") {
    Setup s(4, 3, 0.2);
    const auto has = assemble_asymptotic(s.m, s.ctx->doubled());
    Eigen::SelfAdjointEigenSolver<Mat> es(has.h.to_dense());
    const Vec x = krylov::random_unit_vector(has.dim(), 5);
    for (double t : {0.7, 3.0, -4.0}) {
        const Vec ref = es.eigenvectors() *
                        (es.eigenvalues().unaryExpr([t](double e) { return std::exp(cplx(0.0, -t * e)); }).asDiagonal() *
                         (es.eigenvectors().adjoint() * x));
        CHECK((s.ctx->evolve_asymptotic(x, t) - ref).norm() <= 1e-9);
    }
}

TEST_CASE("decoupled H_as spectrum is spin levels plus free photons") {
    Setup s(3, 2, 0.0);
    const auto& ds = s.ctx->doubled();
    const auto has = assemble_asymptotic(s.m, ds);
    Eigen::SelfAdjointEigenSolver<Mat> es(has.h.to_dense());
    std::vector<double> expect;
    for (Eigen::Index sp = 0; sp < 2; ++sp)
        for (Eigen::Index k = 0; k < ds.doubled.dim(); ++k) {
            const auto p = ds.first[static_cast<std::size_t>(k)], q = ds.second[static_cast<std::size_t>(k)];
            expect.push_back(s.m.spin.energies(sp) + s.ctx->photon_energy()(p) + s.ctx->photon_energy()(q));
        }
    std::sort(expect.begin(), expect.end());
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(es.eigenvalues()(static_cast<Eigen::Index>(i)) - expect[i]) <= 1e-12);
}

TEST_CASE("identification routes agree") {
    Setup s(6, 3, 0.1);
    const Vec phi = krylov::random_unit_vector(s.m.fock_dim(), 9);
    const auto a = identification_I(*s.ctx, phi);
    const auto b = identification_I_monomial(*s.ctx, phi);
    CHECK((a.state - b.state).norm() <= 1e-12);
    // vacuum -> Psi_gs, for both readings
    const Vec omega = fock::vacuum(s.m.basis);
    CHECK((identification_I(*s.ctx, omega).state - s.gs.state).norm() <= 1e-14);
    CHECK((identification_I_literal(*s.ctx, omega).state - s.gs.state).norm() <= 1e-14);
    CHECK(s.ctx->dressing_defect(0) == 0.0);
    for (std::size_t k = 1; k <= 3; ++k) CHECK(s.ctx->dressing_defect(k) > 0.0);
}

TEST_CASE("W+ Omega = Psi_gs and decoupled W_t is constant") {
    Setup s(16, 2, 0.1);
    CookConfig cfg;
    const auto w = wave_operator_plus(*s.ctx, fock::vacuum(s.m.basis), cfg);
    CHECK(w.converged);
    CHECK((w.limit - s.gs.state).norm() <= 1e-8);
    for (double c : w.cauchy) CHECK(c <= 1e-8);

    Setup z(16, 2, 0.0);
    const Vec f = packet(z.m.grid, 0.8, 0.15);
    const Vec one = one_photon(z.m.basis, f);
    const auto w0 = wave_operator_plus(*z.ctx, one, cfg);
    for (double c : w0.cauchy) CHECK(c <= 1e-8);
    CHECK(w0.isometry_defect <= 1e-10);
    CHECK(intertwining_defect(*z.ctx, one, 5.0) <= 1e-8);
    // a_+^*(f) Psi_gs at lambda = 0 is spin ground (x) a^*(f) Omega
    const auto a0 = asymptotic_create(*z.ctx, {f}, cfg);
    CHECK((a0.limit - spin_ground_times(z.m, one)).norm() <= 1e-8);
    const auto none = asymptotic_create(*s.ctx, {}, cfg);
    CHECK((none.limit - s.gs.state).norm() <= 1e-8);
}

TEST_CASE("one-photon wave operator converges and is isometric") {
    // horizon is ~20 here: the packet must be narrow in x to leave the coupling region in time
    Setup s(16, 2, 0.1);
    CookConfig cfg;
    const Vec f = packet(s.m.grid, 0.8, 0.3);
    const auto w = wave_operator_plus(*s.ctx, one_photon(s.m.basis, f), cfg);
    CHECK(w.converged);
    CHECK(w.isometry_defect <= 1e-3);
    const auto a = asymptotic_create(*s.ctx, {f}, cfg);
    CHECK((a.limit - w.limit).norm() <= 2.0 * (w.final_cauchy + a.final_cauchy) + 1e-10);
}

TEST_CASE("Z of a decoupled outgoing packet returns the packet") {
    Setup s(16, 2, 0.0);
    CookConfig cfg;
    const Vec f = packet(s.m.grid, 0.8, 0.3, 4.0);
    const Vec one = one_photon(s.m.basis, f);
    const Vec psi = spin_ground_times(s.m, one);
    const auto z = inverse_Z(*s.ctx, psi, onep::SmoothIndicator(0.6, 0.8), cfg);
    CHECK(z.contraction_defect <= 1e-10);
    CHECK(std::norm(one.dot(z.z.limit)) >= 1.0 - 1e-2);
    const auto ac = ac_residual(*s.ctx, psi, 1, onep::SmoothIndicator(0.6, 0.8), cfg);
    CHECK(ac.via_wave <= 1e-1);
}

TEST_CASE("Z of the ground state is vacuum-dominated") {
    Setup s(16, 2, 0.1);
    CookConfig cfg;
    const auto z = inverse_Z(*s.ctx, s.gs.state, onep::SmoothIndicator(0.6, 0.8), cfg);
    CHECK(z.contraction_defect <= 1e-8);
    const Vec omega = fock::vacuum(s.m.basis);
    CHECK(std::abs(omega.dot(z.z.limit)) >= 0.95);
}
