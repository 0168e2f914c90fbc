// test_oracle.cpp — dense references and their agreement with the sparse engines

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "sbs/fock.hpp"
#include "sbs/krylov.hpp"
#include "sbs/model.hpp"
#include "sbs/oracle.hpp"
#include "sbs/solver.hpp"

using namespace sbs;
using namespace sbs::oracle;

namespace {

model::ModelInstance instance(std::size_t modes, std::size_t n_max, double lambda) {
    RVec e(2);
    e << 0.0, 0.5;
    Mat d(2, 2);
    d << 0, 1, 1, 0;
    return model::assemble(model::SpinSystem(e, d), model::CouplingConfig{lambda}, onep::FormFactor(0.5, 0.5, 1.0, 2.0),
                           onep::build_grid(modes, 2.0), fock::build_basis(modes, n_max));
}

}  // namespace

TEST_CASE("dense instance invariants on the 12x12 and 40x40 instances") {
    for (auto [modes, n] : {std::pair<std::size_t, std::size_t>{2, 2}, {3, 3}}) {
        const auto m = instance(modes, n, 0.15);
        const auto d = dense_instance(m);
        CHECK(d.h.rows() == m.dim());
        CHECK(d.hermiticity_defect <= 1e-13);
        CHECK(d.orthonormality_defect <= 1e-11);
        CHECK((d.h - m.h.to_dense()).cwiseAbs().maxCoeff() <= 1e-14);
        const auto gs = solver::ground_state(m);
        CHECK(std::abs(gs.energy - d.evals(0)) <= 1e-10);
    }
    CHECK(instance(3, 3, 0.1).dim() == 40);
}

TEST_CASE("dense propagation") {
    const auto m = instance(2, 2, 0.2);
    const auto d = dense_instance(m);
    const Vec psi = krylov::random_unit_vector(m.dim(), 2);
    CHECK((dense_propagate(d, psi, 0.0) - psi).norm() <= 1e-13);
    const Vec v = d.evecs.col(3);
    CHECK((dense_propagate(d, v, 2.0) - std::exp(cplx(0.0, -2.0 * d.evals(3))) * v).norm() <= 1e-12);
    solver::PropagationConfig pc;
    pc.checkpoints = {5.0};
    const auto tr = solver::propagate(psi, m.h, pc);
    CHECK(std::norm(dense_propagate(d, psi, 5.0).dot(tr.states.back())) >= 1.0 - 1e-8);
}

TEST_CASE("dense norm") {
    CHECK(dense_norm(Mat::Identity(7, 7)) == doctest::Approx(1.0).epsilon(1e-14));
    const Vec u = 2.0 * krylov::random_unit_vector(5, 1), v = 3.0 * krylov::random_unit_vector(6, 2);
    CHECK(dense_norm(u * v.adjoint()) == doctest::Approx(6.0).epsilon(1e-12));
    CHECK_THROWS(dense_norm(Mat::Zero(10, 10), 8));
}

TEST_CASE("I_ex sector norms follow C(k+k', k)") {
    const auto single = fock::build_basis(2, 4);
    const auto ds = fock::make_doubled(single);
    for (int k = 0; k <= 4; ++k)
        for (int kp = 0; k + kp <= 4; ++kp) {
            std::vector<Eigen::Index> cols;
            for (Eigen::Index i = 0; i < ds.doubled.dim(); ++i)
                if (single.total(ds.first[static_cast<std::size_t>(i)]) == k &&
                    single.total(ds.second[static_cast<std::size_t>(i)]) == kp)
                    cols.push_back(i);
            Mat a(single.dim(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c) {
                Vec e = Vec::Zero(ds.doubled.dim());
                e(cols[c]) = 1.0;
                a.col(static_cast<Eigen::Index>(c)) = fock::i_ex(ds, e).state;
            }
            const double n = dense_norm(a);
            CHECK(n * n == doctest::Approx(static_cast<double>(fock::binomial(static_cast<std::size_t>(k + kp),
                                                                               static_cast<std::size_t>(k))))
                                .epsilon(1e-10));
        }
}

TEST_CASE("delta quadrature") {
    const auto flat = [](double) { return 1.0; };
    const auto q = delta_quadrature(flat, 0.5, 2.0);
    CHECK(q.converged);
    CHECK(std::abs(q.value - kPi) <= 1e-6);
    const onep::FormFactor ff(0.5, 0.5, 1.0, 2.0);
    const auto r = delta_quadrature([&ff](double k) { return ff(k); }, 0.5, 2.0);
    CHECK(std::abs(r.value - 4.0 * kPi * std::pow(0.5, 1.5)) <= 1e-4);
    CHECK(std::abs(r.value - 4.4429) <= 1e-4);
    CHECK(delta_quadrature(flat, 2.5, 2.0).value == 0.0);
    CHECK(delta_quadrature(flat, -0.1, 2.0).value == 0.0);
}

TEST_CASE("permanent and dense Gamma") {
    Mat a(2, 2);
    a << 1, 2, 3, 4;
    CHECK(std::abs(permanent(a) - cplx(10.0)) <= 1e-14);
    CHECK(std::abs(permanent(Mat::Identity(4, 4)) - cplx(1.0)) <= 1e-14);
    CHECK(std::abs(permanent(Mat::Ones(3, 3)) - cplx(6.0)) <= 1e-13);
    const auto from = fock::build_basis(3, 3);
    const auto to = fock::build_basis(2, 3);
    Mat t(2, 3);
    t << 0.3, cplx(0.0, 0.5), 0.1, -0.2, 0.4, cplx(0.2, 0.1);
    const Mat g = dense_gamma(t, from, to);
    const Vec psi = krylov::random_unit_vector(from.dim(), 4);
    CHECK((g * psi - fock::gamma_map(t, from, to, psi)).norm() <= 1e-13);
}

TEST_CASE("dense Weyl and brute partial trace agree with the engines") {
    const auto b = fock::build_basis(2, 4);
    Vec f(2);
    f << 0.3, cplx(0.1, -0.2);
    const Mat w = dense_weyl(f, b);
    CHECK((w.adjoint() * w - Mat::Identity(b.dim(), b.dim())).norm() <= 1e-12);
    const Vec psi = krylov::random_unit_vector(b.dim(), 3);
    CHECK((w * psi - fock::weyl_apply(f, b, psi).state).norm() <= 1e-10);

    const auto grid = onep::build_grid(4, 2.0);
    const auto xb = fock::build_basis(4, 3).with_representation(true);
    const Vec chi = krylov::random_unit_vector(2 * xb.dim(), 8);
    const auto split = fock::make_mode_split(grid, 2.0 * grid.dx() + 1e-9);
    CHECK((brute_partial_trace(chi, xb, split.inner, 2) - fock::partial_trace(chi, xb, split, 2)).norm() <= 1e-13);
}
