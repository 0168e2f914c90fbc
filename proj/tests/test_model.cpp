// test_model.cpp — spin system, assembly, FGR chains, spec parsing

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "sbs/config.hpp"
#include "sbs/model.hpp"
#include "sbs/oracle.hpp"

using namespace sbs;
using namespace sbs::model;

namespace {

SpinSystem two_level() {
    RVec e(2);
    e << 0.0, 0.5;
    Mat d(2, 2);
    d << 0, 1, 1, 0;
    return {e, d};
}

ModelInstance tiny(double lambda) {
    const auto grid = onep::build_grid(2, 2.0);
    return assemble(two_level(), CouplingConfig{lambda}, onep::FormFactor(0.5, 0.5, 1.0, 2.0), grid,
                    fock::build_basis(2, 2));
}

}  // namespace

TEST_CASE("spin system validation") {
    RVec e(2);
    e << 0.5, 0.5;
    CHECK_THROWS_AS(SpinSystem(e, Mat::Identity(2, 2)), std::invalid_argument);
    e << 0.0, 0.5;
    Mat d(2, 2);
    d << 0, 1, 2, 0;
    CHECK_THROWS_AS(SpinSystem(e, d), std::invalid_argument);
    CHECK_THROWS_AS(SpinSystem(e, Mat::Identity(3, 3)), std::invalid_argument);
    const auto s = two_level();
    CHECK(s.hamiltonian()(1, 1).real() == 0.5);
    CHECK(s.level(1)(1) == cplx(1.0));
}

TEST_CASE("12x12 instance equals the dense oracle entrywise") {
    const auto m = tiny(0.1);
    CHECK(m.dim() == 12);
    const Mat h = m.h.to_dense();
    const auto d = oracle::dense_instance(m);
    CHECK((h - d.h).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-14);
    // H = H_S + H_F + H_I as matrices
    CHECK((h - m.h_s.to_dense() - m.h_f.to_dense() - m.h_i.to_dense()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("interaction is off-diagonal in the photon number") {
    const auto m = tiny(0.3);
    const Mat hi = m.h_i.to_dense();
    const Eigen::Index d = m.fock_dim();
    for (Eigen::Index i = 0; i < hi.rows(); ++i)
        for (Eigen::Index j = 0; j < hi.cols(); ++j)
            if (m.basis.total(i % d) == m.basis.total(j % d)) CHECK(hi(i, j) == cplx(0.0));
}

TEST_CASE("decoupled spectrum is e_i + sum n_j omega_j") {
    const auto m = tiny(0.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(m.h.to_dense());
    std::vector<double> expect;
    for (Eigen::Index s = 0; s < 2; ++s)
        for (Eigen::Index i = 0; i < m.fock_dim(); ++i) {
            double e = m.spin.energies(s);
            const auto occ = m.basis.occupation(i);
            for (std::size_t j = 0; j < occ.size(); ++j) e += occ[j] * m.omega(static_cast<Eigen::Index>(j));
            expect.push_back(e);
        }
    std::sort(expect.begin(), expect.end());
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(std::abs(es.eigenvalues()(static_cast<Eigen::Index>(i)) - expect[i]) <= 1e-14);
}

TEST_CASE("desk instance dimensions") {
    const auto m = assemble(desk_spec());
    CHECK(m.dim() == 13090);
    CHECK(m.grid.horizon() > 40.0);
    CHECK(m.h.verify_hermitian(1e-12));
    const auto m2 = with_cutoff(m, 2);
    CHECK(m2.fock_dim() == m.basis.dim_upto(2));
}

TEST_CASE("FGR: two-level closed form and quadrature") {
    const auto ff = onep::FormFactor(0.5, 0.5, 1.0, 2.0);
    const auto r = fgr_check(two_level(), ff);
    CHECK(r.holds);
    CHECK(r.rate(1, 0) == doctest::Approx(4.0 * kPi * std::pow(0.5, 1.5)).epsilon(1e-14));
    CHECK(std::abs(r.rate(1, 0) - 4.4429) <= 1e-4);
    const auto q = oracle::delta_quadrature([&ff](double k) { return ff(k); }, 0.5, ff.k_support());
    CHECK(q.converged);
    CHECK(std::abs(q.value - r.rate(1, 0)) <= 1e-4);
    // uniform shift invariance
    RVec e(2);
    e << 3.0, 3.5;
    CHECK(fgr_check(SpinSystem(e, two_level().coupling), ff).rate(1, 0) == doctest::Approx(r.rate(1, 0)));
}

TEST_CASE("FGR: failing and multi-level chains") {
    const auto ff = onep::FormFactor(0.5, 0.5, 1.0, 2.0);
    RVec e(2);
    e << 0.0, 0.5;
    const auto none = fgr_check(SpinSystem(e, Mat::Zero(2, 2)), ff);
    CHECK(!none.holds);
    CHECK(none.rate(1, 0) == 0.0);
    // gap outside the support
    e << 0.0, 2.5;
    CHECK(!fgr_check(SpinSystem(e, two_level().coupling), ff).holds);

    RVec e3(3);
    e3 << 0.0, 0.3, 0.5;
    Mat d(3, 3);
    d << 0, 0.7, 0.4, 0.7, 0, 0, 0.4, 0, 0;
    const auto r = fgr_check(SpinSystem(e3, d), ff);
    CHECK(r.holds);
    CHECK(r.rate(2, 1) == 0.0);
    CHECK(r.rate(2, 0) == doctest::Approx(4.0 * kPi * std::pow(0.5, 1.5) * 0.16).epsilon(1e-13));
    const auto& lvl2 = r.levels[1];
    CHECK(lvl2.chain_found);
    REQUIRE(lvl2.chains.size() == 1);
    CHECK(lvl2.chains[0] == std::vector<std::size_t>{2, 0});
    // literal convention uses e_i + e_j
    RVec e2(2);
    e2 << 0.1, 0.5;
    const auto lit = fgr_check(SpinSystem(e2, two_level().coupling), ff, FgrConvention::Literal);
    CHECK(lit.links[0].delta == doctest::Approx(0.6));
    CHECK(fgr_check(SpinSystem(e2, two_level().coupling), ff).links[0].delta == doctest::Approx(0.4));
    CHECK(to_string(lit.convention) == "literal");
}

TEST_CASE("model spec parsing") {
    const auto cfg = config::Config::parse(
        "[model]\nenergies = 0, 0.3, 0.5\nd_row0 = 0, 1, 0\nd_row1 = 1, 0, 1\nd_row2 = 0, 1, 0\nlambda = 0.05\n"
        "n_k = 8\nn_max = 2\nfgr_convention = literal\n");
    const auto s = parse_model_spec(cfg);
    CHECK(s.energies.size() == 3);
    CHECK(s.lambda == 0.05);
    CHECK(s.n_k == 8);
    CHECK(s.convention == FgrConvention::Literal);
    CHECK(s.spin().dim() == 3);
    CHECK_THROWS(parse_model_spec(config::Config::parse("[model]\nenergies = 0, 0.3, 0.5\n")));
    CHECK_THROWS(parse_model_spec(config::Config::parse("[model]\nfgr_convention = other\n")));
}
