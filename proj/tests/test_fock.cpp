// test_fock.cpp — occupation bases, dGamma, fields, Weyl, Gamma maps, splits

#include <cmath>
#include <random>

#include "doctest.h"
#include "sbs/fock.hpp"
#include "sbs/krylov.hpp"

using namespace sbs;
using namespace sbs::fock;

namespace {

Vec random_vec(Eigen::Index n, std::uint64_t seed) { return krylov::random_unit_vector(n, seed); }

Mat random_unitary(Eigen::Index n, std::uint64_t seed) {
    Mat g(n, n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = cplx(nd(rng), nd(rng));
    Eigen::HouseholderQR<Mat> qr(g);
    return qr.householderQ();
}

Mat random_hermitian(Eigen::Index n, std::uint64_t seed) {
    Mat g(n, n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = cplx(nd(rng), nd(rng));
    return 0.5 * (g + g.adjoint());
}

// brute-force Gamma(T) on small bases via creation monomials
Vec gamma_by_monomials(const Mat& t, const OccupationBasis& from, const OccupationBasis& to, const Vec& psi) {
    Vec out = Vec::Zero(to.dim());
    for (Eigen::Index i = 0; i < from.dim(); ++i) {
        if (psi(i) == cplx(0.0)) continue;
        Vec v = vacuum(to);
        const auto occ = from.occupation(i);
        double norm = 1.0;
        for (std::size_t j = 0; j < occ.size(); ++j)
            for (int c = 0; c < occ[j]; ++c) {
                v = create(t.col(static_cast<Eigen::Index>(j)), to).apply(v);
                norm *= (c + 1);
            }
        out += psi(i) / std::sqrt(norm) * v;
    }
    return out;
}

}  // namespace

TEST_CASE("basis enumeration and ranking") {
    const auto b = build_basis(2, 2);
    REQUIRE(b.dim() == 6);
    const int expect[6][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
    for (int i = 0; i < 6; ++i) {
        CHECK(b.occupation(i)[0] == expect[i][0]);
        CHECK(b.occupation(i)[1] == expect[i][1]);
    }
    CHECK(build_basis(1, 0).dim() == 1);
    CHECK(build_basis(3, 3).dim() == 20);
    const auto big = build_basis(7, 4);
    for (Eigen::Index i = 0; i < big.dim(); ++i) REQUIRE(big.index_of(big.occupation(i)) == i);
    CHECK_THROWS(build_basis(40, 6, 1000));
    // prefix property
    const auto small = build_basis(7, 2);
    for (Eigen::Index i = 0; i < small.dim(); ++i)
        CHECK(big.index_of(small.occupation(i)) == i);
}

TEST_CASE("dGamma diagonal and number operator") {
    const auto b = build_basis(3, 3);
    const RVec w = (RVec(3) << 0.5, 1.0, 1.5).finished();
    const auto hf = dGamma_diagonal(w, b);
    const auto n = number_operator(b);
    for (Eigen::Index i = 0; i < b.dim(); ++i) {
        Vec e = Vec::Zero(b.dim());
        e(i) = 1.0;
        const auto occ = b.occupation(i);
        CHECK(n.expectation(e) == doctest::Approx(occ[0] + occ[1] + occ[2]));
        CHECK(hf.expectation(e) == doctest::Approx(0.5 * occ[0] + occ[1] + 1.5 * occ[2]));
    }
    CHECK(hf.apply(vacuum(b)).norm() == 0.0);
}

TEST_CASE("dGamma of a general matrix equals sum b_ij a_i^* a_j") {
    const auto b = build_basis(3, 3);
    const Mat h = random_hermitian(3, 7);
    Mat expect = Mat::Zero(b.dim(), b.dim());
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            expect += h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                      annihilate_mode(i, b).adjoint().to_dense() * annihilate_mode(j, b).to_dense();
    const auto dg = dGamma(h, b);
    CHECK((dg.to_dense() - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(dg.hermitian());
    CHECK(dg.verify_hermitian());
    // linearity
    const Mat h2 = random_hermitian(3, 8);
    CHECK(((dGamma(Mat(h + h2), b).to_dense()) - dg.to_dense() - dGamma(h2, b).to_dense()).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("dGamma rejects representation mismatch") {
    const auto b = build_basis(3, 2);
    const auto x_op = onep::OneParticleOperator::diagonal(RVec::Ones(3), true);
    CHECK_THROWS_AS(dGamma(x_op, b), std::invalid_argument);
    CHECK_NOTHROW(dGamma(x_op, b.with_representation(true)));
}

TEST_CASE("annihilation: sector norm, vacuum, CCR on the interior") {
    const auto b = build_basis(4, 4);
    const Vec f = random_vec(4, 3) * 0.7;
    const auto a = annihilate(f, b);
    CHECK(a.apply(vacuum(b)).norm() == 0.0);
    for (std::size_t n = 1; n <= 4; ++n) {
        const Mat blk = a.to_dense().middleCols(b.sector_begin(n), b.sector_end(n) - b.sector_begin(n));
        Eigen::JacobiSVD<Mat> svd(blk);
        CHECK(svd.singularValues()(0) == doctest::Approx(std::sqrt(double(n)) * f.norm()).epsilon(1e-12));
    }
    const Vec g = random_vec(4, 4);
    const Mat ad = create(g, b).to_dense();
    const Mat comm = a.to_dense() * ad - ad * a.to_dense();
    const Eigen::Index inner = b.dim_upto(3);
    const Mat expect = f.dot(g) * Mat::Identity(inner, inner);
    CHECK((comm.topLeftCorner(inner, inner) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Weyl operator: identity at zero, vacuum overlap, coherent closed form") {
    const auto b0 = build_basis(2, 3);
    const auto w0 = weyl(Vec::Zero(2), b0);
    CHECK((w0.op.to_dense() - Mat::Identity(b0.dim(), b0.dim())).cwiseAbs().maxCoeff() < 1e-14);

    const auto b = build_basis(1, 12);
    Vec f(1);
    f(0) = 0.5;
    const auto w = weyl(f, b);
    const cplx overlap = w.op.to_dense()(0, 0);
    CHECK(std::abs(overlap) == doctest::Approx(std::exp(-0.125)).epsilon(1e-9));
    CHECK(std::abs(overlap) == doctest::Approx(0.88250).epsilon(1e-5));
    CHECK(w.unitarity_defect < 1.0);

    const auto cs = coherent_state(f, b);
    CHECK((cs.state - w.op.to_dense().col(0)).norm() < 1e-9);
    CHECK(number_operator(b).expectation(cs.state) == doctest::Approx(0.25).epsilon(1e-9));

    // Krylov action matches the dense route on the truncated generator
    const auto b2 = build_basis(3, 3);
    const Vec f2 = random_vec(3, 11) * 0.4;
    const Vec psi = random_vec(b2.dim(), 12);
    const auto act = weyl_apply(f2, b2, psi);
    const Mat phi = field(f2, b2).to_dense();
    Eigen::SelfAdjointEigenSolver<Mat> es(phi);
    const Vec expect = es.eigenvectors() * (I_unit * es.eigenvalues().cast<cplx>()).array().exp().matrix().asDiagonal() *
                       es.eigenvectors().adjoint() * psi;
    CHECK((act.state - expect).norm() < 1e-11);
    CHECK(act.leakage > 0.0);
}

TEST_CASE("Weyl bound ||(W(f)-1)(1+N)^-1|| <= 2 ||f||") {
    const auto b = build_basis(2, 4);
    for (double s : {0.1, 0.5, 1.0}) {
        const Vec f = random_vec(2, 5) * s;
        const auto w = weyl(f, b);
        Mat inv = Mat::Zero(b.dim(), b.dim());
        for (Eigen::Index i = 0; i < b.dim(); ++i) inv(i, i) = 1.0 / (1.0 + b.total(i));
        const Mat m = (w.op.to_dense() - Mat::Identity(b.dim(), b.dim())) * inv;
        Eigen::JacobiSVD<Mat> svd(m);
        CHECK(svd.singularValues()(0) <= 2.0 * s);
    }
}

TEST_CASE("Gamma(U): identity, diagonal phases, one-photon block, tensor route") {
    const auto b = build_basis(3, 3);
    const auto id = gamma_U(Mat::Identity(3, 3), b);
    CHECK((id.to_dense() - Mat::Identity(b.dim(), b.dim())).cwiseAbs().maxCoeff() < 1e-13);

    const RVec ph = (RVec(3) << 0.3, -1.1, 2.0).finished();
    const Mat u = (I_unit * ph.cast<cplx>()).array().exp().matrix().asDiagonal();
    const Mat g = gamma_U(u, b).to_dense();
    for (Eigen::Index i = 0; i < b.dim(); ++i) {
        const auto occ = b.occupation(i);
        const double phase = occ[0] * 0.3 - occ[1] * 1.1 + occ[2] * 2.0;
        CHECK(std::abs(g(i, i) - std::polar(1.0, phase)) < 1e-12);
    }

    const Mat ur = random_unitary(3, 21);
    const Mat gr = gamma_U(ur, b).to_dense();
    CHECK((gr.block(1, 1, 3, 3) - ur).cwiseAbs().maxCoeff() < 1e-10);
    const Vec psi = random_vec(b.dim(), 22);
    CHECK((gamma_map(ur, b, b, psi) - gr * psi).norm() < 1e-11);
    CHECK((gamma_U_apply(ur, b, psi) - gr * psi).norm() < 1e-11);
    CHECK((gamma_map(ur, b, b, psi) - gamma_by_monomials(ur, b, b, psi)).norm() < 1e-12);

    Mat refl = -Mat::Identity(3, 3);
    refl(0, 0) = 1.0;
    CHECK_THROWS_AS(gamma_U(refl, b), std::domain_error);
    CHECK_NOTHROW(gamma_U(refl, b, 0.5));
}

TEST_CASE("breve Gamma and I_ex") {
    const auto b = build_basis(3, 3);
    const auto ds = make_doubled(b);
    const RVec th = (RVec(3) << 1.0, 0.6, 0.1).finished();
    const auto j0 = onep::OneParticleOperator::diagonal(th, false);
    const auto ji = onep::OneParticleOperator::diagonal(RVec::Ones(3) - th, false);

    const Vec omega = vacuum(b);
    const Vec g_omega = breve_gamma(j0, ji, ds, omega);
    CHECK(std::abs(g_omega(0) - 1.0) < 1e-15);
    CHECK(std::abs(g_omega.norm() - 1.0) < 1e-15);

    // single photon f -> (j0 f) (+) (j_inf f)
    Vec one = Vec::Zero(b.dim());
    const Vec f = random_vec(3, 2);
    one.segment(1, 3) = f;
    const Vec gf = breve_gamma(j0, ji, ds, one);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(std::abs(gf(1 + static_cast<Eigen::Index>(k)) - th(static_cast<Eigen::Index>(k)) * f(static_cast<Eigen::Index>(k))) < 1e-14);
        CHECK(std::abs(gf(4 + static_cast<Eigen::Index>(k)) - (1.0 - th(static_cast<Eigen::Index>(k))) * f(static_cast<Eigen::Index>(k))) < 1e-14);
    }

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Vec psi = random_vec(b.dim(), 100 + seed);
        const Vec split = breve_gamma(j0, ji, ds, psi);
        CHECK(split.norm() <= psi.norm() + 1e-14);
        const auto back = i_ex(ds, split);
        CHECK((back.state - psi).norm() < 1e-12);
        // dense j0 route agrees with the diagonal binomial route
        onep::OneParticleOperator j0d{j0.matrix, onep::Representation::DenseK};
        onep::OneParticleOperator jid{ji.matrix, onep::Representation::DenseK};
        CHECK((breve_gamma(j0d, jid, ds, psi) - split).norm() < 1e-13);
    }

    // isometry when j0^2 + j_inf^2 = 1
    const RVec c = th.array().sqrt(), s = (1.0 - th.array()).sqrt();
    const auto jc = onep::OneParticleOperator::diagonal(c, false);
    const auto js = onep::OneParticleOperator::diagonal(s, false);
    const Vec psi = random_vec(b.dim(), 5);
    CHECK(std::abs(breve_gamma(jc, js, ds, psi).norm() - 1.0) < 1e-12);

    const auto bad = onep::OneParticleOperator::diagonal(RVec::Ones(3) * 0.9, false);
    CHECK_THROWS_AS(breve_gamma(bad, bad, ds, psi), std::invalid_argument);

    // I_ex equals Gamma([1 1])
    Mat iota(3, 6);
    iota << Mat::Identity(3, 3), Mat::Identity(3, 3);
    const Vec x = random_vec(ds.doubled.dim(), 77);
    CHECK((i_ex(ds, x).state - gamma_map(iota, ds.doubled, b, x)).norm() < 1e-12);
}

TEST_CASE("I_ex sector norms are C(k+k', k)") {
    const auto b = build_basis(2, 4);
    const auto ds = make_doubled(b);
    for (std::size_t k = 0; k <= 4; ++k)
        for (std::size_t kp = 0; k + kp <= 4; ++kp) {
            std::vector<Eigen::Index> cols;
            for (Eigen::Index i = 0; i < ds.doubled.dim(); ++i)
                if (b.total(ds.first[static_cast<std::size_t>(i)]) == static_cast<int>(k) &&
                    b.total(ds.second[static_cast<std::size_t>(i)]) == static_cast<int>(kp))
                    cols.push_back(i);
            Mat m = Mat::Zero(b.dim(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c) {
                Vec e = Vec::Zero(ds.doubled.dim());
                e(cols[c]) = 1.0;
                m.col(static_cast<Eigen::Index>(c)) = i_ex(ds, e).state;
            }
            Eigen::JacobiSVD<Mat> svd(m);
            const double s = svd.singularValues()(0);
            CHECK(s * s == doctest::Approx(double(binomial(k + kp, k))).epsilon(1e-10));
        }
}

TEST_CASE("partial trace and product structure") {
    const auto b = build_basis(4, 3).with_representation(true);
    const Bipartition bp(b, {0, 1});
    const Vec pa = random_vec(bp.basis_a().dim() * 2, 9);
    const Vec full = bp.embed_a(pa, 2);
    const Mat rho = bp.reduce_to_a(full, 2);
    CHECK((rho - pa * pa.adjoint()).cwiseAbs().maxCoeff() < 1e-14);

    const Vec psi = random_vec(b.dim() * 2, 10) * 1.3;
    CHECK(bp.reduce_to_a(psi, 2).trace().real() == doctest::Approx(psi.squaredNorm()));

    // one photon in (e_in + e_out)/sqrt 2
    const auto b2 = build_basis(2, 1).with_representation(true);
    ModeSplit sp{1.0, {0}, {1}};
    Vec v = Vec::Zero(b2.dim());
    v(1) = v(2) = 1.0 / std::sqrt(2.0);
    const Mat r2 = partial_trace(v, b2, sp);
    CHECK(std::abs(r2(0, 0) - 0.5) < 1e-15);
    CHECK(std::abs(r2(1, 1) - 0.5) < 1e-15);
    CHECK(std::abs(r2(0, 1)) < 1e-15);
    CHECK_THROWS_AS(partial_trace(v, build_basis(2, 1), sp), std::invalid_argument);

    // pairing and the product-distance identity
    const Vec pb = bp.pair_a(pa, psi, 2);
    const Vec prod = bp.product(pa, pb, 2);
    CHECK(std::abs(psi.dot(prod) - pb.squaredNorm()) < 1e-12);
}

TEST_CASE("product-distance identity on random bipartite vectors") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Mat psi = Eigen::Map<const Mat>(random_vec(24, seed).data(), 4, 6);
        const Vec a = random_vec(4, 1000 + seed) * 0.8;
        const auto d = lemma_product_distance(psi, a);
        CHECK(std::abs(d.direct - d.identity) < 1e-12);
    }
}

TEST_CASE("dGamma monotonicity and Cauchy-Schwarz") {
    const auto b = build_basis(3, 3);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Mat x = random_hermitian(3, 300 + seed);
        const Mat a = x * x.adjoint();
        const Mat y = random_hermitian(3, 400 + seed);
        const Mat bm = a + y * y.adjoint();
        const Vec psi = random_vec(b.dim(), 500 + seed);
        CHECK(dGamma(a, b).expectation(psi) <= dGamma(bm, b).expectation(psi) + 1e-10);
        const cplx lhs = psi.dot(dGamma(Mat(a * bm), b).apply(psi));
        const double rhs = std::sqrt(dGamma(Mat(a * a.adjoint()), b).expectation(psi) *
                                     dGamma(Mat(bm.adjoint() * bm), b).expectation(psi));
        CHECK(std::abs(lhs) <= rhs + 1e-10);
    }
}
