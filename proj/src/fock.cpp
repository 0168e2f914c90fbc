// fock.cpp — occupation bases, second-quantized operators and Fock-space maps

#include "sbs/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sbs/krylov.hpp"

namespace sbs::fock {

std::uint64_t binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

namespace {

void enumerate_sector(std::size_t pos, std::size_t remaining, std::vector<std::uint8_t>& cur,
                      std::vector<std::uint8_t>& out) {
    if (pos + 1 == cur.size()) {
        cur[pos] = static_cast<std::uint8_t>(remaining);
        out.insert(out.end(), cur.begin(), cur.end());
        return;
    }
    for (std::size_t v = remaining + 1; v-- > 0;) {
        cur[pos] = static_cast<std::uint8_t>(v);
        enumerate_sector(pos + 1, remaining - v, cur, out);
    }
}

cplx ipow(cplx z, int p) {
    cplx r = 1.0;
    for (int i = 0; i < p; ++i) r *= z;
    return r;
}

double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

}  // namespace

OccupationBasis::OccupationBasis(std::size_t modes, std::size_t n_max, std::size_t dim_limit,
                                 bool position_modes)
    : modes_(modes), n_max_(n_max), position_modes_(position_modes) {
    if (modes == 0) throw std::invalid_argument("OccupationBasis: need at least one mode");
    if (n_max > 255) throw std::invalid_argument("OccupationBasis: N_max too large");
    const std::uint64_t d = binomial(modes + n_max, n_max);
    if (d > dim_limit)
        throw std::length_error("OccupationBasis: dimension " + std::to_string(d) + " exceeds limit " +
                                std::to_string(dim_limit));
    dim_ = static_cast<Eigen::Index>(d);
    binom_.assign(modes + n_max + 1, std::vector<std::uint64_t>(n_max + 1, 0));
    for (std::size_t a = 0; a < binom_.size(); ++a)
        for (std::size_t b = 0; b <= n_max; ++b) binom_[a][b] = binomial(a, b);

    occ_.reserve(static_cast<std::size_t>(dim_) * modes);
    offsets_.push_back(0);
    std::vector<std::uint8_t> cur(modes, 0);
    for (std::size_t n = 0; n <= n_max; ++n) {
        enumerate_sector(0, n, cur, occ_);
        offsets_.push_back(static_cast<Eigen::Index>(occ_.size() / modes));
    }
    totals_.resize(static_cast<std::size_t>(dim_));
    for (std::size_t n = 0; n <= n_max; ++n)
        for (Eigen::Index i = offsets_[n]; i < offsets_[n + 1]; ++i)
            totals_[static_cast<std::size_t>(i)] = static_cast<int>(n);
}

OccupationBasis OccupationBasis::with_representation(bool position_modes) const {
    OccupationBasis b = *this;
    b.position_modes_ = position_modes;
    return b;
}

std::uint64_t OccupationBasis::compositions(std::size_t total, std::size_t parts) const {
    // C(total + parts - 1, total)
    if (parts == 0) return total == 0 ? 1 : 0;
    return binom_[total + parts - 1][total];
}

Eigen::Index OccupationBasis::index_of(std::span<const std::uint8_t> n) const {
    if (n.size() != modes_) throw std::invalid_argument("index_of: wrong occupation length");
    std::size_t total = 0;
    for (auto v : n) total += v;
    if (total > n_max_) return -1;
    std::uint64_t rank = 0;
    std::size_t rem = total;
    for (std::size_t i = 0; i + 1 < modes_ && rem > 0; ++i) {
        // states sharing the prefix with a larger entry at position i come first
        for (std::size_t v = n[i] + 1; v <= rem; ++v) rank += compositions(rem - v, modes_ - i - 1);
        rem -= n[i];
    }
    return offsets_[total] + static_cast<Eigen::Index>(rank);
}

std::uint64_t OccupationBasis::fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::uint64_t v : {static_cast<std::uint64_t>(modes_), static_cast<std::uint64_t>(n_max_),
                            static_cast<std::uint64_t>(position_modes_)}) {
        h ^= v;
        h *= 1099511628211ULL;
    }
    return h;
}

OccupationBasis build_basis(std::size_t modes, std::size_t n_max, std::size_t dim_limit) {
    return OccupationBasis(modes, n_max, dim_limit);
}

Vec vacuum(const OccupationBasis& basis, std::size_t spin_dim, const Vec* spin) {
    Vec v = Vec::Zero(basis.dim() * static_cast<Eigen::Index>(spin_dim));
    if (spin) {
        if (spin->size() != static_cast<Eigen::Index>(spin_dim))
            throw std::invalid_argument("vacuum: spin vector dimension mismatch");
        for (std::size_t s = 0; s < spin_dim; ++s)
            v(static_cast<Eigen::Index>(s) * basis.dim()) = (*spin)(static_cast<Eigen::Index>(s));
    } else {
        v(0) = 1.0;
    }
    return v;
}

// ---------------------------------------------------------------- operators

FockOperator::FockOperator(SpMat m, bool hermitian) : hermitian_(hermitian) {
    m.makeCompressed();
    const double cells = static_cast<double>(m.rows()) * static_cast<double>(m.cols());
    if (cells > 0 && static_cast<double>(m.nonZeros()) >= kDenseFill * cells) {
        dense_ = true;
        dmat_ = Mat(m);
    } else {
        smat_ = std::move(m);
    }
}

FockOperator::FockOperator(Mat m, bool hermitian) : hermitian_(hermitian) {
    const double cells = static_cast<double>(m.rows()) * static_cast<double>(m.cols());
    const auto nnz = (m.array() != cplx(0.0)).count();
    if (cells > 0 && static_cast<double>(nnz) < kDenseFill * cells) {
        smat_ = m.sparseView();
        smat_.makeCompressed();
    } else {
        dense_ = true;
        dmat_ = std::move(m);
    }
}

bool FockOperator::verify_hermitian(double tol) const {
    if (dense_) return (dmat_ - dmat_.adjoint()).cwiseAbs().maxCoeff() <= tol;
    const SpMat diff = smat_ - SpMat(smat_.adjoint());
    double worst = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SpMat::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    return worst <= tol;
}

void FockOperator::apply(const Vec& in, Vec& out) const {
    if (in.size() != dim()) throw std::invalid_argument("FockOperator::apply: dimension mismatch");
    if (dense_)
        out.noalias() = dmat_ * in;
    else
        out.noalias() = smat_ * in;
}

Vec FockOperator::apply(const Vec& in) const {
    Vec out(dim());
    apply(in, out);
    return out;
}

Mat FockOperator::to_dense() const { return dense_ ? dmat_ : Mat(smat_); }

SpMat FockOperator::to_sparse() const {
    if (!dense_) return smat_;
    SpMat s = dmat_.sparseView();
    s.makeCompressed();
    return s;
}

FockOperator FockOperator::adjoint() const {
    if (dense_) return FockOperator(Mat(dmat_.adjoint()), hermitian_);
    return FockOperator(SpMat(smat_.adjoint()), hermitian_);
}

double FockOperator::expectation(const Vec& psi) const { return psi.dot(apply(psi)).real(); }

FockOperator operator+(const FockOperator& a, const FockOperator& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("FockOperator +: dimension mismatch");
    const bool herm = a.hermitian() && b.hermitian();
    if (a.is_dense() || b.is_dense()) return FockOperator(Mat(a.to_dense() + b.to_dense()), herm);
    return FockOperator(SpMat(a.to_sparse() + b.to_sparse()), herm);
}

FockOperator operator*(cplx s, const FockOperator& a) {
    const bool herm = a.hermitian() && s.imag() == 0.0;
    if (a.is_dense()) return FockOperator(Mat(s * a.to_dense()), herm);
    return FockOperator(SpMat(s * a.to_sparse()), herm);
}

FockOperator compose(const FockOperator& a, const FockOperator& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("compose: dimension mismatch");
    if (a.is_dense() || b.is_dense()) return FockOperator(Mat(a.to_dense() * b.to_dense()), false);
    return FockOperator(SpMat(a.to_sparse() * b.to_sparse()), false);
}

SpMat kron(const Mat& small, const SpMat& big) {
    std::vector<Triplet> trip;
    const Eigen::Index nb = big.rows();
    for (Eigen::Index i = 0; i < small.rows(); ++i)
        for (Eigen::Index j = 0; j < small.cols(); ++j) {
            const cplx s = small(i, j);
            if (s == cplx(0.0)) continue;
            for (int k = 0; k < big.outerSize(); ++k)
                for (SpMat::InnerIterator it(big, k); it; ++it)
                    trip.emplace_back(i * nb + it.row(), j * big.cols() + it.col(), s * it.value());
        }
    SpMat out(small.rows() * nb, small.cols() * big.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

FockOperator spin_part(const Mat& s, const OccupationBasis& basis) {
    SpMat id(basis.dim(), basis.dim());
    id.setIdentity();
    return FockOperator(kron(s, id), (s - s.adjoint()).cwiseAbs().maxCoeff() == 0.0);
}

FockOperator photon_part(const FockOperator& f, std::size_t spin_dim) {
    if (spin_dim == 1) return f;
    return FockOperator(kron(Mat::Identity(static_cast<Eigen::Index>(spin_dim), static_cast<Eigen::Index>(spin_dim)),
                             f.to_sparse()),
                        f.hermitian());
}

FockOperator tensor(const Mat& s, const FockOperator& f) {
    const bool herm = f.hermitian() && (s - s.adjoint()).cwiseAbs().maxCoeff() == 0.0;
    return FockOperator(kron(s, f.to_sparse()), herm);
}

FockOperator annihilate(const Vec& f, const OccupationBasis& basis) {
    if (f.size() != static_cast<Eigen::Index>(basis.modes()))
        throw std::invalid_argument("annihilate: one-particle vector has wrong dimension");
    std::vector<Triplet> trip;
    std::vector<std::uint8_t> cur(basis.modes());
    for (Eigen::Index i = 0; i < basis.dim(); ++i) {
        const auto occ = basis.occupation(i);
        std::copy(occ.begin(), occ.end(), cur.begin());
        for (std::size_t j = 0; j < basis.modes(); ++j) {
            if (occ[j] == 0 || f(static_cast<Eigen::Index>(j)) == cplx(0.0)) continue;
            --cur[j];
            const Eigen::Index target = basis.index_of(cur);
            ++cur[j];
            trip.emplace_back(target, i, std::conj(f(static_cast<Eigen::Index>(j))) * std::sqrt(double(occ[j])));
        }
    }
    SpMat m(basis.dim(), basis.dim());
    m.setFromTriplets(trip.begin(), trip.end());
    return FockOperator(std::move(m), false);
}

FockOperator create(const Vec& f, const OccupationBasis& basis) { return annihilate(f, basis).adjoint(); }

FockOperator annihilate_mode(std::size_t j, const OccupationBasis& basis) {
    Vec e = Vec::Zero(static_cast<Eigen::Index>(basis.modes()));
    e(static_cast<Eigen::Index>(j)) = 1.0;
    return annihilate(e, basis);
}

FockOperator field(const Vec& f, const OccupationBasis& basis) {
    const SpMat a = annihilate(f, basis).to_sparse();
    return FockOperator(SpMat(a + SpMat(a.adjoint())), true);
}

FockOperator dGamma(const Mat& b, const OccupationBasis& basis) {
    const auto m = static_cast<Eigen::Index>(basis.modes());
    if (b.rows() != m || b.cols() != m) throw std::invalid_argument("dGamma: dimension mismatch");
    std::vector<Triplet> trip;
    std::vector<std::uint8_t> cur(basis.modes());
    for (Eigen::Index i = 0; i < basis.dim(); ++i) {
        const auto occ = basis.occupation(i);
        std::copy(occ.begin(), occ.end(), cur.begin());
        cplx diag = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            const int nj = occ[static_cast<std::size_t>(j)];
            if (nj == 0) continue;
            diag += b(j, j) * double(nj);
            --cur[static_cast<std::size_t>(j)];
            for (Eigen::Index k = 0; k < m; ++k) {
                if (k == j || b(k, j) == cplx(0.0)) continue;
                const int nk = cur[static_cast<std::size_t>(k)];
                ++cur[static_cast<std::size_t>(k)];
                const Eigen::Index target = basis.index_of(cur);
                --cur[static_cast<std::size_t>(k)];
                trip.emplace_back(target, i, b(k, j) * std::sqrt(double(nj) * double(nk + 1)));
            }
            ++cur[static_cast<std::size_t>(j)];
        }
        if (diag != cplx(0.0)) trip.emplace_back(i, i, diag);
    }
    SpMat out(basis.dim(), basis.dim());
    out.setFromTriplets(trip.begin(), trip.end());
    const bool herm = (b - b.adjoint()).cwiseAbs().maxCoeff() <= 1e-14;
    return FockOperator(std::move(out), herm);
}

FockOperator dGamma(const onep::OneParticleOperator& b, const OccupationBasis& basis) {
    if (onep::is_position(b.rep) != basis.position_modes())
        throw std::invalid_argument("dGamma: representation mismatch (" + onep::to_string(b.rep) + ")");
    if (b.is_diagonal()) return dGamma_diagonal(b.matrix.diagonal().real(), basis);
    return dGamma(b.matrix, basis);
}

FockOperator dGamma_diagonal(const RVec& b, const OccupationBasis& basis) {
    if (b.size() != static_cast<Eigen::Index>(basis.modes()))
        throw std::invalid_argument("dGamma: dimension mismatch");
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(basis.dim()));
    for (Eigen::Index i = 0; i < basis.dim(); ++i) {
        const auto occ = basis.occupation(i);
        double v = 0.0;
        for (std::size_t j = 0; j < occ.size(); ++j) v += occ[j] * b(static_cast<Eigen::Index>(j));
        if (v != 0.0) trip.emplace_back(i, i, v);
    }
    SpMat out(basis.dim(), basis.dim());
    out.setFromTriplets(trip.begin(), trip.end());
    return FockOperator(std::move(out), true);
}

FockOperator number_operator(const OccupationBasis& basis) {
    return dGamma_diagonal(RVec::Ones(static_cast<Eigen::Index>(basis.modes())), basis);
}

FockOperator exp_number(const OccupationBasis& basis, double kappa) {
    std::vector<Triplet> trip;
    for (Eigen::Index i = 0; i < basis.dim(); ++i) trip.emplace_back(i, i, std::exp(kappa * basis.total(i)));
    SpMat out(basis.dim(), basis.dim());
    out.setFromTriplets(trip.begin(), trip.end());
    return FockOperator(std::move(out), true);
}

void project_sector(Vec& v, const OccupationBasis& basis, std::size_t n, std::size_t spin_dim) {
    const Eigen::Index d = basis.dim();
    if (v.size() != d * static_cast<Eigen::Index>(spin_dim)) throw std::invalid_argument("project_sector: size");
    const Eigen::Index lo = n <= basis.n_max() ? basis.sector_begin(n) : d;
    const Eigen::Index hi = n <= basis.n_max() ? basis.sector_end(n) : d;
    for (std::size_t s = 0; s < spin_dim; ++s) {
        auto blk = v.segment(static_cast<Eigen::Index>(s) * d, d);
        blk.head(lo).setZero();
        blk.tail(d - hi).setZero();
    }
}

void project_upto(Vec& v, const OccupationBasis& basis, std::size_t n, std::size_t spin_dim) {
    if (n >= basis.n_max()) return;
    const Eigen::Index d = basis.dim();
    const Eigen::Index keep = basis.dim_upto(n);
    for (std::size_t s = 0; s < spin_dim; ++s) v.segment(static_cast<Eigen::Index>(s) * d + keep, d - keep).setZero();
}

// ---------------------------------------------------------------- Weyl

WeylOperator weyl(const Vec& f, const OccupationBasis& basis, std::size_t dense_limit) {
    const OccupationBasis padded(basis.modes(), basis.n_max() + 2, dense_limit, basis.position_modes());
    const Mat phi = field(f, padded).to_dense();
    Eigen::SelfAdjointEigenSolver<Mat> es(phi);
    const Vec phases = (I_unit * es.eigenvalues().cast<cplx>()).array().exp();
    const Mat w_full = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    const Eigen::Index d = basis.dim();
    Mat w = w_full.topLeftCorner(d, d);
    const Mat gram = w.adjoint() * w - Mat::Identity(d, d);
    Eigen::SelfAdjointEigenSolver<Mat> gs(gram, Eigen::EigenvaluesOnly);
    WeylOperator out;
    out.unitarity_defect = gs.eigenvalues().cwiseAbs().maxCoeff();
    out.op = FockOperator(std::move(w), false);
    return out;
}

namespace {

// ||a*(f) phi_top|| summed over spin blocks: only the top sector leaks.
double creation_leakage(const Vec& f, const OccupationBasis& basis, const Vec& psi, std::size_t spin_dim) {
    const Eigen::Index d = basis.dim();
    const FockOperator a = annihilate(f, basis);
    const double f2 = f.squaredNorm();
    double total = 0.0;
    for (std::size_t s = 0; s < spin_dim; ++s) {
        Vec top = psi.segment(static_cast<Eigen::Index>(s) * d, d);
        project_sector(top, basis, basis.n_max());
        total += f2 * top.squaredNorm() + a.apply(top).squaredNorm();
    }
    return std::sqrt(total);
}

}  // namespace

WeylAction weyl_apply(const Vec& f, const OccupationBasis& basis, const Vec& psi, std::size_t spin_dim,
                      double tol) {
    const FockOperator phi = photon_part(field(f, basis), spin_dim);
    krylov::ExpmvStats st;
    krylov::ExpmvOptions opt;
    opt.tol = tol;
    WeylAction out;
    // exp(i Phi) = exp(-i * 1 * (-Phi))
    out.state = krylov::expmv([&phi](const Vec& in, Vec& o) { phi.apply(in, o); o = -o; }, psi, 1.0, opt, &st);
    out.krylov_error = st.error_bound;
    out.leakage = creation_leakage(f, basis, psi, spin_dim);
    return out;
}

CoherentState coherent_state(const Vec& f, const OccupationBasis& basis) {
    const FockOperator ad = create(f, basis);
    Vec term = vacuum(basis);
    Vec sum = term;
    for (std::size_t n = 1; n <= basis.n_max(); ++n) {
        term = (I_unit / double(n)) * ad.apply(term);
        sum += term;
    }
    sum *= std::exp(-0.5 * f.squaredNorm());
    CoherentState out;
    out.truncation_defect = std::max(0.0, 1.0 - sum.squaredNorm());
    out.state = sum / sum.norm();
    return out;
}

// ---------------------------------------------------------------- Gamma(U)

Mat principal_log(const Mat& u, double branch_offset) {
    const Eigen::Index n = u.rows();
    if (u.cols() != n) throw std::invalid_argument("principal_log: square matrix required");
    if ((u.adjoint() * u - Mat::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("principal_log: matrix is not unitary to 1e-10");
    Eigen::ComplexSchur<Mat> cs(u);
    const Mat& t = cs.matrixT();
    const Mat& q = cs.matrixU();
    Vec logs(n);
    const cplx rot = std::polar(1.0, -branch_offset);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double phi = std::arg(t(k, k) * rot);
        if (std::abs(phi) > kPi - 1e-8)
            throw std::domain_error("principal_log: eigenvalue on the branch cut; pass a branch offset");
        logs(k) = I_unit * (phi + branch_offset) + std::log(std::abs(t(k, k)));
    }
    // a unitary matrix is normal, so its Schur form is diagonal
    return q * logs.asDiagonal() * q.adjoint();
}

FockOperator gamma_U(const Mat& u, const OccupationBasis& basis, double branch_offset, std::size_t dense_limit) {
    if (static_cast<std::size_t>(basis.dim()) > dense_limit)
        throw std::length_error("gamma_U: basis too large for the dense route; use gamma_U_apply");
    const Mat a = principal_log(u, branch_offset);
    // dGamma(a) = i dGamma(-i a), the latter Hermitian
    const Mat kh = dGamma(Mat(-I_unit * a), basis).to_dense();
    const Mat kh_sym = 0.5 * (kh + kh.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(kh_sym);
    const Vec phases = (I_unit * es.eigenvalues().cast<cplx>()).array().exp();
    return FockOperator(Mat(es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint()), false);
}

Vec gamma_U_apply(const Mat& u, const OccupationBasis& basis, const Vec& psi, double branch_offset,
                  std::size_t spin_dim, double tol) {
    const Mat a = principal_log(u, branch_offset);
    const FockOperator kh = photon_part(dGamma(Mat(-I_unit * a), basis), spin_dim);
    krylov::ExpmvOptions opt;
    opt.tol = tol;
    return krylov::expmv([&kh](const Vec& in, Vec& o) { kh.apply(in, o); o = -o; }, psi, 1.0, opt);
}

namespace {

using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// sorted mode list (with multiplicity) of an occupation
void mode_list(std::span<const std::uint8_t> occ, std::vector<std::size_t>& out) {
    out.clear();
    for (std::size_t j = 0; j < occ.size(); ++j)
        for (int c = 0; c < occ[j]; ++c) out.push_back(j);
}

double occupation_factorials(std::span<const std::uint8_t> occ) {
    double r = 1.0;
    for (auto v : occ) r *= factorial(v);
    return r;
}

std::size_t flat_index(const std::vector<std::size_t>& idx, std::size_t m) {
    std::size_t f = 0;
    for (auto i : idx) f = f * m + i;
    return f;
}

}  // namespace

Vec gamma_map(const Mat& t, const OccupationBasis& from, const OccupationBasis& to, const Vec& psi,
              std::size_t spin_dim) {
    const std::size_t mf = from.modes(), mt = to.modes();
    if (t.rows() != static_cast<Eigen::Index>(mt) || t.cols() != static_cast<Eigen::Index>(mf))
        throw std::invalid_argument("gamma_map: one-particle map has wrong shape");
    const Eigen::Index df = from.dim(), dt = to.dim();
    if (psi.size() != df * static_cast<Eigen::Index>(spin_dim))
        throw std::invalid_argument("gamma_map: state dimension mismatch");
    Vec out = Vec::Zero(dt * static_cast<Eigen::Index>(spin_dim));
    const std::size_t top = std::min(from.n_max(), to.n_max());
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < spin_dim; ++s) {
        const auto in_blk = psi.segment(static_cast<Eigen::Index>(s) * df, df);
        auto out_blk = out.segment(static_cast<Eigen::Index>(s) * dt, dt);
        out_blk(0) = in_blk(0);
        for (std::size_t n = 1; n <= top; ++n) {
            const Eigen::Index lo = from.sector_begin(n), hi = from.sector_end(n);
            if (in_blk.segment(lo, hi - lo).squaredNorm() == 0.0) continue;
            std::size_t size_in = 1;
            for (std::size_t k = 0; k < n; ++k) size_in *= mf;
            std::vector<cplx> tensor(size_in, cplx(0.0));
            const double nfact = factorial(static_cast<int>(n));
            for (Eigen::Index i = lo; i < hi; ++i) {
                const cplx c = in_blk(i);
                if (c == cplx(0.0)) continue;
                const auto occ = from.occupation(i);
                mode_list(occ, idx);
                const cplx w = c * std::sqrt(occupation_factorials(occ) / nfact);
                do {
                    tensor[flat_index(idx, mf)] = w;
                } while (std::next_permutation(idx.begin(), idx.end()));
            }
            // apply t along each axis: (L, mf, R) -> (L, mt, R)
            std::size_t left = 1, right = size_in / mf;
            for (std::size_t axis = 0; axis < n; ++axis) {
                std::vector<cplx> next(left * mt * right);
                for (std::size_t l = 0; l < left; ++l) {
                    Eigen::Map<const RowMat> x(tensor.data() + l * mf * right, static_cast<Eigen::Index>(mf),
                                               static_cast<Eigen::Index>(right));
                    Eigen::Map<RowMat> y(next.data() + l * mt * right, static_cast<Eigen::Index>(mt),
                                         static_cast<Eigen::Index>(right));
                    y.noalias() = t * x;
                }
                tensor.swap(next);
                left *= mt;
                if (axis + 1 < n) right /= mf;
            }
            for (Eigen::Index j = to.sector_begin(n); j < to.sector_end(n); ++j) {
                const auto occ = to.occupation(j);
                mode_list(occ, idx);
                out_blk(j) = std::sqrt(nfact / occupation_factorials(occ)) * tensor[flat_index(idx, mt)];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- bipartition

Bipartition::Bipartition(const OccupationBasis& full, std::vector<std::size_t> modes_a)
    : modes_a_(std::move(modes_a)), full_(full) {
    std::sort(modes_a_.begin(), modes_a_.end());
    std::vector<bool> in_a(full.modes(), false);
    for (auto m : modes_a_) {
        if (m >= full.modes() || in_a[m]) throw std::invalid_argument("Bipartition: invalid mode set");
        in_a[m] = true;
    }
    for (std::size_t m = 0; m < full.modes(); ++m)
        if (!in_a[m]) modes_b_.push_back(m);
    if (modes_a_.empty() || modes_b_.empty()) throw std::invalid_argument("Bipartition: both parts must be non-empty");
    a_ = OccupationBasis(modes_a_.size(), full.n_max(), OccupationBasis::kDefaultLimit, full.position_modes());
    b_ = OccupationBasis(modes_b_.size(), full.n_max(), OccupationBasis::kDefaultLimit, full.position_modes());
    ia_.resize(static_cast<std::size_t>(full.dim()));
    ib_.resize(static_cast<std::size_t>(full.dim()));
    std::vector<std::uint8_t> pa(modes_a_.size()), pb(modes_b_.size());
    for (Eigen::Index i = 0; i < full.dim(); ++i) {
        const auto occ = full.occupation(i);
        for (std::size_t k = 0; k < modes_a_.size(); ++k) pa[k] = occ[modes_a_[k]];
        for (std::size_t k = 0; k < modes_b_.size(); ++k) pb[k] = occ[modes_b_[k]];
        ia_[static_cast<std::size_t>(i)] = a_.index_of(pa);
        ib_[static_cast<std::size_t>(i)] = b_.index_of(pb);
    }
}

Eigen::Index Bipartition::join(Eigen::Index p, Eigen::Index q) const {
    if (a_.total(p) + b_.total(q) > static_cast<int>(full_.n_max())) return -1;
    std::vector<std::uint8_t> occ(full_.modes(), 0);
    const auto oa = a_.occupation(p);
    const auto ob = b_.occupation(q);
    for (std::size_t k = 0; k < modes_a_.size(); ++k) occ[modes_a_[k]] = oa[k];
    for (std::size_t k = 0; k < modes_b_.size(); ++k) occ[modes_b_[k]] = ob[k];
    return full_.index_of(occ);
}

Vec Bipartition::pair_a(const Vec& psi_a, const Vec& psi, std::size_t spin_dim) const {
    const Eigen::Index da = a_.dim(), df = full_dim();
    if (psi_a.size() != da * static_cast<Eigen::Index>(spin_dim) || psi.size() != df * static_cast<Eigen::Index>(spin_dim))
        throw std::invalid_argument("pair_a: dimension mismatch");
    Vec out = Vec::Zero(b_.dim());
    for (std::size_t s = 0; s < spin_dim; ++s) {
        const Eigen::Index oa = static_cast<Eigen::Index>(s) * da, of = static_cast<Eigen::Index>(s) * df;
        for (Eigen::Index i = 0; i < df; ++i) {
            const cplx c = psi(of + i);
            if (c == cplx(0.0)) continue;
            out(ib_[static_cast<std::size_t>(i)]) += std::conj(psi_a(oa + ia_[static_cast<std::size_t>(i)])) * c;
        }
    }
    return out;
}

Vec Bipartition::product(const Vec& psi_a, const Vec& psi_b, std::size_t spin_dim, double* dropped) const {
    const Eigen::Index da = a_.dim(), df = full_dim();
    if (psi_a.size() != da * static_cast<Eigen::Index>(spin_dim) || psi_b.size() != b_.dim())
        throw std::invalid_argument("product: dimension mismatch");
    Vec out(df * static_cast<Eigen::Index>(spin_dim));
    for (std::size_t s = 0; s < spin_dim; ++s)
        for (Eigen::Index i = 0; i < df; ++i)
            out(static_cast<Eigen::Index>(s) * df + i) =
                psi_a(static_cast<Eigen::Index>(s) * da + ia_[static_cast<std::size_t>(i)]) *
                psi_b(ib_[static_cast<std::size_t>(i)]);
    if (dropped) *dropped = std::sqrt(std::max(0.0, psi_a.squaredNorm() * psi_b.squaredNorm() - out.squaredNorm()));
    return out;
}

Vec Bipartition::embed_a(const Vec& psi_a, std::size_t spin_dim) const {
    Vec omega = Vec::Zero(b_.dim());
    omega(0) = 1.0;
    return product(psi_a, omega, spin_dim);
}

Mat Bipartition::reduce_to_a(const Vec& psi, std::size_t spin_dim) const {
    const Eigen::Index da = a_.dim(), db = b_.dim(), df = full_dim();
    const Eigen::Index rows = da * static_cast<Eigen::Index>(spin_dim);
    if (rows * db > 400'000'000) throw std::length_error("reduce_to_a: reduced problem too large");
    Mat c = Mat::Zero(rows, db);
    for (std::size_t s = 0; s < spin_dim; ++s)
        for (Eigen::Index i = 0; i < df; ++i)
            c(static_cast<Eigen::Index>(s) * da + ia_[static_cast<std::size_t>(i)], ib_[static_cast<std::size_t>(i)]) =
                psi(static_cast<Eigen::Index>(s) * df + i);
    return c * c.adjoint();
}

// ---------------------------------------------------------------- doubled space

DoubledSpace make_doubled(const OccupationBasis& single) {
    DoubledSpace ds;
    ds.single = single;
    const std::size_t m = single.modes();
    ds.doubled = OccupationBasis(2 * m, single.n_max(), OccupationBasis::kDefaultLimit, single.position_modes());
    const auto d = static_cast<std::size_t>(ds.doubled.dim());
    ds.first.resize(d);
    ds.second.resize(d);
    ds.sum.resize(d);
    ds.sum_weight.resize(d);
    std::vector<std::uint8_t> p(m), q(m), pq(m);
    for (std::size_t i = 0; i < d; ++i) {
        const auto occ = ds.doubled.occupation(static_cast<Eigen::Index>(i));
        double w = 1.0;
        for (std::size_t k = 0; k < m; ++k) {
            p[k] = occ[k];
            q[k] = occ[m + k];
            pq[k] = static_cast<std::uint8_t>(p[k] + q[k]);
            w *= std::sqrt(static_cast<double>(binomial(pq[k], p[k])));
        }
        ds.first[i] = single.index_of(p);
        ds.second[i] = single.index_of(q);
        ds.sum[i] = single.index_of(pq);
        ds.sum_weight[i] = w;
    }
    return ds;
}

void check_split_condition(const Mat& j0, const Mat& j_inf, double tol) {
    const Mat s = j0.adjoint() * j0 + j_inf.adjoint() * j_inf;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (s + s.adjoint()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().maxCoeff() > 1.0 + tol)
        throw std::invalid_argument("breve_gamma: j0^* j0 + j_inf^* j_inf exceeds 1");
}

Vec breve_gamma(const onep::OneParticleOperator& j0, const onep::OneParticleOperator& j_inf, const DoubledSpace& ds,
                const Vec& psi, std::size_t spin_dim) {
    const OccupationBasis& single = ds.single;
    if (onep::is_position(j0.rep) != single.position_modes() || onep::is_position(j_inf.rep) != single.position_modes())
        throw std::invalid_argument("breve_gamma: representation mismatch");
    check_split_condition(j0.matrix, j_inf.matrix);
    const std::size_t m = single.modes();
    if (!(j0.is_diagonal() && j_inf.is_diagonal())) {
        Mat t(2 * m, m);
        t.topRows(static_cast<Eigen::Index>(m)) = j0.matrix;
        t.bottomRows(static_cast<Eigen::Index>(m)) = j_inf.matrix;
        return gamma_map(t, single, ds.doubled, psi, spin_dim);
    }
    // diagonal: |n> -> sum_p prod sqrt(C(n,p)) j0^p j_inf^(n-p) |p> (x) |n-p>
    const Vec d0 = j0.matrix.diagonal(), d1 = j_inf.matrix.diagonal();
    const Eigen::Index ds_dim = ds.doubled.dim(), d = single.dim();
    Vec out = Vec::Zero(ds_dim * static_cast<Eigen::Index>(spin_dim));
    std::vector<std::uint8_t> split(2 * m);
    std::vector<std::size_t> active;
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto occ = single.occupation(i);
        active.clear();
        for (std::size_t k = 0; k < m; ++k)
            if (occ[k] > 0) active.push_back(k);
        std::fill(split.begin(), split.end(), 0);
        for (std::size_t k : active) split[m + k] = occ[k];
        // odometer over p_k in [0, n_k] for active modes
        while (true) {
            cplx w = 1.0;
            for (std::size_t k : active) {
                const int p = split[k], n = occ[k];
                w *= std::sqrt(static_cast<double>(binomial(static_cast<std::size_t>(n), static_cast<std::size_t>(p)))) *
                     ipow(d0(static_cast<Eigen::Index>(k)), p) * ipow(d1(static_cast<Eigen::Index>(k)), n - p);
            }
            const Eigen::Index target = ds.doubled.index_of(split);
            for (std::size_t s = 0; s < spin_dim; ++s)
                out(static_cast<Eigen::Index>(s) * ds_dim + target) += w * psi(static_cast<Eigen::Index>(s) * d + i);
            std::size_t a = 0;
            for (; a < active.size(); ++a) {
                const std::size_t k = active[a];
                if (split[k] < occ[k]) {
                    ++split[k];
                    --split[m + k];
                    break;
                }
                split[k] = 0;
                split[m + k] = occ[k];
            }
            if (a == active.size()) break;
        }
    }
    return out;
}

IexResult i_ex(const DoubledSpace& ds, const Vec& doubled, std::size_t spin_dim) {
    const Eigen::Index dd = ds.doubled.dim(), d = ds.single.dim();
    if (doubled.size() != dd * static_cast<Eigen::Index>(spin_dim)) throw std::invalid_argument("i_ex: dimension mismatch");
    IexResult out;
    out.state = Vec::Zero(d * static_cast<Eigen::Index>(spin_dim));
    double lost = 0.0;
    for (std::size_t s = 0; s < spin_dim; ++s)
        for (Eigen::Index i = 0; i < dd; ++i) {
            const cplx c = doubled(static_cast<Eigen::Index>(s) * dd + i);
            if (c == cplx(0.0)) continue;
            const Eigen::Index target = ds.sum[static_cast<std::size_t>(i)];
            if (target < 0) {
                lost += std::norm(c);
                continue;
            }
            out.state(static_cast<Eigen::Index>(s) * d + target) += ds.sum_weight[static_cast<std::size_t>(i)] * c;
        }
    out.loss = std::sqrt(lost);
    return out;
}

ModeSplit make_mode_split(const onep::RadialGrid& grid, double r) {
    ModeSplit sp;
    sp.r = r;
    for (std::size_t m = 0; m < grid.n_modes; ++m) (grid.x(m) <= r + 1e-12 ? sp.inner : sp.outer).push_back(m);
    return sp;
}

Mat partial_trace(const Vec& psi, const OccupationBasis& basis, const ModeSplit& split, std::size_t spin_dim) {
    if (!basis.position_modes())
        throw std::invalid_argument("partial_trace: state must be expressed in x-modes (rotate with gamma_map first)");
    if (split.inner.size() + split.outer.size() != basis.modes())
        throw std::invalid_argument("partial_trace: split does not match the basis");
    if (split.outer.empty()) return psi * psi.adjoint();
    if (split.inner.empty()) {
        // only the spin factor remains
        const Eigen::Index d = basis.dim();
        Mat c(static_cast<Eigen::Index>(spin_dim), d);
        for (std::size_t s = 0; s < spin_dim; ++s) c.row(static_cast<Eigen::Index>(s)) = psi.segment(static_cast<Eigen::Index>(s) * d, d).transpose();
        return c * c.adjoint();
    }
    return Bipartition(basis, split.inner).reduce_to_a(psi, spin_dim);
}

Mat partial_trace(const Bipartition& bp, const Vec& psi, std::size_t spin_dim) { return bp.reduce_to_a(psi, spin_dim); }

ProductDistance lemma_product_distance(const Mat& psi, const Vec& psi_a) {
    if (psi.rows() != psi_a.size()) throw std::invalid_argument("lemma_product_distance: dimension mismatch");
    const Vec psi_b = psi.transpose() * psi_a.conjugate();
    ProductDistance out;
    out.direct = (psi - psi_a * psi_b.transpose()).squaredNorm();
    out.identity = psi.squaredNorm() + psi_a.squaredNorm() * psi_b.squaredNorm() - 2.0 * psi_b.squaredNorm();
    return out;
}

}  // namespace sbs::fock
