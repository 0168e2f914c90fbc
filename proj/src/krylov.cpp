// krylov.cpp — Lanczos-based exponential action, eigenpairs and CG

#include "sbs/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace sbs::krylov {

namespace {

// exp(-i tau T) e_1 for the real symmetric tridiagonal T of size m
Vec small_exp_e1(const std::vector<double>& alpha, const std::vector<double>& beta, int m, double tau) {
    RMat t = RMat::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        t(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(t);
    const RMat& q = es.eigenvectors();
    Vec coeff(m);
    for (int k = 0; k < m; ++k) coeff(k) = std::exp(-I_unit * tau * es.eigenvalues()(k)) * q(0, k);
    return q.cast<cplx>() * coeff;
}

void reorthogonalize(Vec& w, const Mat& v, int cols, const std::vector<Vec>& extra = {}) {
    for (int pass = 0; pass < 2; ++pass) {
        for (const Vec& e : extra) w -= e.dot(w) * e;
        if (cols > 0) w -= v.leftCols(cols) * (v.leftCols(cols).adjoint() * w);
    }
}

}  // namespace

Vec random_unit_vector(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(nd(rng), nd(rng));
    return v / v.norm();
}

Vec expmv(const Apply& a, const Vec& v, double t, const ExpmvOptions& opt, ExpmvStats* stats) {
    ExpmvStats local;
    Vec y = v;
    const double norm0 = v.norm();
    if (t == 0.0 || norm0 == 0.0) {
        if (stats) *stats = local;
        return y;
    }
    const double sign = t > 0.0 ? 1.0 : -1.0;
    double remaining = std::abs(t);
    double tau = opt.max_step > 0.0 ? std::min(remaining, opt.max_step) : remaining;
    const Eigen::Index n = v.size();
    const int mmax = static_cast<int>(std::min<Eigen::Index>(opt.max_dim, n));
    Mat basis(n, mmax + 1);
    Vec w(n);
    std::vector<double> alpha, beta;

    // errors at roundoff level are accepted regardless of the step length
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * norm0;
    while (remaining > 1e-13 * std::abs(t)) {
        tau = std::min(tau, remaining);
        const double nrm = y.norm();
        basis.col(0) = y / nrm;
        alpha.clear();
        beta.clear();
        int m = 0;
        bool breakdown = false;
        bool accepted = false;
        double err = 0.0;
        for (int j = 0; j < mmax; ++j) {
            a(basis.col(j), w);
            ++local.matvecs;
            alpha.push_back(basis.col(j).dot(w).real());
            reorthogonalize(w, basis, j + 1);
            beta.push_back(w.norm());
            m = j + 1;
            if (beta.back() <= 1e-14 * std::max(1.0, std::abs(alpha.back()))) {
                breakdown = true;
                break;
            }
            basis.col(j + 1) = w / beta.back();
            if (m >= 3 || m == mmax) {
                const Vec s = small_exp_e1(alpha, beta, m, sign * tau);
                err = nrm * beta.back() * std::abs(s(m - 1));
                if (err <= std::max(opt.tol * tau, floor)) {
                    accepted = true;
                    break;
                }
            }
        }
        if (breakdown) {
            // invariant subspace: exact for any step length
            tau = remaining;
            err = 0.0;
            accepted = true;
        }
        while (!accepted) {
            tau *= 0.5;
            if (tau < 1e-12 * std::abs(t)) throw std::runtime_error("expmv: step size underflow");
            const Vec s = small_exp_e1(alpha, beta, m, sign * tau);
            err = nrm * beta.back() * std::abs(s(m - 1));
            accepted = err <= std::max(opt.tol * tau, floor);
        }
        const Vec s = small_exp_e1(alpha, beta, m, sign * tau);
        y = nrm * (basis.leftCols(m) * s);
        local.error_bound += err;
        ++local.steps;
        remaining -= tau;
        if (m < mmax / 2) tau *= 2.0;
        if (opt.max_step > 0.0) tau = std::min(tau, opt.max_step);
    }
    if (stats) *stats = local;
    return y;
}

EigenPair lowest_eigenpair(const Apply& a, Eigen::Index n, const EigenOptions& opt,
                           const std::vector<Vec>& deflate, const Vec* start) {
    if (n <= 0) throw std::invalid_argument("lowest_eigenpair: empty operator");
    // orthonormal copy of the deflation set
    std::vector<Vec> defl;
    for (const Vec& d : deflate) {
        Vec e = d;
        for (const Vec& f : defl) e -= f.dot(e) * f;
        const double nn = e.norm();
        if (nn > 1e-12) defl.push_back(e / nn);
    }
    const Eigen::Index free_dim = n - static_cast<Eigen::Index>(defl.size());
    if (free_dim <= 0) throw std::invalid_argument("lowest_eigenpair: deflation exhausts the space");
    const int mmax = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, free_dim));

    Vec x = start ? *start : random_unit_vector(n, opt.seed);
    reorthogonalize(x, Mat(), 0, defl);
    if (x.norm() < 1e-12) {
        x = random_unit_vector(n, opt.seed + 1);
        reorthogonalize(x, Mat(), 0, defl);
    }
    x /= x.norm();

    EigenPair out;
    Mat basis(n, mmax + 1);
    Vec w(n);
    std::vector<double> alpha, beta;
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        basis.col(0) = x;
        alpha.clear();
        beta.clear();
        int m = 0;
        for (int j = 0; j < mmax; ++j) {
            a(basis.col(j), w);
            ++out.matvecs;
            alpha.push_back(basis.col(j).dot(w).real());
            reorthogonalize(w, basis, j + 1, defl);
            beta.push_back(w.norm());
            m = j + 1;
            if (beta.back() <= 1e-13 * std::max(1.0, std::abs(alpha.back()))) break;
            if (j + 1 < mmax) basis.col(j + 1) = w / beta.back();
        }
        RMat t = RMat::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            t(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
        Eigen::SelfAdjointEigenSolver<RMat> es(t);
        x = basis.leftCols(m) * es.eigenvectors().col(0).cast<cplx>();
        reorthogonalize(x, Mat(), 0, defl);
        x /= x.norm();
        a(x, w);
        ++out.matvecs;
        const double theta = x.dot(w).real();
        Vec r = w - theta * x;
        for (const Vec& e : defl) r -= e.dot(r) * e;
        out.value = theta;
        out.residual = r.norm();
        out.vector = x;
        if (out.residual <= opt.tol) {
            out.converged = true;
            break;
        }
    }
    return out;
}

CgResult conjugate_gradient(const Apply& a, const Vec& b, double tol, int max_iter) {
    CgResult out;
    const Eigen::Index n = b.size();
    out.x = Vec::Zero(n);
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    Vec r = b, p = b, ap(n);
    double rr = r.squaredNorm();
    for (int it = 0; it < max_iter; ++it) {
        a(p, ap);
        const cplx pap = p.dot(ap);
        if (pap.real() <= 0.0) throw std::runtime_error("conjugate_gradient: operator not positive definite");
        const double step = rr / pap.real();
        out.x += step * p;
        r -= step * ap;
        const double rr_new = r.squaredNorm();
        out.iterations = it + 1;
        if (std::sqrt(rr_new) <= tol) {
            rr = rr_new;
            out.converged = true;
            break;
        }
        p = r + (rr_new / rr) * p;
        rr = rr_new;
    }
    // true residual
    a(out.x, ap);
    out.residual = (b - ap).norm();
    out.converged = out.converged && out.residual <= 10.0 * tol;
    return out;
}

}  // namespace sbs::krylov
