// commutator_lab.cpp — dense norms of the |k| commutator remainders

#include "sbs/commutator_lab.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace sbs::onep {

LabGrid build_lab_grid(std::size_t n_lab, double k_max) {
    if (n_lab < 8 || n_lab % 2 != 0) throw std::invalid_argument("lab grid: n_lab must be even, >= 8");
    if (!(k_max > 0.0)) throw std::invalid_argument("lab grid: k_max must be positive");
    LabGrid g;
    const auto n = static_cast<Eigen::Index>(n_lab);
    g.dk = 2.0 * k_max / static_cast<double>(n_lab);
    g.dx = kPi / k_max;
    g.k.resize(n);
    g.x.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g.k(i) = static_cast<double>(i - n / 2) * g.dk;
        g.x(i) = static_cast<double>(i - n / 2) * g.dx;
    }
    g.dft.resize(n, n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_lab));
    for (Eigen::Index m = 0; m < n; ++m)
        for (Eigen::Index j = 0; j < n; ++j) g.dft(m, j) = std::polar(norm, -g.k(m) * g.x(j));
    return g;
}

double spectral_norm(const Mat& a) {
    if (a.size() == 0) return 0.0;
    const Mat gram = a.cols() <= a.rows() ? Mat(a.adjoint() * a) : Mat(a * a.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(gram, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct LabOperators {
    Mat f_t;        // theta(|x|/t), k-representation
    Mat leading;    // (1/t) theta'(|x|/t) sgn(x), k-representation
    Mat dt_j0;      // d/dt theta(|x|/t) = -(|x|/t^2) theta'(|x|/t)
    RVec omega;
    RVec khat;
    RVec high;      // 1_{t^{beta-1} <= |k| <= k_max/2}
    RVec low;       // 1_{|k| < t^{beta-1}}
    double sup_theta_prime{0.0};
};

Mat to_k(const LabGrid& g, const RVec& diag_x) {
    return g.dft * diag_x.cast<cplx>().asDiagonal() * g.dft.adjoint();
}

LabOperators build_ops(const LabGrid& g, const RadialProfile& theta, double beta, double t) {
    if (!(t >= 1.0)) throw std::invalid_argument("commutator lab: times must be >= 1");
    const double threshold = std::pow(t, beta - 1.0);
    if (threshold < g.dk)
        throw std::invalid_argument("commutator lab: t^{beta-1} below one lab grid cell");
    const double edge = std::abs(g.x(0));
    if (std::abs(theta.derivative(edge / t)) > 1e-12)
        throw std::invalid_argument("commutator lab: indicator support exceeds the lab box");

    const auto n = g.k.size();
    RVec f(n), lead(n), dt(n);
    LabOperators ops;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ax = std::abs(g.x(i));
        const double d = theta.derivative(ax / t);
        f(i) = theta.value(ax / t);
        lead(i) = d * sgn(g.x(i)) / t;
        dt(i) = -ax / (t * t) * d;
        ops.sup_theta_prime = std::max(ops.sup_theta_prime, std::abs(d));
    }
    ops.f_t = to_k(g, f);
    ops.leading = to_k(g, lead);
    ops.dt_j0 = to_k(g, dt);
    ops.omega = g.k.cwiseAbs();
    ops.khat = g.k.unaryExpr([](double v) { return sgn(v); });
    // band-limited: the periodic k axis wraps at +-k_max, where sgn(k) jumps again
    const double band = 0.5 * g.k.cwiseAbs().maxCoeff();
    ops.high = g.k.unaryExpr([threshold, band](double v) {
        return std::abs(v) >= threshold && std::abs(v) <= band ? 1.0 : 0.0;
    });
    ops.low = g.k.unaryExpr([threshold](double v) { return std::abs(v) < threshold ? 1.0 : 0.0; });
    return ops;
}

Mat commutator_i_omega(const LabOperators& ops) {
    const auto w = ops.omega.cast<cplx>().asDiagonal();
    return I_unit * (Mat(w * ops.f_t) - Mat(ops.f_t * w));
}

CommutatorRow lab_row(const LabGrid& g, const RadialProfile& theta, double beta, double t) {
    const LabOperators ops = build_ops(g, theta, beta, t);
    const auto s = ops.khat.cast<cplx>().asDiagonal();
    const auto high = ops.high.cast<cplx>().asDiagonal();
    const Mat comm = commutator_i_omega(ops);
    const Mat remainder = comm - Mat(s * ops.leading);
    const Mat remainder_sym = comm - 0.5 * (Mat(s * ops.leading) + Mat(ops.leading * s));
    const Mat khat_comm = Mat(s * ops.f_t) - Mat(ops.f_t * s);

    CommutatorRow row;
    row.t = t;
    row.norm_remainder = spectral_norm(remainder);
    row.norm_remainder_high = spectral_norm(remainder * high);
    row.norm_khat_comm = spectral_norm(khat_comm);
    row.norm_khat_comm_high = spectral_norm(khat_comm * high);
    row.norm_remainder_sym = spectral_norm(remainder_sym);
    row.norm_remainder_sym_high = spectral_norm(remainder_sym * high);
    row.norm_remainder_adjoint = spectral_norm(remainder.adjoint());
    return row;
}

}  // namespace

std::vector<CommutatorRow> commutator_lab(const CommutatorLabConfig& cfg, const RadialProfile& theta) {
    for (std::size_t i = 1; i < cfg.t_list.size(); ++i)
        if (!(cfg.t_list[i] > cfg.t_list[i - 1]))
            throw std::invalid_argument("commutator lab: t_list must be strictly increasing");
    const LabGrid g = build_lab_grid(cfg.n_lab, cfg.k_max);
    std::vector<CommutatorRow> rows(cfg.t_list.size());
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(rows.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = lab_row(g, theta, cfg.beta_split, cfg.t_list[i]);
        return rows;
    }
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_lock;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < rows.size(); i += workers)
                    rows[i] = lab_row(g, theta, cfg.beta_split, cfg.t_list[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_lock);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return rows;
}

ResidualNorms w0_decomposition_check(const CommutatorLabConfig& cfg, const RadialProfile& theta,
                                     double t) {
    const LabGrid g = build_lab_grid(cfg.n_lab, cfg.k_max);
    const LabOperators ops = build_ops(g, theta, cfg.beta_split, t);
    const auto s = ops.khat.cast<cplx>().asDiagonal();
    const auto high = ops.high.cast<cplx>().asDiagonal();
    const auto low = ops.low.cast<cplx>().asDiagonal();

    const Mat w0 = commutator_i_omega(ops) + ops.dt_j0;
    // a_t / t = sgn(k) (1/t) theta' sgn(x) - (|x|/t^2) theta'
    const Mat leading_over_t = Mat(s * ops.leading) + ops.dt_j0;
    const Mat rest = w0 - leading_over_t;

    ResidualNorms out;
    out.t = t;
    out.norm_w0 = spectral_norm(w0);
    out.norm_leading = t * spectral_norm(leading_over_t);
    out.leading_bound = 2.0 * ops.sup_theta_prime;
    out.norm_b = std::pow(t, 1.0 + cfg.beta_split) * spectral_norm(rest * high);
    out.norm_b_prime = t * spectral_norm(rest * low);
    return out;
}

}  // namespace sbs::onep
