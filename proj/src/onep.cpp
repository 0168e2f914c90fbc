// onep.cpp — radial grid, sine transform, form factor and indicators

#include "sbs/onep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbs::onep {

RVec RadialGrid::k_nodes() const {
    RVec out(static_cast<Eigen::Index>(n_modes));
    for (std::size_t j = 0; j < n_modes; ++j) out(static_cast<Eigen::Index>(j)) = k(j);
    return out;
}

RVec RadialGrid::x_nodes() const {
    RVec out(static_cast<Eigen::Index>(n_modes));
    for (std::size_t m = 0; m < n_modes; ++m) out(static_cast<Eigen::Index>(m)) = x(m);
    return out;
}

RadialGrid build_grid(std::size_t n_modes, double k_max) {
    if (n_modes < 2) throw std::invalid_argument("build_grid: need at least two modes");
    if (!(k_max > 0.0)) throw std::invalid_argument("build_grid: k_max must be positive");
    return RadialGrid{n_modes, k_max};
}

PositionTransform make_position_transform(const RadialGrid& grid) {
    const auto n = static_cast<Eigen::Index>(grid.n_modes);
    const double denom = static_cast<double>(n + 1);
    const double scale = std::sqrt(2.0 / denom);
    PositionTransform tr{RMat(n, n)};
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index m = 0; m < n; ++m)
            tr.u(m, j) = scale * std::sin(kPi * static_cast<double>((j + 1) * (m + 1)) / denom);
    return tr;
}

FormFactor::FormFactor(double alpha, double beta_ff, double k_cut, double k_support)
    : alpha_(alpha), beta_ff_(beta_ff), k_cut_(k_cut), k_support_(k_support) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("FormFactor: alpha must lie in (0, 1]");
    if (!(k_cut > 0.0)) throw std::invalid_argument("FormFactor: k_cut must be positive");
    if (k_support < k_cut) throw std::invalid_argument("FormFactor: k_support < k_cut");
}

double FormFactor::operator()(double k) const {
    if (k <= 0.0) return 0.0;
    const double power = std::pow(k, 0.5 * (alpha_ - 1.0));
    if (k <= k_cut_) return power;
    if (k >= k_support_) return 0.0;
    return power * mollifier_step((k_support_ - k) / (k_support_ - k_cut_));
}

namespace {

double bump_exp(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }

}  // namespace

double mollifier_step(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    const double a = bump_exp(u);
    const double b = bump_exp(1.0 - u);
    return a / (a + b);
}

double mollifier_step_derivative(double u) {
    if (u <= 0.0 || u >= 1.0) return 0.0;
    const double a = bump_exp(u);
    const double b = bump_exp(1.0 - u);
    const double da = a / (u * u);
    const double db = -b / ((1.0 - u) * (1.0 - u));
    return (da * b - a * db) / ((a + b) * (a + b));
}

RVec sample_profile(const std::function<double(double)>& profile, const RadialGrid& grid) {
    RVec g(static_cast<Eigen::Index>(grid.n_modes));
    const double w = std::sqrt(4.0 * kPi * grid.dk());
    for (std::size_t j = 0; j < grid.n_modes; ++j) {
        const double k = grid.k(j);
        g(static_cast<Eigen::Index>(j)) = w * k * profile(k);
    }
    return g;
}

RVec sample_coupling(const FormFactor& ff, const RadialGrid& grid) {
    if (grid.k_max + 1e-12 < ff.k_support())
        throw std::invalid_argument("sample_coupling: grid cutoff below form-factor support");
    return sample_profile([&ff](double k) { return ff(k); }, grid);
}

SmoothIndicator::SmoothIndicator(double v1_, double v2_) : v1(v1_), v2(v2_) {
    if (!(v1 > 0.0 && v1 < v2))
        throw std::invalid_argument("SmoothIndicator: need 0 < v1 < v2");
}

double SmoothIndicator::operator()(double s) const {
    return mollifier_step((v2 - std::abs(s)) / (v2 - v1));
}

double SmoothIndicator::derivative(double s) const {
    const double w = v2 - v1;
    const double d = -mollifier_step_derivative((v2 - std::abs(s)) / w) / w;
    return s < 0.0 ? -d : d;
}

RadialProfile SmoothIndicator::profile() const {
    const SmoothIndicator self = *this;
    return {[self](double s) { return self(s); }, [self](double s) { return self.derivative(s); }};
}

double AnnularIndicator::operator()(double s) const { return outer(s) * (1.0 - inner(s)); }

double AnnularIndicator::derivative(double s) const {
    return outer.derivative(s) * (1.0 - inner(s)) - outer(s) * inner.derivative(s);
}

RadialProfile AnnularIndicator::profile() const {
    const AnnularIndicator self = *this;
    return {[self](double s) { return self(s); }, [self](double s) { return self.derivative(s); }};
}

bool is_position(Representation rep) {
    return rep == Representation::XDiagonal || rep == Representation::DenseX;
}

std::string to_string(Representation rep) {
    switch (rep) {
        case Representation::KDiagonal: return "k-diagonal";
        case Representation::XDiagonal: return "x-diagonal";
        case Representation::DenseK: return "dense-k";
        case Representation::DenseX: return "dense-x";
    }
    return "unknown";
}

OneParticleOperator OneParticleOperator::diagonal(const RVec& entries, bool position) {
    OneParticleOperator op;
    op.matrix = entries.cast<cplx>().asDiagonal();
    op.rep = position ? Representation::XDiagonal : Representation::KDiagonal;
    return op;
}

OneParticleOperator OneParticleOperator::identity(std::size_t n, bool position) {
    return diagonal(RVec::Ones(static_cast<Eigen::Index>(n)), position);
}

bool OneParticleOperator::is_hermitian(double tol) const {
    return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

OneParticleOperator OneParticleOperator::in_momentum(const PositionTransform& tr) const {
    if (!is_position(rep)) return *this;
    const Mat u = tr.u.cast<cplx>();
    return {u.transpose() * matrix * u, Representation::DenseK};
}

OneParticleOperator OneParticleOperator::in_position(const PositionTransform& tr) const {
    if (is_position(rep)) return *this;
    const Mat u = tr.u.cast<cplx>();
    return {u * matrix * u.transpose(), Representation::DenseX};
}

OneParticleOperator OneParticleOperator::adjoint() const { return {matrix.adjoint(), rep}; }

namespace {

Representation combine(Representation a, Representation b) {
    if (is_position(a) != is_position(b))
        throw std::invalid_argument("one-particle operators in different representations");
    if (a == b && (a == Representation::KDiagonal || a == Representation::XDiagonal)) return a;
    return is_position(a) ? Representation::DenseX : Representation::DenseK;
}

}  // namespace

OneParticleOperator operator+(const OneParticleOperator& a, const OneParticleOperator& b) {
    return {a.matrix + b.matrix, combine(a.rep, b.rep)};
}

OneParticleOperator operator*(const OneParticleOperator& a, const OneParticleOperator& b) {
    return {a.matrix * b.matrix, combine(a.rep, b.rep)};
}

OneParticleOperator frequency_op(const RadialGrid& grid) {
    return OneParticleOperator::diagonal(grid.k_nodes(), false);
}

OneParticleOperator soft_projector(const RadialGrid& grid, double eps) {
    RVec d(static_cast<Eigen::Index>(grid.n_modes));
    for (std::size_t j = 0; j < grid.n_modes; ++j)
        d(static_cast<Eigen::Index>(j)) = grid.k(j) <= eps + 1e-12 ? 1.0 : 0.0;
    return OneParticleOperator::diagonal(d, false);
}

OneParticleOperator indicator_op(const std::function<double(double)>& theta, double t,
                                 const RadialGrid& grid) {
    if (!(t > 0.0)) throw std::invalid_argument("indicator_op: t must be positive");
    RVec d(static_cast<Eigen::Index>(grid.n_modes));
    for (std::size_t m = 0; m < grid.n_modes; ++m)
        d(static_cast<Eigen::Index>(m)) = theta(grid.x(m) / t);
    return OneParticleOperator::diagonal(d, true);
}

OneParticleOperator indicator_op(const SmoothIndicator& theta, double t, const RadialGrid& grid) {
    return indicator_op([&theta](double s) { return theta(s); }, t, grid);
}

OneParticleOperator ball_projector(const RadialGrid& grid, double r) {
    RVec d(static_cast<Eigen::Index>(grid.n_modes));
    for (std::size_t m = 0; m < grid.n_modes; ++m)
        d(static_cast<Eigen::Index>(m)) = grid.x(m) <= r + 1e-12 ? 1.0 : 0.0;
    return OneParticleOperator::diagonal(d, true);
}

bool MembershipReport::consistent() const {
    return std::none_of(divergent.begin(), divergent.end(), [](bool b) { return b; });
}

namespace {

// Fourth-order central stencils for derivative orders 1..3 (half-width 3).
double central_derivative(const std::vector<double>& f, std::size_t j, int order, double h) {
    auto at = [&](int off) { return f[static_cast<std::size_t>(static_cast<long>(j) + off)]; };
    switch (order) {
        case 0: return at(0);
        case 1: return (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
        case 2:
            return (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h * h);
        case 3:
            return (at(-3) - 8.0 * at(-2) + 13.0 * at(-1) - 13.0 * at(1) + 8.0 * at(2) - at(3)) /
                   (8.0 * h * h * h);
        default: throw std::logic_error("central_derivative: unsupported order");
    }
}

std::array<double, 4> ratio_sweep(const std::function<double(double)>& profile, double beta_ff,
                                  const RadialGrid& grid) {
    const std::size_t n = grid.n_modes;
    std::vector<double> f(n);
    for (std::size_t j = 0; j < n; ++j) f[j] = profile(grid.k(j));
    std::array<double, 4> out{};
    constexpr std::size_t halo = 3;
    if (n <= 2 * halo) throw std::invalid_argument("h_alpha check: grid too small");
    for (int m = 0; m < 4; ++m) {
        double best = 0.0;
        for (std::size_t j = halo; j + halo < n; ++j) {
            const double k = grid.k(j);
            const double d = std::abs(central_derivative(f, j, m, grid.dk()));
            best = std::max(best, d * std::pow(k, m - 0.5 * (beta_ff - 1.0)));
        }
        out[static_cast<std::size_t>(m)] = best;
    }
    return out;
}

}  // namespace

MembershipReport h_alpha_membership_check(const std::function<double(double)>& profile,
                                          double alpha, double beta_ff, const RadialGrid& grid) {
    if (beta_ff < alpha)
        throw std::invalid_argument("h_alpha check: beta_ff must not be below alpha");
    MembershipReport rep;
    rep.max_ratio = ratio_sweep(profile, beta_ff, grid);
    const RadialGrid mid = build_grid(2 * grid.n_modes, grid.k_max);
    const RadialGrid fine = build_grid(4 * grid.n_modes, grid.k_max);
    const auto mid_ratio = ratio_sweep(profile, beta_ff, mid);
    rep.refined_ratio = ratio_sweep(profile, beta_ff, fine);
    for (std::size_t m = 0; m < 4; ++m) {
        // growth at both refinement steps signals an unbounded ratio
        const double a = rep.max_ratio[m], b = mid_ratio[m], c = rep.refined_ratio[m];
        rep.divergent[m] = b > 1.5 * a + 1e-300 && c > 1.5 * b;
    }
    return rep;
}

MembershipReport h_alpha_membership_check(const FormFactor& ff, const RadialGrid& grid) {
    return h_alpha_membership_check([&ff](double k) { return ff(k); }, ff.alpha(), ff.beta_ff(),
                                    grid);
}

}  // namespace sbs::onep
