// onep.hpp — discretized radial one-particle space and its operators

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>

#include "sbs/types.hpp"

namespace sbs::onep {

// Uniform radial frequency grid k_j = j*dk (j = 1..n), paired with the
// position labels x_m = m*pi/k_max. Speed of light is 1.
struct RadialGrid {
    std::size_t n_modes{0};
    double k_max{0.0};

    double dk() const { return k_max / static_cast<double>(n_modes); }
    double dx() const { return kPi / k_max; }
    // zero-based: k(0) = dk
    double k(std::size_t j) const { return static_cast<double>(j + 1) * dk(); }
    double x(std::size_t m) const { return static_cast<double>(m + 1) * dx(); }
    double x_max() const { return static_cast<double>(n_modes) * dx(); }
    // Free photons stay clear of the reflecting wall up to this time.
    double horizon() const { return 0.8 * x_max(); }
    RVec k_nodes() const;
    RVec x_nodes() const;
};

RadialGrid build_grid(std::size_t n_modes, double k_max);

// Orthonormal type-I sine transform; maps k-coefficients to x-coefficients.
// Real, symmetric and an involution.
struct PositionTransform {
    RMat u;
};

PositionTransform make_position_transform(const RadialGrid& grid);

// phi(k) = k^{(alpha-1)/2} chi(k), chi = 1 on [0, k_cut] decaying smoothly to
// 0 at k_support. k_support == k_cut is a hard ultraviolet cutoff.
class FormFactor {
public:
    FormFactor(double alpha, double beta_ff, double k_cut = 1.0, double k_support = 2.0);

    double operator()(double k) const;
    double alpha() const { return alpha_; }
    double beta_ff() const { return beta_ff_; }
    double k_cut() const { return k_cut_; }
    double k_support() const { return k_support_; }

private:
    double alpha_;
    double beta_ff_;
    double k_cut_;
    double k_support_;
};

// C^infinity step: 0 for u <= 0, 1 for u >= 1.
double mollifier_step(double u);
double mollifier_step_derivative(double u);

// Radial reduction weight sqrt(4 pi dk) k_j p(k_j); the squared norm of the
// result approximates the integral of |p|^2 over R^3.
RVec sample_profile(const std::function<double(double)>& profile, const RadialGrid& grid);
RVec sample_coupling(const FormFactor& ff, const RadialGrid& grid);

struct RadialProfile {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
};

// theta(s) = 1 for s <= v1, 0 for s >= v2, non-increasing in between.
struct SmoothIndicator {
    double v1{0.6};
    double v2{0.8};

    SmoothIndicator() = default;
    SmoothIndicator(double v1_, double v2_);

    double operator()(double s) const;
    double derivative(double s) const;
    RadialProfile profile() const;
};

// Smooth bump supported away from the origin: outer(s) * (1 - inner(s)).
struct AnnularIndicator {
    SmoothIndicator inner;
    SmoothIndicator outer;

    double operator()(double s) const;
    double derivative(double s) const;
    RadialProfile profile() const;
};

enum class Representation { KDiagonal, XDiagonal, DenseK, DenseX };

bool is_position(Representation rep);
std::string to_string(Representation rep);

struct OneParticleOperator {
    Mat matrix;
    Representation rep{Representation::DenseK};

    static OneParticleOperator diagonal(const RVec& entries, bool position);
    static OneParticleOperator identity(std::size_t n, bool position = false);

    std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }
    bool is_diagonal() const {
        return rep == Representation::KDiagonal || rep == Representation::XDiagonal;
    }
    bool is_hermitian(double tol = 1e-12) const;
    OneParticleOperator in_momentum(const PositionTransform& tr) const;
    OneParticleOperator in_position(const PositionTransform& tr) const;
    OneParticleOperator adjoint() const;
};

OneParticleOperator operator+(const OneParticleOperator& a, const OneParticleOperator& b);
OneParticleOperator operator*(const OneParticleOperator& a, const OneParticleOperator& b);

OneParticleOperator frequency_op(const RadialGrid& grid);
// 1_{k <= eps}
OneParticleOperator soft_projector(const RadialGrid& grid, double eps);
// x-diagonal theta(x_m / t)
OneParticleOperator indicator_op(const std::function<double(double)>& theta, double t,
                                 const RadialGrid& grid);
OneParticleOperator indicator_op(const SmoothIndicator& theta, double t, const RadialGrid& grid);
// x-diagonal 1_{x_m <= r}
OneParticleOperator ball_projector(const RadialGrid& grid, double r);

struct MembershipReport {
    // sup_j |d^m phi(k_j)| k_j^{m - (beta-1)/2}, m = 0..3, on the base grid
    std::array<double, 4> max_ratio{};
    // same, on the grid refined twice (n -> 4n)
    std::array<double, 4> refined_ratio{};
    std::array<bool, 4> divergent{};
    bool consistent() const;
};

MembershipReport h_alpha_membership_check(const std::function<double(double)>& profile,
                                          double alpha, double beta_ff, const RadialGrid& grid);
MembershipReport h_alpha_membership_check(const FormFactor& ff, const RadialGrid& grid);

}  // namespace sbs::onep
