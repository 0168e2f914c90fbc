// scattering.hpp — identification operators, Cook limits, inverse wave operator

#pragma once

#include <cstddef>
#include <vector>

#include "sbs/fock.hpp"
#include "sbs/model.hpp"
#include "sbs/onep.hpp"
#include "sbs/solver.hpp"
#include "sbs/types.hpp"

namespace sbs::scattering {

// j0(t) = theta(x/t), j_inf(t) = 1 - j0(t), both x-diagonal.
struct ScatteringSplit {
    onep::SmoothIndicator theta;
    double t{0.0};
    onep::OneParticleOperator j0;
    onep::OneParticleOperator j_inf;
};

ScatteringSplit make_split(const onep::SmoothIndicator& theta, double t, const onep::RadialGrid& grid);

struct CookConfig {
    double t0{4.0};
    double rho{1.3};
    double t_final{0.0};  // 0: the reflection horizon
    double tol{1e-2};
    double prop_tol{1e-10};
};

// t0 * r^i, r <= rho chosen so the last point is min(t_final, horizon)
std::vector<double> cook_grid(const CookConfig& cfg, double horizon);

struct CookResult {
    Vec limit;
    Vec extrapolated;
    std::vector<double> times;
    std::vector<double> cauchy;  // ||V(t_{i+1}) - V(t_i)||
    std::vector<double> norms;
    bool converged{false};
    double final_cauchy{0.0};
    double isometry_defect{0.0};  // | ||limit|| - ||input|| |
    double truncation_loss{0.0};  // largest identification loss along the grid
    double propagation_error{0.0};
    double horizon{0.0};
};

// Shared data for one model and its ground state: doubled space, sine
// transform, and the block structure of H_as = H (x) 1 + 1 (x) H_F.
class Context {
public:
    Context(const model::ModelInstance& m, const solver::GroundStateResult& gs);

    const model::ModelInstance& model() const { return *model_; }
    const solver::GroundStateResult& ground() const { return *gs_; }
    const fock::DoubledSpace& doubled() const { return ds_; }
    const onep::PositionTransform& transform() const { return tr_; }
    std::size_t spin_dim() const { return model_->spin_dim(); }
    double horizon() const { return model_->grid.horizon(); }

    // exp(-i t H_as) on spin (x) doubled Fock
    Vec evolve_asymptotic(const Vec& x, double t, double tol = 1e-10, double* error = nullptr) const;
    // exp(-i t (E_gs + H_F)) on a photon vector, with E_gs -> dressed_energy(|n|)
    Vec free_evolve(const Vec& phi, double t) const;
    // j0 in k-representation
    Mat j0_momentum(const ScatteringSplit& split) const;

    // Ground state of H with photon cutoff N_max - m, embedded in the full
    // space; m = 0 is Psi_gs. Used to dress m-photon configurations so that
    // the truncated I intertwines exactly.
    const Vec& dressed_ground(std::size_t m) const { return sector_ground_[m]; }
    double dressed_energy(std::size_t m) const { return sector_energy_[m]; }
    // || dressed_ground(m) - Psi_gs ||
    double dressing_defect(std::size_t m) const { return (sector_ground_[m] - gs_->state).norm(); }
    const RVec& photon_energy() const { return photon_energy_; }

private:
    const model::ModelInstance* model_;
    const solver::GroundStateResult* gs_;
    fock::DoubledSpace ds_;
    onep::PositionTransform tr_;
    // block for second-factor occupation q: doubled indices of (p, q), p < dim_upto(N_max - |q|)
    std::vector<std::vector<Eigen::Index>> q_blocks_;
    std::vector<std::vector<Eigen::Index>> q_by_total_;
    // eigendecompositions of H restricted to spin (x) {N <= n}, n < N_max
    std::vector<Mat> block_vecs_;
    std::vector<RVec> block_vals_;
    RVec photon_energy_;  // omega . n on the single basis
    std::vector<Vec> sector_ground_;
    std::vector<double> sector_energy_;
};

// H_as assembled explicitly on the doubled basis (small instances, tests).
model::ModelInstance assemble_asymptotic(const model::ModelInstance& m, const fock::DoubledSpace& ds);

struct IdentificationResult {
    Vec state;
    double loss{0.0};  // dropped norm (literal) or dressing defect (default)
};

// I: a*(f_1)...a*(f_m) Omega -> a*(f_1)...a*(f_m) Psi, via I_ex(Psi (x) phi).
// Psi = dressed_ground(m) on the m-photon sector; loss = the resulting
// distance to the literal map, sqrt(sum_m w_m ||Psi_m - Psi_gs||^2).
IdentificationResult identification_I(const Context& ctx, const Vec& phi);
// Psi = Psi_gs on every sector; loss = norm dropped at the cutoff
IdentificationResult identification_I_literal(const Context& ctx, const Vec& phi);
// creation monomials applied to the dressed ground states
IdentificationResult identification_I_monomial(const Context& ctx, const Vec& phi);

Vec apply_J_ex(const Context& ctx, const Vec& psi, const ScatteringSplit& split);
// <Psi| (x) 1 on a doubled vector, Psi = dressed_ground(|q|) on second-factor occupation q
Vec pair_ground(const Context& ctx, const Vec& doubled);
Vec apply_J(const Context& ctx, const Vec& psi, const ScatteringSplit& split);

// W_t phi = exp(itH) I exp(-it(E_gs + H_F)) phi on the Cook grid
CookResult wave_operator_plus(const Context& ctx, const Vec& phi, const CookConfig& cfg);
// exp(i(H - E)t) a*(f_1,t)...a*(f_m,t) Psi_gs, f_t = exp(-i omega t) f
CookResult asymptotic_create(const Context& ctx, const std::vector<Vec>& f_list, const CookConfig& cfg);

struct ZResult {
    CookResult z_ex;   // on spin (x) doubled
    CookResult z;      // photon vector
    double contraction_defect{0.0};  // max(0, ||Z_ex psi|| - ||psi||)
};

ZResult inverse_Z(const Context& ctx, const Vec& psi, const onep::SmoothIndicator& theta, const CookConfig& cfg);
// from states already propagated to the Cook grid
ZResult z_from_trajectory(const Context& ctx, const solver::Trajectory& traj, const onep::SmoothIndicator& theta,
                          const CookConfig& cfg, double input_norm);

struct AcResult {
    std::size_t n{0};
    double direct{0.0};     // sup over the grid tail of ||I 1_{N<=n} J_t psi_t - psi_t||
    double via_wave{0.0};   // ||W_+ 1_{N<=n} Z psi - psi||
    bool converged{false};
    double defect_budget{0.0};
    CookResult wave;
};

AcResult ac_residual(const Context& ctx, const Vec& psi, std::size_t n, const onep::SmoothIndicator& theta,
                     const CookConfig& cfg);
// reuses a computed Z
AcResult ac_residual(const Context& ctx, const Vec& psi, std::size_t n, const onep::SmoothIndicator& theta,
                     const CookConfig& cfg, const ZResult& z, const solver::Trajectory& traj);

// ||(H W_t - W_t (E_gs + H_F)) phi||, exact through unitarity
double intertwining_defect(const Context& ctx, const Vec& phi, double t);

// one-photon vector a*(f) Omega and normalized products a*(f1)a*(f2) Omega
Vec one_photon(const fock::OccupationBasis& basis, const Vec& f);
Vec two_photon(const fock::OccupationBasis& basis, const Vec& f1, const Vec& f2);
// packet profile centred at k0 with width sigma (smooth, compact support inside the grid)
Vec packet(const onep::RadialGrid& grid, double k0, double sigma, double x0 = 0.0);

}  // namespace sbs::scattering
