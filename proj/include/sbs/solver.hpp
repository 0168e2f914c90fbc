// solver.hpp — ground state, time propagation, Weyl initial states, pull-through

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbs/fock.hpp"
#include "sbs/model.hpp"
#include "sbs/types.hpp"

namespace sbs::solver {

struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GroundStateOptions {
    double tol{1e-10};
    int krylov_dim{80};
    int max_restarts{400};
    std::uint64_t seed{2024};
    bool compute_gap{true};
};

struct GroundStateResult {
    double energy{0.0};
    Vec state;
    double e1{0.0};
    double gap{0.0};
    double residual{0.0};
    int matvecs{0};
};

GroundStateResult ground_state(const fock::FockOperator& h, const GroundStateOptions& opt = {});
GroundStateResult ground_state(const model::ModelInstance& m, const GroundStateOptions& opt = {});

struct PropagationConfig {
    double tol{1e-10};  // norm error per unit time
    int max_krylov{40};
    std::vector<double> checkpoints;
    double drift_tol{1e-6};
    bool keep_states{true};
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<double> norms;
    std::vector<double> energies;
    double error_bound{0.0};
    double max_drift{0.0};
    int matvecs{0};
};

using Observer = std::function<void(double t, const Vec& psi)>;

// Psi_t = exp(-i t H) Psi_0 at every checkpoint. Norm and energy contracts
// are enforced; violations raise ContractViolation.
Trajectory propagate(const Vec& psi0, const fock::FockOperator& h, const PropagationConfig& cfg,
                     const Observer& observe = {});

// exp(-i t H) psi, any sign of t
Vec evolve(const Vec& psi, const fock::FockOperator& h, double t, double tol = 1e-10, double* error = nullptr);

struct InitialState {
    Vec state;
    double truncation_defect{0.0};
};

// psi_S (x) W(f) Omega, closed-form coherent expansion on the truncated space
InitialState weyl_initial_state(const Vec& spin, const Vec& f, const fock::OccupationBasis& basis);

struct PullThroughReport {
    std::vector<double> difference;  // ||a_j Psi + lambda g_j R_j D Psi||
    std::vector<double> truncation;  // ||R_j P a_j (1-P) H Psi||
    std::vector<double> remainder;   // difference with the truncation vector removed
    std::vector<int> cg_iterations;
    double eigen_residual{0.0};
    bool passed{false};
};

// a_j Psi_gs = -lambda g_j (H - E + omega_j)^{-1} (D (x) 1) Psi_gs, checked mode by mode.
PullThroughReport pull_through_check(const model::ModelInstance& m, const GroundStateResult& gs,
                                     double cg_tol = 1e-13);

// Versioned binary checkpoint: header (magic, version, basis fingerprint, time, norm, energy, size) + data.
void write_checkpoint(const std::string& path, const Vec& psi, std::uint64_t basis_fingerprint, double time,
                      double energy);
Vec read_checkpoint(const std::string& path, std::uint64_t expected_fingerprint, double* time = nullptr,
                    double* energy = nullptr);

}  // namespace sbs::solver
