// model.hpp — spin system, total Hamiltonian assembly, Fermi Golden Rule check

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sbs/config.hpp"
#include "sbs/fock.hpp"
#include "sbs/onep.hpp"
#include "sbs/types.hpp"

namespace sbs::model {

// H_S = diag(e), eigenvalues strictly increasing; D Hermitian.
struct SpinSystem {
    RVec energies;
    Mat coupling;

    SpinSystem() = default;
    SpinSystem(RVec e, Mat d);
    std::size_t dim() const { return static_cast<std::size_t>(energies.size()); }
    Mat hamiltonian() const;
    Vec level(std::size_t i) const;
};

struct CouplingConfig {
    double lambda{0.1};
};

enum class FgrConvention { Bohr, Literal };

std::string to_string(FgrConvention c);

// Everything a model file carries.
struct ModelSpec {
    std::vector<double> energies{0.0, 0.5};
    std::vector<std::vector<double>> d{{0.0, 1.0}, {1.0, 0.0}};
    double lambda{0.1};
    double alpha{0.5};
    double beta_ff{0.5};
    double k_cut{1.0};
    double k_support{2.0};
    double k_max{2.0};
    std::size_t n_k{32};
    std::size_t n_max{3};
    FgrConvention convention{FgrConvention::Bohr};

    SpinSystem spin() const;
    onep::FormFactor form_factor() const;
};

ModelSpec desk_spec();
// [model] section; see README for keys
ModelSpec parse_model_spec(const config::Config& cfg, const ModelSpec& defaults = desk_spec());

struct ModelInstance {
    SpinSystem spin;
    CouplingConfig coupling;
    std::optional<onep::FormFactor> form_factor;
    onep::RadialGrid grid;
    fock::OccupationBasis basis;
    RVec omega;
    Vec g;
    fock::FockOperator h_s;  // H_S (x) 1
    fock::FockOperator h_f;  // 1 (x) dGamma(omega)
    fock::FockOperator h_i;  // lambda D (x) Phi(g)
    fock::FockOperator h;

    std::size_t spin_dim() const { return spin.dim(); }
    Eigen::Index dim() const { return h.dim(); }
    Eigen::Index fock_dim() const { return basis.dim(); }
};

ModelInstance assemble(const SpinSystem& spin, const CouplingConfig& coupling, const onep::FormFactor& ff,
                       const onep::RadialGrid& grid, const fock::OccupationBasis& basis);
ModelInstance assemble(const ModelSpec& spec);
// Explicit frequencies and coupling vector on any basis (asymptotic space, tiny instances).
ModelInstance assemble_generic(const SpinSystem& spin, double lambda, const RVec& omega, const Vec& g,
                               const fock::OccupationBasis& basis);
// Same model with a different photon cutoff.
ModelInstance with_cutoff(const ModelInstance& m, std::size_t n_max);

struct FgrLink {
    std::size_t from{0};
    std::size_t to{0};
    double delta{0.0};
    double rate{0.0};
};

struct FgrLevel {
    std::size_t level{0};
    bool chain_found{false};
    std::vector<std::vector<std::size_t>> chains;  // each from `level` down to 0
};

struct FgrReport {
    FgrConvention convention{FgrConvention::Bohr};
    std::vector<FgrLink> links;
    std::vector<FgrLevel> levels;
    bool holds{false};
    double rate(std::size_t from, std::size_t to) const;
};

// |D_ij|^2 4 pi delta^2 |phi(delta)|^2, 0 outside the support
double fgr_link_rate(cplx d_ij, double delta, const onep::FormFactor& ff);
FgrReport fgr_check(const SpinSystem& spin, const onep::FormFactor& ff,
                    FgrConvention convention = FgrConvention::Bohr);

}  // namespace sbs::model
