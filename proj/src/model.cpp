// model.cpp — Hamiltonian assembly and the FGR chain search

#include "sbs/model.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace sbs::model {

SpinSystem::SpinSystem(RVec e, Mat d) : energies(std::move(e)), coupling(std::move(d)) {
    const Eigen::Index n = energies.size();
    if (n < 1) throw std::invalid_argument("SpinSystem: empty spectrum");
    if (coupling.rows() != n || coupling.cols() != n) throw std::invalid_argument("SpinSystem: D has wrong dimension");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(energies(i) > energies(i - 1)))
            throw std::invalid_argument("SpinSystem: eigenvalues must be strictly increasing (non-degenerate)");
    if ((coupling - coupling.adjoint()).cwiseAbs().maxCoeff() > 1e-14)
        throw std::invalid_argument("SpinSystem: D must be Hermitian");
}

Mat SpinSystem::hamiltonian() const { return energies.cast<cplx>().asDiagonal(); }

Vec SpinSystem::level(std::size_t i) const {
    Vec v = Vec::Zero(energies.size());
    v(static_cast<Eigen::Index>(i)) = 1.0;
    return v;
}

std::string to_string(FgrConvention c) { return c == FgrConvention::Bohr ? "bohr" : "literal"; }

SpinSystem ModelSpec::spin() const {
    const auto n = static_cast<Eigen::Index>(energies.size());
    RVec e(n);
    for (Eigen::Index i = 0; i < n; ++i) e(i) = energies[static_cast<std::size_t>(i)];
    if (d.size() != energies.size()) throw std::invalid_argument("model: D needs one row per level");
    Mat dm(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (d[static_cast<std::size_t>(i)].size() != energies.size())
            throw std::invalid_argument("model: D row has wrong length");
        for (Eigen::Index j = 0; j < n; ++j) dm(i, j) = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return SpinSystem(e, dm);
}

onep::FormFactor ModelSpec::form_factor() const { return onep::FormFactor(alpha, beta_ff, k_cut, k_support); }

ModelSpec desk_spec() { return ModelSpec{}; }

ModelSpec parse_model_spec(const config::Config& cfg, const ModelSpec& defaults) {
    ModelSpec s = defaults;
    s.energies = cfg.get_list("model.energies", s.energies);
    if (cfg.has("model.energies") && !cfg.has("model.d_row0") && s.energies.size() != s.d.size())
        throw std::invalid_argument("model: energies given without matching D rows (d_row0, d_row1, ...)");
    if (cfg.has("model.d_row0")) {
        s.d.clear();
        for (std::size_t i = 0; i < s.energies.size(); ++i) {
            const std::string key = "model.d_row" + std::to_string(i);
            if (!cfg.has(key)) throw std::invalid_argument("model: missing " + key);
            s.d.push_back(cfg.get_list(key, {}));
        }
    }
    s.lambda = cfg.get("model.lambda", s.lambda);
    s.alpha = cfg.get("model.alpha", s.alpha);
    s.beta_ff = cfg.get("model.beta_ff", s.beta_ff);
    s.k_cut = cfg.get("model.k_cut", s.k_cut);
    s.k_support = cfg.get("model.k_support", s.k_support);
    s.k_max = cfg.get("model.k_max", s.k_max);
    s.n_k = static_cast<std::size_t>(cfg.get_int("model.n_k", static_cast<long>(s.n_k)));
    s.n_max = static_cast<std::size_t>(cfg.get_int("model.n_max", static_cast<long>(s.n_max)));
    const std::string conv = cfg.get("model.fgr_convention", to_string(s.convention));
    if (conv == "bohr")
        s.convention = FgrConvention::Bohr;
    else if (conv == "literal")
        s.convention = FgrConvention::Literal;
    else
        throw std::invalid_argument("model: fgr_convention must be 'bohr' or 'literal'");
    return s;
}

ModelInstance assemble_generic(const SpinSystem& spin, double lambda, const RVec& omega, const Vec& g,
                               const fock::OccupationBasis& basis) {
    const auto m = static_cast<Eigen::Index>(basis.modes());
    if (omega.size() != m || g.size() != m) throw std::invalid_argument("assemble: coupling/frequency dimension mismatch");
    ModelInstance mi;
    mi.spin = spin;
    mi.coupling.lambda = lambda;
    mi.basis = basis;
    mi.omega = omega;
    mi.g = g;
    const std::size_t ns = spin.dim();
    mi.h_s = fock::spin_part(spin.hamiltonian(), basis);
    mi.h_f = fock::photon_part(fock::dGamma_diagonal(omega, basis), ns);
    mi.h_i = cplx(lambda) * fock::tensor(spin.coupling, fock::field(g, basis));
    mi.h = fock::FockOperator(SpMat(mi.h_s.to_sparse() + mi.h_f.to_sparse() + mi.h_i.to_sparse()), true);
    if (!mi.h.verify_hermitian(1e-12)) throw std::runtime_error("assemble: Hamiltonian is not Hermitian");
    return mi;
}

ModelInstance assemble(const SpinSystem& spin, const CouplingConfig& coupling, const onep::FormFactor& ff,
                       const onep::RadialGrid& grid, const fock::OccupationBasis& basis) {
    if (basis.modes() != grid.n_modes) throw std::invalid_argument("assemble: basis and grid mode counts differ");
    if (basis.position_modes()) throw std::invalid_argument("assemble: the Hamiltonian is built in k-modes");
    const RVec g = onep::sample_coupling(ff, grid);
    ModelInstance mi = assemble_generic(spin, coupling.lambda, grid.k_nodes(), g.cast<cplx>(), basis);
    mi.form_factor = ff;
    mi.grid = grid;
    return mi;
}

ModelInstance assemble(const ModelSpec& spec) {
    const auto grid = onep::build_grid(spec.n_k, spec.k_max);
    return assemble(spec.spin(), CouplingConfig{spec.lambda}, spec.form_factor(), grid,
                    fock::build_basis(spec.n_k, spec.n_max));
}

ModelInstance with_cutoff(const ModelInstance& m, std::size_t n_max) {
    ModelInstance out = assemble_generic(m.spin, m.coupling.lambda, m.omega, m.g,
                                         fock::OccupationBasis(m.basis.modes(), n_max));
    out.form_factor = m.form_factor;
    out.grid = m.grid;
    return out;
}

double FgrReport::rate(std::size_t from, std::size_t to) const {
    for (const auto& l : links)
        if (l.from == from && l.to == to) return l.rate;
    return 0.0;
}

double fgr_link_rate(cplx d_ij, double delta, const onep::FormFactor& ff) {
    if (!(delta > 0.0) || delta >= ff.k_support()) return 0.0;
    const double phi = ff(delta);
    return std::norm(d_ij) * 4.0 * kPi * delta * delta * phi * phi;
}

FgrReport fgr_check(const SpinSystem& spin, const onep::FormFactor& ff, FgrConvention convention) {
    const std::size_t n = spin.dim();
    for (std::size_t i = 1; i < n; ++i)
        if (!(spin.energies(static_cast<Eigen::Index>(i)) > spin.energies(static_cast<Eigen::Index>(i - 1))))
            throw std::invalid_argument("fgr_check: degenerate spectrum");
    FgrReport rep;
    rep.convention = convention;
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double ei = spin.energies(static_cast<Eigen::Index>(i)), ej = spin.energies(static_cast<Eigen::Index>(j));
            const double delta = convention == FgrConvention::Bohr ? ei - ej : ei + ej;
            rep.links.push_back({i, j, delta,
                                 fgr_link_rate(spin.coupling(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                                               delta, ff)});
        }
    rep.holds = true;
    for (std::size_t i = 1; i < n; ++i) {
        FgrLevel lvl;
        lvl.level = i;
        std::vector<std::size_t> path{i};
        std::function<void(std::size_t)> dfs = [&](std::size_t cur) {
            if (cur == 0) {
                lvl.chains.push_back(path);
                return;
            }
            for (std::size_t nxt = cur; nxt-- > 0;) {
                if (!(rep.rate(cur, nxt) > 0.0)) continue;
                path.push_back(nxt);
                dfs(nxt);
                path.pop_back();
            }
        };
        dfs(i);
        lvl.chain_found = !lvl.chains.empty();
        rep.holds = rep.holds && lvl.chain_found;
        rep.levels.push_back(std::move(lvl));
    }
    if (n == 1) rep.holds = true;
    return rep;
}

}  // namespace sbs::model
