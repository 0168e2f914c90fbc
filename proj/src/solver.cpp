// solver.cpp — Lanczos ground state, Krylov propagation with contracts

#include "sbs/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sbs/krylov.hpp"

namespace sbs::solver {

GroundStateResult ground_state(const fock::FockOperator& h, const GroundStateOptions& opt) {
    const krylov::Apply apply = [&h](const Vec& in, Vec& out) { h.apply(in, out); };
    krylov::EigenOptions eo;
    eo.tol = opt.tol;
    eo.krylov_dim = opt.krylov_dim;
    eo.max_restarts = opt.max_restarts;
    eo.seed = opt.seed;
    const auto p0 = krylov::lowest_eigenpair(apply, h.dim(), eo);
    if (!p0.converged)
        throw NonConvergence("ground_state: Lanczos did not reach residual " + std::to_string(opt.tol) + " (got " +
                             std::to_string(p0.residual) + ")");
    GroundStateResult out;
    out.energy = p0.value;
    out.residual = p0.residual;
    out.matvecs = p0.matvecs;
    // fix the global phase: largest component real positive
    Eigen::Index imax = 0;
    p0.vector.cwiseAbs().maxCoeff(&imax);
    out.state = p0.vector * std::polar(1.0, -std::arg(p0.vector(imax)));
    if (opt.compute_gap && h.dim() > 1) {
        eo.seed = opt.seed + 7;
        const auto p1 = krylov::lowest_eigenpair(apply, h.dim(), eo, {out.state});
        if (!p1.converged) throw NonConvergence("ground_state: second eigenpair did not converge");
        out.e1 = p1.value;
        out.gap = p1.value - p0.value;
        out.matvecs += p1.matvecs;
    }
    return out;
}

GroundStateResult ground_state(const model::ModelInstance& m, const GroundStateOptions& opt) {
    return ground_state(m.h, opt);
}

Vec evolve(const Vec& psi, const fock::FockOperator& h, double t, double tol, double* error) {
    krylov::ExpmvOptions eo;
    eo.tol = tol;
    krylov::ExpmvStats st;
    Vec out = krylov::expmv([&h](const Vec& in, Vec& o) { h.apply(in, o); }, psi, t, eo, &st);
    if (error) *error = st.error_bound;
    return out;
}

Trajectory propagate(const Vec& psi0, const fock::FockOperator& h, const PropagationConfig& cfg,
                     const Observer& observe) {
    if (std::abs(psi0.norm() - 1.0) > 1e-10) throw std::invalid_argument("propagate: initial state must be normalized");
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("propagate: tolerance must be positive");
    for (std::size_t i = 0; i < cfg.checkpoints.size(); ++i) {
        if (cfg.checkpoints[i] < 0.0) throw std::invalid_argument("propagate: negative time");
        if (i > 0 && !(cfg.checkpoints[i] > cfg.checkpoints[i - 1]))
            throw std::invalid_argument("propagate: checkpoint times must be increasing");
    }
    krylov::ExpmvOptions eo;
    eo.tol = cfg.tol;
    eo.max_dim = cfg.max_krylov;
    const krylov::Apply apply = [&h](const Vec& in, Vec& o) { h.apply(in, o); };

    Trajectory tr;
    Vec psi = psi0;
    double t_cur = 0.0;
    const double e0 = h.expectation(psi0);
    for (double t : cfg.checkpoints) {
        if (t > t_cur) {
            krylov::ExpmvStats st;
            psi = krylov::expmv(apply, psi, t - t_cur, eo, &st);
            tr.error_bound += st.error_bound;
            tr.matvecs += st.matvecs;
            t_cur = t;
        }
        const double nrm = psi.norm();
        const double e = h.expectation(psi);
        const double slack = 1e-12 * (1.0 + tr.matvecs * 1e-3);
        if (nrm > 1.0 + slack || nrm < 1.0 - tr.error_bound - slack)
            throw ContractViolation("propagate: norm " + std::to_string(nrm) + " outside [1 - " +
                                    std::to_string(tr.error_bound) + ", 1] at t = " + std::to_string(t));
        tr.max_drift = std::max(tr.max_drift, std::abs(e - e0));
        if (tr.max_drift > cfg.drift_tol)
            throw ContractViolation("propagate: energy drift " + std::to_string(tr.max_drift) + " at t = " +
                                    std::to_string(t));
        tr.times.push_back(t);
        tr.norms.push_back(nrm);
        tr.energies.push_back(e);
        if (cfg.keep_states) tr.states.push_back(psi);
        if (observe) observe(t, psi);
    }
    return tr;
}

InitialState weyl_initial_state(const Vec& spin, const Vec& f, const fock::OccupationBasis& basis) {
    const double sn = spin.norm();
    if (!(sn > 0.0)) throw std::invalid_argument("weyl_initial_state: zero spin vector");
    const auto cs = fock::coherent_state(f, basis);
    const Eigen::Index d = basis.dim();
    InitialState out;
    out.state.resize(spin.size() * d);
    for (Eigen::Index s = 0; s < spin.size(); ++s) out.state.segment(s * d, d) = (spin(s) / sn) * cs.state;
    out.truncation_defect = cs.truncation_defect;
    return out;
}

PullThroughReport pull_through_check(const model::ModelInstance& m, const GroundStateResult& gs, double cg_tol) {
    PullThroughReport rep;
    rep.eigen_residual = gs.residual;
    const std::size_t ns = m.spin_dim();
    const double lambda = m.coupling.lambda;
    const Vec& psi = gs.state;
    const fock::FockOperator d_op = fock::spin_part(m.spin.coupling, m.basis);
    const Vec d_psi = d_op.apply(psi);
    Vec top = psi;
    fock::project_sector(top, m.basis, m.basis.n_max(), ns);
    const fock::FockOperator create_g = fock::photon_part(fock::create(m.g, m.basis), ns);

    rep.passed = true;
    for (std::size_t j = 0; j < m.basis.modes(); ++j) {
        const double wj = m.omega(static_cast<Eigen::Index>(j));
        const cplx gj = m.g(static_cast<Eigen::Index>(j));
        const auto shifted = [&](const Vec& in, Vec& out) {
            m.h.apply(in, out);
            out += (wj - gs.energy) * in;
        };
        const fock::FockOperator aj = fock::photon_part(fock::annihilate_mode(j, m.basis), ns);
        const Vec lhs = aj.apply(psi);
        const auto sol = krylov::conjugate_gradient(shifted, d_psi, cg_tol, 5000);
        const Vec rhs = -lambda * gj * sol.x;
        // P a_j (1 - P) H Psi = lambda D (x) (a*(g) a_j + g_j) Psi_top
        const Vec inner = create_g.apply(aj.apply(top)) + gj * top;
        const Vec w = lambda * d_op.apply(inner);
        const auto tsol = krylov::conjugate_gradient(shifted, w, cg_tol, 5000);
        if (!sol.converged || !tsol.converged)
            throw NonConvergence("pull_through_check: CG did not converge for mode " + std::to_string(j));
        const double diff = (lhs - rhs).norm();
        const double trunc = tsol.x.norm();
        rep.difference.push_back(diff);
        rep.truncation.push_back(trunc);
        rep.remainder.push_back((lhs - rhs - tsol.x).norm());
        rep.cg_iterations.push_back(sol.iterations + tsol.iterations);
        if (diff > 10.0 * gs.residual + trunc) rep.passed = false;
    }
    return rep;
}

namespace {
constexpr std::uint64_t kMagic = 0x53425343484b5054ULL;  // "SBSCHKPT"
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_checkpoint(const std::string& path, const Vec& psi, std::uint64_t basis_fingerprint, double time,
                      double energy) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_checkpoint: cannot open " + path);
    const double nrm = psi.norm();
    const std::uint64_t n = static_cast<std::uint64_t>(psi.size());
    f.write(reinterpret_cast<const char*>(&kMagic), sizeof kMagic);
    f.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    f.write(reinterpret_cast<const char*>(&basis_fingerprint), sizeof basis_fingerprint);
    f.write(reinterpret_cast<const char*>(&time), sizeof time);
    f.write(reinterpret_cast<const char*>(&nrm), sizeof nrm);
    f.write(reinterpret_cast<const char*>(&energy), sizeof energy);
    f.write(reinterpret_cast<const char*>(&n), sizeof n);
    f.write(reinterpret_cast<const char*>(psi.data()), static_cast<std::streamsize>(n * sizeof(cplx)));
}

Vec read_checkpoint(const std::string& path, std::uint64_t expected_fingerprint, double* time, double* energy) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_checkpoint: cannot open " + path);
    std::uint64_t magic = 0, fp = 0, n = 0;
    std::uint32_t version = 0;
    double t = 0.0, nrm = 0.0, e = 0.0;
    f.read(reinterpret_cast<char*>(&magic), sizeof magic);
    f.read(reinterpret_cast<char*>(&version), sizeof version);
    if (magic != kMagic || version != kVersion) throw std::runtime_error("read_checkpoint: unknown format");
    f.read(reinterpret_cast<char*>(&fp), sizeof fp);
    f.read(reinterpret_cast<char*>(&t), sizeof t);
    f.read(reinterpret_cast<char*>(&nrm), sizeof nrm);
    f.read(reinterpret_cast<char*>(&e), sizeof e);
    f.read(reinterpret_cast<char*>(&n), sizeof n);
    if (fp != expected_fingerprint) throw std::runtime_error("read_checkpoint: basis fingerprint mismatch");
    Vec psi(static_cast<Eigen::Index>(n));
    f.read(reinterpret_cast<char*>(psi.data()), static_cast<std::streamsize>(n * sizeof(cplx)));
    if (!f) throw std::runtime_error("read_checkpoint: truncated file");
    if (time) *time = t;
    if (energy) *energy = e;
    return psi;
}

}  // namespace sbs::solver
