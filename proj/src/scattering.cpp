// scattering.cpp — I, J_ex, H_as blocks and the Cook evaluations

#include "sbs/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sbs/krylov.hpp"

namespace sbs::scattering {

namespace {

// sector weights sum_{n: |n| = a} |psi_n|^2, summed over spin
std::vector<double> sector_weights(const fock::OccupationBasis& b, const Vec& psi, std::size_t ns) {
    std::vector<double> w(b.n_max() + 1, 0.0);
    const Eigen::Index d = b.dim();
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a <= b.n_max(); ++a)
            w[a] += psi.segment(static_cast<Eigen::Index>(s) * d + b.sector_begin(a), b.sector_end(a) - b.sector_begin(a))
                        .squaredNorm();
    return w;
}

CookResult finalize(std::vector<double> times, std::vector<Vec> values, double tol, double input_norm) {
    CookResult res;
    res.times = std::move(times);
    for (const auto& v : values) res.norms.push_back(v.norm());
    for (std::size_t i = 1; i < values.size(); ++i) res.cauchy.push_back((values[i] - values[i - 1]).norm());
    if (values.empty()) return res;
    res.limit = values.back();
    res.extrapolated = res.limit;
    const std::size_t n = res.cauchy.size();
    if (n >= 1) res.final_cauchy = res.cauchy.back();
    if (n >= 2) {
        const double c1 = res.cauchy[n - 1], c0 = res.cauchy[n - 2];
        res.converged = c1 < tol && c0 < tol && c1 < c0;
        // geometric tail: V_inf ~ V_last + d_last * r / (1 - r)
        const double r = c0 > 0.0 ? c1 / c0 : 0.0;
        if (r < 0.95) res.extrapolated = res.limit + (values[n] - values[n - 1]) * (r / (1.0 - r));
    }
    res.isometry_defect = std::abs(res.limit.norm() - input_norm);
    return res;
}

}  // namespace

ScatteringSplit make_split(const onep::SmoothIndicator& theta, double t, const onep::RadialGrid& grid) {
    if (!(t > 0.0)) throw std::invalid_argument("make_split: time must be positive");
    if (!(theta.v2 < 1.0)) throw std::invalid_argument("make_split: need v1 < v2 < 1");
    ScatteringSplit sp;
    sp.theta = theta;
    sp.t = t;
    sp.j0 = onep::indicator_op(theta, t, grid);
    const RVec d0 = sp.j0.matrix.diagonal().real();
    sp.j_inf = onep::OneParticleOperator::diagonal(RVec::Ones(d0.size()) - d0, true);
    return sp;
}

std::vector<double> cook_grid(const CookConfig& cfg, double horizon) {
    if (!(cfg.t0 > 0.0) || !(cfg.rho > 1.0)) throw std::invalid_argument("cook_grid: need t0 > 0 and rho > 1");
    const double t_end = cfg.t_final > 0.0 ? std::min(cfg.t_final, horizon) : horizon;
    if (!(t_end > cfg.t0)) throw std::invalid_argument("cook_grid: final time must exceed t0");
    // geometric with ratio <= rho, ending exactly at t_end
    const int k = static_cast<int>(std::ceil(std::log(t_end / cfg.t0) / std::log(cfg.rho) - 1e-9));
    const double r = std::pow(t_end / cfg.t0, 1.0 / k);
    std::vector<double> ts;
    for (int i = 0; i <= k; ++i) ts.push_back(i == k ? t_end : cfg.t0 * std::pow(r, i));
    return ts;
}

Context::Context(const model::ModelInstance& m, const solver::GroundStateResult& gs)
    : model_(&m), gs_(&gs), ds_(fock::make_doubled(m.basis)) {
    if (m.basis.position_modes()) throw std::invalid_argument("Context: model must be in k-modes");
    if (gs.state.size() != m.dim()) throw std::invalid_argument("Context: ground state dimension mismatch");
    const fock::OccupationBasis& b = m.basis;
    const std::size_t nmax = b.n_max();
    const std::size_t ns = m.spin_dim();
    if (m.grid.n_modes == b.modes()) tr_ = onep::make_position_transform(m.grid);

    photon_energy_ = RVec::Zero(b.dim());
    for (Eigen::Index i = 0; i < b.dim(); ++i) {
        const auto occ = b.occupation(i);
        double e = 0.0;
        for (std::size_t j = 0; j < occ.size(); ++j) e += occ[j] * m.omega(static_cast<Eigen::Index>(j));
        photon_energy_(i) = e;
    }

    q_blocks_.assign(static_cast<std::size_t>(b.dim()), {});
    for (Eigen::Index q = 0; q < b.dim(); ++q)
        q_blocks_[static_cast<std::size_t>(q)].assign(
            static_cast<std::size_t>(b.dim_upto(nmax - static_cast<std::size_t>(b.total(q)))), -1);
    for (std::size_t i = 0; i < ds_.first.size(); ++i)
        q_blocks_[static_cast<std::size_t>(ds_.second[i])][static_cast<std::size_t>(ds_.first[i])] =
            static_cast<Eigen::Index>(i);
    q_by_total_.assign(nmax + 1, {});
    for (Eigen::Index q = 0; q < b.dim(); ++q) q_by_total_[static_cast<std::size_t>(b.total(q))].push_back(q);

    // H restricted to spin (x) {N <= n} is a principal submatrix of H (prefix basis)
    const SpMat hs = m.h.to_sparse();
    const Eigen::Index df = b.dim();
    block_vecs_.resize(nmax);
    block_vals_.resize(nmax);
    for (std::size_t n = 0; n < nmax; ++n) {
        const Eigen::Index dn = b.dim_upto(n);
        const Eigen::Index sz = dn * static_cast<Eigen::Index>(ns);
        Mat hb = Mat::Zero(sz, sz);
        for (Eigen::Index col = 0; col < hs.outerSize(); ++col)
            for (SpMat::InnerIterator it(hs, col); it; ++it) {
                const Eigen::Index r = it.row(), c = it.col();
                const Eigen::Index rs = r / df, rp = r % df, cs = c / df, cp = c % df;
                if (rp < dn && cp < dn) hb(rs * dn + rp, cs * dn + cp) = it.value();
            }
        if (hb.imag().cwiseAbs().maxCoeff() == 0.0) {
            Eigen::SelfAdjointEigenSolver<RMat> es(hb.real());
            block_vecs_[n] = es.eigenvectors().cast<cplx>();
            block_vals_[n] = es.eigenvalues();
        } else {
            Eigen::SelfAdjointEigenSolver<Mat> es(hb);
            block_vecs_[n] = es.eigenvectors();
            block_vals_[n] = es.eigenvalues();
        }
    }
    sector_ground_.assign(nmax + 1, Vec());
    sector_energy_.assign(nmax + 1, gs.energy);
    sector_ground_[0] = gs.state;
    for (std::size_t m = 1; m <= nmax; ++m) {
        const std::size_t n = nmax - m;
        const Eigen::Index dn = b.dim_upto(n);
        Vec v = Vec::Zero(df * static_cast<Eigen::Index>(ns));
        for (std::size_t s = 0; s < ns; ++s)
            v.segment(static_cast<Eigen::Index>(s) * df, dn) = block_vecs_[n].col(0).segment(static_cast<Eigen::Index>(s) * dn, dn);
        const cplx ov = gs.state.dot(v);
        if (std::abs(ov) > 0.0) v *= std::conj(ov) / std::abs(ov);
        sector_ground_[m] = std::move(v);
        sector_energy_[m] = block_vals_[n](0);
    }
}

Vec Context::evolve_asymptotic(const Vec& x, double t, double tol, double* error) const {
    const fock::OccupationBasis& b = model_->basis;
    const std::size_t ns = spin_dim();
    const Eigen::Index dd = ds_.doubled.dim();
    if (x.size() != dd * static_cast<Eigen::Index>(ns)) throw std::invalid_argument("evolve_asymptotic: dimension mismatch");
    Vec out = Vec::Zero(x.size());
    const std::size_t nmax = b.n_max();
    // q = vacuum: the full interacting block
    {
        const auto& idx = q_blocks_[0];
        const Eigen::Index dn = static_cast<Eigen::Index>(idx.size());
        Vec y(dn * static_cast<Eigen::Index>(ns));
        for (std::size_t s = 0; s < ns; ++s)
            for (Eigen::Index p = 0; p < dn; ++p)
                y(static_cast<Eigen::Index>(s) * dn + p) = x(static_cast<Eigen::Index>(s) * dd + idx[static_cast<std::size_t>(p)]);
        double err = 0.0;
        if (y.norm() > 0.0) y = solver::evolve(y, model_->h, t, tol, &err);
        if (error) *error = err;
        for (std::size_t s = 0; s < ns; ++s)
            for (Eigen::Index p = 0; p < dn; ++p)
                out(static_cast<Eigen::Index>(s) * dd + idx[static_cast<std::size_t>(p)]) = y(static_cast<Eigen::Index>(s) * dn + p);
    }
    for (std::size_t m = 1; m <= nmax; ++m) {
        const auto& qs = q_by_total_[m];
        if (qs.empty()) continue;
        const std::size_t n = nmax - m;
        const Eigen::Index dn = b.dim_upto(n);
        const Eigen::Index sz = dn * static_cast<Eigen::Index>(ns);
        Mat blk(sz, static_cast<Eigen::Index>(qs.size()));
        for (std::size_t c = 0; c < qs.size(); ++c) {
            const auto& idx = q_blocks_[static_cast<std::size_t>(qs[c])];
            for (std::size_t s = 0; s < ns; ++s)
                for (Eigen::Index p = 0; p < dn; ++p)
                    blk(static_cast<Eigen::Index>(s) * dn + p, static_cast<Eigen::Index>(c)) =
                        x(static_cast<Eigen::Index>(s) * dd + idx[static_cast<std::size_t>(p)]);
        }
        const Mat& v = block_vecs_[n];
        Mat coef = v.adjoint() * blk;
        for (Eigen::Index k = 0; k < coef.rows(); ++k) coef.row(k) *= std::polar(1.0, -t * block_vals_[n](k));
        blk.noalias() = v * coef;
        for (std::size_t c = 0; c < qs.size(); ++c) {
            const cplx ph = std::polar(1.0, -t * photon_energy_(qs[c]));
            const auto& idx = q_blocks_[static_cast<std::size_t>(qs[c])];
            for (std::size_t s = 0; s < ns; ++s)
                for (Eigen::Index p = 0; p < dn; ++p)
                    out(static_cast<Eigen::Index>(s) * dd + idx[static_cast<std::size_t>(p)]) =
                        ph * blk(static_cast<Eigen::Index>(s) * dn + p, static_cast<Eigen::Index>(c));
        }
    }
    return out;
}

Vec Context::free_evolve(const Vec& phi, double t) const {
    if (phi.size() != photon_energy_.size()) throw std::invalid_argument("free_evolve: expects a photon vector");
    Vec out(phi.size());
    const auto& b = model_->basis;
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        out(i) = phi(i) * std::polar(1.0, -t * (sector_energy_[static_cast<std::size_t>(b.total(i))] + photon_energy_(i)));
    return out;
}

Mat Context::j0_momentum(const ScatteringSplit& split) const {
    if (tr_.u.rows() == 0) throw std::logic_error("Context: model has no radial grid");
    return split.j0.in_momentum(tr_).matrix;
}

model::ModelInstance assemble_asymptotic(const model::ModelInstance& m, const fock::DoubledSpace& ds) {
    const Eigen::Index mm = m.omega.size();
    RVec omega2(2 * mm);
    omega2 << m.omega, m.omega;
    Vec g2 = Vec::Zero(2 * mm);
    g2.head(mm) = m.g;
    return model::assemble_generic(m.spin, m.coupling.lambda, omega2, g2, ds.doubled);
}

IdentificationResult identification_I(const Context& ctx, const Vec& phi) {
    const auto& ds = ctx.doubled();
    const std::size_t ns = ctx.spin_dim();
    const Eigen::Index d = ds.single.dim(), dd = ds.doubled.dim();
    if (phi.size() != d) throw std::invalid_argument("identification_I: expects a photon vector on the model basis");
    Vec x(dd * static_cast<Eigen::Index>(ns));
    for (std::size_t s = 0; s < ns; ++s)
        for (Eigen::Index i = 0; i < dd; ++i) {
            const Eigen::Index q = ds.second[static_cast<std::size_t>(i)];
            const Vec& g = ctx.dressed_ground(static_cast<std::size_t>(ds.single.total(q)));
            x(static_cast<Eigen::Index>(s) * dd + i) =
                g(static_cast<Eigen::Index>(s) * d + ds.first[static_cast<std::size_t>(i)]) * phi(q);
        }
    const auto wf = sector_weights(ds.single, phi, 1);
    double defect = 0.0;
    for (std::size_t m = 0; m < wf.size(); ++m) defect += wf[m] * std::pow(ctx.dressing_defect(m), 2);
    auto r = fock::i_ex(ds, x, ns);
    return {std::move(r.state), std::sqrt(defect + r.loss * r.loss)};
}

IdentificationResult identification_I_literal(const Context& ctx, const Vec& phi) {
    const auto& ds = ctx.doubled();
    const Vec& psi = ctx.ground().state;
    const std::size_t ns = ctx.spin_dim();
    const Eigen::Index d = ds.single.dim(), dd = ds.doubled.dim();
    if (phi.size() != d) throw std::invalid_argument("identification_I_literal: expects a photon vector on the model basis");
    Vec x(dd * static_cast<Eigen::Index>(ns));
    for (std::size_t s = 0; s < ns; ++s)
        for (Eigen::Index i = 0; i < dd; ++i)
            x(static_cast<Eigen::Index>(s) * dd + i) =
                psi(static_cast<Eigen::Index>(s) * d + ds.first[static_cast<std::size_t>(i)]) *
                phi(ds.second[static_cast<std::size_t>(i)]);
    const auto wg = sector_weights(ds.single, psi, ns);
    const auto wf = sector_weights(ds.single, phi, 1);
    double lost = 0.0;
    const std::size_t nmax = ds.single.n_max();
    for (std::size_t a = 0; a <= nmax; ++a)
        for (std::size_t c = 0; c <= nmax; ++c)
            if (a + c > nmax) lost += wg[a] * wf[c];
    auto r = fock::i_ex(ds, x, ns);
    return {std::move(r.state), std::sqrt(lost + r.loss * r.loss)};
}

IdentificationResult identification_I_monomial(const Context& ctx, const Vec& phi) {
    const auto& m = ctx.model();
    const auto& b = m.basis;
    const std::size_t ns = ctx.spin_dim();
    if (phi.size() != b.dim()) throw std::invalid_argument("identification_I_monomial: dimension mismatch");
    std::vector<fock::FockOperator> ad;
    for (std::size_t j = 0; j < b.modes(); ++j) {
        Vec e = Vec::Zero(static_cast<Eigen::Index>(b.modes()));
        e(static_cast<Eigen::Index>(j)) = 1.0;
        ad.push_back(fock::photon_part(fock::create(e, b), ns));
    }
    IdentificationResult out;
    out.state = Vec::Zero(m.dim());
    for (Eigen::Index q = 0; q < b.dim(); ++q) {
        if (phi(q) == cplx(0.0)) continue;
        Vec v = ctx.dressed_ground(static_cast<std::size_t>(b.total(q)));
        const auto occ = b.occupation(q);
        // (a_j^*)^n / sqrt(n!)
        for (std::size_t j = 0; j < occ.size(); ++j)
            for (int k = 0; k < occ[j]; ++k) v = ad[j].apply(v) / std::sqrt(static_cast<double>(k + 1));
        out.state += phi(q) * v;
    }
    return out;
}

Vec apply_J_ex(const Context& ctx, const Vec& psi, const ScatteringSplit& split) {
    const Mat j0 = ctx.j0_momentum(split);
    const Mat ji = Mat::Identity(j0.rows(), j0.cols()) - j0;
    onep::OneParticleOperator a{j0, onep::Representation::DenseK};
    onep::OneParticleOperator c{ji, onep::Representation::DenseK};
    return fock::breve_gamma(a, c, ctx.doubled(), psi, ctx.spin_dim());
}

Vec pair_ground(const Context& ctx, const Vec& doubled) {
    const auto& ds = ctx.doubled();
    const std::size_t ns = ctx.spin_dim();
    const Eigen::Index d = ds.single.dim(), dd = ds.doubled.dim();
    if (doubled.size() != dd * static_cast<Eigen::Index>(ns)) throw std::invalid_argument("pair_ground: dimension mismatch");
    Vec out = Vec::Zero(d);
    for (std::size_t s = 0; s < ns; ++s)
        for (Eigen::Index i = 0; i < dd; ++i)
        {
            const Eigen::Index q = ds.second[static_cast<std::size_t>(i)];
            const Vec& g = ctx.dressed_ground(static_cast<std::size_t>(ds.single.total(q)));
            out(q) += std::conj(g(static_cast<Eigen::Index>(s) * d + ds.first[static_cast<std::size_t>(i)])) *
                      doubled(static_cast<Eigen::Index>(s) * dd + i);
        }
    return out;
}

Vec apply_J(const Context& ctx, const Vec& psi, const ScatteringSplit& split) {
    return pair_ground(ctx, apply_J_ex(ctx, psi, split));
}

CookResult wave_operator_plus(const Context& ctx, const Vec& phi, const CookConfig& cfg) {
    const auto times = cook_grid(cfg, ctx.horizon());
    std::vector<Vec> vals;
    double loss = 0.0, perr = 0.0;
    for (double t : times) {
        const auto id = identification_I(ctx, ctx.free_evolve(phi, t));
        loss = std::max(loss, id.loss);
        double err = 0.0;
        vals.push_back(solver::evolve(id.state, ctx.model().h, -t, cfg.prop_tol, &err));
        perr = std::max(perr, err);
    }
    CookResult res = finalize(times, std::move(vals), cfg.tol, phi.norm());
    res.truncation_loss = loss;
    res.propagation_error = perr;
    res.horizon = ctx.horizon();
    return res;
}

CookResult asymptotic_create(const Context& ctx, const std::vector<Vec>& f_list, const CookConfig& cfg) {
    const auto& m = ctx.model();
    const std::size_t ns = ctx.spin_dim();
    const auto times = cook_grid(cfg, ctx.horizon());
    // ||a*(f_1)...a*(f_m) Omega||
    Vec free = fock::vacuum(m.basis);
    for (auto it = f_list.rbegin(); it != f_list.rend(); ++it) free = fock::create(*it, m.basis).apply(free);
    std::vector<Vec> vals;
    double perr = 0.0;
    const std::size_t nph = f_list.size();
    if (nph > m.basis.n_max()) throw std::invalid_argument("asymptotic_create: more photons than the cutoff");
    for (double t : times) {
        Vec v = ctx.dressed_ground(nph);
        for (auto it = f_list.rbegin(); it != f_list.rend(); ++it) {
            Vec ft(it->size());
            for (Eigen::Index j = 0; j < ft.size(); ++j) ft(j) = (*it)(j) * std::polar(1.0, -t * m.omega(j));
            v = fock::photon_part(fock::create(ft, m.basis), ns).apply(v);
        }
        double err = 0.0;
        v = solver::evolve(v, m.h, -t, cfg.prop_tol, &err) * std::polar(1.0, -t * ctx.dressed_energy(nph));
        perr = std::max(perr, err);
        vals.push_back(std::move(v));
    }
    CookResult res = finalize(times, std::move(vals), cfg.tol, free.norm());
    res.propagation_error = perr;
    res.horizon = ctx.horizon();
    return res;
}

ZResult z_from_trajectory(const Context& ctx, const solver::Trajectory& traj, const onep::SmoothIndicator& theta,
                          const CookConfig& cfg, double input_norm) {
    std::vector<Vec> zex, z;
    double perr = traj.error_bound;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        const Vec x = apply_J_ex(ctx, traj.states[i], make_split(theta, t, ctx.model().grid));
        double err = 0.0;
        Vec v = ctx.evolve_asymptotic(x, -t, cfg.prop_tol, &err);
        perr += err;
        z.push_back(pair_ground(ctx, v));
        zex.push_back(std::move(v));
    }
    ZResult out;
    out.z_ex = finalize(traj.times, std::move(zex), cfg.tol, input_norm);
    out.z = finalize(traj.times, std::move(z), cfg.tol, input_norm);
    out.z_ex.propagation_error = out.z.propagation_error = perr;
    out.z_ex.horizon = out.z.horizon = ctx.horizon();
    double worst = 0.0;
    for (double n : out.z_ex.norms) worst = std::max(worst, n - input_norm);
    out.contraction_defect = std::max(0.0, worst);
    return out;
}

namespace {

solver::Trajectory trajectory_on_grid(const Context& ctx, const Vec& psi, const CookConfig& cfg) {
    solver::PropagationConfig pc;
    pc.tol = cfg.prop_tol;
    pc.checkpoints = cook_grid(cfg, ctx.horizon());
    return solver::propagate(psi, ctx.model().h, pc);
}

}  // namespace

ZResult inverse_Z(const Context& ctx, const Vec& psi, const onep::SmoothIndicator& theta, const CookConfig& cfg) {
    const auto traj = trajectory_on_grid(ctx, psi, cfg);
    return z_from_trajectory(ctx, traj, theta, cfg, psi.norm());
}

AcResult ac_residual(const Context& ctx, const Vec& psi, std::size_t n, const onep::SmoothIndicator& theta,
                     const CookConfig& cfg) {
    const auto traj = trajectory_on_grid(ctx, psi, cfg);
    const ZResult z = z_from_trajectory(ctx, traj, theta, cfg, psi.norm());
    return ac_residual(ctx, psi, n, theta, cfg, z, traj);
}

AcResult ac_residual(const Context& ctx, const Vec& psi, std::size_t n, const onep::SmoothIndicator& theta,
                     const CookConfig& cfg, const ZResult& z, const solver::Trajectory& traj) {
    const auto& b = ctx.model().basis;
    AcResult out;
    out.n = n;
    // direct form on the last third of the grid
    const std::size_t nt = traj.times.size();
    const std::size_t start = nt - std::max<std::size_t>(2, nt / 3);
    for (std::size_t i = std::min(start, nt); i < nt; ++i) {
        Vec jt = apply_J(ctx, traj.states[i], make_split(theta, traj.times[i], ctx.model().grid));
        fock::project_upto(jt, b, n);
        const auto id = identification_I(ctx, jt);
        out.direct = std::max(out.direct, (id.state - traj.states[i]).norm());
    }
    Vec zeta = z.z.limit;
    fock::project_upto(zeta, b, n);
    out.wave = wave_operator_plus(ctx, zeta, cfg);
    out.via_wave = (out.wave.limit - psi).norm();
    out.converged = z.z.converged && out.wave.converged;
    out.defect_budget = z.z.final_cauchy + out.wave.final_cauchy + out.wave.truncation_loss + z.z.propagation_error +
                        out.wave.propagation_error;
    return out;
}

double intertwining_defect(const Context& ctx, const Vec& phi, double t) {
    const Vec pt = ctx.free_evolve(phi, t);
    const auto v = identification_I(ctx, pt);
    const auto& b = ctx.model().basis;
    Vec hf(pt.size());
    for (Eigen::Index i = 0; i < pt.size(); ++i)
        hf(i) = (ctx.dressed_energy(static_cast<std::size_t>(b.total(i))) + ctx.photon_energy()(i)) * pt(i);
    const auto w = identification_I(ctx, hf);
    return (ctx.model().h.apply(v.state) - w.state).norm();
}

Vec one_photon(const fock::OccupationBasis& basis, const Vec& f) { return fock::create(f, basis).apply(fock::vacuum(basis)); }

Vec two_photon(const fock::OccupationBasis& basis, const Vec& f1, const Vec& f2) {
    Vec v = fock::create(f1, basis).apply(fock::create(f2, basis).apply(fock::vacuum(basis)));
    const double n = v.norm();
    if (!(n > 0.0)) throw std::invalid_argument("two_photon: cutoff too small");
    return v / n;
}

Vec packet(const onep::RadialGrid& grid, double k0, double sigma, double x0) {
    Vec f(static_cast<Eigen::Index>(grid.n_modes));
    for (std::size_t j = 0; j < grid.n_modes; ++j) {
        const double k = grid.k(j);
        const double u = (k - k0) / sigma;
        f(static_cast<Eigen::Index>(j)) = std::abs(u) < 6.0 ? std::exp(-0.5 * u * u) * std::polar(1.0, -k * x0) : 0.0;
    }
    const double n = f.norm();
    if (!(n > 0.0)) throw std::invalid_argument("packet: no grid point inside the packet");
    return f / n;
}

}  // namespace sbs::scattering
