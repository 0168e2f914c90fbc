// experiments.cpp — runs, series, fits and output files

#include "sbs/experiments.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "sbs/oracle.hpp"

namespace sbs::experiments {

using nlohmann::json;

// ------------------------------------------------------------------ config

void ExperimentConfig::validate(double horizon) const {
    const double tf = t_final > 0.0 ? std::min(t_final, horizon) : horizon;
    if (!(dt > 0.0)) throw std::invalid_argument("experiment: dt must be positive");
    if (!(v1 > 0.0 && v1 < v2 && v2 < v3 && v3 < 1.0)) throw std::invalid_argument("experiment: need 0 < v1 < v2 < v3 < 1");
    if (!(kappa > 0.0)) throw std::invalid_argument("experiment: kappa must be positive");
    const double gate = t_c_override ? 0.0 : 1.0 / (model.lambda * model.lambda);
    for (double tc : t_c)
        if (tc < gate || tc > tf || !(tc > 0.0))
            throw std::invalid_argument("experiment: t_c = " + std::to_string(tc) + " outside [" + std::to_string(gate) +
                                        ", " + std::to_string(tf) + "]");
    for (double e : eps)
        if (!(e > 0.0 && e < model.k_max)) throw std::invalid_argument("experiment: eps grid must lie in (0, k_max)");
    if (!(r > 0.0 && r < v1 * tf)) throw std::invalid_argument("experiment: need 0 < r < v1 * t_final");
    if (!(ann_in1 > 0.0 && ann_in1 < ann_in2 && ann_in2 <= ann_out1 && ann_out1 < ann_out2))
        throw std::invalid_argument("experiment: annulus needs 0 < in1 < in2 <= out1 < out2");
    if (initial.spin.size() != model.energies.size())
        throw std::invalid_argument("experiment: initial spin vector has the wrong length");
}

ExperimentConfig parse_experiment_config(const config::Config& c) {
    ExperimentConfig e;
    e.model = model::parse_model_spec(c);
    auto& in = e.initial;
    in.spin = c.get_list("initial.spin", in.spin);
    in.dressed = c.get_bool("initial.dressed", in.dressed);
    in.amplitude = c.get("initial.amplitude", in.amplitude);
    in.k0 = c.get("initial.k0", in.k0);
    in.sigma = c.get("initial.sigma", in.sigma);
    in.x0 = c.get("initial.x0", in.x0);
    e.relax_spin = c.get_list("initial.relax_spin", e.relax_spin);
    e.dt = c.get("experiment.dt", e.dt);
    e.t_final = c.get("experiment.t_final", e.t_final);
    e.t_c = c.get_list("experiment.t_c", e.t_c);
    e.t_c_override = c.get_bool("experiment.t_c_override", e.t_c_override);
    e.eps = c.get_list("experiment.eps", e.eps);
    e.r = c.get("experiment.r", e.r);
    e.v1 = c.get("experiment.v1", e.v1);
    e.v2 = c.get("experiment.v2", e.v2);
    e.v3 = c.get("experiment.v3", e.v3);
    e.kappa = c.get("experiment.kappa", e.kappa);
    e.ann_in1 = c.get("experiment.ann_in1", e.ann_in1);
    e.ann_in2 = c.get("experiment.ann_in2", e.ann_in2);
    e.ann_out1 = c.get("experiment.ann_out1", e.ann_out1);
    e.ann_out2 = c.get("experiment.ann_out2", e.ann_out2);
    e.gsloc_t = c.get_list("experiment.gsloc_t", e.gsloc_t);
    e.refine_factor = static_cast<std::size_t>(c.get_int("experiment.refine_factor", static_cast<long>(e.refine_factor)));
    e.out_dir = c.get("experiment.out_dir", e.out_dir);
    e.seed = static_cast<std::uint64_t>(c.get_int("experiment.seed", static_cast<long>(e.seed)));
    e.cook.t0 = c.get("cook.t0", e.cook.t0);
    e.cook.rho = c.get("cook.rho", e.cook.rho);
    e.cook.t_final = c.get("cook.t_final", e.cook.t_final);
    e.cook.tol = c.get("cook.tol", e.cook.tol);
    e.cook.prop_tol = c.get("cook.prop_tol", e.cook.prop_tol);
    e.lab.beta_split = c.get("lab.beta_split", e.lab.beta_split);
    e.lab.t_list = c.get_list("lab.t_list", e.lab.t_list);
    e.lab.n_lab = static_cast<std::size_t>(c.get_int("lab.n_lab", static_cast<long>(e.lab.n_lab)));
    e.lab.k_max = c.get("lab.k_max", e.lab.k_max);
    e.lab_v1 = c.get("lab.v1", e.lab_v1);
    e.lab_v2 = c.get("lab.v2", e.lab_v2);
    return e;
}

// ------------------------------------------------------------------ series and reports

void ObservableSeries::push(double p, double v, double dtr, double dp, double dw) {
    if (!std::isfinite(v)) throw std::runtime_error("series " + name + ": non-finite value");
    param.push_back(p);
    value.push_back(v);
    defect_truncation.push_back(dtr);
    defect_propagation.push_back(dp);
    defect_weyl.push_back(dw);
}

bool RunReport::passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

void RunReport::check(const std::string& n, double value, const std::string& relation, double threshold,
                      const std::string& detail) {
    Assertion a{n, value, threshold, relation, false, detail};
    if (relation == "<=")
        a.passed = value <= threshold;
    else if (relation == ">=")
        a.passed = value >= threshold;
    else
        throw std::invalid_argument("RunReport::check: unknown relation " + relation);
    if (!std::isfinite(value)) a.passed = false;
    assertions.push_back(a);
}

const ObservableSeries& RunReport::find(const std::string& series_name) const {
    for (const auto& s : series)
        if (s.name == series_name) return s;
    throw std::out_of_range("RunReport: no series " + series_name);
}

// ------------------------------------------------------------------ helpers

double dgamma_expectation(const Mat& b, const Mat& density) { return b.cwiseProduct(density).sum().real(); }

double running_max_drift(const std::vector<double>& t, const std::vector<double>& v) {
    if (t.size() != v.size() || t.size() < 2) throw std::invalid_argument("running_max_drift: need a series");
    const double half = t.front() + 0.5 * (t.back() - t.front());
    double run = -std::numeric_limits<double>::infinity(), at_half = 0.0;
    bool seen = false;
    for (std::size_t i = 0; i < t.size(); ++i) {
        run = std::max(run, v[i]);
        if (t[i] <= half + 1e-12) {
            at_half = run;
            seen = true;
        }
    }
    if (!seen || at_half == 0.0) throw std::invalid_argument("running_max_drift: degenerate window");
    return (run - at_half) / std::abs(at_half);
}

double plateau(const std::vector<double>& t, const std::vector<double>& v) {
    const double start = t.front() + 0.75 * (t.back() - t.front());
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] >= start - 1e-12) {
            s += v[i];
            ++n;
        }
    return s / n;
}

double trace_norm(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

namespace {

double top_sector_weight(const Vec& psi, const fock::OccupationBasis& b, std::size_t ns) {
    double w = 0.0;
    const Eigen::Index d = b.dim(), lo = b.sector_begin(b.n_max()), hi = b.sector_end(b.n_max());
    for (std::size_t s = 0; s < ns; ++s) w += psi.segment(static_cast<Eigen::Index>(s) * d + lo, hi - lo).squaredNorm();
    return w;
}

std::size_t nearest(const std::vector<double>& t, double x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs(t[i] - x) < std::abs(t[best] - x)) best = i;
    return best;
}

Mat k_matrix(const onep::OneParticleOperator& op, const onep::PositionTransform& tr) { return op.in_momentum(tr).matrix; }

fit::FitResult fit_or_note(RunReport& rep, const std::string& name, const std::vector<double>& x,
                           const std::vector<double>& y, double lo, double hi) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] >= lo && x[i] <= hi && y[i] < 1e-14) {
            rep.notes.push_back(name + ": series below the numerical floor 1e-14, fit skipped");
            throw std::runtime_error(name + ": series below numerical floor");
        }
    const auto f = fit::fit_power_law(x, y, lo, hi);
    rep.fits.emplace_back(name, f);
    return f;
}

}  // namespace

Vec build_initial_state(const InitialStateSpec& spec, const model::ModelInstance& m, const solver::GroundStateResult& gs,
                        double* defect) {
    const Vec f = spec.amplitude * scattering::packet(m.grid, spec.k0, spec.sigma, spec.x0);
    if (spec.dressed) {
        const auto wa = fock::weyl_apply(f, m.basis, gs.state, m.spin_dim());
        if (defect) *defect = wa.leakage + wa.krylov_error;
        return wa.state / wa.state.norm();
    }
    Vec spin(static_cast<Eigen::Index>(spec.spin.size()));
    for (std::size_t i = 0; i < spec.spin.size(); ++i) spin(static_cast<Eigen::Index>(i)) = spec.spin[i];
    auto st = solver::weyl_initial_state(spin, f, m.basis);
    if (defect) *defect = st.truncation_defect;
    return st.state;
}

// ------------------------------------------------------------------ session

Session::Session(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

const model::ModelInstance& Session::model() {
    if (!model_) {
        model_ = model::assemble(cfg_.model);
        cfg_.validate(model_->grid.horizon());
    }
    return *model_;
}

const solver::GroundStateResult& Session::ground() {
    if (!gs_) {
        solver::GroundStateOptions opt;
        opt.seed = cfg_.seed;
        gs_ = solver::ground_state(model(), opt);
    }
    return *gs_;
}

const scattering::Context& Session::context() {
    if (!ctx_) ctx_ = std::make_unique<scattering::Context>(model(), ground());
    return *ctx_;
}

const solver::InitialState& Session::initial() {
    if (!init_) {
        solver::InitialState st;
        st.state = build_initial_state(cfg_.initial, model(), ground(), &st.truncation_defect);
        init_ = std::move(st);
    }
    return *init_;
}

double Session::t_final() {
    const double h = horizon();
    return cfg_.t_final > 0.0 ? std::min(cfg_.t_final, h) : h;
}

const solver::Trajectory& Session::trajectory() {
    if (!traj_) {
        solver::PropagationConfig pc;
        const double tf = t_final();
        for (int k = 0; k * cfg_.dt <= tf + 1e-9; ++k) pc.checkpoints.push_back(k * cfg_.dt);
        traj_ = solver::propagate(initial().state, model().h, pc);
    }
    return *traj_;
}

Mat Session::one_particle_density(const Vec& psi) {
    const auto& m = model();
    if (annihilators_.empty())
        for (std::size_t j = 0; j < m.basis.modes(); ++j)
            annihilators_.push_back(fock::photon_part(fock::annihilate_mode(j, m.basis), m.spin_dim()));
    Mat a(psi.size(), static_cast<Eigen::Index>(annihilators_.size()));
    for (std::size_t j = 0; j < annihilators_.size(); ++j) a.col(static_cast<Eigen::Index>(j)) = annihilators_[j].apply(psi);
    return a.adjoint() * a;
}

const fock::OccupationBasis& Session::position_basis() {
    if (!xbasis_) xbasis_ = model().basis.with_representation(true);
    return *xbasis_;
}

Vec Session::to_position(const Vec& psi) {
    const auto& m = model();
    const Mat u = context().transform().u.cast<cplx>();
    return fock::gamma_map(u, m.basis, position_basis(), psi, m.spin_dim());
}

// ------------------------------------------------------------------ runs

RunReport run_fgr(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "fgr";
    const auto spin = c.model.spin();
    const auto ff = c.model.form_factor();
    const auto fr = model::fgr_check(spin, ff, c.model.convention);
    rep.notes.push_back("convention: " + model::to_string(fr.convention));
    ObservableSeries ser{"rates", "link"};
    ObservableSeries ora{"oracle_rates", "link"};
    double worst = 0.0;
    for (std::size_t i = 0; i < fr.links.size(); ++i) {
        const auto& l = fr.links[i];
        const double d2 = std::norm(spin.coupling(static_cast<Eigen::Index>(l.from), static_cast<Eigen::Index>(l.to)));
        const auto q = oracle::delta_quadrature([&ff](double k) { return ff(k); }, l.delta, ff.k_support());
        const double o = d2 * q.value;
        ser.push(static_cast<double>(i), l.rate);
        ora.push(static_cast<double>(i), o, 0.0, q.error);
        worst = std::max(worst, std::abs(l.rate - o));
        const std::string tag = std::to_string(l.from) + std::to_string(l.to);
        rep.metrics["rate_" + tag] = l.rate;
        rep.metrics["oracle_" + tag] = o;
        rep.metrics["delta_" + tag] = l.delta;
        if (l.delta <= ff.k_cut()) rep.metrics["closed_form_" + tag] = d2 * 4.0 * kPi * std::pow(l.delta, 1.0 + ff.alpha());
    }
    rep.series = {ser, ora};
    rep.metrics["chain_condition"] = fr.holds ? 1.0 : 0.0;
    rep.check("fgr_chain_condition", fr.holds ? 1.0 : 0.0, ">=", 1.0);
    rep.check("rate_vs_quadrature", worst, "<=", 1e-4);
    return rep;
}

RunReport run_groundstate(Session& s) {
    RunReport rep;
    rep.name = "groundstate";
    const auto& m = s.model();
    const auto& gs = s.ground();
    rep.metrics["dim"] = static_cast<double>(m.dim());
    rep.metrics["energy"] = gs.energy;
    rep.metrics["e1"] = gs.e1;
    rep.metrics["gap"] = gs.gap;
    rep.metrics["residual"] = gs.residual;
    const auto pt = solver::pull_through_check(m, gs);
    ObservableSeries ser{"pull_through", "k"};
    double worst_rem = 0.0, worst_trunc = 0.0;
    for (std::size_t j = 0; j < pt.difference.size(); ++j) {
        ser.push(m.grid.k(j), pt.difference[j], pt.truncation[j]);
        worst_rem = std::max(worst_rem, pt.remainder[j]);
        worst_trunc = std::max(worst_trunc, pt.truncation[j]);
    }
    rep.series.push_back(ser);
    rep.metrics["pull_through_max_remainder"] = worst_rem;
    rep.metrics["pull_through_max_truncation"] = worst_trunc;
    double worst_excess = -1e300;
    for (std::size_t j = 0; j < pt.difference.size(); ++j)
        worst_excess = std::max(worst_excess, pt.difference[j] - (10.0 * gs.residual + pt.truncation[j]));
    rep.check("pull_through_excess", worst_excess, "<=", 0.0, "max_j diff_j - (10 res + trunc_j)");
    return rep;
}

RunReport run_relaxation(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "relax";
    const auto& m = s.model();
    const auto& gs = s.ground();
    const std::size_t ns = m.spin_dim();
    Vec spin(static_cast<Eigen::Index>(c.relax_spin.size()));
    for (std::size_t i = 0; i < c.relax_spin.size(); ++i) spin(static_cast<Eigen::Index>(i)) = c.relax_spin[i];
    if (static_cast<std::size_t>(spin.size()) != ns) throw std::invalid_argument("relax: spin vector has the wrong length");
    const Vec psi0 = fock::vacuum(m.basis, ns, &spin) / spin.norm();
    solver::PropagationConfig pc;
    for (int k = 0; k * c.dt <= s.t_final() + 1e-9; ++k) pc.checkpoints.push_back(k * c.dt);
    const auto traj = solver::propagate(psi0, m.h, pc);

    std::vector<std::pair<std::string, fock::FockOperator>> obs;
    if (ns == 2) {
        Mat sx(2, 2), sy(2, 2), sz(2, 2);
        sx << 0, 1, 1, 0;
        sy << 0, -I_unit, I_unit, 0;
        sz << 1, 0, 0, -1;
        obs = {{"sigma_x", fock::spin_part(sx, m.basis)}, {"sigma_y", fock::spin_part(sy, m.basis)},
               {"sigma_z", fock::spin_part(sz, m.basis)}};
    } else {
        for (std::size_t i = 0; i < ns; ++i) {
            Mat p = Mat::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(ns));
            p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
            obs.emplace_back("population_" + std::to_string(i), fock::spin_part(p, m.basis));
        }
    }
    for (const auto& [name, op] : obs) {
        ObservableSeries ser{name};
        const double ref = op.expectation(gs.state);
        for (std::size_t i = 0; i < traj.times.size(); ++i)
            ser.push(traj.times[i], std::abs(op.expectation(traj.states[i]) - ref), top_sector_weight(traj.states[i], m.basis, ns),
                     traj.error_bound);
        rep.series.push_back(ser);
    }
    // Weyl observable with an infrared-regular test function shaped like the coupling
    const Vec psi_w = 0.5 * m.g / m.g.norm();
    {
        ObservableSeries ser{"weyl"};
        const auto ref = fock::weyl_apply(psi_w, m.basis, gs.state, ns);
        const cplx ev_ref = gs.state.dot(ref.state);
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            const auto w = fock::weyl_apply(psi_w, m.basis, traj.states[i], ns);
            ser.push(traj.times[i], std::abs(traj.states[i].dot(w.state) - ev_ref),
                     top_sector_weight(traj.states[i], m.basis, ns), traj.error_bound, w.leakage + ref.leakage);
        }
        rep.series.push_back(ser);
    }
    // population trend: window averages around t = 10 and the end
    const auto& pop = rep.series[ns == 2 ? 2 : 0];
    auto window_mean = [&](double lo, double hi) {
        double acc = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < pop.size(); ++i)
            if (pop.param[i] >= lo - 1e-9 && pop.param[i] <= hi + 1e-9) {
                acc += pop.value[i];
                ++n;
            }
        return n ? acc / n : std::nan("");
    };
    const double tf = s.t_final();
    const double early = window_mean(8.0, 12.0), late = window_mean(tf - 5.0, tf);
    rep.metrics["population_diff_early"] = early;
    rep.metrics["population_diff_late"] = late;
    rep.check("population_trend", late - early, "<=", 0.0, "window mean near t_final minus window mean on [8, 12]");
    return rep;
}

RunReport run_photon_bound(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "photonbound";
    const auto& m = s.model();
    const auto& tr = s.trajectory();
    const std::size_t ns = m.spin_dim();
    const auto op = fock::photon_part(fock::exp_number(m.basis, c.kappa), ns);
    ObservableSeries ser{"exp_kappa_n"};
    double mx = 0.0;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double v = op.expectation(tr.states[i]);
        mx = std::max(mx, v);
        ser.push(tr.times[i], v, top_sector_weight(tr.states[i], m.basis, ns), tr.error_bound, s.initial().truncation_defect);
    }
    rep.series.push_back(ser);
    const double drift = running_max_drift(ser.param, ser.value);
    rep.metrics["max"] = mx;
    rep.metrics["ceiling"] = std::exp(c.kappa * static_cast<double>(m.basis.n_max()));
    rep.metrics["running_max_drift"] = drift;
    rep.check("running_max_drift", drift, "<=", 0.05, "second half of the window");
    rep.check("below_truncation_ceiling", mx, "<=", rep.metrics["ceiling"] * (1.0 + 1e-12));
    return rep;
}

namespace {

struct GsLoc {
    std::vector<double> t;
    std::vector<double> value;
};

GsLoc gs_localization_series(const model::ModelInstance& m, const solver::GroundStateResult& gs,
                             const onep::AnnularIndicator& ann, const std::vector<double>& times, Session* sess) {
    const auto tr = onep::make_position_transform(m.grid);
    Mat g;
    if (sess) {
        g = sess->one_particle_density(gs.state);
    } else {
        Mat a(gs.state.size(), static_cast<Eigen::Index>(m.basis.modes()));
        for (std::size_t j = 0; j < m.basis.modes(); ++j)
            a.col(static_cast<Eigen::Index>(j)) =
                fock::photon_part(fock::annihilate_mode(j, m.basis), m.spin_dim()).apply(gs.state);
        g = a.adjoint() * a;
    }
    GsLoc out;
    for (double t : times) {
        const Mat b = k_matrix(onep::indicator_op([&ann](double x) { return ann(x); }, t, m.grid), tr);
        out.t.push_back(t);
        out.value.push_back(dgamma_expectation(b, g));
    }
    return out;
}

}  // namespace

RunReport run_gs_localization(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "gsloc";
    const auto& m = s.model();
    const double alpha = c.model.alpha;
    std::vector<double> times;
    for (double t : c.gsloc_t)
        if (t <= s.horizon() + 1e-9) times.push_back(t);
    const auto base = gs_localization_series(m, s.ground(), c.annulus(), times, &s);
    ObservableSeries ser{"gs_annulus"};
    for (std::size_t i = 0; i < base.t.size(); ++i) ser.push(base.t[i], base.value[i], 0.0, s.ground().residual);
    rep.series.push_back(ser);
    const double lo = 8.0, hi = s.horizon();
    const auto f = fit_or_note(rep, "gs_annulus", base.t, base.value, lo, hi);
    rep.metrics["slope"] = f.exponent;
    rep.check("slope", f.exponent, "<=", -alpha + 0.3);

    if (c.refine_factor > 1) {
        auto spec = c.model;
        spec.n_k *= c.refine_factor;
        const auto mr = model::assemble(spec);
        solver::GroundStateOptions opt;
        opt.seed = c.seed;
        opt.compute_gap = false;
        const auto gr = solver::ground_state(mr, opt);
        const auto fine = gs_localization_series(mr, gr, c.annulus(), times, nullptr);
        ObservableSeries sf{"gs_annulus_refined"};
        for (std::size_t i = 0; i < fine.t.size(); ++i) sf.push(fine.t[i], fine.value[i], 0.0, gr.residual);
        rep.series.push_back(sf);
        const auto ff = fit_or_note(rep, "gs_annulus_refined", fine.t, fine.value, lo, hi);
        rep.metrics["slope_refined"] = ff.exponent;
        rep.metrics["refined_dim"] = static_cast<double>(mr.dim());
        rep.check("refinement_stability", std::abs(ff.exponent - f.exponent), "<=", 0.1);
    }
    return rep;
}

RunReport run_propagation_bound(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "propagation";
    const auto& m = s.model();
    const auto& tr = s.trajectory();
    const auto& gs = s.ground();
    const std::size_t ns = m.spin_dim();
    const auto& pt = s.context().transform();
    const double gate = 1.0 / (c.model.lambda * c.model.lambda);
    for (double tc : c.t_c)
        if (tc < gate) {
            rep.notes.push_back("t_c grid below lambda^-2 = " + std::to_string(gate) + " (configured override)");
            rep.metrics["t_c_override"] = 1.0;
            break;
        }
    std::vector<Mat> dens;
    for (const auto& st : tr.states) dens.push_back(s.one_particle_density(st));
    const Mat g_gs = s.one_particle_density(gs.state);
    const auto theta = c.theta();
    ObservableSeries pl{"plateau_error", "t_c"};
    double worst = 0.0;
    const double tf = tr.times.back();
    int tail_points = 0;
    for (double t : tr.times)
        if (t >= 0.75 * tf - 1e-9) ++tail_points;
    if (tail_points < 3) rep.notes.push_back("plateau window has fewer than 3 points: estimate unreliable");
    for (double tc : c.t_c) {
        const Mat b = k_matrix(onep::indicator_op(theta, tc, m.grid), pt);
        const double a = dgamma_expectation(b, g_gs);
        ObservableSeries ser{"ball_tc_" + std::to_string(static_cast<int>(std::lround(tc)))};
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            ser.push(tr.times[i], dgamma_expectation(b, dens[i]), top_sector_weight(tr.states[i], m.basis, ns),
                     tr.error_bound, s.initial().truncation_defect);
        const double p = plateau(ser.param, ser.value);
        pl.push(tc, std::abs(p - a));
        rep.metrics["plateau_tc_" + std::to_string(static_cast<int>(std::lround(tc)))] = p;
        rep.metrics["gs_value_tc_" + std::to_string(static_cast<int>(std::lround(tc)))] = a;
        rep.metrics["final_tc_" + std::to_string(static_cast<int>(std::lround(tc)))] = ser.value.back();
        worst = std::max(worst, std::abs(p - a));
        rep.series.push_back(ser);
    }
    rep.series.push_back(pl);
    rep.check("plateau_error", worst, "<=", 0.05, "max over the t_c grid");

    // transition region: annular theta moving with t
    const auto ann = c.annulus();
    ObservableSeries mv{"annulus_moving"};
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        if (!(tr.times[i] > 0.0)) continue;
        const Mat b = k_matrix(onep::indicator_op([&ann](double x) { return ann(x); }, tr.times[i], m.grid), pt);
        mv.push(tr.times[i], dgamma_expectation(b, dens[i]), top_sector_weight(tr.states[i], m.basis, ns), tr.error_bound,
                s.initial().truncation_defect);
    }
    rep.series.push_back(mv);
    const auto f = fit_or_note(rep, "annulus_moving", mv.param, mv.value, 10.0, 0.8 * tf);
    rep.metrics["annulus_slope"] = f.exponent;
    rep.check("annulus_slope", f.exponent, "<=", -c.model.alpha + 0.3);
    return rep;
}

RunReport run_soft_photon(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "softphoton";
    const auto& m = s.model();
    const auto& tr = s.trajectory();
    std::vector<Mat> dens;
    for (const auto& st : tr.states) dens.push_back(s.one_particle_density(st));
    ObservableSeries ser{"soft_sup", "eps"};
    ObservableSeries arg{"soft_argmax_t", "eps"};
    for (double e : c.eps) {
        if (e < m.grid.dk()) {
            rep.notes.push_back("eps = " + std::to_string(e) + " below dk excluded");
            continue;
        }
        double best = -1.0, best_t = 0.0;
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < m.basis.modes(); ++j)
                if (m.grid.k(j) <= e + 1e-12) v += dens[i](static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)).real();
            if (v > best) {
                best = v;
                best_t = tr.times[i];
            }
        }
        ser.push(e, best, 0.0, tr.error_bound, s.initial().truncation_defect);
        arg.push(e, best_t);
    }
    rep.series = {ser, arg};
    const auto f = fit_or_note(rep, "soft_sup", ser.param, ser.value, ser.param.front(), ser.param.back());
    rep.metrics["exponent"] = f.exponent;
    std::size_t interior = 0;
    for (double t : arg.value)
        if (t > 0.0) ++interior;
    rep.metrics["argmax_interior_fraction"] = static_cast<double>(interior) / static_cast<double>(arg.size());
    rep.check("exponent", f.exponent, ">=", c.model.alpha / 2.0 - 0.3);
    return rep;
}

RunReport run_local_relaxation(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "localrelax";
    const auto& m = s.model();
    const auto& tr = s.trajectory();
    const std::size_t ns = m.spin_dim();
    const auto split = fock::make_mode_split(m.grid, c.r);
    rep.metrics["inner_modes"] = static_cast<double>(split.inner.size());
    const Mat rho_inf = fock::partial_trace(s.to_position(s.ground().state), s.position_basis(), split, ns);
    if (rho_inf.rows() > 2000) throw std::length_error("localrelax: inner factor above the dense limit; reduce r");
    ObservableSeries ser{"trace_distance"};
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const Mat rho = fock::partial_trace(s.to_position(tr.states[i]), s.position_basis(), split, ns);
        ser.push(tr.times[i], trace_norm(rho - rho_inf), top_sector_weight(tr.states[i], m.basis, ns), tr.error_bound,
                 s.initial().truncation_defect);
    }
    rep.series.push_back(ser);
    const std::size_t i10 = nearest(ser.param, 10.0), i40 = nearest(ser.param, 40.0);
    rep.metrics["distance_t10"] = ser.value[i10];
    rep.metrics["distance_t40"] = ser.value[i40];
    rep.metrics["distance_final"] = ser.value.back();
    rep.check("distance_t40_vs_t10", ser.value[i40] - ser.value[i10], "<=", 0.0);
    rep.check("distance_final", ser.value.back(), "<=", 0.1);

    // <Psi_gs, exp(kappa N) Psi_gs> as the cutoff grows
    ObservableSeries em{"gs_exp_moment", "n_max"};
    for (std::size_t n = 1; n <= m.basis.n_max(); ++n) {
        const auto mn = model::with_cutoff(m, n);
        solver::GroundStateOptions opt;
        opt.seed = c.seed;
        opt.compute_gap = false;
        const auto g = n == m.basis.n_max() ? s.ground() : solver::ground_state(mn, opt);
        em.push(static_cast<double>(n), fock::photon_part(fock::exp_number(mn.basis, c.kappa), ns).expectation(g.state));
    }
    rep.series.push_back(em);
    rep.metrics["gs_exp_moment"] = em.value.back();
    return rep;
}

namespace {

// x-mode classes: 0 inner (x <= r), 1 middle (r < x <= rm), 2 outer
struct Regions {
    std::vector<int> cls;
};

Regions regions(const onep::RadialGrid& g, double r, double rm) {
    Regions out;
    for (std::size_t m = 0; m < g.n_modes; ++m) out.cls.push_back(g.x(m) <= r + 1e-12 ? 0 : (g.x(m) <= rm + 1e-12 ? 1 : 2));
    return out;
}

struct OverlapData {
    double norm_a2{0.0};   // ||Psi_a||^2
    double norm_b2{0.0};   // ||Psi_b||^2
    double direct{0.0};    // ||Psi - Psi_a (x) Psi_b||^2 on the truncated space
};

// Psi_a = Psi_gs,B(r) (x) Omega_middle, Psi_b = <Psi_a|Psi>, both in x-modes
OverlapData overlap_data(const Vec& gs_x, const Vec& psi_x, const fock::OccupationBasis& b, const Regions& reg,
                         std::size_t ns) {
    const Eigen::Index d = b.dim();
    std::vector<std::uint8_t> o(b.modes());
    std::vector<Eigen::Index> inner_of(static_cast<std::size_t>(d), -1), outer_of(static_cast<std::size_t>(d), -1);
    std::vector<bool> middle_empty(static_cast<std::size_t>(d)), only_inner(static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto occ = b.occupation(i);
        bool mid0 = true, rest0 = true;
        for (std::size_t k = 0; k < occ.size(); ++k) {
            if (reg.cls[k] == 1 && occ[k]) mid0 = false;
            if (reg.cls[k] != 0 && occ[k]) rest0 = false;
        }
        middle_empty[static_cast<std::size_t>(i)] = mid0;
        only_inner[static_cast<std::size_t>(i)] = rest0;
        for (std::size_t k = 0; k < occ.size(); ++k) o[k] = reg.cls[k] == 0 ? occ[k] : 0;
        inner_of[static_cast<std::size_t>(i)] = b.index_of(o);
        for (std::size_t k = 0; k < occ.size(); ++k) o[k] = reg.cls[k] == 2 ? occ[k] : 0;
        outer_of[static_cast<std::size_t>(i)] = b.index_of(o);
    }
    OverlapData out;
    Vec psi_a = Vec::Zero(d * static_cast<Eigen::Index>(ns));
    for (std::size_t s = 0; s < ns; ++s)
        for (Eigen::Index i = 0; i < d; ++i)
            if (only_inner[static_cast<std::size_t>(i)])
                psi_a(static_cast<Eigen::Index>(s) * d + i) = gs_x(static_cast<Eigen::Index>(s) * d + i);
    out.norm_a2 = psi_a.squaredNorm();
    Vec psi_b = Vec::Zero(d);
    for (std::size_t s = 0; s < ns; ++s)
        for (Eigen::Index i = 0; i < d; ++i)
            if (middle_empty[static_cast<std::size_t>(i)])
                psi_b(outer_of[static_cast<std::size_t>(i)]) +=
                    std::conj(psi_a(static_cast<Eigen::Index>(s) * d + inner_of[static_cast<std::size_t>(i)])) *
                    psi_x(static_cast<Eigen::Index>(s) * d + i);
    out.norm_b2 = psi_b.squaredNorm();
    Vec prod = Vec::Zero(psi_x.size());
    for (std::size_t s = 0; s < ns; ++s)
        for (Eigen::Index i = 0; i < d; ++i)
            if (middle_empty[static_cast<std::size_t>(i)])
                prod(static_cast<Eigen::Index>(s) * d + i) =
                    psi_a(static_cast<Eigen::Index>(s) * d + inner_of[static_cast<std::size_t>(i)]) *
                    psi_b(outer_of[static_cast<std::size_t>(i)]);
    out.direct = (psi_x - prod).squaredNorm();
    return out;
}

}  // namespace

RunReport run_overlap_analysis(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "overlap";
    const auto& m = s.model();
    const auto& tr = s.trajectory();
    const std::size_t ns = m.spin_dim();
    const auto& xb = s.position_basis();
    const Vec gs_x = s.to_position(s.ground().state);
    // (i) ground state restricted to B(r)
    ObservableSeries ex{"gs_exhaustion", "r"};
    for (double r : {2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0}) {
        if (r > m.grid.x_max() + 1e-9) continue;
        const auto reg = regions(m.grid, r, r);
        const auto od = overlap_data(gs_x, gs_x, xb, reg, ns);
        ex.push(r, std::sqrt(std::max(0.0, 1.0 - od.norm_a2)));
    }
    rep.series.push_back(ex);
    // (ii), (iii) at fixed r along the trajectory
    ObservableSeries ov{"overlap"}, fd{"factorization_direct"}, fi{"factorization_identity"}, eb{"eps_budget"};
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double t = tr.times[i];
        if (!(t * c.v2 > c.r)) continue;
        const auto reg = regions(m.grid, c.r, t * c.v2);
        const auto od = overlap_data(gs_x, s.to_position(tr.states[i]), xb, reg, ns);
        const double dp = tr.error_bound, dw = s.initial().truncation_defect;
        ov.push(t, std::sqrt(od.norm_b2), 0.0, dp, dw);
        fd.push(t, od.direct, 0.0, dp, dw);
        fi.push(t, 1.0 + od.norm_a2 * od.norm_b2 - 2.0 * od.norm_b2, 0.0, dp, dw);
        eb.push(t, std::max(std::abs(od.norm_a2 - 1.0), 1.0 - std::sqrt(od.norm_b2)));
    }
    rep.series.insert(rep.series.end(), {ov, fd, fi, eb});
    if (ov.size() == 0) throw std::runtime_error("overlap: no time with t v2 > r");
    const std::size_t i40 = nearest(ov.param, 40.0);
    rep.metrics["overlap_t40"] = ov.value[i40];
    rep.metrics["t_eval"] = ov.param[i40];
    rep.metrics["eps_budget_t40"] = eb.value[i40];
    rep.check("overlap_t40", ov.value[i40], ">=", 0.9);
    return rep;
}

RunReport run_commutator(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "commutator";
    const onep::SmoothIndicator th(c.lab_v1, c.lab_v2);
    const auto rows = onep::commutator_lab(c.lab, th.profile());
    ObservableSeries o{"remainder"}, oh{"remainder_high"}, kh{"khat_comm_high"}, kc{"khat_comm"};
    for (const auto& r : rows) {
        o.push(r.t, r.norm_remainder);
        oh.push(r.t, r.norm_remainder_high);
        kh.push(r.t, r.norm_khat_comm_high);
        kc.push(r.t, r.norm_khat_comm);
    }
    rep.series = {o, oh, kh, kc};
    const double beta = c.lab.beta_split;
    const auto f1 = fit_or_note(rep, "remainder", o.param, o.value, o.param.front(), o.param.back());
    const auto f2 = fit_or_note(rep, "remainder_high", oh.param, oh.value, oh.param.front(), oh.param.back());
    const auto f3 = fit_or_note(rep, "khat_comm_high", kh.param, kh.value, kh.param.front(), kh.param.back());
    rep.metrics["slope_remainder"] = f1.exponent;
    rep.metrics["slope_remainder_high"] = f2.exponent;
    rep.metrics["slope_khat_comm_high"] = f3.exponent;
    rep.check("slope_remainder_dev", std::abs(f1.exponent + 1.0), "<=", 0.2, "|slope + 1|");
    rep.check("slope_remainder_high", f2.exponent, "<=", -(1.0 + beta) + 0.2);
    rep.check("slope_khat_comm_high", f3.exponent, "<=", -beta + 0.2);
    return rep;
}

RunReport run_wave_operator(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "waveop";
    const auto& m = s.model();
    const auto& ctx = s.context();
    for (std::size_t k = 1; k <= m.basis.n_max(); ++k)
        rep.metrics["dressing_defect_" + std::to_string(k)] = ctx.dressing_defect(k);
    const Vec f1 = scattering::packet(m.grid, 0.8, 0.15);
    const Vec f2 = scattering::packet(m.grid, 0.6, 0.15);
    const Vec one = scattering::one_photon(m.basis, f1);
    const Vec two = scattering::two_photon(m.basis, f1, f2);
    auto log_cook = [&](const std::string& name, const scattering::CookResult& r) {
        ObservableSeries ser{name + "_cauchy"};
        for (std::size_t i = 0; i < r.cauchy.size(); ++i)
            ser.push(r.times[i + 1], r.cauchy[i], r.truncation_loss, r.propagation_error);
        rep.series.push_back(ser);
        rep.metrics[name + "_isometry_defect"] = r.isometry_defect;
        rep.metrics[name + "_final_cauchy"] = r.final_cauchy;
        rep.metrics[name + "_converged"] = r.converged ? 1.0 : 0.0;
        if (!r.converged) {
            rep.converged = false;
            rep.notes.push_back(name + ": Cook sequence did not converge");
        }
    };
    const auto w1 = scattering::wave_operator_plus(ctx, one, c.cook);
    log_cook("one_photon", w1);
    const auto w2 = scattering::wave_operator_plus(ctx, two, c.cook);
    log_cook("two_photon", w2);
    const auto a1 = scattering::asymptotic_create(ctx, {f1}, c.cook);
    log_cook("asymptotic_create", a1);
    const double cross = (a1.limit - w1.limit).norm();
    rep.metrics["create_vs_wave"] = cross;
    rep.check("isometry_one_photon", w1.converged ? w1.isometry_defect : 1.0, "<=", 1e-3);
    rep.check("isometry_two_photon", w2.converged ? w2.isometry_defect : 1.0, "<=", 1e-3);
    rep.check("create_vs_wave", cross, "<=", 2.0 * (w1.final_cauchy + a1.final_cauchy) + 1e-10);
    // Cook integrand: integral of the intertwining defect over [t, 2t], t >= t0
    ObservableSeries cook{"intertwining_integral"};
    for (double t = c.cook.t0; 2.0 * t <= ctx.horizon() + 1e-9; t *= 2.0) {
        const int n = 16;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double u = t + t * i / n;
            acc += (i == 0 || i == n ? 0.5 : 1.0) * scattering::intertwining_defect(ctx, one, u);
        }
        cook.push(t, acc * t / n);
    }
    rep.series.push_back(cook);
    bool decreasing = true;
    for (std::size_t i = 1; i < cook.size(); ++i) decreasing = decreasing && cook.value[i] < cook.value[i - 1];
    if (cook.size() < 2) rep.notes.push_back("intertwining integral: fewer than two windows inside the horizon");
    rep.check("intertwining_integral_decreasing", decreasing && cook.size() >= 2 ? 1.0 : 0.0, ">=", 1.0);
    return rep;
}

RunReport run_ac_check(Session& s) {
    const auto& c = s.config();
    RunReport rep;
    rep.name = "acheck";
    const auto& m = s.model();
    const auto& ctx = s.context();
    const Vec& psi = s.initial().state;
    solver::PropagationConfig pc;
    pc.tol = c.cook.prop_tol;
    pc.checkpoints = scattering::cook_grid(c.cook, ctx.horizon());
    const auto traj = solver::propagate(psi, m.h, pc);
    const auto z = scattering::z_from_trajectory(ctx, traj, c.theta(), c.cook, psi.norm());
    rep.metrics["z_converged"] = z.z.converged ? 1.0 : 0.0;
    rep.metrics["z_final_cauchy"] = z.z.final_cauchy;
    rep.metrics["z_ex_final_cauchy"] = z.z_ex.final_cauchy;
    rep.metrics["contraction_defect"] = z.contraction_defect;
    ObservableSeries zc{"z_cauchy"};
    for (std::size_t i = 0; i < z.z.cauchy.size(); ++i) zc.push(z.z.times[i + 1], z.z.cauchy[i], 0.0, z.z.propagation_error);
    rep.series.push_back(zc);
    if (!z.z.converged) {
        rep.converged = false;
        rep.notes.push_back("Z: Cook sequence did not converge");
    }
    ObservableSeries via{"residual_via_wave", "n"}, direct{"residual_direct", "n"};
    double budget = 0.0;
    for (std::size_t n = 1; n <= m.basis.n_max(); ++n) {
        const auto ac = scattering::ac_residual(ctx, psi, n, c.theta(), c.cook, z, traj);
        const double b = ac.defect_budget + s.initial().truncation_defect;
        via.push(static_cast<double>(n), ac.via_wave, ac.wave.truncation_loss, ac.wave.propagation_error + z.z.propagation_error,
                 s.initial().truncation_defect);
        direct.push(static_cast<double>(n), ac.direct, 0.0, traj.error_bound, s.initial().truncation_defect);
        if (!ac.converged) {
            rep.converged = false;
            rep.notes.push_back("W+ Z at n = " + std::to_string(n) + ": Cook sequence did not converge");
        }
        budget = b;
    }
    rep.series.push_back(via);
    rep.series.push_back(direct);
    bool decreasing = true;
    for (std::size_t i = 1; i < via.size(); ++i) decreasing = decreasing && via.value[i] < via.value[i - 1];
    rep.metrics["residual_final"] = via.value.back();
    rep.metrics["defect_budget"] = budget;
    rep.check("residual_decreasing_in_n", decreasing ? 1.0 : 0.0, ">=", 1.0);
    rep.check("residual_final", via.value.back(), "<=", 0.05);
    rep.check("defect_budget", budget, "<=", 0.02);
    rep.check("contraction", z.contraction_defect, "<=", 1e-8);
    rep.check("converged", rep.converged ? 1.0 : 0.0, ">=", 1.0);
    return rep;
}

// ------------------------------------------------------------------ output

Environment environment(Session& s) {
    Environment e;
#if defined(__VERSION__)
    e.compiler = __VERSION__;
#endif
    e.eigen = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
              std::to_string(EIGEN_MINOR_VERSION);
#ifdef NDEBUG
    e.build_type = "release";
#else
    e.build_type = "debug";
#endif
    char host[256] = {0};
    if (gethostname(host, sizeof host - 1) == 0) e.host = host;
    e.seed = s.config().seed;
    e.threads = s.config().threads;
    e.basis_fingerprint = s.model().basis.fingerprint();
    return e;
}

void write_csv(const ObservableSeries& series, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_csv: cannot open " + path);
    f << "parameter,value,defect_truncation,defect_propagation,defect_weyl\n";
    char buf[160];
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", series.param[i], series.value[i],
                      series.defect_truncation[i], series.defect_propagation[i], series.defect_weyl[i]);
        f << buf;
    }
}

std::string summary_json(const RunReport& r, const Environment& env) {
    json j;
    j["run"] = r.name;
    j["converged"] = r.converged;
    j["passed"] = r.passed();
    j["metrics"] = json::object();
    for (const auto& [k, v] : r.metrics) j["metrics"][k] = v;
    j["fits"] = json::array();
    for (const auto& [name, f] : r.fits)
        j["fits"].push_back({{"series", name},
                             {"exponent", f.exponent},
                             {"intercept", f.intercept},
                             {"stderr", f.stderr_exponent},
                             {"window", {f.window_lo, f.window_hi}},
                             {"points", f.points}});
    j["assertions"] = json::array();
    for (const auto& a : r.assertions)
        j["assertions"].push_back({{"name", a.name},
                                   {"value", a.value},
                                   {"relation", a.relation},
                                   {"threshold", a.threshold},
                                   {"passed", a.passed},
                                   {"detail", a.detail}});
    j["notes"] = r.notes;
    j["series"] = json::array();
    for (const auto& s : r.series) {
        // rows whose defect budget exceeds 10% of the series scale
        double scale = 0.0;
        for (double v : s.value) scale = std::max(scale, std::abs(v));
        std::size_t untrusted = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s.defect_truncation[i] + s.defect_propagation[i] + s.defect_weyl[i] > 0.1 * scale) ++untrusted;
        j["series"].push_back({{"name", s.name}, {"parameter", s.parameter}, {"rows", s.size()}, {"untrusted_rows", untrusted}});
    }
    j["environment"] = {{"compiler", env.compiler},   {"eigen", env.eigen},
                        {"build", env.build_type},    {"host", env.host},
                        {"seed", env.seed},           {"threads", env.threads},
                        {"basis_fingerprint", env.basis_fingerprint}};
    return j.dump(2);
}

void write_outputs(const RunReport& report, Session& s, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& ser : report.series) write_csv(ser, dir + "/" + report.name + "_" + ser.name + ".csv");
    std::ofstream f(dir + "/" + report.name + ".json");
    if (!f) throw std::runtime_error("write_outputs: cannot write the summary");
    f << summary_json(report, environment(s)) << "\n";
}

}  // namespace sbs::experiments
