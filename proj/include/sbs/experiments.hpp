// experiments.hpp — reproducible runs for the relaxation and scattering statements

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sbs/commutator_lab.hpp"
#include "sbs/config.hpp"
#include "sbs/fit.hpp"
#include "sbs/model.hpp"
#include "sbs/onep.hpp"
#include "sbs/scattering.hpp"
#include "sbs/solver.hpp"
#include "sbs/types.hpp"

namespace sbs::experiments {

// Initial state: psi_S (x) W(f) Omega, or W(f) Psi_gs when `dressed`.
// f = amplitude * packet(k0, sigma, x0).
struct InitialStateSpec {
    std::vector<double> spin{1.0, 0.0};
    bool dressed{true};
    double amplitude{0.3};
    double k0{0.8};
    double sigma{0.3};
    double x0{6.0};
};

struct ExperimentConfig {
    model::ModelSpec model;
    InitialStateSpec initial;
    std::vector<double> relax_spin{0.0, 1.0};  // spin state for the relaxation run, photons in the vacuum
    double dt{1.0};
    double t_final{0.0};  // 0: the reflection horizon
    std::vector<double> t_c{8.0, 12.0, 16.0, 24.0, 32.0};
    bool t_c_override{true};  // allow t_c below lambda^-2
    std::vector<double> eps{0.1, 0.14, 0.2, 0.28, 0.4, 0.56, 0.8};
    double r{8.0};
    double v1{0.6};
    double v2{0.8};
    double v3{0.9};
    double kappa{0.5};
    // annular profile for the ground-state and transition-region observables
    double ann_in1{0.15};
    double ann_in2{0.3};
    double ann_out1{0.5};
    double ann_out2{0.7};
    std::vector<double> gsloc_t{8.0, 10.0, 12.5, 16.0, 20.0, 25.0, 32.0, 40.0};
    std::size_t refine_factor{2};  // grid doubling for the stability check
    scattering::CookConfig cook;
    onep::CommutatorLabConfig lab{0.5, {8.0, 16.0, 32.0, 64.0, 128.0, 256.0}, 512, kPi, 1};
    double lab_v1{0.1};
    double lab_v2{1.0};
    std::string out_dir{"out"};
    std::uint64_t seed{2024};
    unsigned threads{1};

    onep::SmoothIndicator theta() const { return {v1, v2}; }
    onep::AnnularIndicator annulus() const { return {{ann_in1, ann_in2}, {ann_out1, ann_out2}}; }
    // throws std::invalid_argument on an inconsistent configuration
    void validate(double horizon) const;
};

ExperimentConfig parse_experiment_config(const config::Config& cfg);

struct ObservableSeries {
    std::string name;
    std::string parameter;
    std::vector<double> param;
    std::vector<double> value;
    std::vector<double> defect_truncation;
    std::vector<double> defect_propagation;
    std::vector<double> defect_weyl;

    explicit ObservableSeries(std::string n, std::string p = "t") : name(std::move(n)), parameter(std::move(p)) {}
    void push(double p, double v, double dt = 0.0, double dp = 0.0, double dw = 0.0);
    std::size_t size() const { return param.size(); }
};

struct Assertion {
    std::string name;
    double value{0.0};
    double threshold{0.0};
    std::string relation;  // "<=", ">=", "in"
    bool passed{false};
    std::string detail;
};

struct RunReport {
    std::string name;
    std::vector<ObservableSeries> series;
    std::vector<std::pair<std::string, fit::FitResult>> fits;
    std::map<std::string, double> metrics;
    std::vector<std::string> notes;
    std::vector<Assertion> assertions;
    bool converged{true};

    bool passed() const;
    void check(const std::string& name, double value, const std::string& relation, double threshold,
               const std::string& detail = "");
    const ObservableSeries& find(const std::string& series_name) const;
};

// Model, ground state, scattering context and the checkpointed trajectory,
// built lazily and shared across runs.
class Session {
public:
    explicit Session(ExperimentConfig cfg);

    const ExperimentConfig& config() const { return cfg_; }
    const model::ModelInstance& model();
    const solver::GroundStateResult& ground();
    const scattering::Context& context();
    // initial state and its truncation/Weyl defect
    const solver::InitialState& initial();
    // states at 0, dt, 2dt, ..., t_final
    const solver::Trajectory& trajectory();
    double t_final();
    double horizon() { return model().grid.horizon(); }
    // <a_i psi, a_j psi>, i, j over k-modes
    Mat one_particle_density(const Vec& psi);
    // psi rotated to x-modes
    Vec to_position(const Vec& psi);
    const fock::OccupationBasis& position_basis();

private:
    ExperimentConfig cfg_;
    std::optional<model::ModelInstance> model_;
    std::optional<solver::GroundStateResult> gs_;
    std::unique_ptr<scattering::Context> ctx_;
    std::optional<solver::InitialState> init_;
    std::optional<solver::Trajectory> traj_;
    std::vector<fock::FockOperator> annihilators_;
    std::optional<fock::OccupationBasis> xbasis_;
};

Vec build_initial_state(const InitialStateSpec& spec, const model::ModelInstance& m,
                        const solver::GroundStateResult& gs, double* defect = nullptr);

// <Psi, dGamma(b) Psi> from the one-particle density G_ij = <a_i Psi, a_j Psi>
double dgamma_expectation(const Mat& b, const Mat& density);
// max over the grid of the running maximum's relative change on the second half
double running_max_drift(const std::vector<double>& t, const std::vector<double>& v);
// mean over the last quarter of the window
double plateau(const std::vector<double>& t, const std::vector<double>& v);
// sum of |eigenvalues| of a Hermitian matrix
double trace_norm(const Mat& a);

RunReport run_fgr(Session& s);
RunReport run_groundstate(Session& s);
RunReport run_relaxation(Session& s);
RunReport run_photon_bound(Session& s);
RunReport run_gs_localization(Session& s);
RunReport run_propagation_bound(Session& s);
RunReport run_soft_photon(Session& s);
RunReport run_local_relaxation(Session& s);
RunReport run_overlap_analysis(Session& s);
RunReport run_commutator(Session& s);
RunReport run_wave_operator(Session& s);
RunReport run_ac_check(Session& s);

struct Environment {
    std::string compiler;
    std::string eigen;
    std::string build_type;
    std::string host;
    std::uint64_t seed{0};
    unsigned threads{1};
    std::uint64_t basis_fingerprint{0};
};

Environment environment(Session& s);
void write_csv(const ObservableSeries& series, const std::string& path);
// one CSV per series plus <dir>/<run>.json
void write_outputs(const RunReport& report, Session& s, const std::string& dir);
std::string summary_json(const RunReport& report, const Environment& env);

}  // namespace sbs::experiments
