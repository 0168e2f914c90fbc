// sbscat.cpp — command-line driver for the spin-boson experiments

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "sbs/experiments.hpp"
#include "sbs/solver.hpp"

namespace {

using namespace sbs;
using namespace sbs::experiments;

enum Exit : int { kPass = 0, kUsage = 1, kAssert = 2, kNoConv = 3 };

const std::map<std::string, std::pair<std::string, std::function<RunReport(Session&)>>>& commands() {
    static const std::map<std::string, std::pair<std::string, std::function<RunReport(Session&)>>> c = {
        {"fgr", {"Fermi Golden Rule rates against the delta quadrature", run_fgr}},
        {"groundstate", {"ground state, gap and pull-through check", run_groundstate}},
        {"relax", {"spin observables and a Weyl observable from an excited spin", run_relaxation}},
        {"photonbound", {"running max of <exp(kappa N)>", run_photon_bound}},
        {"gsloc", {"ground-state photons in a dilated annulus, with grid doubling", run_gs_localization}},
        {"propagation", {"plateaus of dGamma(theta_tc) and the moving annulus", run_propagation_bound}},
        {"softphoton", {"sup_t <dGamma(1_{k<=eps})> against eps", run_soft_photon}},
        {"localrelax", {"trace distance of reduced states on B(r)", run_local_relaxation}},
        {"overlap", {"ground-state overlap and factorization on B(r)", run_overlap_analysis}},
        {"commutator", {"one-particle commutator expansion exponents", run_commutator}},
        {"waveop", {"wave operator on one- and two-photon packets", run_wave_operator}},
        {"acheck", {"asymptotic completeness residual W+ 1_{N<=n} Z psi - psi", run_ac_check}},
    };
    return c;
}

void print_report(const RunReport& r) {
    std::printf("%s: %s%s\n", r.name.c_str(), r.passed() ? "PASS" : "FAIL", r.converged ? "" : " (not converged)");
    for (const auto& a : r.assertions)
        std::printf("  %-4s %-34s %.6g %s %.6g\n", a.passed ? "ok" : "FAIL", a.name.c_str(), a.value, a.relation.c_str(),
                    a.threshold);
    for (const auto& [name, f] : r.fits)
        std::printf("  fit  %-34s exponent %.4f +- %.4f on [%g, %g], %zu points\n", name.c_str(), f.exponent,
                    f.stderr_exponent, f.window_lo, f.window_hi, f.points);
    for (const auto& n : r.notes) std::printf("  note %s\n", n.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sbscat: spin-boson relaxation and scattering experiments"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config_path, out_dir;
    long seed = -1;
    unsigned threads = 0;
    app.add_option("--config", config_path, "configuration file ([model], [initial], [experiment], [cook], [lab])")
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (default: experiment.out_dir)");
    app.add_option("--seed", seed, "random seed")->check(CLI::NonNegativeNumber);
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    for (const auto& [name, entry] : commands()) app.add_subcommand(name, entry.first);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kPass : kUsage;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        const auto cfg_text = config_path.empty() ? config::Config{} : config::Config::load(config_path);
        ExperimentConfig cfg = parse_experiment_config(cfg_text);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
        if (threads > 0) cfg.threads = cfg.lab.threads = threads;

        Session session(cfg);
        const RunReport report = commands().at(cmd).second(session);
        write_outputs(report, session, cfg.out_dir);
        print_report(report);
        if (!report.converged) return kNoConv;
        return report.passed() ? kPass : kAssert;
    } catch (const solver::NonConvergence& e) {
        std::cerr << "sbscat " << cmd << ": no convergence: " << e.what() << "\n";
        return kNoConv;
    } catch (const std::invalid_argument& e) {
        std::cerr << "sbscat " << cmd << ": invalid input: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "sbscat " << cmd << ": " << e.what() << "\n";
        return kAssert;
    }
}
