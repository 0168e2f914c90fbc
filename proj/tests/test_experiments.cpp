// test_experiments.cpp — fits, helpers, configuration and output files

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "sbs/experiments.hpp"
#include "sbs/fit.hpp"

using namespace sbs;
using namespace sbs::experiments;

TEST_CASE("power-law fit on exact and noisy data") {
    std::vector<double> t, y;
    for (double x = 2.0; x <= 64.0; x *= 1.5) {
        t.push_back(x);
        y.push_back(std::pow(x, -2.0));
    }
    const auto f = fit::fit_power_law(t, y);
    CHECK(std::abs(f.exponent + 2.0) <= 1e-6);
    CHECK(f.stderr_exponent <= 1e-10);

    std::vector<double> e, s;
    for (double x = 0.05; x <= 1.0; x *= 1.4) {
        e.push_back(x);
        s.push_back(5.0 * std::pow(x, 0.25));
    }
    CHECK(std::abs(fit::fit_power_law(e, s).exponent - 0.25) <= 1e-6);
    CHECK(std::abs(fit::fit_power_law(e, s).intercept - std::log(5.0)) <= 1e-6);

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::vector<double> xn, yn;
    for (int i = 0; i < 16; ++i) {
        const double x = 4.0 * std::pow(1.25, i);
        xn.push_back(x);
        yn.push_back(std::pow(x, -1.0) * (1.0 + u(rng)));
    }
    CHECK(std::abs(fit::fit_power_law(xn, yn).exponent + 1.0) <= 0.15);
    // windows and rejections
    const auto w = fit::fit_power_law(t, y, 4.0, 40.0);
    CHECK(w.points >= 4);
    CHECK(w.window_lo == 4.0);
    CHECK_THROWS(fit::fit_power_law({1.0, 2.0, 3.0}, {1.0, 0.5, 0.3}));
    CHECK_THROWS(fit::fit_power_law({1.0, 2.0, 3.0, 4.0}, {1.0, 0.0, 0.3, 0.2}));
}

TEST_CASE("running max drift, plateau and trace norm") {
    const std::vector<double> t{0, 1, 2, 3, 4};
    CHECK(running_max_drift(t, {1.0, 2.0, 2.0, 2.0, 2.0}) == 0.0);
    CHECK(running_max_drift(t, {1.0, 1.0, 1.0, 1.0, 1.1}) == doctest::Approx(0.1));
    CHECK(plateau(t, {5, 5, 5, 1, 3}) == doctest::Approx(2.0));
    Mat a = Mat::Zero(3, 3);
    a(0, 0) = 0.5;
    a(1, 1) = -0.25;
    CHECK(trace_norm(a) == doctest::Approx(0.75));
}

TEST_CASE("dGamma expectation from the one-particle density") {
    ExperimentConfig cfg;
    cfg.model.n_k = 6;
    cfg.model.n_max = 2;
    cfg.model.k_max = 2.0;
    cfg.r = 1.0;
    cfg.t_c = {2.0};
    cfg.eps = {0.5};
    Session s(cfg);
    const auto& m = s.model();
    const Vec psi = s.initial().state;
    const Mat b = onep::soft_projector(m.grid, 0.7).matrix;
    const double direct = fock::photon_part(fock::dGamma(b, m.basis), m.spin_dim()).expectation(psi);
    CHECK(std::abs(dgamma_expectation(b, s.one_particle_density(psi)) - direct) <= 1e-13);
    // number operator: trace of the density
    const double n = fock::photon_part(fock::number_operator(m.basis), m.spin_dim()).expectation(psi);
    CHECK(std::abs(s.one_particle_density(psi).trace().real() - n) <= 1e-13);
    CHECK(std::abs(psi.norm() - 1.0) <= 1e-12);
}

TEST_CASE("configuration parsing and validation") {
    const auto c = config::Config::parse(
        "[model]\nn_k = 16\n[experiment]\ndt = 0.5\nt_c = 4, 8\neps = 0.2, 0.4\nkappa = 0.25\n"
        "[initial]\ndressed = false\namplitude = 0.2\n[cook]\ntol = 0.005\n[lab]\nn_lab = 256\n");
    const auto e = parse_experiment_config(c);
    CHECK(e.model.n_k == 16);
    CHECK(e.dt == 0.5);
    CHECK(e.t_c.size() == 2);
    CHECK(e.kappa == 0.25);
    CHECK(!e.initial.dressed);
    CHECK(e.initial.amplitude == 0.2);
    CHECK(e.cook.tol == 0.005);
    CHECK(e.lab.n_lab == 256);
    CHECK_NOTHROW(e.validate(20.0));

    auto bad = e;
    bad.t_c_override = false;
    CHECK_THROWS_AS(bad.validate(20.0), std::invalid_argument);  // t_c below lambda^-2
    bad = e;
    bad.eps = {3.0};
    CHECK_THROWS_AS(bad.validate(20.0), std::invalid_argument);
    bad = e;
    bad.r = 50.0;
    CHECK_THROWS_AS(bad.validate(20.0), std::invalid_argument);
    bad = e;
    bad.v3 = 0.7;
    CHECK_THROWS_AS(bad.validate(20.0), std::invalid_argument);
    bad = e;
    bad.t_c = {30.0};
    CHECK_THROWS_AS(bad.validate(20.0), std::invalid_argument);
}

TEST_CASE("report assertions and output files") {
    RunReport r;
    r.name = "demo";
    r.check("small", 0.01, "<=", 0.05);
    r.check("big", 2.0, ">=", 1.0);
    CHECK(r.passed());
    r.check("nan", std::nan(""), "<=", 1.0);
    CHECK(!r.passed());
    CHECK_THROWS(r.check("x", 1.0, "==", 1.0));
    ObservableSeries ser{"series"};
    ser.push(1.0, 0.5, 1e-3, 1e-9, 0.0);
    ser.push(2.0, 0.25);
    CHECK_THROWS(ser.push(3.0, std::nan("")));
    r.series.push_back(ser);
    CHECK(r.find("series").size() == 2);
    CHECK_THROWS(r.find("missing"));

    const auto dir = (std::filesystem::temp_directory_path() / "sbs_exp_test").string();
    std::filesystem::remove_all(dir);
    ExperimentConfig cfg;
    cfg.model.n_k = 4;
    cfg.model.n_max = 1;
    cfg.r = 1.0;
    cfg.t_c = {2.0};
    cfg.eps = {0.6};
    Session s(cfg);
    write_outputs(r, s, dir);
    std::ifstream csv(dir + "/demo_series.csv");
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == "parameter,value,defect_truncation,defect_propagation,defect_weyl");
    CHECK(row.rfind("1,0.5,0.001", 0) == 0);
    std::ifstream js(dir + "/demo.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j["run"] == "demo");
    CHECK(j["passed"] == false);
    CHECK(j["assertions"].size() == 3);
    CHECK(j["environment"].contains("compiler"));
    CHECK(j["environment"]["basis_fingerprint"].get<std::uint64_t>() == s.model().basis.fingerprint());
    std::filesystem::remove_all(dir);
}

TEST_CASE("FGR run on the desk spin system") {
    ExperimentConfig cfg;
    Session s(cfg);
    const auto r = run_fgr(s);
    CHECK(r.passed());
    CHECK(std::abs(r.metrics.at("rate_10") - 4.4429) <= 1e-4);
}
