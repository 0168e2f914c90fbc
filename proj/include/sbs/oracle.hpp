// oracle.hpp — dense brute-force references for tiny instances

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sbs/fock.hpp"
#include "sbs/model.hpp"
#include "sbs/types.hpp"

namespace sbs::oracle {

inline constexpr std::size_t kDenseCap = 4096;

struct DenseInstance {
    Mat h;
    RVec evals;
    Mat evecs;
    std::size_t cap{kDenseCap};
    double hermiticity_defect{0.0};
    double orthonormality_defect{0.0};
};

// H from per-mode ladder matrices on the full product space (each mode
// 0..N_max), restricted to sum(n) <= N_max and ordered like `basis`.
DenseInstance dense_instance(const model::SpinSystem& spin, double lambda, const RVec& omega, const Vec& g,
                             const fock::OccupationBasis& basis, std::size_t cap = kDenseCap);
DenseInstance dense_instance(const model::ModelInstance& m, std::size_t cap = kDenseCap);

Vec dense_propagate(const DenseInstance& inst, const Vec& psi0, double t);
double dense_norm(const Mat& a, std::size_t cap = kDenseCap);

// exp(i P Phi(f) P) by dense diagonalization
Mat dense_weyl(const Vec& f, const fock::OccupationBasis& basis, std::size_t cap = kDenseCap);
// <m| Gamma(T) |n> = perm(T[m, n]) / sqrt(prod m! prod n!)
Mat dense_gamma(const Mat& t, const fock::OccupationBasis& from, const fock::OccupationBasis& to,
                std::size_t cap = kDenseCap);
// Tr over the modes outside `inner`, by pairing basis states directly
Mat brute_partial_trace(const Vec& psi, const fock::OccupationBasis& basis, const std::vector<std::size_t>& inner,
                        std::size_t spin_dim = 1);
cplx permanent(const Mat& a);

struct QuadratureResult {
    double value{0.0};
    double error{0.0};
    bool converged{false};
    std::vector<double> widths;
    std::vector<double> raw;
};

// 4 pi int_0^inf k^2 delta_sigma(k - delta) |phi(k)|^2 dk with Gaussian delta_sigma,
// Romberg-extrapolated in sigma^2 to sigma -> 0. Zero if delta is outside (0, support).
QuadratureResult delta_quadrature(const std::function<double(double)>& phi, double delta, double support,
                                  const std::vector<double>& widths = {0.08, 0.04, 0.02, 0.01, 0.005},
                                  double tol = 1e-7);

}  // namespace sbs::oracle
