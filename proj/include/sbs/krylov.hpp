// krylov.hpp — Lanczos exponential action, restarted ground-state Lanczos, CG

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sbs/types.hpp"

namespace sbs::krylov {

// out = A * in, A Hermitian
using Apply = std::function<void(const Vec& in, Vec& out)>;

struct ExpmvOptions {
    double tol{1e-10};    // error per unit time
    int max_dim{40};
    double max_step{0.0};  // 0 = unlimited
};

struct ExpmvStats {
    double error_bound{0.0};
    int steps{0};
    int matvecs{0};
};

// exp(-i t A) v with an a posteriori bound on the Lanczos truncation error.
Vec expmv(const Apply& a, const Vec& v, double t, const ExpmvOptions& opt = {},
          ExpmvStats* stats = nullptr);

struct EigenOptions {
    double tol{1e-10};
    int krylov_dim{80};
    int max_restarts{300};
    std::uint64_t seed{12345};
};

struct EigenPair {
    double value{0.0};
    Vec vector;
    double residual{0.0};
    int matvecs{0};
    bool converged{false};
};

// Lowest eigenpair of A on the orthogonal complement of `deflate`.
// Explicitly restarted Lanczos with full reorthogonalization.
EigenPair lowest_eigenpair(const Apply& a, Eigen::Index n, const EigenOptions& opt,
                           const std::vector<Vec>& deflate = {}, const Vec* start = nullptr);

struct CgResult {
    Vec x;
    double residual{0.0};  // ||b - A x||
    int iterations{0};
    bool converged{false};
};

// A must be Hermitian positive definite.
CgResult conjugate_gradient(const Apply& a, const Vec& b, double tol, int max_iter);

// Deterministic complex Gaussian vector, unit norm.
Vec random_unit_vector(Eigen::Index n, std::uint64_t seed);

}  // namespace sbs::krylov
