// commutator_lab.hpp — full-line lab for the |k| commutator estimates
//
// The lab works on a periodic 1D grid with n_lab points, k in [-k_max, k_max)
// and the unitary DFT pairing. omega = |k| and khat = sgn(k) are Fourier
// multipliers, f_t = theta(|x|/t) is a multiplication operator. The leading
// term of i[omega, f_t] is sgn(k) applied after multiplication by
// (1/t) theta'(|x|/t) sgn(x). The high-frequency restriction is the band
// t^{beta-1} <= |k| <= k_max/2, which keeps it clear of the wrap at +-k_max.

#pragma once

#include <cstddef>
#include <vector>

#include "sbs/onep.hpp"
#include "sbs/types.hpp"

namespace sbs::onep {

struct CommutatorLabConfig {
    double beta_split{0.5};
    std::vector<double> t_list{4.0, 8.0, 16.0, 32.0, 64.0};
    std::size_t n_lab{512};
    double k_max{8.0};
    unsigned threads{1};
};

struct LabGrid {
    RVec k;
    RVec x;
    Mat dft;  // x -> k, unitary
    double dk{0.0};
    double dx{0.0};
};

LabGrid build_lab_grid(std::size_t n_lab, double k_max);

struct CommutatorRow {
    double t{0.0};
    double norm_remainder{0.0};           // ||O_t||
    double norm_remainder_high{0.0};      // ||O_t 1_{|k| >= t^{beta-1}}||
    double norm_khat_comm{0.0};           // ||[khat, f_t]||
    double norm_khat_comm_high{0.0};      // ||[khat, f_t] 1_{|k| >= t^{beta-1}}||
    double norm_remainder_sym{0.0};       // symmetrized leading term
    double norm_remainder_sym_high{0.0};
    double norm_remainder_adjoint{0.0};   // ||O_t^*||
};

std::vector<CommutatorRow> commutator_lab(const CommutatorLabConfig& cfg, const RadialProfile& theta);

struct ResidualNorms {
    double t{0.0};
    double norm_leading{0.0};      // ||a_t||
    double leading_bound{0.0};     // 2 sup|theta'|
    double norm_b{0.0};            // t^{1+beta} ||high-frequency remainder||
    double norm_b_prime{0.0};      // t ||low-frequency remainder||
    double norm_w0{0.0};
};

// w0 = i[omega, j0] + d/dt j0 with j0 = theta(|x|/t); the decomposition
// w0 = a_t/t + t^{-1-beta} b_t + t^{-1} b'_t 1_{|k| <= t^{beta-1}}.
ResidualNorms w0_decomposition_check(const CommutatorLabConfig& cfg, const RadialProfile& theta,
                                     double t);

double spectral_norm(const Mat& a);

}  // namespace sbs::onep
