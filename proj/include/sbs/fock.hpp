// fock.hpp — truncated bosonic Fock space: bases, second quantization, splits

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sbs/onep.hpp"
#include "sbs/types.hpp"

namespace sbs::fock {

// All occupation vectors n with sum(n) <= N_max. Ordered by total photon
// number, descending lexicographic inside a sector, so the basis for a
// smaller cutoff is a prefix of the basis for a larger one.
class OccupationBasis {
public:
    static constexpr std::size_t kDefaultLimit = 5'000'000;

    OccupationBasis() = default;
    OccupationBasis(std::size_t modes, std::size_t n_max, std::size_t dim_limit = kDefaultLimit,
                    bool position_modes = false);

    std::size_t modes() const { return modes_; }
    std::size_t n_max() const { return n_max_; }
    Eigen::Index dim() const { return dim_; }
    bool position_modes() const { return position_modes_; }
    OccupationBasis with_representation(bool position_modes) const;

    std::span<const std::uint8_t> occupation(Eigen::Index i) const {
        return {occ_.data() + static_cast<std::size_t>(i) * modes_, modes_};
    }
    int total(Eigen::Index i) const { return totals_[static_cast<std::size_t>(i)]; }
    // -1 if sum(n) > N_max
    Eigen::Index index_of(std::span<const std::uint8_t> n) const;
    Eigen::Index sector_begin(std::size_t n) const { return offsets_[n]; }
    Eigen::Index sector_end(std::size_t n) const { return offsets_[n + 1]; }
    // dimension of the prefix with cutoff n <= N_max
    Eigen::Index dim_upto(std::size_t n) const { return offsets_[n + 1]; }
    std::uint64_t fingerprint() const;

private:
    std::size_t modes_{0};
    std::size_t n_max_{0};
    Eigen::Index dim_{0};
    bool position_modes_{false};
    std::vector<std::uint8_t> occ_;
    std::vector<int> totals_;
    std::vector<Eigen::Index> offsets_;
    // binom_[a][b] = C(a, b)
    std::vector<std::vector<std::uint64_t>> binom_;
    std::uint64_t compositions(std::size_t total, std::size_t parts) const;
};

OccupationBasis build_basis(std::size_t modes, std::size_t n_max,
                            std::size_t dim_limit = OccupationBasis::kDefaultLimit);

std::uint64_t binomial(std::size_t n, std::size_t k);

// Coefficients over spin (x) Fock, spin-major: index = s * dimF + n.
struct FockVector {
    Vec coeffs;
    std::size_t spin_dim{1};
    bool spin_tensored() const { return spin_dim > 1; }
    double norm() const { return coeffs.norm(); }
};

Vec vacuum(const OccupationBasis& basis, std::size_t spin_dim = 1, const Vec* spin = nullptr);

// Sparse (CSR) below 25% fill, dense above.
class FockOperator {
public:
    FockOperator() = default;
    FockOperator(SpMat m, bool hermitian);
    FockOperator(Mat m, bool hermitian);

    Eigen::Index dim() const { return dense_ ? dmat_.rows() : smat_.rows(); }
    bool is_dense() const { return dense_; }
    bool hermitian() const { return hermitian_; }
    bool verify_hermitian(double tol = 1e-12) const;
    void apply(const Vec& in, Vec& out) const;
    Vec apply(const Vec& in) const;
    Mat to_dense() const;
    SpMat to_sparse() const;
    FockOperator adjoint() const;
    double expectation(const Vec& psi) const;  // real part of <psi, A psi>

    static constexpr double kDenseFill = 0.25;

private:
    bool dense_{false};
    bool hermitian_{false};
    SpMat smat_;
    Mat dmat_;
};

FockOperator operator+(const FockOperator& a, const FockOperator& b);
FockOperator operator*(cplx s, const FockOperator& a);
FockOperator compose(const FockOperator& a, const FockOperator& b);

SpMat kron(const Mat& small, const SpMat& big);
// S (x) 1 and 1 (x) F on the spin-tensored space
FockOperator spin_part(const Mat& s, const OccupationBasis& basis);
FockOperator photon_part(const FockOperator& f, std::size_t spin_dim);
FockOperator tensor(const Mat& s, const FockOperator& f);

// a(f) = sum_j conj(f_j) a_j, antilinear in f
FockOperator annihilate(const Vec& f, const OccupationBasis& basis);
FockOperator create(const Vec& f, const OccupationBasis& basis);
FockOperator annihilate_mode(std::size_t j, const OccupationBasis& basis);
// Phi(f) = a*(f) + a(f)
FockOperator field(const Vec& f, const OccupationBasis& basis);
FockOperator dGamma(const onep::OneParticleOperator& b, const OccupationBasis& basis);
FockOperator dGamma(const Mat& b, const OccupationBasis& basis);
FockOperator dGamma_diagonal(const RVec& b, const OccupationBasis& basis);
FockOperator number_operator(const OccupationBasis& basis);
FockOperator exp_number(const OccupationBasis& basis, double kappa);
// 1_{N = n}, 1_{N <= n} as vectors masks applied in place
void project_sector(Vec& v, const OccupationBasis& basis, std::size_t n, std::size_t spin_dim = 1);
void project_upto(Vec& v, const OccupationBasis& basis, std::size_t n, std::size_t spin_dim = 1);

struct WeylOperator {
    FockOperator op;        // P exp(i Phi(f)) P, P = 1_{N <= N_max}
    double unitarity_defect{0.0};  // ||W^* W - 1||
};

// Dense route: the exponential is taken on the basis padded to N_max + 2.
WeylOperator weyl(const Vec& f, const OccupationBasis& basis, std::size_t dense_limit = 20000);

struct WeylAction {
    Vec state;
    double leakage{0.0};  // ||(1 - P) Phi(f) psi||, first-order truncation defect
    double krylov_error{0.0};
};

// exp(i P Phi(f) P) psi by Krylov, on a spin-tensored vector.
WeylAction weyl_apply(const Vec& f, const OccupationBasis& basis, const Vec& psi,
                      std::size_t spin_dim = 1, double tol = 1e-12);

// e^{-|f|^2/2} sum_n (i a*(f))^n / n! Omega, truncated and renormalized.
struct CoherentState {
    Vec state;
    double truncation_defect{0.0};  // 1 - ||truncated||^2 before renormalization
};
CoherentState coherent_state(const Vec& f, const OccupationBasis& basis);

// Gamma(U) = exp(dGamma(log U)). Eigenvalues of U within 1e-8 of the cut
// -exp(i * branch_offset) raise.
Mat principal_log(const Mat& u, double branch_offset = 0.0);
FockOperator gamma_U(const Mat& u, const OccupationBasis& basis, double branch_offset = 0.0,
                     std::size_t dense_limit = 6000);
Vec gamma_U_apply(const Mat& u, const OccupationBasis& basis, const Vec& psi,
                  double branch_offset = 0.0, std::size_t spin_dim = 1, double tol = 1e-13);

// Generic lift of a linear map T: h_from -> h_to, sector by sector on
// symmetric tensors. Contractions, isometries and the splitting map are all
// of this form. Output truncated to `to`.
Vec gamma_map(const Mat& t, const OccupationBasis& from, const OccupationBasis& to, const Vec& psi,
              std::size_t spin_dim = 1);

// Mode-wise bipartition of a basis: index -> (index in part A, index in part B).
class Bipartition {
public:
    Bipartition(const OccupationBasis& full, std::vector<std::size_t> modes_a);

    const OccupationBasis& basis_a() const { return a_; }
    const OccupationBasis& basis_b() const { return b_; }
    const std::vector<std::size_t>& modes_a() const { return modes_a_; }
    const std::vector<std::size_t>& modes_b() const { return modes_b_; }
    Eigen::Index index_a(Eigen::Index i) const { return ia_[static_cast<std::size_t>(i)]; }
    Eigen::Index index_b(Eigen::Index i) const { return ib_[static_cast<std::size_t>(i)]; }
    Eigen::Index full_dim() const { return static_cast<Eigen::Index>(ia_.size()); }
    // full index of (p, q), -1 if beyond the cutoff
    Eigen::Index join(Eigen::Index p, Eigen::Index q) const;

    // <psi_a| (x) 1 applied to psi; psi_a lives on spin (x) A
    Vec pair_a(const Vec& psi_a, const Vec& psi, std::size_t spin_dim = 1) const;
    // psi_a (x) psi_b, components beyond the cutoff dropped; `dropped` = their norm
    Vec product(const Vec& psi_a, const Vec& psi_b, std::size_t spin_dim = 1,
                double* dropped = nullptr) const;
    // psi_a (x) Omega_B
    Vec embed_a(const Vec& psi_a, std::size_t spin_dim = 1) const;
    // Tr_B |psi><psi| on spin (x) A
    Mat reduce_to_a(const Vec& psi, std::size_t spin_dim = 1) const;

private:
    OccupationBasis a_;
    OccupationBasis b_;
    std::vector<std::size_t> modes_a_;
    std::vector<std::size_t> modes_b_;
    std::vector<Eigen::Index> ia_;
    std::vector<Eigen::Index> ib_;
    OccupationBasis full_;
};

// Doubled space over modes (1..M) + (M+1..2M) with combined cutoff N_max.
struct DoubledSpace {
    OccupationBasis single;
    OccupationBasis doubled;
    std::vector<Eigen::Index> first;   // doubled index -> index of first-factor occupation
    std::vector<Eigen::Index> second;  // doubled index -> index of second-factor occupation
    std::vector<Eigen::Index> sum;     // doubled index -> index of p + q in `single`
    std::vector<double> sum_weight;    // prod sqrt((p+q)! / (p! q!))
};

DoubledSpace make_doubled(const OccupationBasis& single);

// Breve Gamma(j): f -> (j0 f) (+) (j_inf f), lifted. j0, j_inf in the basis's
// mode representation. Diagonal pairs use the binomial expansion directly.
Vec breve_gamma(const onep::OneParticleOperator& j0, const onep::OneParticleOperator& j_inf,
                const DoubledSpace& ds, const Vec& psi, std::size_t spin_dim = 1);
// checks j0^* j0 + j_inf^* j_inf <= 1
void check_split_condition(const Mat& j0, const Mat& j_inf, double tol = 1e-10);

struct IexResult {
    Vec state;
    double loss{0.0};
};
// I_ex: |p> (x) |q> -> prod sqrt((p+q)!/(p! q!)) |p + q>
IexResult i_ex(const DoubledSpace& ds, const Vec& doubled, std::size_t spin_dim = 1);

struct ModeSplit {
    double r{0.0};
    std::vector<std::size_t> inner;  // x_m <= r
    std::vector<std::size_t> outer;
};

ModeSplit make_mode_split(const onep::RadialGrid& grid, double r);

// Reduced density matrix on spin (x) Fock(inner); psi must be in x-modes.
Mat partial_trace(const Vec& psi, const OccupationBasis& basis, const ModeSplit& split,
                  std::size_t spin_dim = 1);
Mat partial_trace(const Bipartition& bp, const Vec& psi, std::size_t spin_dim = 1);

// ||psi - psi_a (x) psi_b||^2 with psi_b = <psi_a|psi, on a plain tensor
// product (psi as a dA x dB matrix). Returns {direct, closed form}.
struct ProductDistance {
    double direct{0.0};
    double identity{0.0};
};
ProductDistance lemma_product_distance(const Mat& psi, const Vec& psi_a);

}  // namespace sbs::fock
