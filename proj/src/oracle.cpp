// oracle.cpp — dense references, written without the sparse machinery

#include "sbs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sbs::oracle {

namespace {

// the untruncated per-mode product space is built densely
constexpr std::size_t kProductCap = 2048;

void check_cap(Eigen::Index n, std::size_t cap, const char* what) {
    if (static_cast<std::size_t>(n) > cap)
        throw std::length_error(std::string(what) + ": dimension " + std::to_string(n) + " exceeds the dense cap " +
                                std::to_string(cap));
}

// product-space ladder operators, mode-major digits (mode 0 slowest)
struct ProductSpace {
    std::size_t modes{0};
    std::size_t levels{0};
    std::size_t dim{1};
    std::vector<std::vector<int>> occ;

    ProductSpace(std::size_t m, std::size_t n_max) : modes(m), levels(n_max + 1) {
        for (std::size_t j = 0; j < m; ++j) dim *= levels;
        occ.resize(dim, std::vector<int>(m));
        for (std::size_t i = 0; i < dim; ++i) {
            std::size_t r = i;
            for (std::size_t j = m; j-- > 0;) {
                occ[i][j] = static_cast<int>(r % levels);
                r /= levels;
            }
        }
    }
};

RMat ladder(std::size_t levels) {
    RMat a = RMat::Zero(static_cast<Eigen::Index>(levels), static_cast<Eigen::Index>(levels));
    for (std::size_t n = 1; n < levels; ++n)
        a(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = std::sqrt(static_cast<double>(n));
    return a;
}

RMat kron(const RMat& a, const RMat& b) {
    RMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// a_j on the product space
RMat mode_operator(std::size_t j, const ProductSpace& ps) {
    RMat op = RMat::Identity(1, 1);
    const RMat a = ladder(ps.levels);
    const RMat id = RMat::Identity(static_cast<Eigen::Index>(ps.levels), static_cast<Eigen::Index>(ps.levels));
    for (std::size_t k = 0; k < ps.modes; ++k) op = kron(op, k == j ? a : id);
    return op;
}

// product-space rows kept (sum <= N_max) and their positions in `basis`
std::vector<std::pair<Eigen::Index, Eigen::Index>> restriction(const ProductSpace& ps, const fock::OccupationBasis& basis) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> keep;
    std::vector<std::uint8_t> o(ps.modes);
    for (std::size_t i = 0; i < ps.dim; ++i) {
        int tot = 0;
        for (std::size_t j = 0; j < ps.modes; ++j) {
            tot += ps.occ[i][j];
            o[j] = static_cast<std::uint8_t>(ps.occ[i][j]);
        }
        if (tot > static_cast<int>(basis.n_max())) continue;
        keep.emplace_back(static_cast<Eigen::Index>(i), basis.index_of(o));
    }
    if (static_cast<Eigen::Index>(keep.size()) != basis.dim()) throw std::logic_error("oracle: basis size mismatch");
    return keep;
}

// P X P on the truncated space in basis order
Mat restrict(const Mat& x, const std::vector<std::pair<Eigen::Index, Eigen::Index>>& keep, Eigen::Index d) {
    Mat out = Mat::Zero(d, d);
    for (const auto& [pi, bi] : keep)
        for (const auto& [pj, bj] : keep) out(bi, bj) = x(pi, pj);
    return out;
}

double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

}  // namespace

DenseInstance dense_instance(const model::SpinSystem& spin, double lambda, const RVec& omega, const Vec& g,
                             const fock::OccupationBasis& basis, std::size_t cap) {
    const std::size_t m = basis.modes(), ns = spin.dim();
    check_cap(basis.dim() * static_cast<Eigen::Index>(ns), cap, "dense_instance");
    const ProductSpace ps(m, basis.n_max());
    check_cap(static_cast<Eigen::Index>(ps.dim), kProductCap, "dense_instance (product space)");
    const auto keep = restriction(ps, basis);
    const Eigen::Index pd = static_cast<Eigen::Index>(ps.dim);
    Mat hf = Mat::Zero(pd, pd), field = Mat::Zero(pd, pd);
    for (std::size_t j = 0; j < m; ++j) {
        const Mat a = mode_operator(j, ps).cast<cplx>();
        hf += omega(static_cast<Eigen::Index>(j)) * (a.adjoint() * a);
        field += g(static_cast<Eigen::Index>(j)) * a.adjoint() + std::conj(g(static_cast<Eigen::Index>(j))) * a;
    }
    const Eigen::Index d = basis.dim();
    const Mat hf_t = restrict(hf, keep, d), field_t = restrict(field, keep, d);
    DenseInstance inst;
    inst.cap = cap;
    const Eigen::Index n = d * static_cast<Eigen::Index>(ns);
    inst.h = Mat::Zero(n, n);
    const Mat hs = spin.hamiltonian();
    for (Eigen::Index s = 0; s < static_cast<Eigen::Index>(ns); ++s)
        for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(ns); ++t) {
            Mat blk = lambda * spin.coupling(s, t) * field_t;
            if (s == t) blk += hf_t + hs(s, s) * Mat::Identity(d, d);
            inst.h.block(s * d, t * d, d, d) = blk;
        }
    inst.hermiticity_defect = (inst.h - inst.h.adjoint()).cwiseAbs().maxCoeff();
    if (inst.hermiticity_defect > 1e-13) throw std::runtime_error("dense_instance: not Hermitian");
    Eigen::SelfAdjointEigenSolver<Mat> es(inst.h);
    inst.evals = es.eigenvalues();
    inst.evecs = es.eigenvectors();
    inst.orthonormality_defect = (inst.evecs.adjoint() * inst.evecs - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    if (inst.orthonormality_defect > 1e-11) throw std::runtime_error("dense_instance: eigenvectors not orthonormal");
    return inst;
}

DenseInstance dense_instance(const model::ModelInstance& m, std::size_t cap) {
    return dense_instance(m.spin, m.coupling.lambda, m.omega, m.g, m.basis, cap);
}

Vec dense_propagate(const DenseInstance& inst, const Vec& psi0, double t) {
    check_cap(inst.h.rows(), inst.cap, "dense_propagate");
    Vec c = inst.evecs.adjoint() * psi0;
    for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, -t * inst.evals(k));
    return inst.evecs * c;
}

double dense_norm(const Mat& a, std::size_t cap) {
    check_cap(std::max(a.rows(), a.cols()), cap, "dense_norm");
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(a);
    return svd.singularValues()(0);
}

Mat dense_weyl(const Vec& f, const fock::OccupationBasis& basis, std::size_t cap) {
    check_cap(basis.dim(), cap, "dense_weyl");
    const ProductSpace ps(basis.modes(), basis.n_max());
    check_cap(static_cast<Eigen::Index>(ps.dim), kProductCap, "dense_weyl (product space)");
    const auto keep = restriction(ps, basis);
    const Eigen::Index pd = static_cast<Eigen::Index>(ps.dim);
    Mat field = Mat::Zero(pd, pd);
    for (std::size_t j = 0; j < basis.modes(); ++j) {
        const Mat a = mode_operator(j, ps).cast<cplx>();
        field += f(static_cast<Eigen::Index>(j)) * a.adjoint() + std::conj(f(static_cast<Eigen::Index>(j))) * a;
    }
    const Mat phi = restrict(field, keep, basis.dim());
    Eigen::SelfAdjointEigenSolver<Mat> es(phi);
    Vec ph(es.eigenvalues().size());
    for (Eigen::Index k = 0; k < ph.size(); ++k) ph(k) = std::polar(1.0, es.eigenvalues()(k));
    return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

cplx permanent(const Mat& a) {
    // Ryser's formula
    const Eigen::Index n = a.rows();
    if (n != a.cols()) throw std::invalid_argument("permanent: square matrix required");
    if (n == 0) return 1.0;
    if (n > 20) throw std::length_error("permanent: matrix too large");
    cplx total = 0.0;
    const std::uint32_t full = 1u << n;
    for (std::uint32_t mask = 1; mask < full; ++mask) {
        cplx prod = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            cplx row = 0.0;
            for (Eigen::Index j = 0; j < n; ++j)
                if (mask & (1u << j)) row += a(i, j);
            prod *= row;
        }
        total += ((n - __builtin_popcount(mask)) % 2 ? -1.0 : 1.0) * prod;
    }
    return total;
}

namespace {

std::vector<std::size_t> modes_of(std::span<const std::uint8_t> occ) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < occ.size(); ++j)
        for (int k = 0; k < occ[j]; ++k) out.push_back(j);
    return out;
}

double fact_prod(std::span<const std::uint8_t> occ) {
    double p = 1.0;
    for (auto n : occ) p *= std::tgamma(n + 1.0);
    return p;
}

}  // namespace

Mat dense_gamma(const Mat& t, const fock::OccupationBasis& from, const fock::OccupationBasis& to, std::size_t cap) {
    check_cap(std::max(from.dim(), to.dim()), cap, "dense_gamma");
    Mat out = Mat::Zero(to.dim(), from.dim());
    for (Eigen::Index i = 0; i < to.dim(); ++i) {
        const auto mi = modes_of(to.occupation(i));
        for (Eigen::Index j = 0; j < from.dim(); ++j) {
            if (to.total(i) != from.total(j)) continue;
            const auto nj = modes_of(from.occupation(j));
            Mat sub(static_cast<Eigen::Index>(mi.size()), static_cast<Eigen::Index>(nj.size()));
            for (std::size_t a = 0; a < mi.size(); ++a)
                for (std::size_t b = 0; b < nj.size(); ++b)
                    sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        t(static_cast<Eigen::Index>(mi[a]), static_cast<Eigen::Index>(nj[b]));
            out(i, j) = permanent(sub) / std::sqrt(fact_prod(to.occupation(i)) * fact_prod(from.occupation(j)));
        }
    }
    return out;
}

Mat brute_partial_trace(const Vec& psi, const fock::OccupationBasis& basis, const std::vector<std::size_t>& inner,
                        std::size_t spin_dim) {
    const fock::OccupationBasis ib(inner.size(), basis.n_max(), fock::OccupationBasis::kDefaultLimit,
                                   basis.position_modes());
    const Eigen::Index d = basis.dim(), di = ib.dim();
    std::vector<bool> is_inner(basis.modes(), false);
    for (auto m : inner) is_inner[m] = true;
    std::vector<Eigen::Index> inner_index(static_cast<std::size_t>(d));
    std::vector<std::vector<std::uint8_t>> outer_occ(static_cast<std::size_t>(d));
    std::vector<std::uint8_t> o(inner.size());
    for (Eigen::Index i = 0; i < d; ++i) {
        const auto occ = basis.occupation(i);
        for (std::size_t k = 0; k < inner.size(); ++k) o[k] = occ[inner[k]];
        inner_index[static_cast<std::size_t>(i)] = ib.index_of(o);
        for (std::size_t m = 0; m < basis.modes(); ++m)
            if (!is_inner[m]) outer_occ[static_cast<std::size_t>(i)].push_back(occ[m]);
    }
    const Eigen::Index ns = static_cast<Eigen::Index>(spin_dim);
    Mat rho = Mat::Zero(di * ns, di * ns);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            if (outer_occ[static_cast<std::size_t>(i)] != outer_occ[static_cast<std::size_t>(j)]) continue;
            for (Eigen::Index s = 0; s < ns; ++s)
                for (Eigen::Index u = 0; u < ns; ++u)
                    rho(s * di + inner_index[static_cast<std::size_t>(i)], u * di + inner_index[static_cast<std::size_t>(j)]) +=
                        psi(s * d + i) * std::conj(psi(u * d + j));
        }
    return rho;
}

QuadratureResult delta_quadrature(const std::function<double(double)>& phi, double delta, double support,
                                  const std::vector<double>& widths, double tol) {
    QuadratureResult res;
    res.widths = widths;
    if (!(delta > 0.0) || !(delta < support)) {
        res.converged = true;
        return res;
    }
    if (widths.size() < 2) throw std::invalid_argument("delta_quadrature: need at least two widths");
    for (double s : widths) {
        const auto integrand = [&](double k) {
            const double u = (k - delta) / s;
            const double p = phi(k);
            return 4.0 * kPi * k * k * p * p * std::exp(-0.5 * u * u) / (s * std::sqrt(2.0 * kPi));
        };
        const double a = std::max(1e-12, delta - 12.0 * s), b = delta + 12.0 * s;
        res.raw.push_back(simpson(integrand, a, b, 4000));
    }
    // Romberg in sigma^2; widths are expected to halve
    std::vector<double> col = res.raw;
    double prev = col.back();
    for (std::size_t level = 1; level < widths.size(); ++level) {
        const double ratio = std::pow(widths[0] / widths[1], 2.0 * static_cast<double>(level));
        std::vector<double> next;
        for (std::size_t i = 0; i + 1 < col.size(); ++i) next.push_back((ratio * col[i + 1] - col[i]) / (ratio - 1.0));
        res.error = std::abs(next.back() - prev);
        prev = next.back();
        col.swap(next);
        if (col.size() == 1) break;
    }
    res.value = col.back();
    res.converged = res.error <= tol * std::max(1.0, std::abs(res.value));
    if (!res.converged)
        throw std::runtime_error("delta_quadrature: no convergence across the width sequence (error " +
                                 std::to_string(res.error) + ")");
    return res;
}

}  // namespace sbs::oracle
