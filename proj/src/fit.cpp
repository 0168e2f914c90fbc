// fit.cpp — ordinary least squares on (log x, log y)

#include "sbs/fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbs::fit {

FitResult fit_power_law(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi) {
    if (x.size() != y.size()) throw std::invalid_argument("fit_power_law: length mismatch");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < lo || x[i] > hi) continue;
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i]))
            throw std::invalid_argument("fit_power_law: values in the window must be positive and finite");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    const std::size_t n = lx.size();
    if (n < 4) throw std::invalid_argument("fit_power_law: need at least 4 points in the window");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_power_law: window has a single abscissa");
    FitResult r;
    r.exponent = sxy / sxx;
    r.intercept = my - r.exponent * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = ly[i] - r.intercept - r.exponent * lx[i];
        ssr += e * e;
    }
    r.stderr_exponent = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
    r.window_lo = lo;
    r.window_hi = hi;
    r.points = n;
    return r;
}

FitResult fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.empty()) throw std::invalid_argument("fit_power_law: empty series");
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return fit_power_law(x, y, *lo, *hi);
}

}  // namespace sbs::fit
