// fit.hpp — log-log least squares for power-law exponents

#pragma once

#include <cstddef>
#include <vector>

namespace sbs::fit {

struct FitResult {
    double exponent{0.0};
    double intercept{0.0};  // log(prefactor)
    double stderr_exponent{0.0};
    double window_lo{0.0};
    double window_hi{0.0};
    std::size_t points{0};
};

// y ~ C x^p on lo <= x <= hi. Needs >= 4 points in the window, y > 0 there.
FitResult fit_power_law(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi);
FitResult fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sbs::fit
