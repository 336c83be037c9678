#pragma once

#include <functional>

namespace pinning::quad {

struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

/// Globally adaptive 15-point Gauss-Kronrod on [a, b]: the panel with the largest error
/// estimate is bisected until the summed estimate drops below rel_tol * |value| (or
/// abs_tol). Subdivision order is fixed, so results are deterministic.
Estimate adaptive(const std::function<double(double)>& f, double a, double b, double rel_tol,
                  unsigned max_panels = 2000, double abs_tol = 0.0);

/// Single non-adaptive Gauss-Kronrod panel with its embedded Gauss error estimate.
Estimate panel(const std::function<double(double)>& f, double a, double b);

}  // namespace pinning::quad
