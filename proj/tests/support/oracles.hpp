#pragma once

// Test-only oracles, independent of the library's solver path:
//  - gauss_expect: Simpson quadrature of f against the N(0,1) density
//  - PdeOracle:    explicit finite-difference solve of the semilinear PDE
//                  u_t + u_xx/2 + g(t, u, u_x) = 0, u(T, .) = phi
//  - rk4_backward: scalar backward ODE y' = -g(t, y), y(T) = yT

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

inline double gauss_expect(const std::function<double(double)>& f, double lo = -10.0,
                           double hi = 10.0, int n = 4000) {
    // n even; Simpson rule against the standard normal density.
    const double h = (hi - lo) / n;
    auto density = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
    double acc = f(lo) * density(lo) + f(hi) * density(hi);
    for (int i = 1; i < n; ++i) {
        const double x = lo + i * h;
        acc += f(x) * density(x) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

struct PdeOracle {
    // Returns u(0, x_eval).
    static double solve(const std::function<double(double, double, double)>& g_tuux,
                        const std::function<double(double)>& phi, double horizon, double x_eval,
                        double half_width = 8.0, int nx = 801, double safety = 0.4) {
        const double dx = 2.0 * half_width / (nx - 1);
        const double dt_max = safety * dx * dx;
        const int nt = static_cast<int>(std::ceil(horizon / dt_max));
        const double dt = horizon / nt;

        std::vector<double> u(nx), next(nx);
        for (int i = 0; i < nx; ++i) u[i] = phi(-half_width + i * dx);

        for (int n = nt; n-- > 0;) {
            const double t = n * dt;
            for (int i = 0; i < nx; ++i) {
                double uxx, ux;
                if (i == 0) {
                    uxx = 0.0;
                    ux = (u[1] - u[0]) / dx;
                } else if (i == nx - 1) {
                    uxx = 0.0;
                    ux = (u[nx - 1] - u[nx - 2]) / dx;
                } else {
                    uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
                    ux = (u[i + 1] - u[i - 1]) / (2.0 * dx);
                }
                next[i] = u[i] + dt * (0.5 * uxx + g_tuux(t, u[i], ux));
            }
            u.swap(next);
        }

        const double s = (x_eval + half_width) / dx;
        const int i0 = std::max(0, std::min(nx - 2, static_cast<int>(s)));
        const double w = s - i0;
        return (1.0 - w) * u[i0] + w * u[i0 + 1];
    }
};

inline double rk4_backward(const std::function<double(double, double)>& g, double horizon,
                           double y_terminal, int steps = 4096) {
    // Integrates y' = -g(t, y) from T down to 0.
    const double h = horizon / steps;
    double y = y_terminal;
    for (int i = steps; i-- > 0;) {
        const double t1 = (i + 1) * h;
        const double k1 = g(t1, y);
        const double k2 = g(t1 - 0.5 * h, y + 0.5 * h * k1);
        const double k3 = g(t1 - 0.5 * h, y + 0.5 * h * k2);
        const double k4 = g(t1 - h, y + h * k3);
        y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    return y;
}

} // namespace oracles
