#pragma once

// Independent reference computations used to check the library.

#include "chaa2i/dynamics.hpp"
#include "chaa2i/measurement.hpp"
#include "chaa2i/signals.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

/// Excitation s(t) summed term by term from the basis definition.
inline double excitation(std::span<const double> alpha, double t) {
    const std::size_t half = alpha.size() / 2;
    double s = 0.0;
    for (std::size_t k = 0; k < half; ++k) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(k + 1) * t;
        s += alpha[k] * std::cos(w) + alpha[half + k] * std::sin(w);
    }
    return s;
}

inline std::array<double, 3> lorenz(const chaa2i::LorenzConfig& c, const std::array<double, 3>& x, double drive) {
    return {c.tau * c.a * (x[1] - x[0]), c.tau * (c.b * x[0] - x[1] - x[0] * x[2]) + c.mu * drive,
            c.tau * (x[0] * x[1] - c.c * x[2])};
}

/// Classical RK4 of the excited Lorenz system, states at every node.
inline std::vector<std::array<double, 3>> rk4_lorenz(const chaa2i::LorenzConfig& c, std::span<const double> alpha,
                                                      std::array<double, 3> x, double h, std::size_t steps) {
    std::vector<std::array<double, 3>> out{x};
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * h;
        auto axpy = [](const std::array<double, 3>& a, double s, const std::array<double, 3>& b) {
            return std::array<double, 3>{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
        };
        const auto k1 = lorenz(c, x, excitation(alpha, t));
        const auto k2 = lorenz(c, axpy(x, h / 2, k1), excitation(alpha, t + h / 2));
        const auto k3 = lorenz(c, axpy(x, h / 2, k2), excitation(alpha, t + h / 2));
        const auto k4 = lorenz(c, axpy(x, h, k3), excitation(alpha, t + h));
        for (int i = 0; i < 3; ++i) {
            x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        }
        out.push_back(x);
    }
    return out;
}

/// Central-difference d y / d alpha through the forward model.
inline Eigen::MatrixXd fd_sensitivity(const chaa2i::ChaoticSystem& system, const chaa2i::FourierBasis& basis,
                                      std::span<const double> alpha, std::span<const double> x0,
                                      const chaa2i::MeasurementPlan& plan, double delta,
                                      const chaa2i::IntegratorOptions& options = {}) {
    Eigen::MatrixXd s(static_cast<Eigen::Index>(plan.count()), static_cast<Eigen::Index>(basis.size()));
    std::vector<double> a(alpha.begin(), alpha.end());
    for (std::size_t k = 0; k < basis.size(); ++k) {
        const double keep = a[k];
        a[k] = keep + delta;
        const auto up = chaa2i::predict_measurements(system, basis, a, x0, plan, options).y;
        a[k] = keep - delta;
        const auto down = chaa2i::predict_measurements(system, basis, a, x0, plan, options).y;
        a[k] = keep;
        for (std::size_t m = 0; m < up.size(); ++m) {
            s(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = (up[m] - down[m]) / (2.0 * delta);
        }
    }
    return s;
}

/// Composite trapezoid rule of H over each window of a stored trajectory,
/// optionally with the Euler-Maclaurin end correction -h^2/12 (g'(b) - g'(a)), g = H(x(t)).
inline std::vector<double> trapezoid_measurements(const chaa2i::ChaoticSystem& system,
                                                  const chaa2i::SparseSignal& signal,
                                                  const chaa2i::TrajectoryGrid& grid,
                                                  const chaa2i::MeasurementPlan& plan,
                                                  bool end_correction = true) {
    const std::size_t per = plan.steps_per_window(grid.step);
    const auto& weights = plan.observation().weights;
    auto slope = [&](std::size_t n) {
        std::vector<double> dx(grid.dimension);
        system.field(grid.time(n), grid.state(n), dx);
        dx[system.excitation_row()] += system.coupling() * excitation(signal.alpha(), grid.time(n));
        double g = 0.0;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            g += weights[i] * dx[i];
        }
        return g;
    };
    std::vector<double> y(plan.count());
    for (std::size_t m = 0; m < plan.count(); ++m) {
        double acc = 0.0;
        for (std::size_t n = m * per; n < (m + 1) * per; ++n) {
            acc += 0.5 * grid.step * (plan.observation()(grid.state(n)) + plan.observation()(grid.state(n + 1)));
        }
        if (end_correction) {
            acc -= grid.step * grid.step / 12.0 * (slope((m + 1) * per) - slope(m * per));
        }
        y[m] = acc;
    }
    return y;
}

/// Pearson correlation of explicitly centered columns.
inline Eigen::MatrixXd pearson(const Eigen::MatrixXd& s) {
    Eigen::MatrixXd c = s.rowwise() - s.colwise().mean();
    const Eigen::VectorXd norms = c.colwise().norm();
    Eigen::MatrixXd g = c.transpose() * c;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            g(i, j) /= norms(i) * norms(j);
        }
    }
    return g;
}

/// [S; sqrt(lambda / (alpha^2 + eps))] built row by row.
inline Eigen::MatrixXd stacked(const Eigen::MatrixXd& s, std::span<const double> alpha, double lambda, double eps) {
    const Eigen::Index b = s.cols();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(s.rows() + b, b);
    out.topRows(s.rows()) = s;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double a = alpha[static_cast<std::size_t>(i)];
        out(s.rows() + i, i) = std::sqrt(lambda / (a * a + eps));
    }
    return out;
}

inline std::size_t svd_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-10) {
    const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
    std::size_t r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > rel_tol * sv(0)) {
            ++r;
        }
    }
    return r;
}

} // namespace oracle
