#pragma once

#include "chaa2i/signals.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace chaa2i {

using State = std::vector<double>;

/// Autonomous vector field F(x, t) of a chaotic system together with the row
/// that receives the excitation mu * s(t).
class ChaoticSystem {
public:
    virtual ~ChaoticSystem() = default;

    virtual std::size_t dimension() const = 0;

    /// Unforced field; dx has dimension() entries.
    virtual void field(double t, std::span<const double> x, std::span<double> dx) const = 0;

    /// dF/dx at (x, t), row-major dimension() x dimension().
    virtual void jacobian(double t, std::span<const double> x, std::span<double> jac) const = 0;

    /// 0-based state row that receives mu * s(t).
    virtual std::size_t excitation_row() const = 0;

    virtual double coupling() const = 0;
};

/// Parameters of the time-scaled Lorenz system excited on the second state.
struct LorenzConfig {
    double a = 10.0;
    double b = 28.0;
    double c = 2.66;
    double tau = 15.0;
    double mu = 20.0;

    /// Throws std::invalid_argument if tau <= 0 or mu < 0.
    void validate() const;
};

class LorenzSystem final : public ChaoticSystem {
public:
    explicit LorenzSystem(const LorenzConfig& config = {});

    const LorenzConfig& config() const { return config_; }

    std::size_t dimension() const override { return 3; }
    void field(double t, std::span<const double> x, std::span<double> dx) const override;
    void jacobian(double t, std::span<const double> x, std::span<double> jac) const override;
    std::size_t excitation_row() const override { return 1; }
    double coupling() const override { return config_.mu; }

private:
    LorenzConfig config_;
};

/// Excited Lorenz field with the drive value s(t) supplied directly.
std::array<double, 3> lorenz_field(const LorenzConfig& config, std::span<const double> x, double t, double drive);

struct IntegratorOptions {
    double step = 1e-4;
    /// Any |state component| above this raises DivergenceError.
    double blowup_bound = 1e6;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

/// Fixed-step solution on the nodes t0, t0 + h, ..., t1.
struct TrajectoryGrid {
    double t0 = 0.0;
    double step = 0.0;
    std::size_t dimension = 0;
    std::vector<double> states; // row-major, one row per node

    std::size_t size() const { return dimension == 0 ? 0 : states.size() / dimension; }
    double time(std::size_t node) const { return t0 + static_cast<double>(node) * step; }
    double t1() const { return time(size() - 1); }
    std::span<const double> state(std::size_t node) const {
        return std::span<const double>(states).subspan(node * dimension, dimension);
    }
    double component(std::size_t node, std::size_t channel) const { return states[node * dimension + channel]; }
};

/// State and forward sensitivities at one grid node.
struct SensitivityState {
    double t = 0.0;
    State x;
    Eigen::MatrixXd dx_dalpha; // d x B
    Eigen::MatrixXd dx_dx0;    // d x d
};

/// Number of steps of size h that cover [t0, t1]. Throws std::invalid_argument
/// if h <= 0, t1 < t0, or h does not divide the interval.
std::size_t step_count(double t0, double t1, double h);

/// Classical RK4 solution of x' = F(x, t) + mu s(t) e_row.
TrajectoryGrid integrate(const ChaoticSystem& system, const SparseSignal& signal, std::span<const double> x0,
                         double t0, double t1, const IntegratorOptions& options = {});

/// Integrates the state together with d x/d alpha and d x/d x0 using the same
/// RK4 scheme, recording every `stride`-th node (the last node is always kept).
std::vector<SensitivityState> integrate_with_sensitivities(const ChaoticSystem& system, const SparseSignal& signal,
                                                           std::span<const double> x0, double t0, double t1,
                                                           const IntegratorOptions& options = {},
                                                           std::size_t stride = 1);

struct AttractorSampling {
    /// Discarded lead-in and sampled span, both in scaled time units (tau * t).
    double transient = 10.0;
    double span = 100.0;
    std::array<double, 3> start{1.0, 1.0, 1.0};
    IntegratorOptions integrator{};
};

/// Draws n distinct grid states from a post-transient run of the unforced
/// Lorenz system. Deterministic in seed.
std::vector<State> sample_attractor_initial_states(const LorenzConfig& config, std::size_t n, std::uint64_t seed,
                                                   const AttractorSampling& sampling = {});

} // namespace chaa2i
