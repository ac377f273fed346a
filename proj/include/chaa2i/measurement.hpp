#pragma once

#include "chaa2i/dynamics.hpp"
#include "chaa2i/signals.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace chaa2i {

/// Affine read-out H(x) = weights . x + offset. Coordinate projections are the
/// intended use; the offset exists for test observations such as H = 1.
struct ObservationMap {
    std::vector<double> weights;
    double offset = 0.0;

    static ObservationMap coordinate(std::size_t dimension, std::size_t index);
    static ObservationMap constant(std::size_t dimension, double value);

    double operator()(std::span<const double> x) const;

    friend bool operator==(const ObservationMap&, const ObservationMap&) = default;
};

/// Integrate-and-dump sampler: M = floor(horizon / T_cs) windows of length
/// T_cs starting at t = 0. The tail of the horizon past M * T_cs is dropped.
class MeasurementPlan {
public:
    /// Throws std::invalid_argument if t_cs <= 0 or no window fits.
    explicit MeasurementPlan(double t_cs, ObservationMap observation = ObservationMap::coordinate(3, 1),
                             double horizon = 1.0);

    double interval() const { return t_cs_; }
    std::size_t count() const { return count_; }
    double horizon() const { return horizon_; }
    const ObservationMap& observation() const { return observation_; }

    /// T_cs / T_ng; 2, 3 and 4 mean sampling at 1/2, 1/3 and 1/4 of the Nyquist rate.
    double compression_ratio(const FourierBasis& basis) const { return t_cs_ / basis.nyquist_interval(); }

    /// Integrator steps per window. Throws std::invalid_argument unless
    /// T_cs / h is an integer (relative tolerance 1e-9).
    std::size_t steps_per_window(double h) const;

    friend bool operator==(const MeasurementPlan&, const MeasurementPlan&) = default;

private:
    double t_cs_;
    double horizon_;
    std::size_t count_;
    ObservationMap observation_;
};

struct MeasurementVector {
    std::vector<double> y;
    MeasurementPlan plan;
};

/// y_m = integral of H(x(t)) over window m, accumulated as an extra ODE state
/// that is read out and reset at each window boundary.
MeasurementVector measure(const ChaoticSystem& system, const SparseSignal& signal, std::span<const double> x0,
                          const MeasurementPlan& plan, const IntegratorOptions& options = {});

/// Forward model H(x0, alpha_bar) for candidate coefficients.
MeasurementVector predict_measurements(const ChaoticSystem& system, const FourierBasis& basis,
                                       std::span<const double> alpha_bar, std::span<const double> x0,
                                       const MeasurementPlan& plan, const IntegratorOptions& options = {});

} // namespace chaa2i
