#include "chaa2i/measurement.hpp"

#include "propagator.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace chaa2i {

ObservationMap ObservationMap::coordinate(std::size_t dimension, std::size_t index) {
    if (index >= dimension) {
        throw std::invalid_argument("ObservationMap::coordinate: index out of range");
    }
    ObservationMap map;
    map.weights.assign(dimension, 0.0);
    map.weights[index] = 1.0;
    return map;
}

ObservationMap ObservationMap::constant(std::size_t dimension, double value) {
    ObservationMap map;
    map.weights.assign(dimension, 0.0);
    map.offset = value;
    return map;
}

double ObservationMap::operator()(std::span<const double> x) const {
    double v = offset;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        v += weights[i] * x[i];
    }
    return v;
}

MeasurementPlan::MeasurementPlan(double t_cs, ObservationMap observation, double horizon)
    : t_cs_(t_cs), horizon_(horizon), count_(0), observation_(std::move(observation)) {
    if (!(t_cs > 0.0) || !std::isfinite(t_cs)) {
        throw std::invalid_argument("MeasurementPlan: sampling interval must be positive");
    }
    if (!(horizon > 0.0)) {
        throw std::invalid_argument("MeasurementPlan: horizon must be positive");
    }
    // Slack absorbs representation error in ratios such as 1 / 0.02.
    count_ = static_cast<std::size_t>(std::floor(horizon / t_cs * (1.0 + 1e-12)));
    if (count_ == 0) {
        throw std::invalid_argument("MeasurementPlan: sampling interval exceeds the horizon");
    }
}

std::size_t MeasurementPlan::steps_per_window(double h) const {
    if (!(h > 0.0)) {
        throw std::invalid_argument("integrator step must be positive");
    }
    const double ratio = t_cs_ / h;
    const double k = std::round(ratio);
    if (k < 1.0 || std::abs(ratio - k) > 1e-9 * ratio) {
        std::ostringstream msg;
        msg << "integrator step " << h << " is not aligned with sampling interval " << t_cs_;
        throw std::invalid_argument(msg.str());
    }
    return static_cast<std::size_t>(k);
}

MeasurementVector predict_measurements(const ChaoticSystem& system, const FourierBasis& basis,
                                       std::span<const double> alpha_bar, std::span<const double> x0,
                                       const MeasurementPlan& plan, const IntegratorOptions& options) {
    const std::size_t per_window = plan.steps_per_window(options.step);
    detail::Propagator prop(system, basis, alpha_bar, options, {}, &plan.observation());
    prop.start(0, x0);
    MeasurementVector out{std::vector<double>(plan.count()), plan};
    for (std::size_t m = 0; m < plan.count(); ++m) {
        prop.clear_channel();
        for (std::size_t s = 0; s < per_window; ++s) {
            prop.step();
        }
        out.y[m] = prop.channel();
    }
    return out;
}

MeasurementVector measure(const ChaoticSystem& system, const SparseSignal& signal, std::span<const double> x0,
                          const MeasurementPlan& plan, const IntegratorOptions& options) {
    return predict_measurements(system, signal.basis(), signal.alpha(), x0, plan, options);
}

} // namespace chaa2i
