#pragma once

#include "chaa2i/dynamics.hpp"

#include <cstddef>
#include <span>

namespace chaa2i {

/// Shortest grid accepted by estimate_bandwidth.
inline constexpr std::size_t kMinSpectrumNodes = 1024;

/// Smallest frequency f (Hz) such that the one-sided periodogram of the
/// demeaned samples holds at least `fraction` of the total energy in [0, f].
/// Rectangular window. Throws std::invalid_argument for fewer than
/// kMinSpectrumNodes samples or a non-positive step.
double energy_bandwidth(std::span<const double> samples, double step, double fraction = 0.99);

/// energy_bandwidth of one component of a trajectory.
double estimate_bandwidth(const TrajectoryGrid& trajectory, std::size_t channel, double fraction = 0.99);

} // namespace chaa2i
