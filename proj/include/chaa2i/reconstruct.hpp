#pragma once

#include "chaa2i/dynamics.hpp"
#include "chaa2i/measurement.hpp"
#include "chaa2i/signals.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chaa2i {

/// Settings of the multiple-shooting iteratively reweighted nonlinear least
/// squares solver.
struct MsIrnlsConfig {
    /// Number of shooting subintervals L; 0 selects default_segment_count(M).
    std::size_t segments = 0;
    double lambda = 2e-3;
    double epsilon = 1e-3;
    /// Inner (Gauss-Newton) iteration cap J per outer reweighting.
    std::size_t max_inner = 50;
    /// Stop when ||delta alpha|| <= tolerance * max(||alpha||, 1).
    double tolerance = 1e-3;
    std::size_t max_outer = 20;
    /// Backtracking on the merit function. Off means every step is taken in full.
    bool damping = true;
    std::size_t max_halvings = 20;
    double join_tolerance = 1e-6;
    std::uint64_t seed = 0;
    IntegratorOptions integrator{};
};

/// One subinterval per five measurement windows, clamped to [1, M].
std::size_t default_segment_count(std::size_t windows);

/// Window index where each of the `segments` subintervals starts, plus the
/// end sentinel M. Windows are spread as evenly as possible, each subinterval
/// receiving at least one. Throws std::invalid_argument if segments is 0 or
/// exceeds the window count.
std::vector<std::size_t> segment_boundaries(std::size_t windows, std::size_t segments);

/// Decision variables of the shooting problem: the coefficients and the
/// initial states of subintervals 2..L (the first subinterval starts at the
/// known x0).
struct ShootingState {
    std::vector<double> alpha;
    std::vector<State> nodes;
};

struct RealizationSummary {
    std::size_t index = 0;
    bool failed = false;
    bool converged = false;
    std::optional<double> relative_error;
    double score = 0.0;
    std::size_t iterations = 0;
    std::string diagnostic;
};

struct ReconstructionResult {
    std::vector<double> alpha_hat;
    std::optional<double> err_rel;
    /// Smoothed objective (shooting data fit + reweighted penalty) after each accepted iteration.
    std::vector<double> cost_trace;
    /// Merit (smoothed objective + rho * sum of join mismatch norms) before and after each accepted step.
    std::vector<double> merit_before;
    std::vector<double> merit_after;
    bool converged = false;
    bool stalled = false;
    bool failed = false;
    std::size_t realizations = 1;
    std::size_t best_realization = 0;
    std::size_t iterations = 0;
    std::size_t outer_iterations = 0;
    std::size_t regularized_solves = 0;
    double max_join_mismatch = 0.0;
    /// Single-shooting data fit at alpha_hat plus lambda * sum alpha^2 / (alpha^2 + epsilon).
    double score = 0.0;
    std::string diagnostic;
    std::vector<RealizationSummary> per_realization;
    ShootingState final_state;
};

/// ||y - H(x0, alpha_bar)||^2 + lambda * ||alpha_bar||_0 with the exact count
/// of nonzero entries.
double cost(const MeasurementVector& y, const ChaoticSystem& system, const FourierBasis& basis,
            std::span<const double> x0, std::span<const double> alpha_bar, double lambda,
            const IntegratorOptions& options = {});

/// Least-squares data fit alone, ||y - H(x0, alpha_bar)||^2.
double data_fit(const MeasurementVector& y, const ChaoticSystem& system, const FourierBasis& basis,
                std::span<const double> x0, std::span<const double> alpha_bar, const IntegratorOptions& options = {});

/// One realization of the solver from the given starting point. When
/// node_init is empty the subinterval states are filled by integrating from
/// x0 with alpha_init; if that diverges the realization is reported failed.
ReconstructionResult ms_irnls(const MeasurementVector& y, const ChaoticSystem& system, const FourierBasis& basis,
                              std::span<const double> x0, const MsIrnlsConfig& config,
                              std::span<const double> alpha_init,
                              const std::optional<std::vector<State>>& node_init = std::nullopt);

enum class NodeInit {
    /// Integrate from x0 with the drawn starting coefficients.
    integrate,
    /// Independent draws from the unforced attractor.
    attractor,
};

struct MultiStartOptions {
    std::size_t realizations = 20;
    NodeInit node_init = NodeInit::integrate;
    AttractorSampling sampling{};
};

/// Runs independent realizations, each from coefficients drawn uniformly on
/// [-1, 1]^B (and node states per options.node_init), seeded from
/// config.seed and the realization index. With a reference vector the
/// realization of least relative error wins, otherwise the one of least
/// score; ties go to the lower index. Realizations run in parallel with OpenMP.
ReconstructionResult multi_start_reconstruct(const MeasurementVector& y, const LorenzConfig& lorenz,
                                             const FourierBasis& basis, std::span<const double> x0,
                                             const MsIrnlsConfig& config, const MultiStartOptions& options = {},
                                             std::optional<std::span<const double>> truth = std::nullopt);

/// Single-threaded reference for multi_start_reconstruct.
ReconstructionResult multi_start_reconstruct_serial(const MeasurementVector& y, const LorenzConfig& lorenz,
                                                    const FourierBasis& basis, std::span<const double> x0,
                                                    const MsIrnlsConfig& config,
                                                    const MultiStartOptions& options = {},
                                                    std::optional<std::span<const double>> truth = std::nullopt);

} // namespace chaa2i
