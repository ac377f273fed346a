#pragma once

#include "chaa2i/dynamics.hpp"
#include "chaa2i/reconstruct.hpp"
#include "chaa2i/signals.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chaa2i {

/// Experiment grid shared by the sweeps and the pipeline.
struct ExperimentConfig {
    std::size_t basis = 100;
    LorenzConfig lorenz{};
    std::vector<double> t_cs{0.02};
    std::vector<std::size_t> sparsity{5};
    std::vector<AmplitudeLaw> laws{AmplitudeLaw::gaussian};
    std::vector<double> lambda{2e-3};
    double epsilon = 1e-3;
    std::size_t n_trials = 30;
    std::size_t n_realizations = 20;
    std::size_t n_initial_states = 20;
    std::uint64_t seed = 1;
    double step = 1e-4;
    /// Subinterval count for reconstruction; 0 selects the default.
    std::size_t segments = 0;
    std::size_t max_inner = 50;
    std::size_t max_outer = 20;
    double tolerance = 1e-3;
    bool damping = true;
    NodeInit node_init = NodeInit::integrate;
    /// Worker threads for trials; 0 keeps the OpenMP default.
    std::size_t workers = 0;
    std::filesystem::path output_dir = "out";

    /// Throws std::invalid_argument on empty lists, T_cs giving no window,
    /// W > B, or non-positive step, epsilon or tolerance.
    void validate() const;
    MsIrnlsConfig solver(double lambda_value, std::uint64_t solver_seed) const;
};

/// Trial counts of the full-scale study: 1000 trials for mu sweeps, 100 for
/// reconstruction sweeps.
inline constexpr std::size_t kPaperMuTrials = 1000;
inline constexpr std::size_t kPaperReconTrials = 100;

struct SweepRecord {
    std::string experiment;
    double t_cs = 0.0;
    std::size_t w = 0;
    std::string law;
    double lambda = 0.0;
    std::size_t trial = 0;
    std::string statistic;
    double value = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const SweepRecord&, const SweepRecord&) = default;
};

struct SweepResult {
    /// Per-trial rows, sorted by (T_cs, W, law, lambda, trial).
    std::vector<SweepRecord> records;
    /// One mean row per cell, trial field holding the number of contributing trials.
    std::vector<SweepRecord> means;
    std::vector<std::string> failures;
};

std::string law_name(AmplitudeLaw law);
/// Throws std::invalid_argument for an unknown name.
AmplitudeLaw parse_law(const std::string& name);

/// Seeds of one trial. Signal draws depend on (W, law, trial) and initial
/// states on the trial only, so cells share random numbers where they can.
std::uint64_t signal_seed(std::uint64_t base, std::size_t w, AmplitudeLaw law, std::size_t trial);
std::uint64_t state_seed(std::uint64_t base, std::size_t trial);

/// Averaged mu for every (T_cs, W, law, lambda, trial). One sensitivity matrix
/// per initial state is shared by all lambda values.
SweepResult sweep_mu(const ExperimentConfig& config);

/// Best-of-n_realizations relative error for every (T_cs, W, law, trial) at
/// the first lambda. W = 0 cells are skipped with a logged diagnostic.
SweepResult sweep_reconstruction(const ExperimentConfig& config);

struct BandwidthOptions {
    /// Recorded span after the transient, in seconds of normalized time.
    double duration = 10.0;
    /// Discarded lead-in in scaled time units (tau * t).
    double transient = 10.0;
    std::size_t channel = 1;
    std::size_t runs = 5;
    std::uint64_t seed = 1;
    IntegratorOptions integrator{};
};

struct BandwidthPoint {
    double tau = 0.0;
    double mean = 0.0;
    std::vector<double> runs;
};

/// 99%-energy bandwidth of the unforced system, averaged over runs started
/// from (1, 1, 1) plus a uniform [-1, 1]^3 offset.
BandwidthPoint lorenz_bandwidth(const LorenzConfig& config, const BandwidthOptions& options = {});
std::vector<BandwidthPoint> sweep_bandwidth(const LorenzConfig& config, std::span<const double> taus,
                                            const BandwidthOptions& options = {});

class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct PipelineResult {
    SparseSignal signal;
    State x0;
    ReconstructionResult reconstruction;
    double mu = 0.0;
    double mu_bar = 0.0;
    std::vector<std::filesystem::path> artifacts;
};

/// End to end demo at the first T_cs, W, law and lambda of the config: signal,
/// measurements, identifiability report, reconstruction and waveforms on a
/// 1 kHz grid, all written to config.output_dir.
PipelineResult run_pipeline(const ExperimentConfig& config,
                            std::optional<std::span<const double>> alpha = std::nullopt);

} // namespace chaa2i
