#pragma once

#include "chaa2i/dynamics.hpp"
#include "chaa2i/experiment.hpp"
#include "chaa2i/identifiability.hpp"
#include "chaa2i/measurement.hpp"
#include "chaa2i/reconstruct.hpp"
#include "chaa2i/signals.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chaa2i {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

Json to_json(const SparseSignal& signal);
/// Throws std::invalid_argument on missing keys or a length that disagrees with "B".
SparseSignal signal_from_json(const Json& j);

struct MeasurementFile {
    MeasurementVector measurements;
    std::optional<State> x0;
};

/// {"T_cs", "y"} and "x0" when given. The horizon is the unit interval.
Json to_json(const MeasurementVector& y, std::optional<std::span<const double>> x0 = std::nullopt);
MeasurementFile measurements_from_json(const Json& j);

struct IdentifiabilityReport {
    double mu = 0.0;
    double mu_bar = 0.0;
    double lambda = 0.0;
    double epsilon = 0.0;
    double t_cs = 0.0;
    std::size_t w = 0;
    bool reconstructable = false;
    std::vector<double> per_state_mu;
    std::vector<std::size_t> failed_states;

    friend bool operator==(const IdentifiabilityReport&, const IdentifiabilityReport&) = default;
};

Json to_json(const IdentifiabilityReport& report);
IdentifiabilityReport identifiability_from_json(const Json& j);

Json to_json(const ReconstructionResult& result);
/// Restores the fields written by to_json; the final shooting state is not stored.
ReconstructionResult reconstruction_from_json(const Json& j);

Json to_json(const ExperimentConfig& config);
/// Overlays the keys present in j onto base, so absent keys keep their values.
ExperimentConfig config_from_json(const Json& j, ExperimentConfig base = {});

std::string records_csv(std::span<const SweepRecord> records);
std::vector<SweepRecord> records_from_csv(const std::string& text);
std::string measurements_csv(const MeasurementVector& y);
std::string trajectory_csv(const TrajectoryGrid& grid);
/// Columns t, s sampled at t = k / rate for k = 0 .. rate.
std::string waveform_csv(const SparseSignal& signal, double rate = 1000.0);
std::string bandwidth_csv(std::span<const BandwidthPoint> points);

Json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
/// Creates parent directories. JSON is written with two-space indentation and a trailing newline.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);

} // namespace chaa2i
