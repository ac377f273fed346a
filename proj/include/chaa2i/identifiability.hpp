#pragma once

#include "chaa2i/dynamics.hpp"
#include "chaa2i/measurement.hpp"
#include "chaa2i/signals.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chaa2i {

/// Raised when a column has (numerically) no spread, so its correlation with
/// anything is undefined.
class DegenerateColumnError : public std::runtime_error {
public:
    DegenerateColumnError(const std::string& what, std::vector<std::size_t> columns)
        : std::runtime_error(what), columns_(std::move(columns)) {}
    const std::vector<std::size_t>& columns() const { return columns_; }

private:
    std::vector<std::size_t> columns_;
};

/// Centered column norms below this are treated as degenerate.
inline constexpr double kDegenerateNorm = 1e-14;
/// Correlations within this distance of +-1 are reported as exactly +-1, so
/// that duplicated columns give mu == 1 despite rounding in the normalization.
inline constexpr double kUnitCorrelationSnap = 1e-14;

/// Diagonal reweighting w_i = 1 / (alpha_i^2 + epsilon) of the smoothed l0 term.
struct WeightMatrix {
    std::vector<double> w;
    double epsilon = 1e-3;

    /// Throws std::invalid_argument unless epsilon > 0.
    static WeightMatrix from_coefficients(std::span<const double> alpha, double epsilon);
};

/// d y / d alpha at the true coefficients, M x B, read from the variational
/// equations of the integrate-and-dump channel.
Eigen::MatrixXd sensitivity_matrix(const ChaoticSystem& system, const SparseSignal& signal,
                                   std::span<const double> x0, const MeasurementPlan& plan,
                                   const IntegratorOptions& options = {});

/// Pearson correlations between centered columns. Throws DegenerateColumnError
/// if any centered column norm is below kDegenerateNorm.
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& s);

/// Largest |g_ij| over i != j. Throws std::invalid_argument for fewer than two
/// columns or a non-square input.
double mu_statistic(const Eigen::MatrixXd& g);

/// [S; sqrt(lambda) W^{1/2}] with W built from alpha and epsilon.
Eigen::MatrixXd regularized_sensitivity(const Eigen::MatrixXd& s, std::span<const double> alpha, double lambda,
                                        double epsilon);

/// Correlation matrix of the regularized sensitivity matrix evaluated from S^T S,
/// the column sums and the weights, without forming the stacked matrix. Column
/// means run over all N = M + B entries.
Eigen::MatrixXd regularized_correlation(const Eigen::MatrixXd& s, std::span<const double> alpha, double lambda,
                                        double epsilon);

struct SensitivityReport {
    Eigen::MatrixXd S;
    Eigen::MatrixXd S_lambda;
    Eigen::MatrixXd G_lambda;
    double mu = 0.0;
    double lambda = 0.0;
    double epsilon = 0.0;
    std::size_t N = 0;
};

SensitivityReport analyze_sensitivity(const Eigen::MatrixXd& s, std::span<const double> alpha, double lambda,
                                      double epsilon);

struct CrcResult {
    bool reconstructable = false;
    double mu = 1.0;
};

/// Correlation-based reconstructable condition: mu < 1.
CrcResult crc_check(const SensitivityReport& report);

struct AveragedMu {
    double mean = 0.0; // NaN when no initial state succeeded
    std::vector<double> per_state;
    std::vector<std::size_t> state_index; // which initial state produced each per_state entry
    std::vector<std::size_t> failed;
    std::vector<std::string> failure_reason;

    bool ok() const { return !per_state.empty(); }
};

/// Mean of mu over a set of initial states. States whose integration diverges
/// (or whose sensitivity columns are degenerate) are skipped and listed in
/// `failed`. Runs the states in parallel with OpenMP; the reduction is done in
/// index order so the result does not depend on the thread count.
AveragedMu averaged_mu(const ChaoticSystem& system, const SparseSignal& signal, std::span<const State> initial_states,
                       const MeasurementPlan& plan, double lambda, double epsilon,
                       const IntegratorOptions& options = {});

/// Single-threaded reference for averaged_mu.
AveragedMu averaged_mu_serial(const ChaoticSystem& system, const SparseSignal& signal,
                              std::span<const State> initial_states, const MeasurementPlan& plan, double lambda,
                              double epsilon, const IntegratorOptions& options = {});

/// Mutual coherence max_{i != j} |<M_i, M_j>| / (|M_i| |M_j|). Throws
/// std::invalid_argument for fewer than two columns or a zero column.
double coherence(const Eigen::MatrixXd& m);

/// Numerical rank: singular values above rel_tol * sigma_max.
std::size_t numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-10);

} // namespace chaa2i
