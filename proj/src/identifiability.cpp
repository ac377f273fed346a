#include "chaa2i/identifiability.hpp"

#include "propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace chaa2i {

namespace {

double snap_unit(double g) {
    if (g > 1.0 - kUnitCorrelationSnap) {
        return 1.0;
    }
    if (g < -1.0 + kUnitCorrelationSnap) {
        return -1.0;
    }
    return g;
}

struct StateOutcome {
    bool ok = false;
    double mu = 0.0;
    std::string reason;
};

StateOutcome mu_for_state(const ChaoticSystem& system, const SparseSignal& signal, std::span<const double> x0,
                          const MeasurementPlan& plan, double lambda, double epsilon,
                          const IntegratorOptions& options) {
    StateOutcome out;
    try {
        const Eigen::MatrixXd s = sensitivity_matrix(system, signal, x0, plan, options);
        out.mu = mu_statistic(regularized_correlation(s, signal.alpha(), lambda, epsilon));
        out.ok = true;
    } catch (const DivergenceError& e) {
        out.reason = e.what();
    } catch (const DegenerateColumnError& e) {
        out.reason = e.what();
    }
    return out;
}

AveragedMu reduce(const std::vector<StateOutcome>& outcomes) {
    AveragedMu result;
    double sum = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].ok) {
            result.per_state.push_back(outcomes[i].mu);
            result.state_index.push_back(i);
            sum += outcomes[i].mu;
        } else {
            result.failed.push_back(i);
            result.failure_reason.push_back(outcomes[i].reason);
        }
    }
    result.mean = result.per_state.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : sum / static_cast<double>(result.per_state.size());
    return result;
}

} // namespace

WeightMatrix WeightMatrix::from_coefficients(std::span<const double> alpha, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("WeightMatrix: epsilon must be positive");
    }
    WeightMatrix wm;
    wm.epsilon = epsilon;
    wm.w.resize(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        wm.w[i] = 1.0 / (alpha[i] * alpha[i] + epsilon);
    }
    return wm;
}

Eigen::MatrixXd sensitivity_matrix(const ChaoticSystem& system, const SparseSignal& signal,
                                   std::span<const double> x0, const MeasurementPlan& plan,
                                   const IntegratorOptions& options) {
    const std::size_t per_window = plan.steps_per_window(options.step);
    const std::size_t b = signal.basis().size();
    detail::Propagator prop(system, signal.basis(), signal.alpha(), options, {false, true}, &plan.observation());
    prop.start(0, x0);
    Eigen::MatrixXd s(plan.count(), b);
    for (std::size_t m = 0; m < plan.count(); ++m) {
        prop.clear_channel();
        for (std::size_t k = 0; k < per_window; ++k) {
            prop.step();
        }
        const auto grad = prop.channel_gradient();
        for (std::size_t k = 0; k < b; ++k) {
            s(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = grad[prop.coefficient_offset() + k];
        }
    }
    return s;
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& s) {
    const Eigen::RowVectorXd mean = s.colwise().mean();
    const Eigen::MatrixXd centered = s.rowwise() - mean;
    const Eigen::VectorXd norms = centered.colwise().norm().transpose();

    std::vector<std::size_t> degenerate;
    for (Eigen::Index j = 0; j < norms.size(); ++j) {
        if (!(norms(j) >= kDegenerateNorm)) {
            degenerate.push_back(static_cast<std::size_t>(j));
        }
    }
    if (!degenerate.empty()) {
        std::ostringstream msg;
        msg << degenerate.size() << " sensitivity column(s) have no spread; first is column " << degenerate.front();
        throw DegenerateColumnError(msg.str(), std::move(degenerate));
    }

    const Eigen::MatrixXd gram = centered.transpose() * centered;
    const Eigen::Index b = s.cols();
    Eigen::MatrixXd g(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        g(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < b; ++j) {
            const double v = std::clamp(snap_unit(gram(i, j) / (norms(i) * norms(j))), -1.0, 1.0);
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

double mu_statistic(const Eigen::MatrixXd& g) {
    if (g.rows() != g.cols()) {
        throw std::invalid_argument("mu_statistic: correlation matrix must be square");
    }
    if (g.rows() < 2) {
        throw std::invalid_argument("mu_statistic: need at least two columns");
    }
    double mu = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
            if (i != j) {
                mu = std::max(mu, std::abs(g(i, j)));
            }
        }
    }
    return mu;
}

Eigen::MatrixXd regularized_sensitivity(const Eigen::MatrixXd& s, std::span<const double> alpha, double lambda,
                                        double epsilon) {
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("regularized_sensitivity: lambda must be non-negative");
    }
    if (static_cast<Eigen::Index>(alpha.size()) != s.cols()) {
        throw std::invalid_argument("regularized_sensitivity: coefficient count does not match columns");
    }
    const WeightMatrix wm = WeightMatrix::from_coefficients(alpha, epsilon);
    const Eigen::Index m = s.rows();
    const Eigen::Index b = s.cols();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m + b, b);
    out.topRows(m) = s;
    for (Eigen::Index i = 0; i < b; ++i) {
        out(m + i, i) = std::sqrt(lambda * wm.w[static_cast<std::size_t>(i)]);
    }
    return out;
}

Eigen::MatrixXd regularized_correlation(const Eigen::MatrixXd& s, std::span<const double> alpha, double lambda,
                                        double epsilon) {
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("regularized_correlation: lambda must be non-negative");
    }
    if (static_cast<Eigen::Index>(alpha.size()) != s.cols()) {
        throw std::invalid_argument("regularized_correlation: coefficient count does not match columns");
    }
    const WeightMatrix wm = WeightMatrix::from_coefficients(alpha, epsilon);
    const Eigen::Index b = s.cols();
    const double n = static_cast<double>(s.rows() + b);

    const Eigen::MatrixXd gram = s.transpose() * s;
    Eigen::VectorXd mean(b);
    Eigen::VectorXd lw(b);
    Eigen::VectorXd norm(b);
    std::vector<std::size_t> degenerate;
    for (Eigen::Index i = 0; i < b; ++i) {
        lw(i) = lambda * wm.w[static_cast<std::size_t>(i)];
        mean(i) = (s.col(i).sum() + std::sqrt(lw(i))) / n;
        const double sq = gram(i, i) + lw(i) - n * mean(i) * mean(i);
        norm(i) = std::sqrt(std::max(sq, 0.0));
        if (!(norm(i) >= kDegenerateNorm)) {
            degenerate.push_back(static_cast<std::size_t>(i));
        }
    }
    if (!degenerate.empty()) {
        std::ostringstream msg;
        msg << degenerate.size() << " regularized sensitivity column(s) have no spread; first is column "
            << degenerate.front();
        throw DegenerateColumnError(msg.str(), std::move(degenerate));
    }

    Eigen::MatrixXd g(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        g(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < b; ++j) {
            const double v = snap_unit((gram(i, j) - n * mean(i) * mean(j)) / (norm(i) * norm(j)));
            g(i, j) = std::clamp(v, -1.0, 1.0);
            g(j, i) = g(i, j);
        }
    }
    return g;
}

SensitivityReport analyze_sensitivity(const Eigen::MatrixXd& s, std::span<const double> alpha, double lambda,
                                      double epsilon) {
    SensitivityReport r;
    r.S = s;
    r.S_lambda = regularized_sensitivity(s, alpha, lambda, epsilon);
    r.G_lambda = correlation_matrix(r.S_lambda);
    r.mu = mu_statistic(r.G_lambda);
    r.lambda = lambda;
    r.epsilon = epsilon;
    r.N = static_cast<std::size_t>(r.S_lambda.rows());
    return r;
}

CrcResult crc_check(const SensitivityReport& report) {
    return {report.mu < 1.0, report.mu};
}

AveragedMu averaged_mu(const ChaoticSystem& system, const SparseSignal& signal, std::span<const State> initial_states,
                       const MeasurementPlan& plan, double lambda, double epsilon,
                       const IntegratorOptions& options) {
    if (initial_states.empty()) {
        throw std::invalid_argument("averaged_mu: no initial states");
    }
    std::vector<StateOutcome> outcomes(initial_states.size());
    const auto n = static_cast<std::ptrdiff_t>(initial_states.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        outcomes[k] = mu_for_state(system, signal, initial_states[k], plan, lambda, epsilon, options);
    }
    return reduce(outcomes);
}

AveragedMu averaged_mu_serial(const ChaoticSystem& system, const SparseSignal& signal,
                              std::span<const State> initial_states, const MeasurementPlan& plan, double lambda,
                              double epsilon, const IntegratorOptions& options) {
    if (initial_states.empty()) {
        throw std::invalid_argument("averaged_mu: no initial states");
    }
    std::vector<StateOutcome> outcomes;
    outcomes.reserve(initial_states.size());
    for (const auto& x0 : initial_states) {
        outcomes.push_back(mu_for_state(system, signal, x0, plan, lambda, epsilon, options));
    }
    return reduce(outcomes);
}

double coherence(const Eigen::MatrixXd& m) {
    if (m.cols() < 2) {
        throw std::invalid_argument("coherence: need at least two columns");
    }
    const Eigen::VectorXd norms = m.colwise().norm().transpose();
    for (Eigen::Index j = 0; j < norms.size(); ++j) {
        if (norms(j) == 0.0) {
            throw std::invalid_argument("coherence: column " + std::to_string(j) + " is zero");
        }
    }
    const Eigen::MatrixXd gram = m.transpose() * m;
    double c = 0.0;
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
        for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
            c = std::max(c, std::abs(snap_unit(gram(i, j) / (norms(i) * norms(j)))));
        }
    }
    return std::min(c, 1.0);
}

std::size_t numerical_rank(const Eigen::MatrixXd& m, double rel_tol) {
    if (m.size() == 0) {
        return 0;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const Eigen::VectorXd sv = svd.singularValues();
    const double cutoff = rel_tol * sv(0);
    std::size_t rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cutoff) {
            ++rank;
        }
    }
    return rank;
}

} // namespace chaa2i
