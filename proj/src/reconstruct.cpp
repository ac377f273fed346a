#include "chaa2i/reconstruct.hpp"

#include "chaa2i/random.hpp"
#include "propagator.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace chaa2i {

namespace {

constexpr std::uint64_t kAlphaStream = 0xa1;
constexpr std::uint64_t kNodeStream = 0xb2;
constexpr double kRoundoff = 1e-12;

struct Layout {
    std::vector<std::size_t> bounds;
    std::size_t per_window = 0;

    std::size_t segments() const { return bounds.size() - 1; }
};

// Predicted measurements with every subinterval started from its own node.
struct ShootingEval {
    std::vector<double> h;
    std::vector<State> end;
    Eigen::MatrixXd dh_dalpha;               // M x B
    Eigen::MatrixXd dh_dnode;                // M x d, w.r.t. the start state of the owning subinterval
    std::vector<Eigen::MatrixXd> end_dnode;  // d x d per subinterval
    std::vector<Eigen::MatrixXd> end_dalpha; // d x B per subinterval
};

ShootingEval evaluate_shooting(const ChaoticSystem& system, const FourierBasis& basis, const MeasurementPlan& plan,
                               const Layout& layout, std::span<const double> x0, const ShootingState& state,
                               const IntegratorOptions& options, bool with_sensitivities) {
    const std::size_t d = system.dimension();
    const std::size_t b = basis.size();
    const std::size_t m_total = plan.count();
    const std::size_t segs = layout.segments();

    detail::Propagator::Columns cols{};
    if (with_sensitivities) {
        cols = {true, true};
    }
    detail::Propagator prop(system, basis, state.alpha, options, cols, &plan.observation());

    ShootingEval ev;
    ev.h.resize(m_total);
    ev.end.resize(segs);
    if (with_sensitivities) {
        ev.dh_dalpha.resize(static_cast<Eigen::Index>(m_total), static_cast<Eigen::Index>(b));
        ev.dh_dnode.resize(static_cast<Eigen::Index>(m_total), static_cast<Eigen::Index>(d));
        ev.end_dnode.resize(segs);
        ev.end_dalpha.resize(segs);
    }
    for (std::size_t l = 0; l < segs; ++l) {
        const std::span<const double> start = l == 0 ? x0 : std::span<const double>(state.nodes[l - 1]);
        prop.start(layout.bounds[l] * layout.per_window, start);
        for (std::size_t m = layout.bounds[l]; m < layout.bounds[l + 1]; ++m) {
            prop.clear_channel();
            for (std::size_t s = 0; s < layout.per_window; ++s) {
                prop.step();
            }
            ev.h[m] = prop.channel();
            if (with_sensitivities) {
                const auto grad = prop.channel_gradient();
                const auto row = static_cast<Eigen::Index>(m);
                for (std::size_t j = 0; j < d; ++j) {
                    ev.dh_dnode(row, static_cast<Eigen::Index>(j)) = grad[j];
                }
                for (std::size_t k = 0; k < b; ++k) {
                    ev.dh_dalpha(row, static_cast<Eigen::Index>(k)) = grad[d + k];
                }
            }
        }
        const auto x = prop.state();
        ev.end[l].assign(x.begin(), x.end());
        if (with_sensitivities) {
            Eigen::MatrixXd g(d, d);
            Eigen::MatrixXd p(d, b);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = prop.sensitivity(i, j);
                }
                for (std::size_t k = 0; k < b; ++k) {
                    p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = prop.sensitivity(i, d + k);
                }
            }
            ev.end_dnode[l] = std::move(g);
            ev.end_dalpha[l] = std::move(p);
        }
    }
    return ev;
}

struct Objective {
    double fit = 0.0;
    double penalty = 0.0;
    double infeasibility = 0.0; // sum over joins of ||x(t_l+) - x0^{l+1}||_2
    double max_mismatch = 0.0;  // largest |component| of any join mismatch

    double smoothed() const { return fit + penalty; }
    double merit(double rho) const { return fit + penalty + rho * infeasibility; }
};

Objective objective(const ShootingEval& ev, std::span<const double> y, const ShootingState& state,
                    std::span<const double> weights, double lambda) {
    Objective o;
    for (std::size_t m = 0; m < y.size(); ++m) {
        const double r = y[m] - ev.h[m];
        o.fit += r * r;
    }
    for (std::size_t i = 0; i < state.alpha.size(); ++i) {
        o.penalty += weights[i] * state.alpha[i] * state.alpha[i];
    }
    o.penalty *= lambda;
    for (std::size_t l = 0; l + 1 < ev.end.size(); ++l) {
        double sq = 0.0;
        for (std::size_t i = 0; i < ev.end[l].size(); ++i) {
            const double c = ev.end[l][i] - state.nodes[l][i];
            sq += c * c;
            o.max_mismatch = std::max(o.max_mismatch, std::abs(c));
        }
        o.infeasibility += std::sqrt(sq);
    }
    return o;
}

struct Step {
    Eigen::VectorXd dalpha;
    std::vector<Eigen::VectorXd> dnodes; // increments of nodes 2..L
    double slope = 0.0;                  // directional derivative of the smoothed objective
    double multiplier = 0.0;             // largest join multiplier norm of the linearized problem
    bool regularized = false;
};

// Linearized subproblem with the join constraints eliminated forward in time:
// each node increment is a_l + A_l * dalpha, leaving an unconstrained weighted
// least-squares problem in dalpha.
Step condensed_step(const ShootingEval& ev, const Layout& layout, std::span<const double> y,
                    const ShootingState& state, std::span<const double> weights, double lambda) {
    const auto b = static_cast<Eigen::Index>(state.alpha.size());
    const auto m_total = static_cast<Eigen::Index>(y.size());
    const std::size_t segs = layout.segments();
    const Eigen::Index d = ev.dh_dnode.cols();

    std::vector<Eigen::VectorXd> offset(segs, Eigen::VectorXd::Zero(d));
    std::vector<Eigen::MatrixXd> gain(segs, Eigen::MatrixXd::Zero(d, b));
    for (std::size_t l = 0; l + 1 < segs; ++l) {
        Eigen::VectorXd c(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            c(i) = ev.end[l][static_cast<std::size_t>(i)] - state.nodes[l][static_cast<std::size_t>(i)];
        }
        offset[l + 1] = c + ev.end_dnode[l] * offset[l];
        gain[l + 1] = ev.end_dnode[l] * gain[l] + ev.end_dalpha[l];
    }

    Eigen::MatrixXd stacked = Eigen::MatrixXd::Zero(m_total + b, b);
    Eigen::VectorXd rhs(m_total + b);
    Eigen::VectorXd residual(m_total);
    for (std::size_t l = 0; l < segs; ++l) {
        for (std::size_t m = layout.bounds[l]; m < layout.bounds[l + 1]; ++m) {
            const auto row = static_cast<Eigen::Index>(m);
            residual(row) = y[m] - ev.h[m];
            stacked.row(row) = ev.dh_dalpha.row(row) + ev.dh_dnode.row(row) * gain[l];
            rhs(row) = residual(row) - ev.dh_dnode.row(row).dot(offset[l]);
        }
    }
    Eigen::VectorXd alpha = Eigen::Map<const Eigen::VectorXd>(state.alpha.data(), b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const double root = std::sqrt(lambda * weights[static_cast<std::size_t>(i)]);
        stacked(m_total + i, i) = root;
        rhs(m_total + i) = -root * alpha(i);
    }

    Step step;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
    if (qr.rank() < b) {
        const double trace = stacked.colwise().squaredNorm().sum();
        const double shift = std::sqrt(std::max(1e-10 * trace, std::numeric_limits<double>::min()));
        Eigen::MatrixXd padded(stacked.rows() + b, b);
        padded << stacked, shift * Eigen::MatrixXd::Identity(b, b);
        Eigen::VectorXd padded_rhs(rhs.size() + b);
        padded_rhs << rhs, Eigen::VectorXd::Zero(b);
        step.dalpha = padded.colPivHouseholderQr().solve(padded_rhs);
        step.regularized = true;
    } else {
        step.dalpha = qr.solve(rhs);
    }

    step.dnodes.resize(segs > 0 ? segs - 1 : 0);
    for (std::size_t l = 1; l < segs; ++l) {
        step.dnodes[l - 1] = offset[l] + gain[l] * step.dalpha;
    }

    double slope = 0.0;
    std::vector<Eigen::VectorXd> node_gradient(segs, Eigen::VectorXd::Zero(d));
    for (std::size_t l = 0; l < segs; ++l) {
        for (std::size_t m = layout.bounds[l]; m < layout.bounds[l + 1]; ++m) {
            const auto row = static_cast<Eigen::Index>(m);
            double dh = ev.dh_dalpha.row(row).dot(step.dalpha);
            if (l > 0) {
                dh += ev.dh_dnode.row(row).dot(step.dnodes[l - 1]);
            }
            slope -= 2.0 * residual(row) * dh;
            node_gradient[l] -= 2.0 * (residual(row) - dh) * ev.dh_dnode.row(row).transpose();
        }
    }
    // Multipliers of the linearized joins, by backward recursion from the last node.
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(d);
    for (std::size_t l = segs; l-- > 1;) {
        nu = ev.end_dnode[l].transpose() * nu - node_gradient[l];
        step.multiplier = std::max(step.multiplier, nu.norm());
    }
    for (Eigen::Index i = 0; i < b; ++i) {
        slope += 2.0 * lambda * weights[static_cast<std::size_t>(i)] * alpha(i) * step.dalpha(i);
    }
    step.slope = slope;
    return step;
}

ShootingState advance(const ShootingState& state, const Step& step, double gamma) {
    ShootingState next = state;
    for (std::size_t i = 0; i < next.alpha.size(); ++i) {
        next.alpha[i] += gamma * step.dalpha(static_cast<Eigen::Index>(i));
    }
    for (std::size_t l = 0; l < next.nodes.size(); ++l) {
        for (std::size_t i = 0; i < next.nodes[l].size(); ++i) {
            next.nodes[l][i] += gamma * step.dnodes[l](static_cast<Eigen::Index>(i));
        }
    }
    return next;
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

// Nodes obtained by integrating from x0 with the given coefficients.
std::vector<State> integrated_nodes(const ChaoticSystem& system, const FourierBasis& basis,
                                    std::span<const double> alpha, std::span<const double> x0, const Layout& layout,
                                    const IntegratorOptions& options) {
    detail::Propagator prop(system, basis, alpha, options, {}, nullptr);
    prop.start(0, x0);
    std::vector<State> nodes;
    for (std::size_t l = 1; l < layout.segments(); ++l) {
        const std::size_t target = layout.bounds[l] * layout.per_window;
        while (prop.node() < target) {
            prop.step();
        }
        const auto x = prop.state();
        nodes.emplace_back(x.begin(), x.end());
    }
    return nodes;
}

double selection_score(const MeasurementVector& y, const ChaoticSystem& system, const FourierBasis& basis,
                       std::span<const double> x0, std::span<const double> alpha, double lambda, double epsilon,
                       const IntegratorOptions& options) {
    double score = 0.0;
    try {
        score = data_fit(y, system, basis, x0, alpha, options);
    } catch (const DivergenceError&) {
        return std::numeric_limits<double>::infinity();
    }
    double smooth = 0.0;
    for (double a : alpha) {
        smooth += a * a / (a * a + epsilon);
    }
    return score + lambda * smooth;
}

} // namespace

std::size_t default_segment_count(std::size_t windows) {
    if (windows == 0) {
        return 1;
    }
    return std::clamp<std::size_t>(windows / 5, 1, windows);
}

std::vector<std::size_t> segment_boundaries(std::size_t windows, std::size_t segments) {
    if (segments == 0 || segments > windows) {
        throw std::invalid_argument("segment count must lie in [1, M]");
    }
    std::vector<std::size_t> bounds(segments + 1);
    for (std::size_t l = 0; l <= segments; ++l) {
        bounds[l] = l * windows / segments;
    }
    return bounds;
}

double data_fit(const MeasurementVector& y, const ChaoticSystem& system, const FourierBasis& basis,
                std::span<const double> x0, std::span<const double> alpha_bar, const IntegratorOptions& options) {
    const auto predicted = predict_measurements(system, basis, alpha_bar, x0, y.plan, options);
    if (predicted.y.size() != y.y.size()) {
        throw std::invalid_argument("measurement length mismatch");
    }
    double fit = 0.0;
    for (std::size_t m = 0; m < y.y.size(); ++m) {
        const double r = y.y[m] - predicted.y[m];
        fit += r * r;
    }
    return fit;
}

double cost(const MeasurementVector& y, const ChaoticSystem& system, const FourierBasis& basis,
            std::span<const double> x0, std::span<const double> alpha_bar, double lambda,
            const IntegratorOptions& options) {
    const auto nonzero = std::count_if(alpha_bar.begin(), alpha_bar.end(), [](double a) { return a != 0.0; });
    return data_fit(y, system, basis, x0, alpha_bar, options) + lambda * static_cast<double>(nonzero);
}

ReconstructionResult ms_irnls(const MeasurementVector& y, const ChaoticSystem& system, const FourierBasis& basis,
                              std::span<const double> x0, const MsIrnlsConfig& config,
                              std::span<const double> alpha_init, const std::optional<std::vector<State>>& node_init) {
    const std::size_t b = basis.size();
    const std::size_t d = system.dimension();
    const std::size_t m_total = y.plan.count();
    if (alpha_init.size() != b) {
        throw std::invalid_argument("alpha_init length does not match the basis");
    }
    if (x0.size() != d) {
        throw std::invalid_argument("x0 dimension does not match the system");
    }
    if (y.y.size() != m_total || m_total == 0) {
        throw std::invalid_argument("measurement vector does not match its plan");
    }
    if (!(config.lambda >= 0.0) || !(config.epsilon > 0.0) || !(config.tolerance > 0.0)) {
        throw std::invalid_argument("lambda must be >= 0, epsilon and tolerance > 0");
    }

    Layout layout;
    const std::size_t segs = config.segments == 0 ? default_segment_count(m_total) : config.segments;
    layout.bounds = segment_boundaries(m_total, segs);
    layout.per_window = y.plan.steps_per_window(config.integrator.step);

    ReconstructionResult result;
    ShootingState state;
    state.alpha.assign(alpha_init.begin(), alpha_init.end());
    try {
        if (node_init) {
            if (node_init->size() != segs - 1) {
                throw std::invalid_argument("node_init must hold one state per subinterval after the first");
            }
            for (const auto& n : *node_init) {
                if (n.size() != d) {
                    throw std::invalid_argument("node_init state dimension does not match the system");
                }
            }
            state.nodes = *node_init;
        } else {
            state.nodes = integrated_nodes(system, basis, state.alpha, x0, layout, config.integrator);
        }
    } catch (const DivergenceError& e) {
        result.failed = true;
        result.alpha_hat = state.alpha;
        result.final_state = state;
        result.score = std::numeric_limits<double>::infinity();
        result.diagnostic = std::string("initial trajectory diverged: ") + e.what();
        return result;
    }

    const double lambda = config.lambda;
    const double eps = config.epsilon;
    std::vector<double> outer_weight(b);
    std::vector<double> weights(b);
    std::vector<double> anchor = state.alpha;
    double rho = 0.0;
    bool done = false;
    std::string diagnostic;

    try {
        for (std::size_t outer = 0; outer < config.max_outer && !done; ++outer) {
            ++result.outer_iterations;
            for (std::size_t i = 0; i < b; ++i) {
                outer_weight[i] = 1.0 / (std::abs(anchor[i]) + eps);
            }
            bool inner_converged = false;
            for (std::size_t inner = 0; inner < config.max_inner; ++inner) {
                for (std::size_t i = 0; i < b; ++i) {
                    weights[i] = outer_weight[i] / std::sqrt(state.alpha[i] * state.alpha[i] + eps);
                }
                const auto ev =
                    evaluate_shooting(system, basis, y.plan, layout, x0, state, config.integrator, true);
                const auto here = objective(ev, y.y, state, weights, lambda);
                const auto step = condensed_step(ev, layout, y.y, state, weights, lambda);
                if (step.regularized) {
                    ++result.regularized_solves;
                }
                rho = std::max(rho, 2.0 * step.multiplier);
                if (step.slope > 0.0 && here.infeasibility > 0.0) {
                    rho = std::max(rho, 2.0 * step.slope / here.infeasibility);
                }
                const double merit0 = here.merit(rho);
                const double step_norm = step.dalpha.norm();
                const double scale = std::max(norm2(state.alpha), 1.0);

                double gamma = 1.0;
                bool accepted = false;
                ShootingState trial;
                Objective there;
                for (std::size_t halving = 0; halving <= config.max_halvings; ++halving, gamma *= 0.5) {
                    trial = advance(state, step, gamma);
                    try {
                        const auto tev = evaluate_shooting(system, basis, y.plan, layout, x0, trial,
                                                           config.integrator, false);
                        there = objective(tev, y.y, trial, weights, lambda);
                    } catch (const DivergenceError&) {
                        if (!config.damping) {
                            throw;
                        }
                        continue;
                    }
                    if (!config.damping || there.merit(rho) <= merit0) {
                        accepted = true;
                        break;
                    }
                }
                ++result.iterations;
                if (!accepted) {
                    // Predicted decrease below rounding of the merit: nothing left to gain.
                    const bool flat = -step.slope <= kRoundoff * std::max(merit0, std::numeric_limits<double>::min());
                    if ((step_norm <= config.tolerance * scale || flat) && here.max_mismatch <= config.join_tolerance) {
                        inner_converged = true;
                        break;
                    }
                    result.stalled = true;
                    diagnostic = "line search exhausted without merit decrease";
                    done = true;
                    break;
                }
                result.merit_before.push_back(merit0);
                result.merit_after.push_back(there.merit(rho));
                result.cost_trace.push_back(there.smoothed());
                result.max_join_mismatch = there.max_mismatch;
                state = std::move(trial);
                if (gamma * step_norm <= config.tolerance * scale && there.max_mismatch <= config.join_tolerance) {
                    inner_converged = true;
                    break;
                }
            }
            if (done) {
                break;
            }
            const double change = distance(state.alpha, anchor);
            if (inner_converged && change <= config.tolerance * std::max(norm2(anchor), 1.0)) {
                result.converged = true;
                done = true;
            }
            anchor = state.alpha;
        }
    } catch (const DivergenceError& e) {
        result.failed = true;
        diagnostic = std::string("trajectory diverged: ") + e.what();
    }

    if (!result.converged && !result.failed && !result.stalled) {
        diagnostic = "iteration limit reached";
    }
    result.alpha_hat = state.alpha;
    result.final_state = std::move(state);
    result.diagnostic = diagnostic;
    result.score = selection_score(y, system, basis, x0, result.alpha_hat, lambda, eps, config.integrator);
    return result;
}

namespace {

ReconstructionResult run_realization(const MeasurementVector& y, const LorenzConfig& lorenz,
                                     const FourierBasis& basis, std::span<const double> x0,
                                     const MsIrnlsConfig& config, const MultiStartOptions& options, std::size_t r,
                                     std::optional<std::span<const double>> truth) {
    const LorenzSystem system(lorenz);
    Rng rng(derive_seed(config.seed, kAlphaStream, r));
    std::vector<double> alpha(basis.size());
    for (auto& a : alpha) {
        a = rng.uniform(-1.0, 1.0);
    }
    std::optional<std::vector<State>> nodes;
    if (options.node_init == NodeInit::attractor) {
        const std::size_t m_total = y.plan.count();
        const std::size_t segs = config.segments == 0 ? default_segment_count(m_total) : config.segments;
        nodes = segs > 1 ? sample_attractor_initial_states(lorenz, segs - 1, derive_seed(config.seed, kNodeStream, r),
                                                           options.sampling)
                         : std::vector<State>{};
    }
    auto result = ms_irnls(y, system, basis, x0, config, alpha, nodes);
    if (truth && !result.failed) {
        result.err_rel = relative_error(result.alpha_hat, *truth);
    }
    return result;
}

ReconstructionResult select_best(std::vector<ReconstructionResult> runs, bool by_error) {
    std::optional<std::size_t> best;
    auto key = [&](const ReconstructionResult& r) {
        if (r.failed) {
            return std::numeric_limits<double>::infinity();
        }
        return by_error ? *r.err_rel : r.score;
    };
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (runs[r].failed) {
            continue;
        }
        if (!best || key(runs[r]) < key(runs[*best])) {
            best = r;
        }
    }
    std::vector<RealizationSummary> summaries;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        summaries.push_back({r, runs[r].failed, runs[r].converged, runs[r].err_rel, runs[r].score,
                             runs[r].iterations, runs[r].diagnostic});
    }
    ReconstructionResult out;
    if (best) {
        out = std::move(runs[*best]);
        out.best_realization = *best;
    } else {
        out = std::move(runs.front());
        out.best_realization = 0;
        out.failed = true;
        out.diagnostic = "all realizations failed";
    }
    out.realizations = runs.size();
    out.per_realization = std::move(summaries);
    return out;
}

void check_multi_start(const MultiStartOptions& options, const FourierBasis& basis,
                       std::optional<std::span<const double>> truth) {
    if (options.realizations == 0) {
        throw std::invalid_argument("at least one realization is required");
    }
    if (truth && truth->size() != basis.size()) {
        throw std::invalid_argument("reference coefficients do not match the basis");
    }
}

} // namespace

ReconstructionResult multi_start_reconstruct(const MeasurementVector& y, const LorenzConfig& lorenz,
                                             const FourierBasis& basis, std::span<const double> x0,
                                             const MsIrnlsConfig& config, const MultiStartOptions& options,
                                             std::optional<std::span<const double>> truth) {
    check_multi_start(options, basis, truth);
    lorenz.validate();
    const auto n = static_cast<std::ptrdiff_t>(options.realizations);
    std::vector<ReconstructionResult> runs(options.realizations);
    std::vector<std::string> errors(options.realizations);
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t r = 0; r < n; ++r) {
        const auto idx = static_cast<std::size_t>(r);
        try {
            runs[idx] = run_realization(y, lorenz, basis, x0, config, options, idx, truth);
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) {
            throw std::invalid_argument(e);
        }
    }
    return select_best(std::move(runs), truth.has_value());
}

ReconstructionResult multi_start_reconstruct_serial(const MeasurementVector& y, const LorenzConfig& lorenz,
                                                    const FourierBasis& basis, std::span<const double> x0,
                                                    const MsIrnlsConfig& config, const MultiStartOptions& options,
                                                    std::optional<std::span<const double>> truth) {
    check_multi_start(options, basis, truth);
    lorenz.validate();
    std::vector<ReconstructionResult> runs;
    for (std::size_t r = 0; r < options.realizations; ++r) {
        runs.push_back(run_realization(y, lorenz, basis, x0, config, options, r, truth));
    }
    return select_best(std::move(runs), truth.has_value());
}

} // namespace chaa2i
