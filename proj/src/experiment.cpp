#include "chaa2i/experiment.hpp"

#include "chaa2i/identifiability.hpp"
#include "chaa2i/io.hpp"
#include "chaa2i/measurement.hpp"
#include "chaa2i/random.hpp"
#include "chaa2i/spectrum.hpp"

#include <omp.h>

#include <cmath>
#include <limits>
#include <sstream>

namespace chaa2i {

namespace {

constexpr std::uint64_t kSignalStream = 0x51;
constexpr std::uint64_t kStateStream = 0x52;
constexpr std::uint64_t kSolverStream = 0x53;
constexpr std::uint64_t kBandwidthStream = 0x54;
constexpr std::uint64_t kPipelineStateStream = 0x55;

int thread_count(std::size_t workers) {
    return workers == 0 ? omp_get_max_threads() : static_cast<int>(workers);
}

std::string cell_label(double t_cs, std::size_t w, AmplitudeLaw law) {
    std::ostringstream out;
    out << "T_cs=" << format_double(t_cs) << " W=" << w << " law=" << law_name(law);
    return out.str();
}

struct Cell {
    std::size_t t_index;
    std::size_t w;
    AmplitudeLaw law;
};

std::vector<Cell> cells_of(const ExperimentConfig& config) {
    std::vector<Cell> cells;
    for (std::size_t t = 0; t < config.t_cs.size(); ++t) {
        for (std::size_t w : config.sparsity) {
            for (AmplitudeLaw law : config.laws) {
                cells.push_back({t, w, law});
            }
        }
    }
    return cells;
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

} // namespace

void ExperimentConfig::validate() const {
    lorenz.validate();
    FourierBasis check(basis);
    if (t_cs.empty() || sparsity.empty() || laws.empty() || lambda.empty()) {
        throw std::invalid_argument("T_cs, sparsity, law and lambda lists must be nonempty");
    }
    for (double t : t_cs) {
        MeasurementPlan plan(t);
        plan.steps_per_window(step);
    }
    for (std::size_t w : sparsity) {
        if (w > basis) {
            throw std::invalid_argument("sparsity exceeds the basis size");
        }
    }
    for (double l : lambda) {
        if (!(l >= 0.0) || !std::isfinite(l)) {
            throw std::invalid_argument("lambda must be finite and nonnegative");
        }
    }
    if (!(step > 0.0) || !(epsilon > 0.0) || !(tolerance > 0.0)) {
        throw std::invalid_argument("step, epsilon and tolerance must be positive");
    }
    if (n_trials == 0 || n_realizations == 0 || n_initial_states == 0) {
        throw std::invalid_argument("trial, realization and initial-state counts must be positive");
    }
}

MsIrnlsConfig ExperimentConfig::solver(double lambda_value, std::uint64_t solver_seed) const {
    MsIrnlsConfig cfg;
    cfg.segments = segments;
    cfg.lambda = lambda_value;
    cfg.epsilon = epsilon;
    cfg.max_inner = max_inner;
    cfg.max_outer = max_outer;
    cfg.tolerance = tolerance;
    cfg.damping = damping;
    cfg.seed = solver_seed;
    cfg.integrator.step = step;
    return cfg;
}

std::string law_name(AmplitudeLaw law) {
    return law == AmplitudeLaw::gaussian ? "gaussian" : "bernoulli";
}

AmplitudeLaw parse_law(const std::string& name) {
    if (name == "gaussian") {
        return AmplitudeLaw::gaussian;
    }
    if (name == "bernoulli") {
        return AmplitudeLaw::bernoulli;
    }
    throw std::invalid_argument("unknown amplitude law: " + name);
}

std::uint64_t signal_seed(std::uint64_t base, std::size_t w, AmplitudeLaw law, std::size_t trial) {
    const std::uint64_t cell = derive_seed(derive_seed(base, kSignalStream, w), static_cast<std::uint64_t>(law));
    return derive_seed(cell, kSignalStream, trial);
}

std::uint64_t state_seed(std::uint64_t base, std::size_t trial) {
    return derive_seed(base, kStateStream, trial);
}

SweepResult sweep_mu(const ExperimentConfig& config) {
    config.validate();
    const LorenzSystem system(config.lorenz);
    const FourierBasis basis(config.basis);
    const IntegratorOptions integrator{config.step};
    const auto cells = cells_of(config);
    const std::size_t trials = config.n_trials;
    const std::size_t lambdas = config.lambda.size();
    const std::size_t tasks = cells.size() * trials;

    // value[task][lambda]; NaN marks a failed trial.
    std::vector<std::vector<double>> value(tasks, std::vector<double>(lambdas, std::numeric_limits<double>::quiet_NaN()));
    std::vector<std::string> failure(tasks);

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(config.workers))
    for (std::ptrdiff_t task = 0; task < static_cast<std::ptrdiff_t>(tasks); ++task) {
        const auto idx = static_cast<std::size_t>(task);
        const Cell& cell = cells[idx / trials];
        const std::size_t trial = idx % trials;
        std::ostringstream log;
        try {
            const auto signal = generate_sparse(basis, {cell.w, cell.law, signal_seed(config.seed, cell.w, cell.law, trial)});
            const auto states = sample_attractor_initial_states(config.lorenz, config.n_initial_states,
                                                                state_seed(config.seed, trial));
            const MeasurementPlan plan(config.t_cs[cell.t_index]);
            std::vector<std::vector<double>> mus(lambdas);
            for (std::size_t s = 0; s < states.size(); ++s) {
                Eigen::MatrixXd sens;
                try {
                    sens = sensitivity_matrix(system, signal, states[s], plan, integrator);
                } catch (const DivergenceError& e) {
                    log << " state " << s << " diverged;";
                    continue;
                }
                for (std::size_t l = 0; l < lambdas; ++l) {
                    try {
                        mus[l].push_back(mu_statistic(
                            regularized_correlation(sens, signal.alpha(), config.lambda[l], config.epsilon)));
                    } catch (const DegenerateColumnError&) {
                        log << " state " << s << " degenerate at lambda=" << format_double(config.lambda[l]) << ";";
                    }
                }
            }
            for (std::size_t l = 0; l < lambdas; ++l) {
                if (!mus[l].empty()) {
                    value[idx][l] = mean_of(mus[l]);
                }
            }
        } catch (const std::exception& e) {
            log << " " << e.what();
        }
        failure[idx] = log.str();
    }

    SweepResult out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Cell& cell = cells[c];
        const double t = config.t_cs[cell.t_index];
        for (std::size_t l = 0; l < lambdas; ++l) {
            std::vector<double> ok;
            for (std::size_t trial = 0; trial < trials; ++trial) {
                const std::size_t idx = c * trials + trial;
                const double v = value[idx][l];
                if (std::isnan(v)) {
                    out.failures.push_back(cell_label(t, cell.w, cell.law) + " lambda=" +
                                           format_double(config.lambda[l]) + " trial=" + std::to_string(trial) +
                                           ": no initial state succeeded;" + failure[idx]);
                    continue;
                }
                ok.push_back(v);
                out.records.push_back({"mu", t, cell.w, law_name(cell.law), config.lambda[l], trial, "mu_bar", v,
                                       signal_seed(config.seed, cell.w, cell.law, trial)});
            }
            if (!ok.empty()) {
                out.means.push_back({"mu", t, cell.w, law_name(cell.law), config.lambda[l], ok.size(),
                                     "mean_mu_bar", mean_of(ok), config.seed});
            }
        }
    }
    return out;
}

SweepResult sweep_reconstruction(const ExperimentConfig& config) {
    config.validate();
    const FourierBasis basis(config.basis);
    const IntegratorOptions integrator{config.step};
    const LorenzSystem system(config.lorenz);
    const auto cells = cells_of(config);
    const std::size_t trials = config.n_trials;
    const std::size_t tasks = cells.size() * trials;
    const double lambda = config.lambda.front();

    std::vector<double> value(tasks, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> failure(tasks);

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(config.workers))
    for (std::ptrdiff_t task = 0; task < static_cast<std::ptrdiff_t>(tasks); ++task) {
        const auto idx = static_cast<std::size_t>(task);
        const Cell& cell = cells[idx / trials];
        const std::size_t trial = idx % trials;
        if (cell.w == 0) {
            continue;
        }
        try {
            const std::uint64_t sseed = signal_seed(config.seed, cell.w, cell.law, trial);
            const auto signal = generate_sparse(basis, {cell.w, cell.law, sseed});
            const auto x0 = sample_attractor_initial_states(config.lorenz, 1, state_seed(config.seed, trial)).front();
            const MeasurementPlan plan(config.t_cs[cell.t_index]);
            const auto y = measure(system, signal, x0, plan, integrator);
            MultiStartOptions options;
            options.realizations = config.n_realizations;
            options.node_init = config.node_init;
            const auto result = multi_start_reconstruct_serial(
                y, config.lorenz, basis, x0, config.solver(lambda, derive_seed(sseed, kSolverStream, cell.t_index)),
                options, signal.alpha());
            if (result.failed || !result.err_rel) {
                failure[idx] = result.diagnostic;
            } else {
                value[idx] = *result.err_rel;
            }
        } catch (const std::exception& e) {
            failure[idx] = e.what();
        }
    }

    SweepResult out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Cell& cell = cells[c];
        const double t = config.t_cs[cell.t_index];
        if (cell.w == 0) {
            out.failures.push_back(cell_label(t, cell.w, cell.law) +
                                   ": skipped, relative error is undefined for a zero signal");
            continue;
        }
        std::vector<double> ok;
        for (std::size_t trial = 0; trial < trials; ++trial) {
            const std::size_t idx = c * trials + trial;
            if (std::isnan(value[idx])) {
                out.failures.push_back(cell_label(t, cell.w, cell.law) + " trial=" + std::to_string(trial) + ": " +
                                       failure[idx]);
                continue;
            }
            ok.push_back(value[idx]);
            out.records.push_back({"recon", t, cell.w, law_name(cell.law), lambda, trial, "err_rel", value[idx],
                                   signal_seed(config.seed, cell.w, cell.law, trial)});
        }
        if (!ok.empty()) {
            out.means.push_back(
                {"recon", t, cell.w, law_name(cell.law), lambda, ok.size(), "mean_err_rel", mean_of(ok), config.seed});
        }
    }
    return out;
}

BandwidthPoint lorenz_bandwidth(const LorenzConfig& config, const BandwidthOptions& options) {
    config.validate();
    if (options.runs == 0 || !(options.duration > 0.0) || !(options.transient >= 0.0)) {
        throw std::invalid_argument("bandwidth needs at least one run and a positive duration");
    }
    const LorenzSystem system(config);
    const auto signal = SparseSignal::zero(FourierBasis(2));
    const double h = options.integrator.step;
    const auto lead = static_cast<std::size_t>(std::ceil(options.transient / config.tau / h - 1e-9));
    const auto span = static_cast<std::size_t>(std::llround(options.duration / h));

    BandwidthPoint point;
    point.tau = config.tau;
    for (std::size_t r = 0; r < options.runs; ++r) {
        Rng rng(derive_seed(options.seed, kBandwidthStream, r));
        State x0(3);
        for (auto& v : x0) {
            v = 1.0 + rng.uniform(-1.0, 1.0);
        }
        const auto full = integrate(system, signal, x0, 0.0, static_cast<double>(lead + span) * h, options.integrator);
        TrajectoryGrid tail;
        tail.t0 = full.time(lead);
        tail.step = h;
        tail.dimension = full.dimension;
        tail.states.assign(full.states.begin() + static_cast<std::ptrdiff_t>(lead * full.dimension), full.states.end());
        point.runs.push_back(estimate_bandwidth(tail, options.channel));
    }
    point.mean = mean_of(point.runs);
    return point;
}

std::vector<BandwidthPoint> sweep_bandwidth(const LorenzConfig& config, std::span<const double> taus,
                                            const BandwidthOptions& options) {
    std::vector<BandwidthPoint> points;
    for (double tau : taus) {
        LorenzConfig cfg = config;
        cfg.tau = tau;
        points.push_back(lorenz_bandwidth(cfg, options));
    }
    return points;
}

PipelineResult run_pipeline(const ExperimentConfig& config, std::optional<std::span<const double>> alpha) {
    try {
        config.validate();
    } catch (const std::exception& e) {
        throw PipelineError("config", e.what());
    }
    const FourierBasis basis(config.basis);
    const IntegratorOptions integrator{config.step};
    const LorenzSystem system(config.lorenz);
    const double t_cs = config.t_cs.front();
    const std::size_t w = config.sparsity.front();
    const AmplitudeLaw law = config.laws.front();
    const double lambda = config.lambda.front();
    const std::uint64_t sseed = signal_seed(config.seed, w, law, 0);

    auto stage = [](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const PipelineError&) {
            throw;
        } catch (const std::exception& e) {
            throw PipelineError(name, e.what());
        }
    };

    const SparseSignal signal = stage("signal", [&] {
        if (alpha) {
            return SparseSignal(basis, std::vector<double>(alpha->begin(), alpha->end()));
        }
        return generate_sparse(basis, {w, law, sseed});
    });
    const State x0 = stage("initial-state", [&] {
        return sample_attractor_initial_states(config.lorenz, 1, state_seed(config.seed, 0)).front();
    });
    const MeasurementPlan plan(t_cs);
    const MeasurementVector y = stage("measure", [&] { return measure(system, signal, x0, plan, integrator); });

    IdentifiabilityReport report = stage("identify", [&] {
        IdentifiabilityReport r;
        const auto sens = sensitivity_matrix(system, signal, x0, plan, integrator);
        const auto analysis = analyze_sensitivity(sens, signal.alpha(), lambda, config.epsilon);
        r.mu = analysis.mu;
        r.reconstructable = crc_check(analysis).reconstructable;
        const auto states = sample_attractor_initial_states(config.lorenz, config.n_initial_states,
                                                            derive_seed(config.seed, kPipelineStateStream));
        const auto avg = averaged_mu(system, signal, states, plan, lambda, config.epsilon, integrator);
        r.mu_bar = avg.mean;
        r.per_state_mu = avg.per_state;
        r.failed_states = avg.failed;
        r.lambda = lambda;
        r.epsilon = config.epsilon;
        r.t_cs = t_cs;
        r.w = signal.sparsity();
        return r;
    });

    ReconstructionResult recon = stage("reconstruct", [&] {
        MultiStartOptions options;
        options.realizations = config.n_realizations;
        options.node_init = config.node_init;
        std::optional<std::span<const double>> truth;
        if (signal.sparsity() > 0) {
            truth = signal.alpha();
        }
        return multi_start_reconstruct(y, config.lorenz, basis, x0,
                                       config.solver(lambda, derive_seed(sseed, kSolverStream, 0)), options, truth);
    });

    PipelineResult out{signal, x0, recon, report.mu, report.mu_bar, {}};
    stage("write", [&] {
        const auto& dir = config.output_dir;
        const SparseSignal estimate(basis, recon.alpha_hat);
        const std::vector<std::pair<std::string, std::string>> files = {
            {"config.json", to_json(config).dump(2) + "\n"},
            {"signal.json", to_json(signal).dump(2) + "\n"},
            {"measurements.json", to_json(y, std::span<const double>(x0)).dump(2) + "\n"},
            {"measurements.csv", measurements_csv(y)},
            {"identifiability.json", to_json(report).dump(2) + "\n"},
            {"reconstruction.json", to_json(recon).dump(2) + "\n"},
            {"waveform_truth.csv", waveform_csv(signal)},
            {"waveform_reconstructed.csv", waveform_csv(estimate)},
        };
        for (const auto& [name, text] : files) {
            write_text(dir / name, text);
            out.artifacts.push_back(dir / name);
        }
        return 0;
    });
    return out;
}

} // namespace chaa2i
