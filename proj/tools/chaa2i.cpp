#include "chaa2i/experiment.hpp"
#include "chaa2i/identifiability.hpp"
#include "chaa2i/io.hpp"
#include "chaa2i/measurement.hpp"
#include "chaa2i/reconstruct.hpp"
#include "chaa2i/signals.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace chaa2i;

namespace {

constexpr int kUsage = 1;
constexpr int kNumerical = 2;

class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::vector<double> tcs;
    std::vector<std::size_t> sparsity;
    std::vector<double> lambda;
    std::optional<double> tau;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    bool paper_scale = false;
    std::optional<std::size_t> basis;
    std::optional<double> a, b, c, mu;
    std::vector<std::string> laws;
    std::optional<double> epsilon;
    std::optional<std::size_t> trials, realizations, initial_states;
    std::optional<double> step;
    std::optional<std::size_t> segments, max_inner, max_outer;
    std::optional<double> tolerance;
    std::optional<bool> damping;
    std::optional<std::string> node_init;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "Base seed");
    app->add_option("--tcs", c.tcs, "Sampling interval(s) T_cs")->delimiter(',');
    app->add_option("--sparsity", c.sparsity, "Sparsity level(s) W")->delimiter(',');
    app->add_option("--lambda", c.lambda, "Regularization weight(s)")->delimiter(',');
    app->add_option("--tau", c.tau, "Time-scaling factor");
    app->add_option("--workers", c.workers, "Worker threads (0 = all)");
    app->add_option("--out", c.out, "Output directory");
    app->add_flag("--paper-scale", c.paper_scale, "Full trial counts (1000 for mu sweeps, 100 for reconstruction)");
    app->add_option("--basis", c.basis, "Basis size B (even)");
    app->add_option("--a", c.a, "Lorenz a");
    app->add_option("--b", c.b, "Lorenz b");
    app->add_option("--c", c.c, "Lorenz c");
    app->add_option("--mu", c.mu, "Coupling strength");
    app->add_option("--law", c.laws, "Amplitude law(s)")
        ->delimiter(',')
        ->check(CLI::IsMember({"gaussian", "bernoulli"}));
    app->add_option("--epsilon", c.epsilon, "Weight floor epsilon");
    app->add_option("--trials", c.trials, "Trials per sweep cell");
    app->add_option("--realizations", c.realizations, "Multi-start realizations");
    app->add_option("--initial-states", c.initial_states, "Initial states per averaged mu");
    app->add_option("--step", c.step, "Integrator step h");
    app->add_option("--segments", c.segments, "Shooting subintervals L (0 = M/5)");
    app->add_option("--max-inner", c.max_inner, "Inner iteration cap J");
    app->add_option("--max-outer", c.max_outer, "Outer iteration cap");
    app->add_option("--tolerance", c.tolerance, "Relative change stopping threshold");
    app->add_option("--damping", c.damping, "Backtracking line search (true/false)");
    app->add_option("--node-init", c.node_init, "Node initialization")
        ->check(CLI::IsMember({"integrate", "attractor"}));
}

// Defaults, then the config file, then command-line flags.
ExperimentConfig resolve(const Common& c, std::size_t paper_trials) {
    ExperimentConfig cfg;
    if (!c.config.empty()) {
        cfg = config_from_json(read_json(c.config), cfg);
    }
    if (c.seed) cfg.seed = *c.seed;
    if (!c.tcs.empty()) cfg.t_cs = c.tcs;
    if (!c.sparsity.empty()) cfg.sparsity = c.sparsity;
    if (!c.lambda.empty()) cfg.lambda = c.lambda;
    if (c.tau) cfg.lorenz.tau = *c.tau;
    if (c.workers) cfg.workers = *c.workers;
    if (c.out) cfg.output_dir = *c.out;
    if (c.basis) cfg.basis = *c.basis;
    if (c.a) cfg.lorenz.a = *c.a;
    if (c.b) cfg.lorenz.b = *c.b;
    if (c.c) cfg.lorenz.c = *c.c;
    if (c.mu) cfg.lorenz.mu = *c.mu;
    if (!c.laws.empty()) {
        cfg.laws.clear();
        for (const auto& name : c.laws) cfg.laws.push_back(parse_law(name));
    }
    if (c.epsilon) cfg.epsilon = *c.epsilon;
    if (c.trials) cfg.n_trials = *c.trials;
    if (c.realizations) cfg.n_realizations = *c.realizations;
    if (c.initial_states) cfg.n_initial_states = *c.initial_states;
    if (c.step) cfg.step = *c.step;
    if (c.segments) cfg.segments = *c.segments;
    if (c.max_inner) cfg.max_inner = *c.max_inner;
    if (c.max_outer) cfg.max_outer = *c.max_outer;
    if (c.tolerance) cfg.tolerance = *c.tolerance;
    if (c.damping) cfg.damping = *c.damping;
    if (c.node_init) cfg.node_init = *c.node_init == "integrate" ? NodeInit::integrate : NodeInit::attractor;
    if (c.paper_scale && paper_trials > 0) {
        cfg.n_trials = paper_trials;
    }
    cfg.validate();
    if (cfg.workers > 0) {
        omp_set_num_threads(static_cast<int>(cfg.workers));
    }
    return cfg;
}

void report(const std::filesystem::path& path) {
    std::cout << "wrote " << path.generic_string() << "\n";
}

void write_sweep(const ExperimentConfig& cfg, const std::string& name, const SweepResult& result) {
    const auto dir = cfg.output_dir;
    write_text(dir / (name + ".csv"), records_csv(result.records));
    write_text(dir / (name + "_means.csv"), records_csv(result.means));
    std::string log;
    for (const auto& f : result.failures) {
        log += f + "\n";
    }
    write_text(dir / (name + "_failures.txt"), log);
    write_json(dir / (name + "_config.json"), to_json(cfg));
    report(dir / (name + ".csv"));
    report(dir / (name + "_means.csv"));
    for (const auto& m : result.means) {
        std::cout << m.statistic << " T_cs=" << format_double(m.t_cs) << " W=" << m.w << " law=" << m.law
                  << " lambda=" << format_double(m.lambda) << " n=" << m.trial << " value=" << format_double(m.value)
                  << "\n";
    }
    if (!result.failures.empty()) {
        std::cout << result.failures.size() << " failures logged in " << name << "_failures.txt\n";
    }
}

State initial_state(const ExperimentConfig& cfg) {
    return sample_attractor_initial_states(cfg.lorenz, 1, state_seed(cfg.seed, 0)).front();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chaotic analog-to-information conversion: simulate, measure, analyze and reconstruct"};
    app.require_subcommand(1);

    Common common;
    std::size_t count = 1;
    std::string signal_path;
    std::string measurement_path;
    std::string truth_path;
    std::vector<double> taus;

    auto* gen = app.add_subcommand("generate", "Draw a corpus of sparse signals");
    add_common(gen, common);
    gen->add_option("--count", count, "Number of signals")->check(CLI::PositiveNumber);

    auto* meas = app.add_subcommand("measure", "Simulate the converter on a stored signal");
    add_common(meas, common);
    meas->add_option("--signal", signal_path, "Signal JSON")->required()->check(CLI::ExistingFile);

    auto* rec = app.add_subcommand("reconstruct", "Multi-start reconstruction from stored measurements");
    add_common(rec, common);
    rec->add_option("--measurements", measurement_path, "Measurement JSON with x0")
        ->required()
        ->check(CLI::ExistingFile);
    rec->add_option("--truth", truth_path, "Reference signal JSON")->check(CLI::ExistingFile);

    auto* ident = app.add_subcommand("identify", "Sensitivity and CRC report for a stored signal");
    add_common(ident, common);
    ident->add_option("--signal", signal_path, "Signal JSON")->required()->check(CLI::ExistingFile);

    auto* bw = app.add_subcommand("bandwidth", "99%-energy bandwidth of the unforced system");
    add_common(bw, common);
    bw->add_option("--taus", taus, "Time-scaling factors (default 5,10,15,20)")->delimiter(',');

    auto* smu = app.add_subcommand("sweep-mu", "Averaged mu over the experiment grid");
    add_common(smu, common);
    auto* srec = app.add_subcommand("sweep-recon", "Reconstruction error over the experiment grid");
    add_common(srec, common);
    auto* pipe = app.add_subcommand("pipeline", "End-to-end demo with all artifacts");
    add_common(pipe, common);
    pipe->add_option("--signal", signal_path, "Explicit signal JSON instead of a drawn one")
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (gen->parsed()) {
            auto cfg = resolve(common, 0);
            const FourierBasis basis(cfg.basis);
            const auto amp = cfg.laws.front();
            const std::size_t w = cfg.sparsity.front();
            for (std::size_t i = 0; i < count; ++i) {
                const auto signal = generate_sparse(basis, {w, amp, signal_seed(cfg.seed, w, amp, i)});
                char name[32];
                std::snprintf(name, sizeof(name), "signal_%04zu.json", i);
                write_json(cfg.output_dir / name, to_json(signal));
                report(cfg.output_dir / name);
            }
        } else if (meas->parsed()) {
            auto cfg = resolve(common, 0);
            const auto signal = signal_from_json(read_json(signal_path));
            const auto x0 = initial_state(cfg);
            const auto y = measure(LorenzSystem(cfg.lorenz), signal, x0, MeasurementPlan(cfg.t_cs.front()),
                                   {cfg.step});
            write_json(cfg.output_dir / "measurements.json", to_json(y, std::span<const double>(x0)));
            write_text(cfg.output_dir / "measurements.csv", measurements_csv(y));
            report(cfg.output_dir / "measurements.json");
            report(cfg.output_dir / "measurements.csv");
        } else if (rec->parsed()) {
            auto cfg = resolve(common, 0);
            const auto file = measurements_from_json(read_json(measurement_path));
            if (!file.x0) {
                throw std::invalid_argument("measurement file has no \"x0\"");
            }
            std::optional<SparseSignal> truth;
            if (!truth_path.empty()) {
                truth = signal_from_json(read_json(truth_path));
            }
            const FourierBasis basis(truth ? truth->basis().size() : cfg.basis);
            std::optional<std::span<const double>> ref;
            if (truth && truth->sparsity() > 0) {
                ref = truth->alpha();
            }
            MultiStartOptions options;
            options.realizations = cfg.n_realizations;
            options.node_init = cfg.node_init;
            const auto result = multi_start_reconstruct(file.measurements, cfg.lorenz, basis, *file.x0,
                                                        cfg.solver(cfg.lambda.front(), cfg.seed), options, ref);
            write_json(cfg.output_dir / "reconstruction.json", to_json(result));
            report(cfg.output_dir / "reconstruction.json");
            std::cout << "converged=" << result.converged << " best_realization=" << result.best_realization;
            if (result.err_rel) {
                std::cout << " err_rel=" << format_double(*result.err_rel);
            }
            std::cout << "\n";
            if (result.failed) {
                throw NumericalFailure("reconstruction failed: " + result.diagnostic);
            }
        } else if (ident->parsed()) {
            auto cfg = resolve(common, 0);
            const auto signal = signal_from_json(read_json(signal_path));
            const LorenzSystem system(cfg.lorenz);
            const MeasurementPlan plan(cfg.t_cs.front());
            const auto x0 = initial_state(cfg);
            const double lambda = cfg.lambda.front();
            IdentifiabilityReport r;
            const auto analysis =
                analyze_sensitivity(sensitivity_matrix(system, signal, x0, plan, {cfg.step}), signal.alpha(), lambda,
                                    cfg.epsilon);
            r.mu = analysis.mu;
            r.reconstructable = crc_check(analysis).reconstructable;
            const auto states = sample_attractor_initial_states(cfg.lorenz, cfg.n_initial_states,
                                                                state_seed(cfg.seed, 1));
            const auto avg = averaged_mu(system, signal, states, plan, lambda, cfg.epsilon, {cfg.step});
            r.mu_bar = avg.mean;
            r.per_state_mu = avg.per_state;
            r.failed_states = avg.failed;
            r.lambda = lambda;
            r.epsilon = cfg.epsilon;
            r.t_cs = plan.interval();
            r.w = signal.sparsity();
            write_json(cfg.output_dir / "identifiability.json", to_json(r));
            report(cfg.output_dir / "identifiability.json");
            std::cout << "mu=" << format_double(r.mu) << " mu_bar=" << format_double(r.mu_bar)
                      << " reconstructable=" << r.reconstructable << "\n";
            if (!avg.ok()) {
                throw NumericalFailure("no initial state produced a valid correlation matrix");
            }
        } else if (bw->parsed()) {
            auto cfg = resolve(common, 0);
            if (taus.empty()) {
                taus = common.tau ? std::vector<double>{*common.tau} : std::vector<double>{5.0, 10.0, 15.0, 20.0};
            }
            BandwidthOptions options;
            options.seed = cfg.seed;
            options.integrator.step = cfg.step;
            const auto points = sweep_bandwidth(cfg.lorenz, taus, options);
            write_text(cfg.output_dir / "bandwidth.csv", bandwidth_csv(points));
            report(cfg.output_dir / "bandwidth.csv");
            for (const auto& p : points) {
                std::cout << "tau=" << format_double(p.tau) << " bandwidth_hz=" << format_double(p.mean) << "\n";
            }
        } else if (smu->parsed()) {
            auto cfg = resolve(common, kPaperMuTrials);
            write_sweep(cfg, "sweep_mu", sweep_mu(cfg));
        } else if (srec->parsed()) {
            auto cfg = resolve(common, kPaperReconTrials);
            write_sweep(cfg, "sweep_recon", sweep_reconstruction(cfg));
        } else if (pipe->parsed()) {
            auto cfg = resolve(common, 0);
            std::optional<SparseSignal> explicit_signal;
            std::optional<std::span<const double>> alpha;
            if (!signal_path.empty()) {
                explicit_signal = signal_from_json(read_json(signal_path));
                cfg.basis = explicit_signal->basis().size();
                alpha = explicit_signal->alpha();
            }
            const auto result = run_pipeline(cfg, alpha);
            for (const auto& p : result.artifacts) {
                report(p);
            }
            std::cout << "mu=" << format_double(result.mu) << " mu_bar=" << format_double(result.mu_bar);
            if (result.reconstruction.err_rel) {
                std::cout << " err_rel=" << format_double(*result.reconstruction.err_rel);
            }
            std::cout << "\n";
            if (result.reconstruction.failed) {
                throw NumericalFailure("reconstruction failed: " + result.reconstruction.diagnostic);
            }
        }
    } catch (const PipelineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.stage() == "config" ? kUsage : kNumerical;
    } catch (const NumericalFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const DegenerateColumnError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return 0;
}
