#include "chaa2i/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace chaa2i {

namespace {

const Json& require(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw std::invalid_argument(std::string("missing key \"") + key + "\"");
    }
    return j.at(key);
}

std::vector<double> doubles(const Json& j) {
    std::vector<double> out;
    for (const auto& v : j) {
        // NaN is stored as null.
        out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    }
    return out;
}

Json number(double v) {
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

Json numbers(std::span<const double> v) {
    Json arr = Json::array();
    for (double x : v) {
        arr.push_back(number(x));
    }
    return arr;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::invalid_argument("not a number: " + s);
    }
    return v;
}

template <class T> T parse_integer(const std::string& s) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::invalid_argument("not an integer: " + s);
    }
    return v;
}

} // namespace

std::string format_double(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw std::runtime_error("number formatting failed");
    }
    return std::string(buf, ptr);
}

Json to_json(const SparseSignal& signal) {
    Json j;
    j["B"] = signal.basis().size();
    j["alpha"] = numbers(signal.alpha());
    return j;
}

SparseSignal signal_from_json(const Json& j) {
    const auto b = require(j, "B").get<std::size_t>();
    auto alpha = doubles(require(j, "alpha"));
    if (alpha.size() != b) {
        throw std::invalid_argument("alpha length does not match B");
    }
    return SparseSignal(FourierBasis(b), std::move(alpha));
}

Json to_json(const MeasurementVector& y, std::optional<std::span<const double>> x0) {
    Json j;
    j["T_cs"] = y.plan.interval();
    j["y"] = numbers(y.y);
    if (x0) {
        j["x0"] = numbers(*x0);
    }
    return j;
}

MeasurementFile measurements_from_json(const Json& j) {
    MeasurementFile out{{doubles(require(j, "y")), MeasurementPlan(require(j, "T_cs").get<double>())}, std::nullopt};
    if (out.measurements.y.size() != out.measurements.plan.count()) {
        throw std::invalid_argument("y length does not match floor(1 / T_cs)");
    }
    if (j.contains("x0")) {
        out.x0 = doubles(j.at("x0"));
    }
    return out;
}

Json to_json(const IdentifiabilityReport& report) {
    Json j;
    j["mu"] = number(report.mu);
    j["mu_bar"] = number(report.mu_bar);
    j["lambda"] = report.lambda;
    j["epsilon"] = report.epsilon;
    j["T_cs"] = report.t_cs;
    j["W"] = report.w;
    j["reconstructable"] = report.reconstructable;
    j["per_state_mu"] = numbers(report.per_state_mu);
    j["failed_states"] = report.failed_states;
    return j;
}

IdentifiabilityReport identifiability_from_json(const Json& j) {
    IdentifiabilityReport r;
    auto num = [](const Json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); };
    r.mu = num(require(j, "mu"));
    r.mu_bar = num(require(j, "mu_bar"));
    r.lambda = require(j, "lambda").get<double>();
    r.t_cs = require(j, "T_cs").get<double>();
    r.w = require(j, "W").get<std::size_t>();
    r.per_state_mu = doubles(require(j, "per_state_mu"));
    if (j.contains("epsilon")) {
        r.epsilon = j.at("epsilon").get<double>();
    }
    if (j.contains("reconstructable")) {
        r.reconstructable = j.at("reconstructable").get<bool>();
    }
    if (j.contains("failed_states")) {
        r.failed_states = j.at("failed_states").get<std::vector<std::size_t>>();
    }
    return r;
}

Json to_json(const ReconstructionResult& result) {
    Json j;
    j["alpha_hat"] = numbers(result.alpha_hat);
    j["err_rel"] = result.err_rel ? number(*result.err_rel) : Json(nullptr);
    j["converged"] = result.converged;
    j["stalled"] = result.stalled;
    j["failed"] = result.failed;
    j["realizations"] = result.realizations;
    j["best_realization"] = result.best_realization;
    j["iterations"] = result.iterations;
    j["outer_iterations"] = result.outer_iterations;
    j["regularized_solves"] = result.regularized_solves;
    j["max_join_mismatch"] = number(result.max_join_mismatch);
    j["score"] = number(result.score);
    j["diagnostic"] = result.diagnostic;
    j["cost_trace"] = numbers(result.cost_trace);
    j["merit_before"] = numbers(result.merit_before);
    j["merit_after"] = numbers(result.merit_after);
    Json per = Json::array();
    for (const auto& r : result.per_realization) {
        Json e;
        e["index"] = r.index;
        e["failed"] = r.failed;
        e["converged"] = r.converged;
        e["err_rel"] = r.relative_error ? number(*r.relative_error) : Json(nullptr);
        e["score"] = number(r.score);
        e["iterations"] = r.iterations;
        e["diagnostic"] = r.diagnostic;
        per.push_back(std::move(e));
    }
    j["per_realization"] = std::move(per);
    return j;
}

ReconstructionResult reconstruction_from_json(const Json& j) {
    auto num = [](const Json& v) { return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>(); };
    ReconstructionResult r;
    r.alpha_hat = doubles(require(j, "alpha_hat"));
    if (!require(j, "err_rel").is_null()) {
        r.err_rel = j.at("err_rel").get<double>();
    }
    r.converged = require(j, "converged").get<bool>();
    r.stalled = require(j, "stalled").get<bool>();
    r.failed = require(j, "failed").get<bool>();
    r.realizations = require(j, "realizations").get<std::size_t>();
    r.best_realization = require(j, "best_realization").get<std::size_t>();
    r.iterations = require(j, "iterations").get<std::size_t>();
    r.outer_iterations = require(j, "outer_iterations").get<std::size_t>();
    r.regularized_solves = require(j, "regularized_solves").get<std::size_t>();
    r.max_join_mismatch = num(require(j, "max_join_mismatch"));
    r.score = num(require(j, "score"));
    r.diagnostic = require(j, "diagnostic").get<std::string>();
    r.cost_trace = doubles(require(j, "cost_trace"));
    r.merit_before = doubles(require(j, "merit_before"));
    r.merit_after = doubles(require(j, "merit_after"));
    for (const auto& e : require(j, "per_realization")) {
        RealizationSummary s;
        s.index = e.at("index").get<std::size_t>();
        s.failed = e.at("failed").get<bool>();
        s.converged = e.at("converged").get<bool>();
        if (!e.at("err_rel").is_null()) {
            s.relative_error = e.at("err_rel").get<double>();
        }
        s.score = num(e.at("score"));
        s.iterations = e.at("iterations").get<std::size_t>();
        s.diagnostic = e.at("diagnostic").get<std::string>();
        r.per_realization.push_back(std::move(s));
    }
    return r;
}

Json to_json(const ExperimentConfig& c) {
    Json j;
    j["B"] = c.basis;
    j["a"] = c.lorenz.a;
    j["b"] = c.lorenz.b;
    j["c"] = c.lorenz.c;
    j["tau"] = c.lorenz.tau;
    j["mu"] = c.lorenz.mu;
    j["T_cs"] = c.t_cs;
    j["W"] = c.sparsity;
    Json laws = Json::array();
    for (auto law : c.laws) {
        laws.push_back(law_name(law));
    }
    j["law"] = std::move(laws);
    j["lambda"] = c.lambda;
    j["epsilon"] = c.epsilon;
    j["n_trials"] = c.n_trials;
    j["n_realizations"] = c.n_realizations;
    j["n_initial_states"] = c.n_initial_states;
    j["seed"] = c.seed;
    j["h"] = c.step;
    j["segments"] = c.segments;
    j["max_inner"] = c.max_inner;
    j["max_outer"] = c.max_outer;
    j["tolerance"] = c.tolerance;
    j["damping"] = c.damping;
    j["node_init"] = c.node_init == NodeInit::integrate ? "integrate" : "attractor";
    j["workers"] = c.workers;
    j["out"] = c.output_dir.generic_string();
    return j;
}

ExperimentConfig config_from_json(const Json& j, ExperimentConfig c) {
    if (!j.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }
    static const std::vector<std::string> known = {
        "B", "a", "b", "c", "tau", "mu", "T_cs", "W", "law", "lambda", "epsilon", "n_trials", "n_realizations",
        "n_initial_states", "seed", "h", "segments", "max_inner", "max_outer", "tolerance", "damping", "node_init",
        "workers", "out"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown config key \"" + key + "\"");
        }
    }
    // Scalars are accepted where lists are expected.
    auto list = [](const Json& v, auto tag) {
        using T = decltype(tag);
        if (v.is_array()) {
            return v.get<std::vector<T>>();
        }
        return std::vector<T>{v.get<T>()};
    };
    if (j.contains("B")) c.basis = j.at("B").get<std::size_t>();
    if (j.contains("a")) c.lorenz.a = j.at("a").get<double>();
    if (j.contains("b")) c.lorenz.b = j.at("b").get<double>();
    if (j.contains("c")) c.lorenz.c = j.at("c").get<double>();
    if (j.contains("tau")) c.lorenz.tau = j.at("tau").get<double>();
    if (j.contains("mu")) c.lorenz.mu = j.at("mu").get<double>();
    if (j.contains("T_cs")) c.t_cs = list(j.at("T_cs"), double{});
    if (j.contains("W")) c.sparsity = list(j.at("W"), std::size_t{});
    if (j.contains("law")) {
        c.laws.clear();
        for (const auto& name : list(j.at("law"), std::string{})) {
            c.laws.push_back(parse_law(name));
        }
    }
    if (j.contains("lambda")) c.lambda = list(j.at("lambda"), double{});
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("n_trials")) c.n_trials = j.at("n_trials").get<std::size_t>();
    if (j.contains("n_realizations")) c.n_realizations = j.at("n_realizations").get<std::size_t>();
    if (j.contains("n_initial_states")) c.n_initial_states = j.at("n_initial_states").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("h")) c.step = j.at("h").get<double>();
    if (j.contains("segments")) c.segments = j.at("segments").get<std::size_t>();
    if (j.contains("max_inner")) c.max_inner = j.at("max_inner").get<std::size_t>();
    if (j.contains("max_outer")) c.max_outer = j.at("max_outer").get<std::size_t>();
    if (j.contains("tolerance")) c.tolerance = j.at("tolerance").get<double>();
    if (j.contains("damping")) c.damping = j.at("damping").get<bool>();
    if (j.contains("node_init")) {
        const auto v = j.at("node_init").get<std::string>();
        if (v == "integrate") {
            c.node_init = NodeInit::integrate;
        } else if (v == "attractor") {
            c.node_init = NodeInit::attractor;
        } else {
            throw std::invalid_argument("node_init must be \"integrate\" or \"attractor\"");
        }
    }
    if (j.contains("workers")) c.workers = j.at("workers").get<std::size_t>();
    if (j.contains("out")) c.output_dir = j.at("out").get<std::string>();
    return c;
}

std::string records_csv(std::span<const SweepRecord> records) {
    std::string out = "experiment,T_cs,W,law,lambda,trial,statistic,value,seed\n";
    for (const auto& r : records) {
        out += r.experiment + "," + format_double(r.t_cs) + "," + std::to_string(r.w) + "," + r.law + "," +
               format_double(r.lambda) + "," + std::to_string(r.trial) + "," + r.statistic + "," +
               format_double(r.value) + "," + std::to_string(r.seed) + "\n";
    }
    return out;
}

std::vector<SweepRecord> records_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "experiment,T_cs,W,law,lambda,trial,statistic,value,seed") {
        throw std::invalid_argument("unexpected record CSV header");
    }
    std::vector<SweepRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 9) {
            throw std::invalid_argument("record CSV row needs 9 fields: " + line);
        }
        out.push_back({f[0], parse_double(f[1]), parse_integer<std::size_t>(f[2]), f[3], parse_double(f[4]),
                       parse_integer<std::size_t>(f[5]), f[6], parse_double(f[7]), parse_integer<std::uint64_t>(f[8])});
    }
    return out;
}

std::string measurements_csv(const MeasurementVector& y) {
    std::string out = "m,y\n";
    for (std::size_t m = 0; m < y.y.size(); ++m) {
        out += std::to_string(m + 1) + "," + format_double(y.y[m]) + "\n";
    }
    return out;
}

std::string trajectory_csv(const TrajectoryGrid& grid) {
    std::string out = "t";
    for (std::size_t i = 0; i < grid.dimension; ++i) {
        out += ",x" + std::to_string(i + 1);
    }
    out += "\n";
    for (std::size_t n = 0; n < grid.size(); ++n) {
        out += format_double(grid.time(n));
        for (std::size_t i = 0; i < grid.dimension; ++i) {
            out += "," + format_double(grid.component(n, i));
        }
        out += "\n";
    }
    return out;
}

std::string waveform_csv(const SparseSignal& signal, double rate) {
    if (!(rate > 0.0)) {
        throw std::invalid_argument("waveform rate must be positive");
    }
    const auto n = static_cast<std::size_t>(std::llround(rate));
    std::string out = "t,s\n";
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) / rate;
        out += format_double(t) + "," + format_double(evaluate(signal, t)) + "\n";
    }
    return out;
}

std::string bandwidth_csv(std::span<const BandwidthPoint> points) {
    std::string out = "tau,run,bandwidth_hz\n";
    for (const auto& p : points) {
        for (std::size_t r = 0; r < p.runs.size(); ++r) {
            out += format_double(p.tau) + "," + std::to_string(r) + "," + format_double(p.runs[r]) + "\n";
        }
        out += format_double(p.tau) + ",mean," + format_double(p.mean) + "\n";
    }
    return out;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

void write_json(const std::filesystem::path& path, const Json& j) {
    write_text(path, j.dump(2) + "\n");
}

} // namespace chaa2i
