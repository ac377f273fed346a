#include "chaa2i/dynamics.hpp"

#include "chaa2i/random.hpp"
#include "propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace chaa2i {

void LorenzConfig::validate() const {
    if (!(tau > 0.0)) {
        throw std::invalid_argument("LorenzConfig: tau must be positive");
    }
    if (!(mu >= 0.0)) {
        throw std::invalid_argument("LorenzConfig: mu must be non-negative");
    }
}

LorenzSystem::LorenzSystem(const LorenzConfig& config) : config_(config) {
    config_.validate();
}

void LorenzSystem::field(double, std::span<const double> x, std::span<double> dx) const {
    const auto& p = config_;
    dx[0] = p.tau * (p.a * (x[1] - x[0]));
    dx[1] = p.tau * (p.b * x[0] - x[1] - x[0] * x[2]);
    dx[2] = p.tau * (x[0] * x[1] - p.c * x[2]);
}

void LorenzSystem::jacobian(double, std::span<const double> x, std::span<double> jac) const {
    const auto& p = config_;
    jac[0] = -p.tau * p.a;
    jac[1] = p.tau * p.a;
    jac[2] = 0.0;
    jac[3] = p.tau * (p.b - x[2]);
    jac[4] = -p.tau;
    jac[5] = -p.tau * x[0];
    jac[6] = p.tau * x[1];
    jac[7] = p.tau * x[0];
    jac[8] = -p.tau * p.c;
}

std::array<double, 3> lorenz_field(const LorenzConfig& config, std::span<const double> x, double t, double drive) {
    std::array<double, 3> dx{};
    LorenzSystem(config).field(t, x, dx);
    dx[1] += config.mu * drive;
    return dx;
}

std::size_t step_count(double t0, double t1, double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("integrator step must be positive");
    }
    if (!(t1 >= t0)) {
        throw std::invalid_argument("integration interval is reversed");
    }
    const double ratio = (t1 - t0) / h;
    const double n = std::round(ratio);
    if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
        std::ostringstream msg;
        msg << "step " << h << " does not divide interval [" << t0 << ", " << t1 << "]";
        throw std::invalid_argument(msg.str());
    }
    return static_cast<std::size_t>(n);
}

namespace detail {

Propagator::Propagator(const ChaoticSystem& system, const FourierBasis& basis, std::span<const double> alpha,
                       const IntegratorOptions& options, Columns columns, const ObservationMap* channel,
                       double origin)
    : system_(system), basis_(basis), alpha_(alpha), h_(options.step), bound_(options.blowup_bound),
      origin_(origin), channel_(channel), d_(system.dimension()),
      p_((columns.initial_state ? system.dimension() : 0) + (columns.coefficients ? basis.size() : 0)),
      alpha_offset_(columns.initial_state ? system.dimension() : 0), mu_(system.coupling()),
      row_(system.excitation_row()), x0_columns_(columns.initial_state) {
    if (!(h_ > 0.0)) {
        throw std::invalid_argument("integrator step must be positive");
    }
    if (alpha_.size() != basis_.size()) {
        throw std::invalid_argument("coefficient vector does not match the basis");
    }
    if (channel_ != nullptr && channel_->weights.size() != d_) {
        throw std::invalid_argument("observation map dimension does not match the system");
    }
    const bool any_alpha = std::any_of(alpha_.begin(), alpha_.end(), [](double a) { return a != 0.0; });
    forcing_ = mu_ != 0.0 && (any_alpha || columns.coefficients);
    if (!columns.coefficients) {
        alpha_offset_ = p_;
    }

    const std::size_t n = d_ + 1 + (d_ + 1) * p_;
    z_.assign(n, 0.0);
    k1_.assign(n, 0.0);
    k2_.assign(n, 0.0);
    k3_.assign(n, 0.0);
    k4_.assign(n, 0.0);
    tmp_.assign(n, 0.0);
    jac_.assign(d_ * d_, 0.0);
    if (forcing_) {
        psi0_.assign(basis_.size(), 0.0);
        psi_mid_.assign(basis_.size(), 0.0);
        psi1_.assign(basis_.size(), 0.0);
    }
}

void Propagator::start(std::size_t node, std::span<const double> x) {
    if (x.size() != d_) {
        throw std::invalid_argument("start state has wrong dimension");
    }
    node_ = node;
    std::fill(z_.begin(), z_.end(), 0.0);
    std::copy(x.begin(), x.end(), z_.begin());
    if (x0_columns_) {
        for (std::size_t i = 0; i < d_; ++i) {
            z_[d_ + 1 + i * p_ + i] = 1.0;
        }
    }
    if (forcing_) {
        basis_.evaluate(time_at(node_), psi0_);
    }
}

void Propagator::clear_channel() {
    z_[d_] = 0.0;
    double* grad = z_.data() + d_ + 1 + d_ * p_;
    std::fill(grad, grad + p_, 0.0);
}

void Propagator::derivative(double t, const double* psi, const double* z, double* dz) {
    const std::span<const double> x(z, d_);
    system_.field(t, x, std::span<double>(dz, d_));
    double drive = 0.0;
    if (forcing_) {
        for (std::size_t k = 0; k < alpha_.size(); ++k) {
            drive += psi[k] * alpha_[k];
        }
        dz[row_] += mu_ * drive;
    }
    dz[d_] = channel_ != nullptr ? (*channel_)(x) : 0.0;
    if (p_ == 0) {
        return;
    }

    system_.jacobian(t, x, jac_);
    const double* phi = z + d_ + 1;
    double* dphi = dz + d_ + 1;
    for (std::size_t i = 0; i < d_; ++i) {
        double* out = dphi + i * p_;
        std::fill(out, out + p_, 0.0);
        for (std::size_t j = 0; j < d_; ++j) {
            const double jij = jac_[i * d_ + j];
            if (jij == 0.0) {
                continue;
            }
            const double* in = phi + j * p_;
            for (std::size_t p = 0; p < p_; ++p) {
                out[p] += jij * in[p];
            }
        }
    }
    if (forcing_ && alpha_offset_ < p_) {
        double* out = dphi + row_ * p_ + alpha_offset_;
        for (std::size_t k = 0; k < basis_.size(); ++k) {
            out[k] += mu_ * psi[k];
        }
    }
    double* qrow = dphi + d_ * p_;
    std::fill(qrow, qrow + p_, 0.0);
    if (channel_ != nullptr) {
        for (std::size_t j = 0; j < d_; ++j) {
            const double c = channel_->weights[j];
            if (c == 0.0) {
                continue;
            }
            const double* in = phi + j * p_;
            for (std::size_t p = 0; p < p_; ++p) {
                qrow[p] += c * in[p];
            }
        }
    }
}

void Propagator::step() {
    const std::size_t n = z_.size();
    const double t = time_at(node_);
    const double t_mid = t + 0.5 * h_;
    const double t_next = time_at(node_ + 1);
    if (forcing_) {
        basis_.evaluate(t_mid, psi_mid_);
        basis_.evaluate(t_next, psi1_);
    }
    const double half = 0.5 * h_;

    derivative(t, psi0_.data(), z_.data(), k1_.data());
    for (std::size_t i = 0; i < n; ++i) {
        tmp_[i] = z_[i] + half * k1_[i];
    }
    derivative(t_mid, psi_mid_.data(), tmp_.data(), k2_.data());
    for (std::size_t i = 0; i < n; ++i) {
        tmp_[i] = z_[i] + half * k2_[i];
    }
    derivative(t_mid, psi_mid_.data(), tmp_.data(), k3_.data());
    for (std::size_t i = 0; i < n; ++i) {
        tmp_[i] = z_[i] + h_ * k3_[i];
    }
    derivative(t_next, psi1_.data(), tmp_.data(), k4_.data());
    const double sixth = h_ / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
        z_[i] += sixth * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }
    ++node_;
    if (forcing_) {
        std::swap(psi0_, psi1_);
    }

    for (std::size_t i = 0; i < d_; ++i) {
        if (!(std::abs(z_[i]) <= bound_)) {
            std::ostringstream msg;
            msg << "state component " << i << " diverged (" << z_[i] << ") at t = " << time();
            throw DivergenceError(msg.str(), time());
        }
    }
}

} // namespace detail

TrajectoryGrid integrate(const ChaoticSystem& system, const SparseSignal& signal, std::span<const double> x0,
                         double t0, double t1, const IntegratorOptions& options) {
    const std::size_t steps = step_count(t0, t1, options.step);
    detail::Propagator prop(system, signal.basis(), signal.alpha(), options, {}, nullptr, t0);
    prop.start(0, x0);

    TrajectoryGrid grid;
    grid.t0 = t0;
    grid.step = options.step;
    grid.dimension = system.dimension();
    grid.states.reserve((steps + 1) * grid.dimension);
    auto push = [&] {
        const auto x = prop.state();
        grid.states.insert(grid.states.end(), x.begin(), x.end());
    };
    push();
    for (std::size_t s = 0; s < steps; ++s) {
        prop.step();
        push();
    }
    return grid;
}

std::vector<SensitivityState> integrate_with_sensitivities(const ChaoticSystem& system, const SparseSignal& signal,
                                                           std::span<const double> x0, double t0, double t1,
                                                           const IntegratorOptions& options, std::size_t stride) {
    if (stride == 0) {
        throw std::invalid_argument("recording stride must be positive");
    }
    const std::size_t steps = step_count(t0, t1, options.step);
    const std::size_t d = system.dimension();
    const std::size_t b = signal.basis().size();
    detail::Propagator prop(system, signal.basis(), signal.alpha(), options, {true, true}, nullptr, t0);
    prop.start(0, x0);

    std::vector<SensitivityState> out;
    auto record = [&] {
        SensitivityState s;
        s.t = prop.time();
        const auto x = prop.state();
        s.x.assign(x.begin(), x.end());
        s.dx_dx0.resize(d, d);
        s.dx_dalpha.resize(d, b);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                s.dx_dx0(i, j) = prop.sensitivity(i, j);
            }
            for (std::size_t k = 0; k < b; ++k) {
                s.dx_dalpha(i, k) = prop.sensitivity(i, prop.coefficient_offset() + k);
            }
        }
        out.push_back(std::move(s));
    };
    record();
    for (std::size_t s = 1; s <= steps; ++s) {
        prop.step();
        if (s % stride == 0 || s == steps) {
            record();
        }
    }
    return out;
}

std::vector<State> sample_attractor_initial_states(const LorenzConfig& config, std::size_t n, std::uint64_t seed,
                                                   const AttractorSampling& sampling) {
    if (n == 0) {
        throw std::invalid_argument("sample_attractor_initial_states: n must be at least 1");
    }
    LorenzConfig autonomous = config;
    autonomous.mu = 0.0;
    const LorenzSystem system(autonomous);
    const double h = sampling.integrator.step;
    const auto transient_steps = static_cast<std::size_t>(std::llround(sampling.transient / config.tau / h));
    const auto span_steps = static_cast<std::size_t>(std::llround(sampling.span / config.tau / h));
    if (span_steps + 1 < n) {
        throw std::invalid_argument("sample_attractor_initial_states: sampling span has fewer nodes than requested");
    }

    Rng rng(seed);
    const auto picks = rng.choose(span_steps + 1, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return picks[i] < picks[j]; });

    const FourierBasis basis(2);
    const std::vector<double> no_alpha(2, 0.0);
    detail::Propagator prop(system, basis, no_alpha, sampling.integrator, {}, nullptr);
    prop.start(0, sampling.start);
    for (std::size_t s = 0; s < transient_steps; ++s) {
        prop.step();
    }

    std::vector<State> states(n);
    std::size_t node = 0;
    for (const std::size_t i : order) {
        while (node < picks[i]) {
            prop.step();
            ++node;
        }
        const auto x = prop.state();
        states[i].assign(x.begin(), x.end());
    }
    return states;
}

} // namespace chaa2i
