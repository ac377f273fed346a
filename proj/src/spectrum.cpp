#include "chaa2i/spectrum.hpp"

#include <fftw3.h>

#include <complex>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace chaa2i {

namespace {

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

} // namespace

double energy_bandwidth(std::span<const double> samples, double step, double fraction) {
    const std::size_t n = samples.size();
    if (n < kMinSpectrumNodes) {
        throw std::invalid_argument("bandwidth estimation needs at least 1024 samples");
    }
    if (!(step > 0.0)) {
        throw std::invalid_argument("sample step must be positive");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("energy fraction must lie in (0, 1]");
    }
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
    std::vector<double> in(n);
    for (std::size_t i = 0; i < n; ++i) {
        in[i] = samples[i] - mean;
    }
    const std::size_t bins = n / 2 + 1;
    std::vector<std::complex<double>> out(bins);
    {
        // Planner calls are not thread-safe; estimation runs are rare enough to serialize.
        std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
#pragma omp critical(chaa2i_fftw_plan)
        plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                        FFTW_ESTIMATE));
        fftw_execute(plan.get());
#pragma omp critical(chaa2i_fftw_plan)
        plan.reset();
    }
    std::vector<double> power(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        const bool paired = k != 0 && !(n % 2 == 0 && k == n / 2);
        power[k] = std::norm(out[k]) * (paired ? 2.0 : 1.0);
    }
    const double total = std::accumulate(power.begin(), power.end(), 0.0);
    const double df = 1.0 / (static_cast<double>(n) * step);
    if (total <= 0.0) {
        return 0.0;
    }
    double running = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
        running += power[k];
        if (running >= fraction * total) {
            return static_cast<double>(k) * df;
        }
    }
    return static_cast<double>(bins - 1) * df;
}

double estimate_bandwidth(const TrajectoryGrid& trajectory, std::size_t channel, double fraction) {
    if (channel >= trajectory.dimension) {
        throw std::invalid_argument("channel index out of range");
    }
    std::vector<double> samples(trajectory.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i] = trajectory.component(i, channel);
    }
    return energy_bandwidth(samples, trajectory.step, fraction);
}

} // namespace chaa2i
