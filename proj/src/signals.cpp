#include "chaa2i/signals.hpp"

#include "chaa2i/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace chaa2i {

FourierBasis::FourierBasis(std::size_t size) : size_(size) {
    if (size < 2 || size % 2 != 0) {
        throw std::invalid_argument("FourierBasis: size must be even and >= 2, got " +
                                    std::to_string(size));
    }
}

void FourierBasis::evaluate(double t, std::span<double> out) const {
    if (out.size() != size_) {
        throw std::invalid_argument("FourierBasis::evaluate: output span has wrong length");
    }
    const std::size_t half = harmonics();
    const double angle = 2.0 * std::numbers::pi * t;
    const double c1 = std::cos(angle);
    const double s1 = std::sin(angle);
    double c = c1;
    double s = s1;
    for (std::size_t k = 0; k < half; ++k) {
        out[k] = c;
        out[half + k] = s;
        const double next_c = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = next_c;
    }
}

double FourierBasis::function(std::size_t k, double t) const {
    if (k >= size_) {
        throw std::out_of_range("FourierBasis::function: index out of range");
    }
    const std::size_t half = harmonics();
    if (k < half) {
        return std::cos(2.0 * std::numbers::pi * static_cast<double>(k + 1) * t);
    }
    return std::sin(2.0 * std::numbers::pi * static_cast<double>(k - half + 1) * t);
}

SparseSignal::SparseSignal(FourierBasis basis, std::vector<double> alpha)
    : basis_(basis), alpha_(std::move(alpha)) {
    if (alpha_.size() != basis_.size()) {
        throw std::invalid_argument("SparseSignal: coefficient count " + std::to_string(alpha_.size()) +
                                    " does not match basis size " + std::to_string(basis_.size()));
    }
}

SparseSignal SparseSignal::zero(FourierBasis basis) {
    return SparseSignal(basis, std::vector<double>(basis.size(), 0.0));
}

std::size_t SparseSignal::sparsity() const {
    return static_cast<std::size_t>(std::count_if(alpha_.begin(), alpha_.end(), [](double a) { return a != 0.0; }));
}

std::vector<std::size_t> SparseSignal::support() const {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < alpha_.size(); ++k) {
        if (alpha_[k] != 0.0) {
            idx.push_back(k);
        }
    }
    return idx;
}

double evaluate(const SparseSignal& signal, double t) {
    std::vector<double> psi(signal.basis().size());
    signal.basis().evaluate(t, psi);
    const auto alpha = signal.alpha();
    return std::inner_product(psi.begin(), psi.end(), alpha.begin(), 0.0);
}

SparseSignal generate_sparse(const FourierBasis& basis, const SparsitySpec& spec) {
    if (spec.sparsity > basis.size()) {
        throw std::invalid_argument("generate_sparse: sparsity " + std::to_string(spec.sparsity) +
                                    " exceeds basis size " + std::to_string(basis.size()));
    }
    Rng rng(spec.seed);
    const auto positions = rng.choose(basis.size(), spec.sparsity);
    std::vector<double> alpha(basis.size(), 0.0);
    for (const std::size_t k : positions) {
        double a = 0.0;
        if (spec.law == AmplitudeLaw::bernoulli) {
            a = (rng.next_u64() >> 63) != 0 ? 1.0 : -1.0;
        } else {
            // A Gaussian draw of exactly zero would lose a support position.
            do {
                a = rng.normal();
            } while (a == 0.0);
        }
        alpha[k] = a;
    }
    return SparseSignal(basis, std::move(alpha));
}

double relative_error(std::span<const double> estimate, std::span<const double> truth) {
    if (estimate.size() != truth.size()) {
        throw std::invalid_argument("relative_error: length mismatch");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = estimate[i] - truth[i];
        num += d * d;
        den += truth[i] * truth[i];
    }
    if (den == 0.0) {
        throw std::invalid_argument("relative_error: reference vector is zero");
    }
    return num / den;
}

} // namespace chaa2i
