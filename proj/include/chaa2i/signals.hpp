#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace chaa2i {

/// Real harmonic basis on the unit observation interval.
///
/// Index k (0-based) below B/2 is cos(2 pi (k+1) t); index B/2 + k is
/// sin(2 pi (k+1) t). A signal in this basis is band-limited to B/2 Hz and
/// its Nyquist sampling interval is 1/B seconds.
class FourierBasis {
public:
    /// Throws std::invalid_argument unless size is even and at least 2.
    explicit FourierBasis(std::size_t size);

    std::size_t size() const { return size_; }
    std::size_t harmonics() const { return size_ / 2; }
    double bandwidth() const { return static_cast<double>(size_) / 2.0; }
    double nyquist_interval() const { return 1.0 / static_cast<double>(size_); }

    /// Fills out[0..B) with every basis function at time t. Harmonics are
    /// generated by angle-addition from cos/sin(2 pi t).
    void evaluate(double t, std::span<double> out) const;

    /// Single basis function, evaluated directly with std::cos/std::sin.
    double function(std::size_t k, double t) const;

    friend bool operator==(const FourierBasis&, const FourierBasis&) = default;

private:
    std::size_t size_;
};

/// Fourier coefficient vector over a FourierBasis.
class SparseSignal {
public:
    /// Throws std::invalid_argument if alpha.size() != basis.size().
    SparseSignal(FourierBasis basis, std::vector<double> alpha);

    /// The zero signal.
    static SparseSignal zero(FourierBasis basis);

    const FourierBasis& basis() const { return basis_; }
    std::span<const double> alpha() const { return alpha_; }
    std::size_t sparsity() const;
    std::vector<std::size_t> support() const;

    friend bool operator==(const SparseSignal&, const SparseSignal&) = default;

private:
    FourierBasis basis_;
    std::vector<double> alpha_;
};

enum class AmplitudeLaw { gaussian, bernoulli };

struct SparsitySpec {
    std::size_t sparsity = 0;
    AmplitudeLaw law = AmplitudeLaw::gaussian;
    std::uint64_t seed = 0;
};

/// s(t) = Psi(t) alpha. Defined for every real t.
double evaluate(const SparseSignal& signal, double t);

/// Draws exactly spec.sparsity nonzero positions uniformly without
/// replacement and fills them with N(0,1) or +-1 amplitudes. Deterministic in
/// spec.seed. Throws std::invalid_argument if sparsity > B.
SparseSignal generate_sparse(const FourierBasis& basis, const SparsitySpec& spec);

/// ||estimate - truth||^2 / ||truth||^2. Throws on length mismatch or a zero
/// truth vector.
double relative_error(std::span<const double> estimate, std::span<const double> truth);

} // namespace chaa2i
