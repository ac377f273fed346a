#pragma once

#include "chaa2i/dynamics.hpp"
#include "chaa2i/measurement.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace chaa2i::detail {

/// RK4 stepping of the excited system, optionally augmented with sensitivity
/// columns (w.r.t. the start state and/or the coefficients) and one
/// integrate-and-dump channel H(x). The channel and its gradient are part of
/// the integrated vector, so they see exactly the same stages as the state.
///
/// Layout of the integrated vector: [x (d) | q | Phi ((d+1) x P, row-major)],
/// where row d of Phi is the gradient of q.
class Propagator {
public:
    struct Columns {
        bool initial_state = false;
        bool coefficients = false;
    };

    Propagator(const ChaoticSystem& system, const FourierBasis& basis, std::span<const double> alpha,
               const IntegratorOptions& options, Columns columns, const ObservationMap* channel,
               double origin = 0.0);

    /// Places the state at node `node` (t = origin + node * h); sensitivities
    /// restart at [I | 0] and the channel at zero.
    void start(std::size_t node, std::span<const double> x);
    void clear_channel();
    /// One RK4 step. Throws DivergenceError past the blow-up bound.
    void step();

    std::size_t node() const { return node_; }
    double time() const { return time_at(node_); }
    std::size_t dimension() const { return d_; }
    std::size_t columns() const { return p_; }
    /// Column index of the first coefficient sensitivity.
    std::size_t coefficient_offset() const { return alpha_offset_; }

    std::span<const double> state() const { return {z_.data(), d_}; }
    double channel() const { return z_[d_]; }
    std::span<const double> channel_gradient() const { return {z_.data() + d_ + 1 + d_ * p_, p_}; }
    double sensitivity(std::size_t row, std::size_t col) const { return z_[d_ + 1 + row * p_ + col]; }

private:
    double time_at(std::size_t node) const { return origin_ + static_cast<double>(node) * h_; }
    void derivative(double t, const double* psi, const double* z, double* dz);

    const ChaoticSystem& system_;
    FourierBasis basis_;
    std::span<const double> alpha_;
    double h_;
    double bound_;
    double origin_;
    const ObservationMap* channel_;
    std::size_t d_;
    std::size_t p_;
    std::size_t alpha_offset_;
    bool forcing_;
    double mu_;
    std::size_t row_;
    bool x0_columns_;
    std::size_t node_ = 0;

    std::vector<double> z_, k1_, k2_, k3_, k4_, tmp_;
    std::vector<double> psi0_, psi_mid_, psi1_;
    std::vector<double> jac_;
};

} // namespace chaa2i::detail
