#include "oracles.hpp"

#include "chaa2i/random.hpp"
#include "chaa2i/signals.hpp"

#include <doctest.h>

#include <cmath>

using namespace chaa2i;

TEST_CASE("basis rejects odd or tiny sizes") {
    CHECK_THROWS_AS(FourierBasis(0), std::invalid_argument);
    CHECK_THROWS_AS(FourierBasis(3), std::invalid_argument);
    CHECK(FourierBasis(100).bandwidth() == 50.0);
    CHECK(FourierBasis(100).nyquist_interval() == doctest::Approx(0.01));
}

TEST_CASE("evaluate on hand-checked coefficients") {
    const FourierBasis b4(4);
    CHECK(evaluate(SparseSignal::zero(b4), 0.37) == 0.0);
    CHECK(evaluate(SparseSignal(b4, {1, 0, 0, 0}), 0.0) == doctest::Approx(1.0));
    CHECK(evaluate(SparseSignal(b4, {0, 0, 1, 0}), 0.25) == doctest::Approx(1.0));
    CHECK(evaluate(SparseSignal(b4, {0, 1, 0, 0}), 0.25) == doctest::Approx(-1.0));
    CHECK(evaluate(SparseSignal(b4, {0, 0, 0, 1}), 0.125) == doctest::Approx(1.0));
}

TEST_CASE("evaluate matches the term-by-term sum") {
    const FourierBasis basis(100);
    Rng r(1);
    std::vector<double> alpha(100);
    for (auto& a : alpha) a = r.normal();
    const SparseSignal s(basis, alpha);
    for (int i = 0; i < 50; ++i) {
        const double t = r.uniform(-2.0, 2.0);
        CHECK(evaluate(s, t) == doctest::Approx(oracle::excitation(alpha, t)).epsilon(1e-10));
        CHECK(basis.function(7, t) == doctest::Approx(std::cos(2 * std::numbers::pi * 8 * t)));
        CHECK(basis.function(57, t) == doctest::Approx(std::sin(2 * std::numbers::pi * 8 * t)));
    }
}

TEST_CASE("evaluate is linear in alpha") {
    const FourierBasis basis(20);
    Rng r(2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a1(20), a2(20), mix(20);
        const double p = r.normal();
        const double q = r.normal();
        for (std::size_t k = 0; k < 20; ++k) {
            a1[k] = r.normal();
            a2[k] = r.normal();
            mix[k] = p * a1[k] + q * a2[k];
        }
        const double t = r.uniform();
        const double lhs = evaluate(SparseSignal(basis, mix), t);
        const double rhs = p * evaluate(SparseSignal(basis, a1), t) + q * evaluate(SparseSignal(basis, a2), t);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("mean square over the unit interval is half the energy") {
    const FourierBasis basis(40);
    const auto s = generate_sparse(basis, {8, AmplitudeLaw::gaussian, 4});
    const int n = 10000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = evaluate(s, static_cast<double>(i) / n);
        acc += v * v;
    }
    double energy = 0.0;
    for (double a : s.alpha()) energy += a * a;
    CHECK(std::abs(acc / n - energy / 2) <= 1e-3);
}

TEST_CASE("generate_sparse draws exactly W entries") {
    const FourierBasis basis(100);
    const auto bern = generate_sparse(basis, {5, AmplitudeLaw::bernoulli, 17});
    CHECK(bern.sparsity() == 5);
    for (double a : bern.alpha()) {
        CHECK((a == 0.0 || a == 1.0 || a == -1.0));
    }
    CHECK(generate_sparse(basis, {0, AmplitudeLaw::gaussian, 3}).sparsity() == 0);
    CHECK(generate_sparse(basis, {100, AmplitudeLaw::gaussian, 3}).sparsity() == 100);
    CHECK(generate_sparse(basis, {12, AmplitudeLaw::gaussian, 9}) ==
          generate_sparse(basis, {12, AmplitudeLaw::gaussian, 9}));
    CHECK(generate_sparse(basis, {12, AmplitudeLaw::gaussian, 9}) !=
          generate_sparse(basis, {12, AmplitudeLaw::gaussian, 10}));
    CHECK_THROWS_AS(generate_sparse(basis, {101, AmplitudeLaw::gaussian, 1}), std::invalid_argument);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CHECK(generate_sparse(basis, {7, AmplitudeLaw::gaussian, seed}).sparsity() == 7);
    }
}

TEST_CASE("relative error examples") {
    const std::vector<double> a = {1.0, -2.0, 0.5};
    const std::vector<double> twice = {2.0, -4.0, 1.0};
    CHECK(relative_error(a, a) == 0.0);
    CHECK(relative_error(twice, a) == doctest::Approx(1.0));
    CHECK(relative_error(std::vector<double>{1.0, 0.1}, std::vector<double>{1.0, 0.0}) == doctest::Approx(0.01));
    CHECK_THROWS_AS(relative_error(a, std::vector<double>{0, 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(relative_error(a, std::vector<double>{1, 0}), std::invalid_argument);
}
