#include "chaa2i/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace chaa2i;

TEST_CASE("rng is deterministic per seed") {
    Rng a(7);
    Rng b(7);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("uniform and below stay in range") {
    Rng r(3);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = r.uniform(-1.0, 1.0);
        CHECK(v >= -1.0);
        CHECK(v < 1.0);
        CHECK(r.below(5) < 5);
    }
    CHECK_THROWS_AS(r.below(0), std::invalid_argument);
}

TEST_CASE("normal draws have unit moments") {
    Rng r(11);
    const int n = 200000;
    double s = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("choose returns distinct indices") {
    Rng r(5);
    const auto pick = r.choose(100, 30);
    REQUIRE(pick.size() == 30);
    CHECK(std::set<std::size_t>(pick.begin(), pick.end()).size() == 30);
    CHECK(*std::max_element(pick.begin(), pick.end()) < 100);
    CHECK(r.choose(4, 4).size() == 4);
    CHECK_THROWS_AS(r.choose(3, 4), std::invalid_argument);
}

TEST_CASE("derived seeds separate streams and indices") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t stream = 0; stream < 4; ++stream) {
        for (std::uint64_t i = 0; i < 50; ++i) {
            seen.insert(derive_seed(1, stream, i));
        }
    }
    CHECK(seen.size() == 200);
    CHECK(derive_seed(9, 2, 3) == derive_seed(9, 2, 3));
    CHECK(derive_seed(9, 2, 3) != derive_seed(10, 2, 3));
}
