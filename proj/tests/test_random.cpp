#include "sesa/random.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace sesa;

TEST_SUITE("random") {

TEST_CASE("same seed gives the same stream") {
    CounterRng a(42);
    CounterRng b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(a.counter() == 100);
}

TEST_CASE("output is a pure function of seed and counter") {
    CounterRng rng(7);
    rng.next_u64();
    const auto second = rng.next_u64();
    CHECK(second == splitmix64_mix(7 + 2 * 0x9E3779B97F4A7C15ULL));
}

TEST_CASE("different seeds diverge") {
    CounterRng a(1);
    CounterRng b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

TEST_CASE("below stays in range and hits every value") {
    CounterRng rng(3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = rng.below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("uniform lies in [0, 1) with mean near one half") {
    CounterRng rng(11);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 5 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("normal draws have unit variance") {
    CounterRng rng(5);
    const int n = 200000;
    double s1 = 0.0;
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s1 += z;
        s2 += z * z;
    }
    const double mean = s1 / n;
    CHECK(std::abs(mean) < 5.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - mean * mean - 1.0) < 0.02);
}

TEST_CASE("derived seeds are distinct per stream") {
    std::set<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 1000; ++s) seeds.insert(derive_seed(42, s));
    CHECK(seeds.size() == 1000);
    CHECK(derive_seed(42, 3) == derive_seed(42, 3));
    CHECK(derive_seed(42, 3) != derive_seed(43, 3));
}

}
