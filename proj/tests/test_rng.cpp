#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "kt/rng.hpp"

using kt::Rng;

TEST_CASE("same seed reproduces the stream exactly") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
    Rng a(13), b(42);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    REQUIRE(same == 0);
}

TEST_CASE("uniform stays in [0,1)") {
    Rng r(7);
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("below covers the full range without bias artifacts") {
    Rng r(11);
    std::set<uint64_t> seen;
    for (int i = 0; i < 5000; ++i) {
        uint64_t x = r.below(7);
        REQUIRE(x < 7);
        seen.insert(x);
    }
    REQUIRE(seen.size() == 7);
}

TEST_CASE("normal has roughly standard moments") {
    Rng r(3);
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        s += x;
        s2 += x * x;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.02);
    REQUIRE(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("shuffle is a permutation and deterministic per seed") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> w = v;
    Rng a(99), b(99);
    a.shuffle(v);
    b.shuffle(w);
    REQUIRE(v == w);
    std::set<int> s(v.begin(), v.end());
    REQUIRE(s.size() == 50);
}

TEST_CASE("derived streams are independent of draw position and tag-distinct") {
    Rng master(1234);
    master.next_u64();
    Rng c1 = master.derive("folds");
    Rng c2 = Rng(1234).derive("folds");
    REQUIRE(c1.next_u64() == c2.next_u64());
    Rng c3 = master.derive("init");
    REQUIRE(master.derive("folds").next_u64() != c3.next_u64());
}
