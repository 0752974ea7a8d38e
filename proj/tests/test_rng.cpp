#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "lvmi/rng.hpp"
#include "support/testutil.hpp"

using namespace lvmi;

TEST_CASE("identical (seed, stream) reproduce identical sequences") {
    RngStream a(42, Phase::Test, 7);
    RngStream b(42, Phase::Test, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(a.counter() == 1000);
}

TEST_CASE("distinct streams decorrelate") {
    RngStream a(42, Phase::Test, 1);
    RngStream b(42, Phase::Test, 2);
    int equal = 0;
    for (int i = 0; i < 1000; ++i) equal += a.next_u64() == b.next_u64();
    CHECK(equal == 0);
}

TEST_CASE("uniform and normal moments") {
    RngStream rng(7, Phase::Test, 0);
    std::vector<double> us, ns;
    for (int i = 0; i < 200000; ++i) {
        us.push_back(rng.uniform());
        ns.push_back(rng.normal());
    }
    const auto mu = test::moments(us);
    CHECK(mu.mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(mu.var == doctest::Approx(1.0 / 12.0).epsilon(0.03));
    const auto mn = test::moments(ns);
    CHECK(std::abs(mn.mean) < 4.0 * mn.se_mean);
    CHECK(mn.var == doctest::Approx(1.0).epsilon(0.03));
    for (double u : us) {
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("mix_seed separates nearby inputs") {
    CHECK(mix_seed(1, 2) != mix_seed(1, 3));
    CHECK(mix_seed(1, 2) != mix_seed(2, 2));
    CHECK(stream_id(Phase::FitSweep, 5) != stream_id(Phase::ImputeSweep, 5));
}
