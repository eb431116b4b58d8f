#include <doctest.h>

#include <cmath>

#include "privsim/metrics.hpp"
#include "privsim/rng.hpp"

using namespace privsim;

TEST_CASE("mre basics") {
    CHECK(mre({0.5, 0.7}, {0.5, 0.7}) == 0.0);
    CHECK(mre({0.6}, {0.5}) == doctest::Approx(0.2));
    CHECK_THROWS_AS(mre({0.5}, {0.01}), std::invalid_argument);  // below floor
    CHECK_THROWS_AS(mre({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(mre({0.5}, {0.5, 0.6}), std::invalid_argument);
}

TEST_CASE("mre equals the per-sample loop oracle") {
    Rng rng(5);
    std::vector<double> z(100), y(100);
    for (std::size_t i = 0; i < 100; ++i) {
        y[i] = 0.1 + 0.9 * rng.uniform01();
        z[i] = rng.uniform01();
    }
    double oracle = 0.0;
    for (std::size_t i = 0; i < 100; ++i) oracle += std::abs(z[i] - y[i]) / y[i];
    oracle /= 100.0;
    CHECK(mre(z, y) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("mre is scale consistent") {
    Rng rng(6);
    std::vector<double> z(50), y(50);
    for (std::size_t i = 0; i < 50; ++i) {
        y[i] = 0.1 + 0.4 * rng.uniform01();
        z[i] = 0.1 + 0.8 * rng.uniform01();
    }
    double base = mre(z, y);
    const double c = 1.7;
    std::vector<double> zc = z, yc = y;
    for (auto& v : zc) v *= c;
    for (auto& v : yc) v *= c;
    CHECK(mre(zc, yc) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("accuracy counting and permutation invariance") {
    CHECK(accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(accuracy({0, 0, 0}, {1, 2, 3}) == 0.0);
    CHECK(accuracy({1, 2, 3, 9}, {1, 2, 3, 4}) == doctest::Approx(0.75));
    CHECK_THROWS_AS(accuracy({}, {}), std::invalid_argument);

    std::vector<std::size_t> pred = {1, 0, 2, 2, 1};
    std::vector<std::size_t> truth = {1, 1, 2, 0, 1};
    double base = accuracy(pred, truth);
    std::vector<std::size_t> order = {4, 2, 0, 3, 1};
    std::vector<std::size_t> pp, tt;
    for (std::size_t i : order) {
        pp.push_back(pred[i]);
        tt.push_back(truth[i]);
    }
    CHECK(accuracy(pp, tt) == base);
}
