#include "doctest.h"

#include <cmath>

#include "acmt/bridge.hpp"
#include "support/oracles.hpp"

using namespace acmt;

TEST_CASE("bridge config validation") {
    BridgeConfig ok;
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.pool_size() == 5);

    BridgeConfig bad = ok;
    bad.sigma = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = ok;
    bad.timestep_pool = {0.1, 0.5};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // must start at 0

    bad = ok;
    bad.timestep_pool = {0.0, 0.4, 0.4};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // strictly increasing

    bad = ok;
    bad.timestep_pool = {0.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // terminal time excluded

    bad = ok;
    bad.timestep_pool.clear();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("cfm endpoints are exact even with noise enabled") {
    Rng rng(1);
    Tensor a = Tensor::randn({2, 3, 3}, rng);
    Tensor b = Tensor::randn({2, 3, 3}, rng);
    Tensor at_m = cfm_interpolate(a, b, 0.2, 0.8, 0.2, 0.5, rng);
    Tensor at_n = cfm_interpolate(a, b, 0.2, 0.8, 0.8, 0.5, rng);
    for (int i = 0; i < a.numel(); ++i) {
        CHECK(at_m[i] == a[i]);
        CHECK(at_n[i] == b[i]);
    }
}

TEST_CASE("cfm with sigma zero is the exact linear mix") {
    Rng rng(2);
    Tensor a = Tensor::randn({4, 4}, rng);
    Tensor b = Tensor::randn({4, 4}, rng);
    Tensor mid = cfm_interpolate(a, b, 0.0, 0.8, 0.6, 0.0, rng);
    for (int i = 0; i < a.numel(); ++i)
        CHECK(mid[i] == doctest::Approx(0.75 * b[i] + 0.25 * a[i]).epsilon(1e-12));
}

TEST_CASE("cfm sample moments match the closed form") {
    Rng rng(3);
    const double t_m = 0.2, t_n = 0.9, t = 0.65, sigma = 0.8;
    const double w = (t - t_m) / (t_n - t_m);
    const double var = w * (1.0 - w) * sigma * (t_n - t_m);
    Tensor a = Tensor::from({1, 1, 1}, {0.3});
    Tensor b = Tensor::from({1, 1, 1}, {-0.7});

    const int n = 20000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double v = cfm_interpolate(a, b, t_m, t_n, t, sigma, rng)[0];
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double sample_var = sum2 / n - mean * mean;
    const double want_mean = w * b[0] + (1.0 - w) * a[0];
    // 4 standard errors of the mean / variance estimators.
    CHECK(std::abs(mean - want_mean) < 4.0 * std::sqrt(var / n));
    CHECK(std::abs(sample_var - var) < 4.0 * var * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("cfm argument validation") {
    Rng rng(4);
    Tensor a = Tensor::zeros({2, 2});
    Tensor b = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(cfm_interpolate(a, b, 0.0, 0.5, 0.2, 0.1, rng), std::invalid_argument);
    Tensor c = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(cfm_interpolate(a, c, 0.5, 0.5, 0.5, 0.1, rng), std::invalid_argument);
    CHECK_THROWS_AS(cfm_interpolate(a, c, 0.0, 0.5, 0.7, 0.1, rng), std::invalid_argument);
    CHECK_THROWS_AS(cfm_interpolate(a, c, 0.0, 0.5, 0.2, -1.0, rng), std::invalid_argument);
}

TEST_CASE("diffusion step hand values and terminal exactness") {
    Rng rng(5);
    Tensor x = Tensor::from({1, 1, 2}, {1.0, -1.0});
    Tensor x1 = Tensor::from({1, 1, 2}, {3.0, 5.0});

    // w = (0.4-0.2)/(1-0.2) = 0.25
    Tensor stepped = diffusion_step(x, x1, 0.2, 0.4, 0.0, rng);
    CHECK(stepped[0] == doctest::Approx(0.25 * 3.0 + 0.75 * 1.0));
    CHECK(stepped[1] == doctest::Approx(0.25 * 5.0 + 0.75 * -1.0));

    // Stepping to t=1 returns the prediction exactly, noise coefficient 0.
    Tensor terminal = diffusion_step(x, x1, 0.6, 1.0, 123.0, rng);
    CHECK(terminal[0] == x1[0]);
    CHECK(terminal[1] == x1[1]);
}

TEST_CASE("noiseless chaining stays on the straight line to the prediction") {
    // If the predictor always answers the same x1, the state after walking
    // to pool time t equals t*x1 + (1-t)*x0, for any pool.
    Rng seeds(6);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> pool{0.0};
        int extra = 2 + static_cast<int>(seeds.uniform_int(5));
        double t = 0.0;
        for (int i = 0; i < extra; ++i) {
            t += 0.02 + 0.9 * (1.0 - t) * seeds.uniform() * 0.3;
            if (t >= 0.99) break;
            pool.push_back(t);
        }
        BridgeConfig cfg;
        cfg.sigma = 0.0;
        cfg.timestep_pool = pool;
        CHECK_NOTHROW(cfg.validate());

        Rng rng(trial);
        Tensor x0 = Tensor::randn({1, 4, 4}, rng);
        Tensor x1 = Tensor::randn({1, 4, 4}, rng);

        Tensor state = x0;
        for (std::size_t j = 0; j + 1 < pool.size(); ++j)
            state = diffusion_step(state, x1, pool[j], pool[j + 1], 0.0, rng);
        double tp = pool.back();
        for (int i = 0; i < state.numel(); ++i)
            CHECK(std::abs(state[i] - (tp * x1[i] + (1.0 - tp) * x0[i])) < 1e-12);

        Tensor done = diffusion_step(state, x1, pool.back(), 1.0, 0.0, rng);
        for (int i = 0; i < done.numel(); ++i) CHECK(std::abs(done[i] - x1[i]) < 1e-12);
    }
}

TEST_CASE("pool_sample draws valid and roughly uniform indices") {
    Rng rng(7);
    std::vector<double> pool{0.0, 0.2, 0.4, 0.6, 0.8};
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 20000; ++i) {
        auto [idx, t] = pool_sample(pool, rng);
        REQUIRE(idx >= 0);
        REQUIRE(idx < 5);
        CHECK(t == pool[static_cast<std::size_t>(idx)]);
        ++counts[static_cast<std::size_t>(idx)];
    }
    for (int c : counts) CHECK(std::abs(c - 4000) < 400);
}
