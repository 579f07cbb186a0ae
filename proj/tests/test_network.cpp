#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "acmt/errors.hpp"
#include "acmt/network.hpp"
#include "acmt/rng.hpp"
#include "support/oracles.hpp"

using namespace acmt;

namespace {

NetworkConfig small_cfg() {
    NetworkConfig c;
    c.levels = 3;
    c.base_channels = 4;
    c.time_embed_dim = 8;
    c.seed = 3;
    return c;
}

Tensor rand_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t = Tensor::randn({1, h, w}, rng, 0.5);
    t.clamp(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("config validation") {
    NetworkConfig c;
    CHECK_NOTHROW(c.validate());
    c.levels = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = NetworkConfig{};
    c.time_embed_dim = 7;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = NetworkConfig{};
    c.base_channels = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("default network shapes at 64x64") {
    TranslatorNet net;  // levels=4, base=16
    Tensor x = rand_image(64, 64, 1);
    FeatureTaps taps;
    ad::NoGradGuard guard;
    ad::Var y = net.forward(ad::Var(x, false), 0.4, &taps);

    REQUIRE(y.value().ndim() == 3);
    CHECK(y.value().dim(0) == 1);
    CHECK(y.value().dim(1) == 64);
    CHECK(y.value().dim(2) == 64);
    CHECK(y.value().min() >= -1.0);
    CHECK(y.value().max() <= 1.0);

    REQUIRE(taps.shallow.defined());
    REQUIRE(taps.deep.defined());
    CHECK(taps.shallow.value().shape() == std::vector<int>{16, 32, 32});
    CHECK(taps.deep.value().shape() == std::vector<int>{128, 8, 8});

    CHECK(net.parameter_count() > 100000);
    CHECK(net.parameter_count() < 2000000);
}

TEST_CASE("construction and forward are deterministic in the seed") {
    NetworkConfig c = small_cfg();
    TranslatorNet a(c), b(c);
    CHECK(a.fingerprint() == b.fingerprint());

    c.seed = 4;
    TranslatorNet d(c);
    CHECK(a.fingerprint() != d.fingerprint());

    Tensor x = rand_image(16, 16, 2);
    Tensor y1 = a.predict(x, 0.2);
    Tensor y2 = b.predict(x, 0.2);
    CHECK(fingerprint(y1) == fingerprint(y2));
}

TEST_CASE("time conditioning changes the output") {
    TranslatorNet net(small_cfg());
    Tensor x = rand_image(16, 16, 5);
    Tensor y0 = net.predict(x, 0.0);
    Tensor y8 = net.predict(x, 0.8);
    double diff = 0;
    for (int i = 0; i < y0.numel(); ++i) diff = std::max(diff, std::abs(y0[i] - y8[i]));
    CHECK(diff > 1e-8);
}

TEST_CASE("forward argument validation") {
    TranslatorNet net(small_cfg());  // needs dims divisible by 4
    Rng rng(6);
    CHECK_THROWS_AS(net.forward(ad::Var(Tensor::randn({1, 18, 16}, rng), false), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(net.forward(ad::Var(Tensor::randn({2, 16, 16}, rng), false), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(net.forward(ad::Var(Tensor::randn({1, 16, 16}, rng), false), 1.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(net.forward(ad::Var(Tensor::randn({1, 16, 16}, rng), false), -0.1),
                    std::invalid_argument);
}

TEST_CASE("extract_features matches the forward-pass taps at t=0") {
    TranslatorNet net(small_cfg());
    Tensor x = rand_image(16, 16, 7);
    ad::NoGradGuard guard;
    FeatureTaps from_forward;
    net.forward(ad::Var(x, false), 0.0, &from_forward);
    FeatureTaps direct = net.extract_features(ad::Var(x, false));
    CHECK(fingerprint(direct.shallow.value()) == fingerprint(from_forward.shallow.value()));
    CHECK(fingerprint(direct.deep.value()) == fingerprint(from_forward.deep.value()));
}

TEST_CASE("gradients reach every parameter") {
    TranslatorNet net(small_cfg());
    Tensor x = rand_image(16, 16, 8);
    ad::Var y = net.forward(ad::Var(x, false), 0.4);
    ad::backward(ad::mean_all(ad::square(y)));

    int with_grad = 0;
    for (const auto& p : net.parameters())
        if (p.has_grad()) ++with_grad;
    // Every tensor except the final-block FiLM shift (whose gradient can be
    // zero only by coincidence) should receive a gradient tensor.
    CHECK(with_grad == static_cast<int>(net.parameters().size()));
    net.zero_grad();
    for (const auto& p : net.parameters()) CHECK_FALSE(p.has_grad());
}

TEST_CASE("predict records no tape and matches forward values") {
    TranslatorNet net(small_cfg());
    Tensor x = rand_image(16, 16, 9);
    Tensor y = net.predict(x, 0.6);
    ad::NoGradGuard guard;
    Tensor y2 = net.forward(ad::Var(x, false), 0.6).value();
    CHECK(fingerprint(y) == fingerprint(y2));
}

TEST_CASE("checkpoint roundtrip restores weights exactly") {
    std::string dir = oracles::temp_dir("net_ckpt");
    NetworkConfig cfgn = small_cfg();
    TranslatorNet net(cfgn);

    Checkpoint ckpt;
    ckpt.config = cfgn;
    ckpt.step = 17;
    ckpt.rng_state = "dummy-state";
    const auto& names = net.parameter_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        ckpt.tensors.emplace_back(names[i], net.parameters()[i].value());
    save_checkpoint(dir, ckpt);

    Checkpoint back = load_checkpoint(dir);
    CHECK(back.step == 17);
    CHECK(back.rng_state == "dummy-state");
    CHECK(back.config.levels == cfgn.levels);
    TranslatorNet restored = make_network(back);
    CHECK(restored.fingerprint() == net.fingerprint());
}

TEST_CASE("checkpoint corruption is detected") {
    std::string dir = oracles::temp_dir("net_ckpt_bad");
    NetworkConfig cfgn = small_cfg();
    TranslatorNet net(cfgn);
    Checkpoint ckpt;
    ckpt.config = cfgn;
    const auto& names = net.parameter_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        ckpt.tensors.emplace_back(names[i], net.parameters()[i].value());
    save_checkpoint(dir, ckpt);

    SUBCASE("flipped byte in weights") {
        std::fstream f(dir + "/weights.bin", std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(33);
        f.put(0x7f);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(dir), CorruptCheckpointError);
    }
    SUBCASE("truncated weights") {
        std::filesystem::resize_file(dir + "/weights.bin", 100);
        CHECK_THROWS_AS(load_checkpoint(dir), CorruptCheckpointError);
    }
    SUBCASE("missing meta") {
        std::filesystem::remove(dir + "/meta.json");
        CHECK_THROWS_AS(load_checkpoint(dir), CorruptCheckpointError);
    }
    SUBCASE("meta is not json") {
        std::ofstream(dir + "/meta.json") << "garbage";
        CHECK_THROWS_AS(load_checkpoint(dir), CorruptCheckpointError);
    }
    SUBCASE("missing tensor rejected by make_network") {
        Checkpoint c2 = load_checkpoint(dir);
        c2.tensors.erase(c2.tensors.begin());
        CHECK_THROWS_AS(make_network(c2), CorruptCheckpointError);
    }
}

TEST_CASE("fingerprint tracks weight changes") {
    TranslatorNet net(small_cfg());
    std::uint64_t before = net.fingerprint();
    net.parameters()[0].value()[0] += 1e-12;
    CHECK(net.fingerprint() != before);
}
