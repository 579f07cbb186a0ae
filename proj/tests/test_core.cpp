#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "acmt/autodiff.hpp"
#include "acmt/errors.hpp"
#include "acmt/field.hpp"
#include "acmt/image_io.hpp"
#include "acmt/mask_ops.hpp"
#include "acmt/ops.hpp"
#include "acmt/rng.hpp"
#include "acmt/tensor.hpp"
#include "support/oracles.hpp"

using namespace acmt;

TEST_CASE("rng determinism and ranges") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 1000; ++i) {
        double u = a.uniform();
        CHECK(u == b.uniform());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    bool differs = false;
    for (int i = 0; i < 10; ++i) differs |= (a.uniform() != c.uniform());
    CHECK(differs);
}

TEST_CASE("rng state roundtrip resumes identically") {
    Rng a(7);
    for (int i = 0; i < 137; ++i) a.normal();
    std::string s = a.state();
    Rng b(999);
    b.restore(s);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("rng normal moments are plausible") {
    Rng r(5);
    double sum = 0, sum2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}

TEST_CASE("rng uniform_int covers its range uniformly enough") {
    Rng r(11);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) ++counts[static_cast<std::size_t>(r.uniform_int(5))];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("mix_seed separates streams") {
    CHECK(mix_seed(1, 2) != mix_seed(1, 3));
    CHECK(mix_seed(1, 2) != mix_seed(2, 2));
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
}

TEST_CASE("tensor basics") {
    Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.at(1, 2) == 6);
    CHECK(t.sum() == doctest::Approx(21));
    CHECK(t.mean() == doctest::Approx(3.5));
    CHECK(t.max_abs() == 6);
    Tensor r = t.reshaped({3, 2});
    CHECK(r.at(2, 1) == 6);
    CHECK_THROWS_AS(t.reshaped({4, 2}), std::invalid_argument);

    Tensor u = t;
    u.add(t, 2.0);
    CHECK(u.at(0, 0) == 3);
    u.clamp(0.0, 10.0);
    CHECK(u.max() <= 10.0);
}

TEST_CASE("fingerprint is order- and value-sensitive") {
    Tensor a = Tensor::from({3}, {1, 2, 3});
    Tensor b = Tensor::from({3}, {1, 2, 3});
    CHECK(fingerprint(a) == fingerprint(b));
    b[2] = 3.0000001;
    CHECK(fingerprint(a) != fingerprint(b));
    Tensor c = Tensor::from({3}, {3, 2, 1});
    CHECK(fingerprint(a) != fingerprint(c));
}

TEST_CASE("conv2d matches the direct-summation oracle") {
    Rng rng(123);
    for (int trial = 0; trial < 30; ++trial) {
        int cin = 1 + static_cast<int>(rng.uniform_int(3));
        int cout = 1 + static_cast<int>(rng.uniform_int(3));
        int h = 3 + static_cast<int>(rng.uniform_int(8));
        int w = 3 + static_cast<int>(rng.uniform_int(8));
        int k = rng.uniform() < 0.5 ? 3 : (rng.uniform() < 0.5 ? 1 : 7);
        int stride = rng.uniform() < 0.3 ? 2 : 1;
        Tensor x = Tensor::randn({cin, h, w}, rng);
        Tensor wt = Tensor::randn({cout, cin, k, k}, rng);
        Tensor bias = Tensor::randn({cout}, rng);

        Tensor got = ops::conv2d(x, wt, &bias, stride);
        Tensor want = oracles::conv2d(x, wt, &bias, stride);
        REQUIRE(got.same_shape(want));
        double err = 0;
        for (int i = 0; i < got.numel(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
        CHECK(err < 1e-10);
    }
}

TEST_CASE("avgpool2 and upsample2 shapes and values") {
    Tensor x = Tensor::from({1, 2, 2}, {1, 2, 3, 4});
    Tensor p = ops::avgpool2(x);
    CHECK(p.numel() == 1);
    CHECK(p[0] == doctest::Approx(2.5));
    Tensor u = ops::upsample2(p);
    CHECK(u.dim(1) == 2);
    for (int i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(2.5));
}

TEST_CASE("bilinear_resize is exact on constants and reproduces identity") {
    Tensor x = Tensor::full({2, 6, 6}, 3.25);
    Tensor y = ops::bilinear_resize(x, 9, 5);
    for (int i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(3.25));
    Rng rng(3);
    Tensor z = Tensor::randn({1, 7, 5}, rng);
    Tensor same = ops::bilinear_resize(z, 7, 5);
    for (int i = 0; i < z.numel(); ++i) CHECK(same[i] == doctest::Approx(z[i]));
}

namespace {

// Checks d(sum(f(x) * mask))/dx against central differences.
void gradcheck(const std::function<ad::Var(const ad::Var&)>& f, const Tensor& x0,
               double tol = 1e-6) {
    Rng rng(991);
    ad::Var x(x0, true);
    ad::Var y = f(x);
    Tensor mask = Tensor::randn(y.value().shape(), rng);
    ad::Var masked = ad::mean_all(ad::mul(y, ad::Var(mask, false)));
    ad::backward(masked);
    REQUIRE(x.has_grad());

    auto scalar = [&](const Tensor& xt) {
        ad::NoGradGuard g;
        ad::Var xv(xt, false);
        ad::Var yv = f(xv);
        double acc = 0;
        for (int i = 0; i < yv.value().numel(); ++i) acc += yv.value()[i] * mask[i];
        return acc / yv.value().numel();
    };
    int checked = 0;
    for (int i = 0; i < x0.numel(); ++i) {
        double fd = oracles::fd_grad(scalar, x0, i);
        double an = x.grad()[i];
        CHECK(oracles::rel_err(an, fd) < tol);
        ++checked;
    }
    CHECK(checked == x0.numel());
}

}  // namespace

TEST_CASE("autodiff gradients match finite differences") {
    Rng rng(77);
    Tensor x = Tensor::randn({2, 4, 4}, rng, 0.5);

    SUBCASE("elementwise chain") {
        gradcheck([](const ad::Var& v) { return ad::silu(ad::scale(ad::add_scalar(v, 0.3), 1.7)); }, x);
        gradcheck([](const ad::Var& v) { return ad::tanh_op(v); }, x);
        gradcheck([](const ad::Var& v) { return ad::square(ad::sub(v, ad::scale(v, 0.25))); }, x);
        Tensor other = Tensor::randn(x.shape(), rng);
        gradcheck([&](const ad::Var& v) {
            return ad::mul(v, ad::add(v, ad::Var(other, false)));
        }, x);
    }
    SUBCASE("abs away from the kink") {
        Tensor far = x;
        for (int i = 0; i < far.numel(); ++i)
            if (std::abs(far[i]) < 0.05) far[i] = 0.2;
        gradcheck([](const ad::Var& v) { return ad::abs_val(v); }, far);
    }
    SUBCASE("conv film pool upsample") {
        Tensor w = Tensor::randn({3, 2, 3, 3}, rng, 0.4);
        Tensor b = Tensor::randn({3}, rng, 0.4);
        gradcheck([&](const ad::Var& v) {
            return ad::conv2d(v, ad::Var(w, false), ad::Var(b, false));
        }, x);
        gradcheck([](const ad::Var& v) { return ad::avgpool2(v); }, x);
        gradcheck([](const ad::Var& v) { return ad::upsample2(v); }, x);
        Tensor ss = Tensor::randn({4}, rng);
        gradcheck([&](const ad::Var& v) { return ad::film(v, ad::Var(ss, false)); }, x);
        gradcheck([&](const ad::Var& v) { return ad::concat_channels(v, ad::square(v)); }, x);
    }
    SUBCASE("conv weight and bias gradients") {
        Tensor w0 = Tensor::randn({3, 2, 3, 3}, rng, 0.4);
        gradcheck([&](const ad::Var& wv) {
            return ad::conv2d(ad::Var(x, false), wv);
        }, w0);
        Tensor b0 = Tensor::randn({3}, rng);
        Tensor wfix = Tensor::randn({3, 2, 3, 3}, rng, 0.4);
        gradcheck([&](const ad::Var& bv) {
            return ad::conv2d(ad::Var(x, false), ad::Var(wfix, false), bv);
        }, b0);
    }
    SUBCASE("linear and projection") {
        Tensor v0 = Tensor::randn({6}, rng);
        Tensor wm = Tensor::randn({4, 6}, rng);
        Tensor bm = Tensor::randn({4}, rng);
        gradcheck([&](const ad::Var& v) { return ad::linear(ad::Var(wm, false), v, ad::Var(bm, false)); }, v0);
        gradcheck([&](const ad::Var& wv) { return ad::linear(wv, ad::Var(v0, false), ad::Var(bm, false)); }, wm);

        Tensor rows = Tensor::randn({5, 6}, rng);
        Tensor proj = Tensor::randn({6, 3}, rng);
        gradcheck([&](const ad::Var& v) { return ad::project(v, proj); }, rows);
    }
    SUBCASE("entropy estimator has an exact analytic backward") {
        Tensor s = Tensor::randn({8, 3}, rng);
        ad::Var sv(s, true);
        ad::Var h = ad::loo_kde_entropy(sv, 0.7);
        ad::backward(h);
        auto scalar = [&](const Tensor& st) {
            ad::NoGradGuard g;
            return ad::loo_kde_entropy(ad::Var(st, false), 0.7).value()[0];
        };
        for (int i = 0; i < s.numel(); ++i) {
            double fd = oracles::fd_grad(scalar, s, i, 1e-5);
            CHECK(oracles::rel_err(sv.grad()[i], fd) < 1e-5);
        }
    }
}

TEST_CASE("autodiff bookkeeping") {
    Rng rng(8);
    Tensor t = Tensor::randn({3, 2, 2}, rng);

    SUBCASE("detach blocks gradient flow") {
        ad::Var x(t, true);
        ad::Var y = ad::mean_all(ad::square(x.detach()));
        CHECK_FALSE(y.requires_grad());
        CHECK_THROWS_AS(ad::backward(y), std::invalid_argument);
        CHECK_FALSE(x.has_grad());

        // A detached branch inside a live graph contributes no gradient.
        ad::Var z = ad::mean_all(ad::add(ad::square(x), ad::scale(x.detach(), 100.0)));
        ad::backward(z);
        CHECK(x.grad()[0] == doctest::Approx(2.0 * t[0] / t.numel()));
    }
    SUBCASE("NoGradGuard records no tape") {
        ad::Var x(t, true);
        ad::NoGradGuard g;
        ad::Var y = ad::mean_all(ad::square(x));
        CHECK(y.node()->parents.empty());
    }
    SUBCASE("gradients accumulate across backward calls") {
        ad::Var x(t, true);
        ad::Var y = ad::mean_all(x);
        ad::backward(y);
        Tensor g1 = x.grad();
        ad::Var y2 = ad::mean_all(x);
        ad::backward(y2);
        CHECK(x.grad()[0] == doctest::Approx(2.0 * g1[0]));
        x.zero_grad();
        CHECK_FALSE(x.has_grad());
    }
    SUBCASE("diamond-shaped graphs sum both paths") {
        ad::Var x(Tensor::from({1}, {3.0}), true);
        ad::Var y = ad::add(ad::square(x), ad::scale(x, 4.0));  // x^2 + 4x -> dy/dx = 2x+4
        ad::backward(y);
        CHECK(x.grad()[0] == doctest::Approx(10.0));
    }
}

TEST_CASE("mask ops behave on hand-built shapes") {
    Tensor m = Tensor::zeros({5, 5});
    for (int i = 1; i <= 3; ++i)
        for (int j = 1; j <= 3; ++j) m.at(i, j) = 1.0;
    CHECK(is_binary(m));
    Tensor er = erode4(m);
    CHECK(er.sum() == doctest::Approx(1.0));
    CHECK(er.at(2, 2) == 1.0);
    Tensor band = boundary_band(m);
    CHECK(band.sum() == doctest::Approx(8.0));
    CHECK(band.at(2, 2) == 0.0);
    CHECK(count_components4(m) == 1);
    m.at(0, 0) = 1.0;  // isolated corner pixel
    CHECK(count_components4(m) == 2);

    Tensor nb = Tensor::full({2, 2}, 0.5);
    CHECK_FALSE(is_binary(nb));
}

TEST_CASE("warp with zero field is identity; constant field shifts") {
    Rng rng(21);
    Tensor img = Tensor::randn({6, 7}, rng);
    DisplacementField zero(6, 7);
    Tensor same = warp(img, zero, Interp::Bilinear);
    for (int i = 0; i < img.numel(); ++i) CHECK(same[i] == doctest::Approx(img[i]));

    DisplacementField shift(6, 7);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 7; ++j) shift.dx(i, j) = 1.0;
    Tensor moved = warp(img, shift, Interp::Nearest);
    CHECK(moved.at(2, 3) == img.at(2, 4));
    CHECK(moved.at(2, 6) == img.at(2, 6));  // border clamp
}

TEST_CASE("invert_field undoes a smooth field") {
    const int n = 32;
    DisplacementField f(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            f.dy(i, j) = 1.5 * std::sin(2 * M_PI * j / n);
            f.dx(i, j) = -1.2 * std::cos(2 * M_PI * i / n);
        }
    DisplacementField inv = invert_field(f);
    double worst = 0;
    for (int i = 4; i < n - 4; ++i)
        for (int j = 4; j < n - 4; ++j) {
            double vy, vx;
            sample_field(inv, i + f.dy(i, j), j + f.dx(i, j), vy, vx);
            worst = std::max(worst, std::hypot(f.dy(i, j) + vy, f.dx(i, j) + vx));
        }
    CHECK(worst < 0.05);
}

TEST_CASE("png16 roundtrip is near-exact and deterministic") {
    std::string dir = oracles::temp_dir("core_png");
    Rng rng(31);
    Tensor img = Tensor::randn({16, 12}, rng, 0.4);
    img.clamp(-1.0, 1.0);
    write_png16(dir + "/a.png", img);
    Tensor back = read_png16(dir + "/a.png");
    REQUIRE(back.same_shape(img));
    double err = 0;
    for (int i = 0; i < img.numel(); ++i) err = std::max(err, std::abs(back[i] - img[i]));
    CHECK(err <= 1.0 / 65535.0);

    write_png16(dir + "/b.png", img);
    CHECK(file_crc32(dir + "/a.png") == file_crc32(dir + "/b.png"));
    // Re-encoding the decoded image is lossless: quantization happened once.
    write_png16(dir + "/c.png", back);
    Tensor back2 = read_png16(dir + "/c.png");
    for (int i = 0; i < img.numel(); ++i) CHECK(back2[i] == back[i]);
}

TEST_CASE("mask png roundtrip is exact and rejects non-binary files") {
    std::string dir = oracles::temp_dir("core_mask");
    Tensor m = Tensor::zeros({9, 9});
    for (int i = 2; i < 7; ++i)
        for (int j = 3; j < 6; ++j) m.at(i, j) = 1.0;
    write_png8_mask(dir + "/m.png", m);
    Tensor back = read_png8_mask(dir + "/m.png");
    for (int i = 0; i < m.numel(); ++i) CHECK(back[i] == m[i]);

    Tensor img = Tensor::full({9, 9}, 0.1);
    write_png16(dir + "/gray.png", img);
    CHECK_THROWS_AS(read_png8_mask(dir + "/gray.png"), CorruptDatasetError);
}

TEST_CASE("field file roundtrip is bit-exact at float32 and detects truncation") {
    std::string dir = oracles::temp_dir("core_field");
    Rng rng(17);
    DisplacementField f(8, 5);
    f.u = Tensor::randn({2, 8, 5}, rng, 2.0);
    write_field(dir + "/f.bin", dir + "/f.json", f);
    DisplacementField back = read_field(dir + "/f.bin", dir + "/f.json");
    for (int i = 0; i < f.u.numel(); ++i)
        CHECK(back.u[i] == doctest::Approx(f.u[i]).epsilon(1e-6));

    std::filesystem::resize_file(dir + "/f.bin", 17);
    CHECK_THROWS_AS(read_field(dir + "/f.bin", dir + "/f.json"), CorruptDatasetError);
}
