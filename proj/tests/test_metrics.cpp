#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "acmt/errors.hpp"
#include "acmt/field.hpp"
#include "acmt/metrics.hpp"
#include "acmt/objectives.hpp"
#include "acmt/phantom.hpp"
#include "acmt/rng.hpp"
#include "acmt/tensor.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace acmt;

namespace {

Tensor mask_from(const std::vector<std::string>& rows) {
    Tensor m({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m.at(static_cast<int>(i), static_cast<int>(j)) = rows[i][j] == '#' ? 1.0 : 0.0;
    return m;
}

// Random binary mask, guaranteed nonempty.
Tensor random_mask(Rng& rng, int h, int w) {
    Tensor m({h, w});
    const double density = rng.uniform(0.15, 0.7);
    for (int i = 0; i < m.numel(); ++i) m[i] = rng.uniform() < density ? 1.0 : 0.0;
    if (m.sum() == 0.0) m[rng.uniform_int(m.numel())] = 1.0;
    return m;
}

Tensor rows_subset(const Tensor& pool, const std::vector<int>& idx, int from, int to) {
    const int d = pool.dim(1);
    Tensor out({to - from, d});
    for (int r = from; r < to; ++r)
        for (int c = 0; c < d; ++c) out.at(r - from, c) = pool.at(idx[r], c);
    return out;
}

}  // namespace

TEST_CASE("dsc and iou hand values") {
    Tensor a({16, 16}), b({16, 16});
    a.fill(0.0);
    b.fill(0.0);
    // |A| = |B| = 100 with 50 shared pixels -> union 150.
    for (int k = 0; k < 100; ++k) a[k] = 1.0;
    for (int k = 50; k < 150; ++k) b[k] = 1.0;
    CHECK(dsc(a, b) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK(dsc(a, a) == 1.0);
    CHECK(iou(a, a) == 1.0);

    Tensor c({16, 16});
    c.fill(0.0);
    for (int k = 200; k < 230; ++k) c[k] = 1.0;  // disjoint from a
    CHECK(dsc(a, c) == 0.0);
    CHECK(iou(a, c) == 0.0);

    CHECK(dsc(a, b) == dsc(b, a));
    CHECK(iou(a, b) == iou(b, a));
}

TEST_CASE("empty masks raise the undefined-metric error") {
    Tensor e({8, 8}), f({8, 8});
    e.fill(0.0);
    f.fill(0.0);
    CHECK_THROWS_AS(dsc(e, f), UndefinedMetricError);
    CHECK_THROWS_AS(iou(e, f), UndefinedMetricError);
    CHECK_THROWS_AS(asd_px(e, f), UndefinedMetricError);

    Tensor g = e;
    g.at(3, 3) = 1.0;
    // A single empty side still defines the overlap scores, just not asd.
    CHECK(dsc(e, g) == 0.0);
    CHECK(iou(g, e) == 0.0);
    CHECK_THROWS_AS(asd_px(g, e), UndefinedMetricError);
}

TEST_CASE("mask validation") {
    Tensor a({4, 4}), b({4, 5}), c({2, 4, 4}), d({4, 4});
    a.fill(1.0);
    b.fill(1.0);
    c.fill(1.0);
    d.fill(1.0);
    d.at(1, 1) = 0.5;
    CHECK_THROWS_AS(dsc(a, b), std::invalid_argument);
    CHECK_THROWS_AS(iou(a, c.reshaped({8, 4})), std::invalid_argument);
    CHECK_THROWS_AS(dsc(a, d), std::invalid_argument);
    CHECK_THROWS_AS(asd_px(d, a), std::invalid_argument);
}

TEST_CASE("asd hand values and shifted-square oracle") {
    Tensor a({12, 12}), b({12, 12});
    a.fill(0.0);
    b.fill(0.0);
    a.at(3, 2) = 1.0;
    b.at(3, 7) = 1.0;
    CHECK(asd_px(a, b) == doctest::Approx(5.0).epsilon(1e-12));  // single pixels, same row

    Tensor sq({16, 16}), sh({16, 16});
    sq.fill(0.0);
    sh.fill(0.0);
    for (int i = 2; i < 12; ++i)
        for (int j = 2; j < 12; ++j) {
            sq.at(i, j) = 1.0;
            sh.at(i, j + 2) = 1.0;  // same 10x10 square shifted 2 px right
        }
    CHECK(asd_px(sq, sq) == 0.0);
    CHECK(std::abs(asd_px(sq, sh) - oracles::asd(sq, sh)) <= 1e-9);
    CHECK(asd_px(sq, sh) == doctest::Approx(asd_px(sh, sq)).epsilon(1e-12));
}

TEST_CASE("overlap metrics match oracles on 100 random masks") {
    Rng rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 4 + rng.uniform_int(13);  // up to 16
        const int w = 4 + rng.uniform_int(13);
        Tensor a = random_mask(rng, h, w);
        Tensor b = random_mask(rng, h, w);

        const double got_d = dsc(a, b), got_i = iou(a, b);
        CHECK(got_d == oracles::dice(a, b));
        CHECK(got_i == oracles::jaccard(a, b));
        CHECK(std::abs(asd_px(a, b) - oracles::asd(a, b)) <= 1e-9);

        // algebraic identity between the two overlap scores
        CHECK(got_d == doctest::Approx(2.0 * got_i / (1.0 + got_i)).epsilon(1e-12));
        CHECK(got_d >= 0.0);
        CHECK(got_d <= 1.0);
        CHECK(got_i >= 0.0);
        CHECK(got_i <= 1.0);
        CHECK(asd_px(a, b) >= 0.0);
        CHECK(dsc(b, a) == got_d);
    }
}

TEST_CASE("kid matches the double-loop oracle on 100 random sets") {
    Rng rng(505);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 2 + rng.uniform_int(5);
        const int m = 2 + rng.uniform_int(7);
        const int n = 2 + rng.uniform_int(7);
        Tensor da = Tensor::randn({m, d}, rng, 1.3);
        Tensor db = Tensor::randn({n, d}, rng, 0.8);
        CHECK(std::abs(mmd2_poly(da, db) - oracles::mmd2(da, db)) <= 1e-9);
    }
}

TEST_CASE("frechet distance on identical and permuted sets") {
    Rng rng(606);
    Tensor da = Tensor::randn({12, 6}, rng, 1.0);
    CHECK(frechet_distance(da, da) <= 1e-9);

    // permuting descriptors within a set leaves the Gaussian fit unchanged
    Tensor perm({12, 6});
    std::vector<int> idx(12);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 11; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    for (int r = 0; r < 12; ++r)
        for (int c = 0; c < 6; ++c) perm.at(r, c) = da.at(idx[r], c);
    Tensor db = Tensor::randn({9, 6}, rng, 1.4);
    CHECK(frechet_distance(da, db) == doctest::Approx(frechet_distance(perm, db)).epsilon(1e-9));

    // non-negative after eigenvalue clipping, including rank-deficient sets
    for (int trial = 0; trial < 20; ++trial) {
        const int n1 = 2 + rng.uniform_int(9), n2 = 2 + rng.uniform_int(9);
        Tensor x = Tensor::randn({n1, 8}, rng, 1.0);
        Tensor y = Tensor::randn({n2, 8}, rng, 1.0);
        CHECK(frechet_distance(x, y) >= -1e-9);
    }
}

TEST_CASE("frechet distance approaches the analytic mean-shift value") {
    // equal covariance, mean shift delta: distance tends to |delta|^2
    const int n = 5000, d = 4;
    const double delta[d] = {1.0, 0.5, 0.0, 0.25};
    double want = 0.0;
    for (double v : delta) want += v * v;

    Rng rng(707);
    Tensor a = Tensor::randn({n, d}, rng, 0.7);
    Tensor b = Tensor::randn({n, d}, rng, 0.7);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) b.at(r, c) += delta[c];
    const double got = frechet_distance(a, b);
    CHECK(std::abs(got - want) <= 0.10 * want);
}

TEST_CASE("kid null value sits inside three bootstrap standard errors") {
    const int n = 200, d = 6;
    Rng rng(808);
    Tensor pool = Tensor::randn({n, d}, rng, 1.0);

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    const double observed =
        mmd2_poly(rows_subset(pool, idx, 0, n / 2), rows_subset(pool, idx, n / 2, n));

    // permutation resamples of the same pooled cloud estimate the null spread
    std::vector<double> null_vals;
    for (int b = 0; b < 200; ++b) {
        for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
        null_vals.push_back(
            mmd2_poly(rows_subset(pool, idx, 0, n / 2), rows_subset(pool, idx, n / 2, n)));
    }
    double mean = 0.0;
    for (double v : null_vals) mean += v;
    mean /= null_vals.size();
    double var = 0.0;
    for (double v : null_vals) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / (null_vals.size() - 1.0));
    CHECK(std::abs(observed) <= 3.0 * se);
}

TEST_CASE("kid separates well-separated clusters") {
    Rng rng(909);
    Tensor a = Tensor::randn({50, 4}, rng, 0.1);
    Tensor b = Tensor::randn({50, 4}, rng, 0.1);
    for (int i = 0; i < b.numel(); ++i) b[i] += 3.0;
    CHECK(mmd2_poly(a, b) > 1.0);
}

TEST_CASE("distribution metric validation") {
    Rng rng(42);
    Tensor one = Tensor::randn({1, 4}, rng, 1.0);
    Tensor two = Tensor::randn({4, 4}, rng, 1.0);
    Tensor odd = Tensor::randn({4, 5}, rng, 1.0);
    CHECK_THROWS_AS(frechet_distance(one, two), std::invalid_argument);
    CHECK_THROWS_AS(mmd2_poly(two, one), std::invalid_argument);
    CHECK_THROWS_AS(frechet_distance(two, odd), std::invalid_argument);
    CHECK_THROWS_AS(mmd2_poly(odd, two), std::invalid_argument);

    FeatureExtractorProxy fx;
    CHECK_THROWS_AS(fx.describe_all({}), std::invalid_argument);
}

TEST_CASE("image-set proxies: identical sets score zero fid") {
    std::vector<Tensor> set;
    for (int i = 0; i < 40; ++i) set.push_back(generate_phantom(500 + i, 32, 32).mr);

    FeatureExtractorProxy fx;
    CHECK(std::abs(fid_proxy(set, set, fx)) <= 1e-6);

    // shuffled copy of the same images: fid is order-invariant within a set
    std::vector<Tensor> shuffled = set;
    Rng rng(13);
    for (int i = static_cast<int>(shuffled.size()) - 1; i > 0; --i)
        std::swap(shuffled[i], shuffled[rng.uniform_int(i + 1)]);
    CHECK(std::abs(fid_proxy(set, shuffled, fx)) <= 1e-6);
}

TEST_CASE("feature extractor determinism and validation") {
    FeatureExtractorProxy fa(3), fb(3), fc(4);
    Tensor img = generate_phantom(77, 32, 32).us;
    Tensor da = fa.describe(img), db = fb.describe(img), dc = fc.describe(img);
    CHECK(fingerprint(da) == fingerprint(db));
    CHECK(fingerprint(da) != fingerprint(dc));
    CHECK(da.ndim() == 1);
    CHECK(da.dim(0) == 32);
    CHECK(da.all_finite());
    CHECK(fa.dim() == 32);

    Tensor small({7, 8}), vol({2, 8, 8});
    small.fill(0.1);
    vol.fill(0.1);
    CHECK_THROWS_AS(fa.describe(small), std::invalid_argument);
    CHECK_THROWS_AS(fa.describe(vol), std::invalid_argument);

    Tensor tiny({8, 8});
    tiny.fill(0.25);
    CHECK(fa.describe(tiny).dim(0) == 32);

    Tensor all = fa.describe_all({img, tiny});
    CHECK(all.dim(0) == 2);
    CHECK(all.dim(1) == 32);
    for (int c = 0; c < 32; ++c) CHECK(all.at(0, c) == da[c]);
}

TEST_CASE("chessboard composite patterns") {
    Tensor a({8, 8}), b({8, 8});
    for (int i = 0; i < a.numel(); ++i) {
        a[i] = 0.25;
        b[i] = 0.75;
    }

    CHECK(fingerprint(chessboard_composite(a, a, 3)) == fingerprint(a));
    CHECK(fingerprint(chessboard_composite(a, b, 8)) == fingerprint(a));  // single tile

    Tensor a2 = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor b2 = Tensor::from({2, 2}, {9.0, 8.0, 7.0, 6.0});
    Tensor mix = chessboard_composite(a2, b2, 1);
    CHECK(mix.at(0, 0) == 1.0);
    CHECK(mix.at(0, 1) == 8.0);
    CHECK(mix.at(1, 0) == 7.0);
    CHECK(mix.at(1, 1) == 4.0);

    Tensor board = chessboard_composite(a, b, 3);
    CHECK(board.at(0, 0) == 0.25);  // tile (0,0)
    CHECK(board.at(0, 3) == 0.75);  // tile (0,1)
    CHECK(board.at(3, 0) == 0.75);  // tile (1,0)
    CHECK(board.at(3, 3) == 0.25);  // tile (1,1)
    CHECK(board.at(7, 7) == 0.25);  // tile (2,2)

    Tensor c({8, 9});
    c.fill(0.0);
    CHECK_THROWS_AS(chessboard_composite(a, c, 2), std::invalid_argument);
    CHECK_THROWS_AS(chessboard_composite(a, b, 0), std::invalid_argument);
}

TEST_CASE("sobel magnitude on a vertical step") {
    Tensor img({6, 6});
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) img.at(i, j) = j >= 3 ? 1.0 : 0.0;

    Tensor mag = sobel_magnitude(img);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            const double want = (j == 2 || j == 3) ? 4.0 : 0.0;
            CHECK(mag.at(i, j) == doctest::Approx(want).epsilon(1e-12));
        }

    Tensor flat({5, 7});
    flat.fill(0.42);
    CHECK(sobel_magnitude(flat).max_abs() <= 1e-12);

    // cross-check against the naive convolution on a textured image
    Tensor tex = generate_phantom(88, 32, 32).mr;
    Tensor resp = oracles::conv2d(tex.reshaped({1, 32, 32}), sobel_weights(1));
    Tensor got = sobel_magnitude(tex);
    const int hw = 32 * 32;
    for (int k = 0; k < hw; ++k)
        CHECK(got[k] == doctest::Approx(std::hypot(resp[k], resp[hw + k])).epsilon(1e-9));

    CHECK_THROWS_AS(sobel_magnitude(tex.reshaped({1, 32, 32})), std::invalid_argument);
}

TEST_CASE("pearson correlation") {
    Tensor a = Tensor::from({3}, {1.0, 2.0, 3.0});
    Tensor up = Tensor::from({3}, {2.0, 4.0, 6.0});
    Tensor down = Tensor::from({3}, {6.0, 4.0, 2.0});
    CHECK(pearson(a, up) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson(a, down) == doctest::Approx(-1.0).epsilon(1e-12));

    Rng rng(21);
    Tensor x = Tensor::randn({40}, rng, 1.0);
    Tensor y = Tensor::randn({40}, rng, 1.0);
    const double r = pearson(x, y);
    CHECK(r >= -1.0);
    CHECK(r <= 1.0);
    CHECK(pearson(y, x) == doctest::Approx(r).epsilon(1e-12));

    Tensor flat({3});
    flat.fill(5.0);
    CHECK_THROWS_AS(pearson(a, flat), std::invalid_argument);
    Tensor single = Tensor::from({1}, {2.0});
    CHECK_THROWS_AS(pearson(single, single), std::invalid_argument);
    CHECK_THROWS_AS(pearson(a, x), std::invalid_argument);
}

TEST_CASE("evaluate_registration wiring") {
    PairedSample s = generate_phantom(611, 64, 64);
    DisplacementField zero;
    zero.u = Tensor({2, 64, 64});
    zero.u.fill(0.0);

    SegMetrics ident = evaluate_registration(zero, s.zone_mask, s.zone_mask);
    CHECK(ident.dsc == 1.0);
    CHECK(ident.iou == 1.0);
    CHECK(ident.asd_px == 0.0);

    // the generator's ground-truth field maps the us-frame mask back
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        PairedSample p = generate_phantom(seed, 64, 64);
        SegMetrics back = evaluate_registration(p.gt_field, us_frame_zone_mask(p), p.zone_mask);
        CHECK(back.dsc >= 0.95);
    }

    // a large random field must do strictly worse than no field at all
    Rng rng(15);
    DisplacementField noise;
    noise.u = Tensor({2, 64, 64});
    for (int i = 0; i < noise.u.numel(); ++i) noise.u[i] = rng.uniform(-10.0, 10.0);
    SegMetrics noisy = evaluate_registration(noise, s.zone_mask, s.zone_mask);
    CHECK(noisy.dsc < ident.dsc);

    DisplacementField small;
    small.u = Tensor({2, 32, 32});
    small.u.fill(0.0);
    CHECK_THROWS_AS(evaluate_registration(small, s.zone_mask, s.zone_mask),
                    std::invalid_argument);
}
