#include "acmt/sampler.hpp"

#include <filesystem>
#include <stdexcept>

#include "acmt/errors.hpp"
#include "acmt/image_io.hpp"
#include "acmt/phantom.hpp"

namespace fs = std::filesystem;

namespace acmt {
namespace {
constexpr std::uint64_t kSampleStream = 0x73616d70303141ull;
}

int TranslateOptions::resolve_nfe(int pool_size) const {
    int v = nfe < 0 ? pool_size : nfe;
    if (v < 1 || v > pool_size + 1)
        throw std::invalid_argument("translate: nfe must lie in [1, pool_size + 1]");
    return v;
}

std::vector<double> translation_grid(const BridgeConfig& bridge, int nfe) {
    bridge.validate();
    const int p = bridge.pool_size();
    if (nfe < 1 || nfe > p + 1)
        throw std::invalid_argument("translation_grid: nfe out of range");

    std::vector<double> grid;
    if (nfe <= p) {
        // Evenly thinned subsequence of the pool, always anchored at t = 0.
        for (int m = 0; m < nfe; ++m)
            grid.push_back(bridge.timestep_pool[static_cast<std::size_t>(m * p / nfe)]);
    } else {
        grid = bridge.timestep_pool;
        grid.push_back(0.5 * (grid.back() + 1.0));
    }
    return grid;
}

Tensor translate(const TranslatorNet& net, const BridgeConfig& bridge, const Tensor& image,
                 const TranslateOptions& opts) {
    if (image.ndim() != 2) throw std::invalid_argument("translate: expected an {H,W} image");
    const int nfe = opts.resolve_nfe(bridge.pool_size());
    std::vector<double> grid = translation_grid(bridge, nfe);
    grid.push_back(1.0);

    Rng rng(mix_seed(opts.seed, kSampleStream));
    const double sigma = opts.stochastic ? bridge.sigma : 0.0;
    Tensor x = image.reshaped({1, image.dim(0), image.dim(1)});
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
        Tensor x1 = net.predict(x, grid[j]);
        x = diffusion_step(x, x1, grid[j], grid[j + 1], sigma, rng);
    }
    return x.reshaped({image.dim(0), image.dim(1)});
}

void translate_dataset(const TranslatorNet& net, const BridgeConfig& bridge,
                       const std::string& dataset_dir, const std::string& out_dir,
                       const TranslateOptions& opts) {
    DatasetManifest src = read_manifest(dataset_dir);
    fs::create_directories(out_dir);

    DatasetManifest out;
    out.height = src.height;
    out.width = src.width;
    for (int i = 0; i < static_cast<int>(src.samples.size()); ++i) {
        PairedSample s = load_sample(dataset_dir, src, i);
        TranslateOptions per = opts;
        per.seed = mix_seed(opts.seed, static_cast<std::uint64_t>(i));

        ManifestEntry e;
        e.id = src.samples[static_cast<std::size_t>(i)].id;
        e.seed = s.seed;
        e.mr = "acmt_mr_" + e.id + ".png";
        e.us = "acmt_us_" + e.id + ".png";
        e.zone = "zone_" + e.id + ".png";
        e.boundary = "boundary_" + e.id + ".png";
        e.field_bin = "field_" + e.id + ".bin";
        e.field_json = "field_" + e.id + ".json";

        write_png16(out_dir + "/" + e.mr, translate(net, bridge, s.mr, per));
        write_png16(out_dir + "/" + e.us, translate(net, bridge, s.us, per));
        write_png8_mask(out_dir + "/" + e.zone, s.zone_mask);
        write_png8_mask(out_dir + "/" + e.boundary, s.boundary_mask);
        write_field(out_dir + "/" + e.field_bin, out_dir + "/" + e.field_json, s.gt_field);
        for (const std::string& f : {e.mr, e.us, e.zone, e.boundary, e.field_bin, e.field_json})
            e.crc.emplace_back(f, file_crc32(out_dir + "/" + f));
        out.samples.push_back(std::move(e));
    }
    write_manifest(out_dir, out);
}

}  // namespace acmt
