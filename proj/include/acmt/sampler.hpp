#ifndef ACMT_SAMPLER_HPP
#define ACMT_SAMPLER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "acmt/bridge.hpp"
#include "acmt/network.hpp"

namespace acmt {

struct TranslateOptions {
    int nfe = -1;              // network evaluations; -1 means pool size
    bool stochastic = false;   // add bridge noise at intermediate steps
    std::uint64_t seed = 0;    // noise seed when stochastic

    // nfe must lie in [1, pool_size + 1]; the extra evaluation inserts one
    // midpoint between the last pool time and the terminal time.
    int resolve_nfe(int pool_size) const;
};

// Time grid visited by translate (ascending, starts at the first pool time,
// excludes the terminal time). Exposed for inspection and tests.
std::vector<double> translation_grid(const BridgeConfig& bridge, int nfe);

// Runs the bridge from an image to its terminal translation. Deterministic
// by default; one network evaluation per grid time.
Tensor translate(const TranslatorNet& net, const BridgeConfig& bridge, const Tensor& image,
                 const TranslateOptions& opts = {});

// Translates every pair in a dataset directory. The output directory keeps
// the source ids, masks and fields, with translated images written as
// acmt_mr_{id}.png / acmt_us_{id}.png and referenced from its manifest.
void translate_dataset(const TranslatorNet& net, const BridgeConfig& bridge,
                       const std::string& dataset_dir, const std::string& out_dir,
                       const TranslateOptions& opts = {});

}  // namespace acmt

#endif
