#include "acmt/network.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "acmt/errors.hpp"
#include "acmt/image_io.hpp"
#include "acmt/rng.hpp"

namespace fs = std::filesystem;

namespace acmt {
namespace {
constexpr std::uint64_t kNetStream = 0x6e6574303141636dull;
constexpr const char* kCheckpointFormat = "acmt-checkpoint-1";
}  // namespace

void NetworkConfig::validate() const {
    if (levels < 2 || levels > 8) throw std::invalid_argument("network: levels out of range");
    if (base_channels < 1 || base_channels > 512)
        throw std::invalid_argument("network: base_channels out of range");
    if (time_embed_dim < 4 || time_embed_dim % 2 != 0)
        throw std::invalid_argument("network: time_embed_dim must be even and >= 4");
}

int NetworkConfig::channels_at(int level) const { return base_channels << (level - 1); }

TranslatorNet::TranslatorNet(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(mix_seed(cfg_.seed, kNetStream));

    auto add = [&](const std::string& name, std::vector<int> shape, double stddev) {
        Tensor t = stddev > 0.0 ? Tensor::randn(shape, rng, stddev) : Tensor::zeros(shape);
        params_.emplace_back(std::move(t), true);
        names_.push_back(name);
        return static_cast<int>(params_.size()) - 1;
    };
    auto he = [](int cin, int kh, int kw) { return std::sqrt(2.0 / (cin * kh * kw)); };
    auto add_block = [&](const std::string& name, int cin, int cout) {
        Block b;
        b.w1 = add(name + ".w1", {cout, cin, 3, 3}, he(cin, 3, 3));
        b.b1 = add(name + ".b1", {cout}, 0.0);
        b.w2 = add(name + ".w2", {cout, cout, 3, 3}, he(cout, 3, 3));
        b.b2 = add(name + ".b2", {cout}, 0.0);
        b.film = add(name + ".film_w", {2 * cout, cfg_.time_embed_dim}, 0.01);
        b.film_b = add(name + ".film_b", {2 * cout}, 0.0);
        return b;
    };

    const int d = cfg_.time_embed_dim;
    temb_w1_ = add("temb.w1", {d, d}, std::sqrt(2.0 / d));
    temb_b1_ = add("temb.b1", {d}, 0.0);
    temb_w2_ = add("temb.w2", {d, d}, std::sqrt(2.0 / d));
    temb_b2_ = add("temb.b2", {d}, 0.0);

    const int L = cfg_.levels;
    int cin = 1;
    for (int k = 1; k <= L; ++k) {
        int cout = cfg_.channels_at(k);
        enc_.push_back(add_block("enc" + std::to_string(k), cin, cout));
        cin = cout;
    }
    for (int i = 0; i < L - 1; ++i) {
        int lvl = L - 1 - i;  // level whose skip joins this stage
        int cin_dec = cfg_.channels_at(lvl + 1) + cfg_.channels_at(lvl);
        dec_.push_back(add_block("dec" + std::to_string(lvl), cin_dec, cfg_.channels_at(lvl)));
    }
    out_w_ = add("out.w", {1, cfg_.base_channels, 1, 1}, 0.01);
    out_b_ = add("out.b", {1}, 0.0);
}

ad::Var TranslatorNet::time_embedding(double t) const {
    const int d = cfg_.time_embed_dim;
    Tensor e({d});
    const double scaled = t * 1000.0;
    for (int i = 0; i < d / 2; ++i) {
        double omega = std::pow(10000.0, -2.0 * i / d);
        e[2 * i] = std::sin(scaled * omega);
        e[2 * i + 1] = std::cos(scaled * omega);
    }
    ad::Var emb(std::move(e), false);
    emb = ad::silu(ad::linear(param(temb_w1_), emb, param(temb_b1_)));
    return ad::linear(param(temb_w2_), emb, param(temb_b2_));
}

ad::Var TranslatorNet::run_block(const Block& blk, const ad::Var& x, const ad::Var& emb) const {
    ad::Var h = ad::conv2d(x, param(blk.w1), param(blk.b1));
    h = ad::film(h, ad::linear(param(blk.film), emb, param(blk.film_b)));
    h = ad::silu(h);
    h = ad::conv2d(h, param(blk.w2), param(blk.b2));
    return ad::silu(h);
}

ad::Var TranslatorNet::forward(const ad::Var& x, double t, FeatureTaps* taps) const {
    if (!x.defined() || x.value().ndim() != 3 || x.value().dim(0) != 1)
        throw std::invalid_argument("forward: expected a {1,H,W} input");
    const int L = cfg_.levels;
    const int div = 1 << (L - 1);
    const int h = x.value().dim(1), w = x.value().dim(2);
    if (h % div != 0 || w % div != 0 || h < div || w < div)
        throw std::invalid_argument("forward: spatial dims must be positive multiples of " +
                                    std::to_string(div));
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("forward: t outside [0,1]");

    ad::Var emb = time_embedding(t);
    std::vector<ad::Var> skips;
    ad::Var cur = x;
    for (int k = 0; k < L; ++k) {
        ad::Var e = run_block(enc_[static_cast<std::size_t>(k)], cur, emb);
        if (k < L - 1) {
            skips.push_back(e);
            cur = ad::avgpool2(e);
            if (k == 0 && taps) taps->shallow = cur;
        } else {
            cur = e;
            if (taps) taps->deep = e;
        }
    }
    for (int i = 0; i < L - 1; ++i) {
        cur = ad::upsample2(cur);
        cur = ad::concat_channels(cur, skips[static_cast<std::size_t>(L - 2 - i)]);
        cur = run_block(dec_[static_cast<std::size_t>(i)], cur, emb);
    }
    cur = ad::conv2d(cur, param(out_w_), param(out_b_));
    return ad::tanh_op(cur);
}

Tensor TranslatorNet::predict(const Tensor& x, double t) const {
    ad::NoGradGuard guard;
    return forward(ad::Var(x, false), t).value();
}

FeatureTaps TranslatorNet::extract_features(const ad::Var& x) const {
    // Encoder-only pass at the canonical time: the decoder never feeds the taps.
    FeatureTaps taps;
    if (!x.defined() || x.value().ndim() != 3 || x.value().dim(0) != 1)
        throw std::invalid_argument("extract_features: expected a {1,H,W} input");
    const int L = cfg_.levels;
    ad::Var emb = time_embedding(0.0);
    ad::Var cur = x;
    for (int k = 0; k < L; ++k) {
        ad::Var e = run_block(enc_[static_cast<std::size_t>(k)], cur, emb);
        if (k < L - 1) {
            cur = ad::avgpool2(e);
            if (k == 0) taps.shallow = cur;
        } else {
            taps.deep = e;
        }
    }
    return taps;
}

std::size_t TranslatorNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value().numel());
    return n;
}

std::uint64_t TranslatorNet::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params_) h = acmt::fingerprint(p.value(), h);
    return h;
}

void TranslatorNet::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void save_checkpoint(const std::string& dir, const Checkpoint& ckpt) {
    fs::create_directories(dir);
    const std::string bin_path = dir + "/weights.bin";
    {
        std::ofstream bin(bin_path, std::ios::binary);
        if (!bin) throw IoError("cannot write " + bin_path);
        for (const auto& [name, t] : ckpt.tensors)
            bin.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(sizeof(double) * t.numel()));
    }

    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["config"] = {{"levels", ckpt.config.levels},
                   {"base_channels", ckpt.config.base_channels},
                   {"time_embed_dim", ckpt.config.time_embed_dim},
                   {"seed", ckpt.config.seed}};
    j["step"] = ckpt.step;
    j["rng_state"] = ckpt.rng_state;
    j["weights_crc32"] = file_crc32(bin_path);
    j["tensors"] = nlohmann::json::array();
    long long offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        j["tensors"].push_back(
            {{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.numel()}});
        offset += t.numel();
    }
    std::ofstream meta(dir + "/meta.json");
    if (!meta) throw IoError("cannot write " + dir + "/meta.json");
    meta << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream meta(dir + "/meta.json");
    if (!meta) throw CorruptCheckpointError("missing meta.json in " + dir);
    nlohmann::json j;
    try {
        meta >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpointError(std::string("malformed meta.json: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat)
            throw CorruptCheckpointError("unknown checkpoint format");
        const auto& jc = j.at("config");
        ckpt.config.levels = jc.at("levels").get<int>();
        ckpt.config.base_channels = jc.at("base_channels").get<int>();
        ckpt.config.time_embed_dim = jc.at("time_embed_dim").get<int>();
        ckpt.config.seed = jc.at("seed").get<std::uint64_t>();
        ckpt.step = j.at("step").get<long long>();
        ckpt.rng_state = j.at("rng_state").get<std::string>();

        const std::string bin_path = dir + "/weights.bin";
        if (!fs::exists(bin_path)) throw CorruptCheckpointError("missing weights.bin in " + dir);
        if (file_crc32(bin_path) != j.at("weights_crc32").get<std::uint32_t>())
            throw CorruptCheckpointError("weights.bin checksum mismatch in " + dir);

        std::ifstream bin(bin_path, std::ios::binary);
        for (const auto& jt : j.at("tensors")) {
            std::vector<int> shape = jt.at("shape").get<std::vector<int>>();
            Tensor t(shape);
            if (t.numel() != jt.at("count").get<int>())
                throw CorruptCheckpointError("tensor count mismatch in " + dir);
            bin.read(reinterpret_cast<char*>(t.data()),
                     static_cast<std::streamsize>(sizeof(double) * t.numel()));
            if (!bin) throw CorruptCheckpointError("weights.bin truncated in " + dir);
            if (!t.all_finite()) throw CorruptCheckpointError("non-finite weights in " + dir);
            ckpt.tensors.emplace_back(jt.at("name").get<std::string>(), std::move(t));
        }
        bin.peek();
        if (!bin.eof()) throw CorruptCheckpointError("weights.bin has trailing bytes in " + dir);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpointError(std::string("meta.json missing fields: ") + e.what());
    }
    return ckpt;
}

TranslatorNet make_network(const Checkpoint& ckpt) {
    TranslatorNet net(ckpt.config);
    auto& params = net.parameters();
    const auto& names = net.parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor* found = nullptr;
        for (const auto& [name, t] : ckpt.tensors)
            if (name == names[i]) { found = &t; break; }
        if (!found) throw CorruptCheckpointError("checkpoint missing tensor " + names[i]);
        if (!found->same_shape(params[i].value()))
            throw CorruptCheckpointError("checkpoint tensor shape mismatch: " + names[i]);
        params[i].value() = *found;
    }
    return net;
}

}  // namespace acmt
