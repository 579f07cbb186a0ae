#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "acmt/config.hpp"
#include "acmt/errors.hpp"
#include "acmt/image_io.hpp"
#include "acmt/log.hpp"
#include "acmt/metrics.hpp"
#include "acmt/phantom.hpp"
#include "acmt/registration.hpp"
#include "acmt/sampler.hpp"
#include "acmt/trainer.hpp"

namespace fs = std::filesystem;
using namespace acmt;

namespace {

struct GenArgs {
    std::string config, out;
    int count = -1, height = -1, width = -1, size = -1;
    double max_disp = -1.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

struct TrainArgs {
    std::string config, data, out;
    int epochs = -1, batch_size = -1;
    double lr = -1.0, lam_tex = -1.0, lam_bnd = -1.0, lam_sb = -1.0;
    std::uint64_t seed = 0;
    bool seed_set = false, resume = false;
};

struct TranslateArgs {
    std::string config, ckpt, data, out;
    int nfe = -999;
    bool stochastic = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

struct RegisterArgs {
    std::string config, fixed, moving, out;
};

struct EvalArgs {
    std::string config, mode, a, b, a_side = "mr", b_side = "us", data, out;
};

int cmd_gen(const GenArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    if (a.count >= 0) cfg.data.count = a.count;
    if (a.size > 0) cfg.data.height = cfg.data.width = a.size;
    if (a.height > 0) cfg.data.height = a.height;
    if (a.width > 0) cfg.data.width = a.width;
    if (a.max_disp >= 0.0) cfg.data.max_displacement = a.max_disp;
    if (a.seed_set) cfg.seed = a.seed;
    cfg.validate();

    ACMT_LOG_INFO("generating %d pairs (%dx%d) into %s", cfg.data.count, cfg.data.height,
                  cfg.data.width, a.out.c_str());
    std::vector<PairedSample> samples;
    samples.reserve(static_cast<std::size_t>(cfg.data.count));
    for (int i = 0; i < cfg.data.count; ++i)
        samples.push_back(generate_phantom(cfg.seed + static_cast<std::uint64_t>(i),
                                           cfg.data.height, cfg.data.width,
                                           cfg.data.max_displacement));
    save_dataset(samples, a.out);
    echo_config(cfg, a.out);
    ACMT_LOG_INFO("wrote %zu samples", samples.size());
    return 0;
}

int cmd_train(const TrainArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    if (a.epochs > 0) cfg.epochs = a.epochs;
    if (a.batch_size > 0) cfg.batch_size = a.batch_size;
    if (a.lr > 0.0) cfg.lr = a.lr;
    if (a.lam_tex >= 0.0) cfg.weights.texture = a.lam_tex;
    if (a.lam_bnd >= 0.0) cfg.weights.boundary = a.lam_bnd;
    if (a.lam_sb >= 0.0) cfg.weights.sb = a.lam_sb;
    if (a.seed_set) cfg.seed = a.seed;
    cfg.validate();

    std::vector<PairedSample> data = load_dataset(a.data);
    if (data.empty()) throw ConfigError("dataset " + a.data + " is empty");
    ACMT_LOG_INFO("training on %zu pairs for %d epoch(s), batch %d", data.size(), cfg.epochs,
                  cfg.batch_size);

    TrainConfig tc = cfg.make_train_config();
    echo_config(cfg, a.out);
    try {
        if (a.resume) {
            Trainer tr = Trainer::restore(a.out + "/checkpoint", tc);
            ACMT_LOG_INFO("resumed at step %lld", tr.step_count());
            tr.fit(data, a.out);
            ACMT_LOG_INFO("done at step %lld, fingerprint %016llx", tr.step_count(),
                          static_cast<unsigned long long>(tr.network().fingerprint()));
        } else {
            Trainer tr(tc);
            tr.fit(data, a.out);
            ACMT_LOG_INFO("done at step %lld, fingerprint %016llx", tr.step_count(),
                          static_cast<unsigned long long>(tr.network().fingerprint()));
        }
    } catch (const NumericError& e) {
        std::string ckpt = a.out + "/checkpoint";
        std::cerr << "numeric failure: " << e.what() << "\n";
        if (fs::exists(ckpt + "/meta.json"))
            std::cerr << "last good checkpoint: " << ckpt << "\n";
        return 3;
    }
    return 0;
}

int cmd_translate(const TranslateArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    if (a.nfe != -999) cfg.translate.nfe = a.nfe;
    if (a.stochastic) cfg.translate.stochastic = true;
    if (a.seed_set) cfg.translate.seed = a.seed;
    cfg.validate();

    Checkpoint ckpt = load_checkpoint(a.ckpt);
    TranslatorNet net = make_network(ckpt);
    ACMT_LOG_INFO("translating %s -> %s (nfe=%d, %s)", a.data.c_str(), a.out.c_str(),
                  cfg.translate.resolve_nfe(cfg.bridge.pool_size()),
                  cfg.translate.stochastic ? "stochastic" : "deterministic");
    translate_dataset(net, cfg.bridge, a.data, a.out, cfg.translate);
    echo_config(cfg, a.out);
    return 0;
}

int cmd_register(const RegisterArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    Tensor fixed = read_png16(a.fixed);
    Tensor moving = read_png16(a.moving);
    if (!fixed.same_shape(moving)) throw ConfigError("fixed and moving image sizes differ");

    RegistrationResult res = register_images(fixed, moving, cfg.registration);
    std::string bin = a.out, js;
    if (bin.size() > 4 && bin.substr(bin.size() - 4) == ".bin")
        js = bin.substr(0, bin.size() - 4) + ".json";
    else {
        bin += ".bin";
        js = a.out + ".json";
    }
    if (fs::path(bin).has_parent_path()) fs::create_directories(fs::path(bin).parent_path());
    write_field(bin, js, res.field);
    echo_config(cfg, fs::path(bin).has_parent_path() ? fs::path(bin).parent_path().string() : ".");
    ACMT_LOG_INFO("energy %.6f -> %.6f in %d accepted steps", res.initial_energy,
                  res.final_energy, res.iterations_run);
    return 0;
}

std::vector<Tensor> side_images(const std::string& dir, const std::string& side) {
    DatasetManifest m = read_manifest(dir);
    std::vector<Tensor> out;
    out.reserve(m.samples.size());
    for (const auto& e : m.samples)
        out.push_back(read_png16(dir + "/" + (side == "mr" ? e.mr : e.us)));
    return out;
}

int cmd_eval(const EvalArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    fs::create_directories(a.out);
    nlohmann::json report;
    report["mode"] = a.mode;

    if (a.mode == "translation") {
        if (a.a.empty()) throw ConfigError("eval translation needs --a DIR");
        const std::string b_dir = a.b.empty() ? a.a : a.b;
        if (a.a_side != "mr" && a.a_side != "us") throw ConfigError("--a-side must be mr or us");
        if (a.b_side != "mr" && a.b_side != "us") throw ConfigError("--b-side must be mr or us");
        std::vector<Tensor> set_a = side_images(a.a, a.a_side);
        std::vector<Tensor> set_b = side_images(b_dir, a.b_side);
        FeatureExtractorProxy fx;
        report["fid_proxy"] = fid_proxy(set_a, set_b, fx);
        report["kid_proxy"] = kid_proxy(set_a, set_b, fx);
        report["count_a"] = set_a.size();
        report["count_b"] = set_b.size();
        ACMT_LOG_INFO("fid_proxy %.6f kid_proxy %.6f",
                      report["fid_proxy"].get<double>(), report["kid_proxy"].get<double>());
    } else if (a.mode == "registration") {
        if (a.data.empty()) throw ConfigError("eval registration needs --data DIR");
        DatasetManifest m = read_manifest(a.data);
        if (m.samples.empty()) throw ConfigError("dataset " + a.data + " is empty");
        double sd = 0.0, si = 0.0, sa = 0.0;
        nlohmann::json per = nlohmann::json::array();
        for (int i = 0; i < static_cast<int>(m.samples.size()); ++i) {
            PairedSample s = load_sample(a.data, m, i);
            RegistrationResult res = register_images(s.mr, s.us, cfg.registration);
            Tensor moving_mask = us_frame_zone_mask(s);
            SegMetrics sm = evaluate_registration(res.field, moving_mask, s.zone_mask);
            sd += sm.dsc;
            si += sm.iou;
            sa += sm.asd_px;
            per.push_back({{"id", m.samples[static_cast<std::size_t>(i)].id},
                           {"dsc", sm.dsc},
                           {"iou", sm.iou},
                           {"asd_px", sm.asd_px}});
        }
        const double n = static_cast<double>(m.samples.size());
        report["dsc"] = sd / n;
        report["iou"] = si / n;
        report["asd_px"] = sa / n;
        report["samples"] = per;
        ACMT_LOG_INFO("mean dsc %.4f iou %.4f asd_px %.4f", sd / n, si / n, sa / n);
    } else {
        throw ConfigError("--mode must be translation or registration");
    }

    std::ofstream out(a.out + "/report.json");
    if (!out) throw IoError("cannot write " + a.out + "/report.json");
    out << report.dump(2) << "\n";
    echo_config(cfg, a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acmt: anatomically-coherent modality translation at desk scale"};
    app.require_subcommand(1);

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "generate a paired phantom dataset");
    gen->add_option("--out", ga.out, "output dataset directory")->required();
    gen->add_option("--config", ga.config, "JSON config file");
    gen->add_option("--count", ga.count, "number of pairs");
    gen->add_option("--size", ga.size, "square image size");
    gen->add_option("--height", ga.height, "image height");
    gen->add_option("--width", ga.width, "image width");
    gen->add_option("--max-disp", ga.max_disp, "maximum displacement magnitude (px)");
    gen->add_option("--seed", ga.seed, "base seed")->each([&](const std::string&) { ga.seed_set = true; });

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "train the translator on a dataset");
    train->add_option("--data", ta.data, "dataset directory")->required();
    train->add_option("--out", ta.out, "output directory (checkpoint + log)")->required();
    train->add_option("--config", ta.config, "JSON config file");
    train->add_option("--epochs", ta.epochs, "training epochs");
    train->add_option("--batch-size", ta.batch_size, "batch size");
    train->add_option("--lr", ta.lr, "learning rate");
    train->add_option("--lambda-texture", ta.lam_tex, "texture loss weight");
    train->add_option("--lambda-boundary", ta.lam_bnd, "boundary loss weight");
    train->add_option("--lambda-sb", ta.lam_sb, "bridge loss weight");
    train->add_option("--seed", ta.seed, "run seed")->each([&](const std::string&) { ta.seed_set = true; });
    train->add_flag("--resume", ta.resume, "resume from the output checkpoint");

    TranslateArgs tra;
    auto* tr = app.add_subcommand("translate", "translate a dataset with a trained model");
    tr->add_option("--ckpt", tra.ckpt, "checkpoint directory")->required();
    tr->add_option("--data", tra.data, "input dataset directory")->required();
    tr->add_option("--out", tra.out, "output dataset directory")->required();
    tr->add_option("--config", tra.config, "JSON config file");
    tr->add_option("--nfe", tra.nfe, "function evaluations (1..pool+1)");
    tr->add_flag("--stochastic", tra.stochastic, "inject bridge noise while sampling");
    tr->add_option("--seed", tra.seed, "sampling seed")->each([&](const std::string&) { tra.seed_set = true; });

    RegisterArgs ra;
    auto* reg = app.add_subcommand("register", "register a moving image onto a fixed image");
    reg->add_option("--fixed", ra.fixed, "fixed image (png)")->required();
    reg->add_option("--moving", ra.moving, "moving image (png)")->required();
    reg->add_option("--out", ra.out, "output field path (.bin, json sidecar)")->required();
    reg->add_option("--config", ra.config, "JSON config file");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "evaluate translation or registration quality");
    ev->add_option("--mode", ea.mode, "translation | registration")->required();
    ev->add_option("--a", ea.a, "first dataset directory (translation mode)");
    ev->add_option("--b", ea.b, "second dataset directory (defaults to --a)");
    ev->add_option("--a-side", ea.a_side, "mr | us images from --a (default mr)");
    ev->add_option("--b-side", ea.b_side, "mr | us images from --b (default us)");
    ev->add_option("--data", ea.data, "dataset directory (registration mode)");
    ev->add_option("--out", ea.out, "report output directory")->required();
    ev->add_option("--config", ea.config, "JSON config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(ga);
        if (train->parsed()) return cmd_train(ta);
        if (tr->parsed()) return cmd_translate(tra);
        if (reg->parsed()) return cmd_register(ra);
        if (ev->parsed()) return cmd_eval(ea);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const CorruptDatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return 2;
    } catch (const CorruptCheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const DegenerateBatchError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
