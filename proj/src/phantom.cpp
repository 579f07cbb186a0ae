#include "acmt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "acmt/errors.hpp"
#include "acmt/image_io.hpp"
#include "acmt/mask_ops.hpp"
#include "acmt/rng.hpp"

namespace fs = std::filesystem;

namespace acmt {
namespace {

constexpr std::uint64_t kPhantomStream = 0x70686e746d303141ull;
constexpr double kPi = 3.14159265358979323846;

// Star-convex anatomy: an ellipse whose radius is modulated by low-order
// harmonics. n(p) <= 1 is the zone, n(p) <= inner_scale the inner core.
struct Shape {
    double cy = 0, cx = 0;    // center, pixels
    double ry = 0, rx = 0;    // semi-axes, pixels
    double amp[3] = {0, 0, 0};    // harmonics k = 2,3,4
    double phase[3] = {0, 0, 0};
    double inner_scale = 0.5;

    double modulation(double theta) const {
        double m = 1.0;
        for (int k = 0; k < 3; ++k) m += amp[k] * std::cos((k + 2) * theta + phase[k]);
        return m;
    }
    // Normalized radial coordinate: 0 at center, 1 on the zone boundary.
    double norm(double y, double x) const {
        double ey = (y - cy) / ry;
        double ex = (x - cx) / rx;
        double rho = std::sqrt(ey * ey + ex * ex);
        if (rho < 1e-12) return 0.0;
        return rho / modulation(std::atan2(ey, ex));
    }
    // Mean boundary radius in pixels, used to convert n to a distance scale.
    double mean_radius_px() const { return std::sqrt(rx * ry); }
    // |cos| of the angle between the outward normal and the vertical beam.
    double beam_alignment(double y, double x) const {
        double ny = (y - cy) / (ry * ry);
        double nx = (x - cx) / (rx * rx);
        double len = std::sqrt(ny * ny + nx * nx);
        if (len < 1e-12) return 0.0;
        return std::abs(ny) / len;
    }
};

Shape draw_shape(Rng& rng, int h, int w) {
    Shape s;
    s.cy = 0.5 * h + h * rng.uniform(-0.04, 0.04);
    s.cx = 0.5 * w + w * rng.uniform(-0.04, 0.04);
    s.ry = rng.uniform(0.19, 0.26) * h;
    s.rx = rng.uniform(0.19, 0.26) * w;
    for (int k = 0; k < 3; ++k) {
        s.amp[k] = rng.uniform(-0.08, 0.08);
        s.phase[k] = rng.uniform(0.0, 2.0 * kPi);
    }
    s.inner_scale = rng.uniform(0.45, 0.60);
    return s;
}

DisplacementField draw_field(Rng& rng, int h, int w, double max_disp) {
    DisplacementField f(h, w);
    double target = rng.uniform(0.55, 1.0) * max_disp;
    // Sum of a constant shift and low-frequency sinusoids per channel.
    for (int c = 0; c < 2; ++c) {
        double bias = rng.uniform(-1.0, 1.0);
        double a[3], fy[3], fx[3], ph[3];
        for (int k = 0; k < 3; ++k) {
            a[k] = rng.uniform(-1.0, 1.0);
            fy[k] = static_cast<double>(rng.uniform_int(3)) - 1.0;
            fx[k] = static_cast<double>(rng.uniform_int(3)) - 1.0;
            if (fy[k] == 0.0 && fx[k] == 0.0) fx[k] = 1.0;
            ph[k] = rng.uniform(0.0, 2.0 * kPi);
        }
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double v = bias;
                for (int k = 0; k < 3; ++k)
                    v += a[k] * std::sin(2.0 * kPi * (fy[k] * i / h + fx[k] * j / w) + ph[k]);
                f.u.at(c, i, j) = v;
            }
    }
    double peak = 0.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            peak = std::max(peak, std::hypot(f.dy(i, j), f.dx(i, j)));
    double scale = peak > 1e-12 ? target / peak : 0.0;
    f.u.scale(scale);
    return f;
}

// 3x3 binomial smoothing with replicated borders.
Tensor blur3(const Tensor& img) {
    const int h = img.dim(0), w = img.dim(1);
    Tensor tmp({h, w}), out({h, w});
    auto cl = [](int v, int lo, int hi) { return std::min(std::max(v, lo), hi); };
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            tmp.at(i, j) = 0.25 * (img.at(i, cl(j - 1, 0, w - 1)) + 2.0 * img.at(i, j) +
                                   img.at(i, cl(j + 1, 0, w - 1)));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            out.at(i, j) = 0.25 * (tmp.at(cl(i - 1, 0, h - 1), j) + 2.0 * tmp.at(i, j) +
                                   tmp.at(cl(i + 1, 0, h - 1), j));
    return out;
}

Tensor render_mr(Rng& rng, const Shape& shape, int h, int w) {
    double lvl_bg = -0.55 + rng.uniform(-0.05, 0.05);
    double lvl_zone = 0.12 + rng.uniform(-0.05, 0.05);
    double lvl_inner = 0.45 + rng.uniform(-0.05, 0.05);
    double bias_amp = rng.uniform(0.04, 0.10);
    double bias_py = rng.uniform(0.0, 2.0 * kPi), bias_px = rng.uniform(0.0, 2.0 * kPi);

    Tensor img({h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double n = shape.norm(i, j);
            double v = n <= shape.inner_scale ? lvl_inner : (n <= 1.0 ? lvl_zone : lvl_bg);
            img.at(i, j) = v;
        }
    img = blur3(img);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double bias = bias_amp * std::sin(2.0 * kPi * i / h + bias_py) *
                          std::sin(2.0 * kPi * j / w + bias_px);
            img.at(i, j) += bias + 0.03 * rng.normal();
        }
    img.clamp(-1.0, 1.0);
    return img;
}

Tensor render_us(Rng& rng, const Shape& shape, const DisplacementField& inv_field,
                 int h, int w) {
    double refl_bg = 0.50 + rng.uniform(-0.03, 0.03);
    double refl_zone = 0.32 + rng.uniform(-0.03, 0.03);
    double refl_inner = 0.42 + rng.uniform(-0.03, 0.03);
    double rim_amp = 0.35 + rng.uniform(-0.05, 0.05);
    double atten = rng.uniform(0.5, 0.9);
    const double rim_w = 1.2;        // rim half-width in pixels
    const double compress = 30.0;

    // Unit-mean Rayleigh speckle, lightly correlated so grains span ~2px.
    Tensor speckle({h, w});
    const double ray_sigma = std::sqrt(2.0 / kPi);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double u = std::max(rng.uniform(), 1e-12);
            speckle.at(i, j) = ray_sigma * std::sqrt(-2.0 * std::log(u));
        }
    speckle = blur3(speckle);
    double sp_mean = speckle.mean();
    speckle.scale(1.0 / sp_mean);

    Tensor img({h, w});
    double rad_px = shape.mean_radius_px();
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            // Source point in the reference frame for this US-frame pixel.
            double sy = i + inv_field.dy(i, j);
            double sx = j + inv_field.dx(i, j);
            double n = shape.norm(sy, sx);
            double refl = n <= shape.inner_scale ? refl_inner : (n <= 1.0 ? refl_zone : refl_bg);
            double d_px = (n - 1.0) * rad_px;
            double rim = rim_amp * std::exp(-0.5 * d_px * d_px / (rim_w * rim_w));
            refl += rim * (0.3 + 0.7 * shape.beam_alignment(sy, sx));
            double sig = refl * speckle.at(i, j) * std::exp(-atten * static_cast<double>(i) / h);
            double g = std::log1p(compress * sig) / std::log1p(compress);
            // Levelled into the same display range as the MR rendering so the
            // two modalities differ in texture and contrast, not wholesale
            // brightness polarity.
            img.at(i, j) = 2.0 * g - 1.5 + 0.01 * rng.normal();
        }
    img.clamp(-1.0, 1.0);
    return img;
}

void transform_image(const Tensor& in, Tensor& out, AugmentOp op) {
    const int h = in.dim(0), w = in.dim(1);
    switch (op) {
        case AugmentOp::FlipH:
            out = Tensor({h, w});
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) out.at(i, j) = in.at(i, w - 1 - j);
            break;
        case AugmentOp::FlipV:
            out = Tensor({h, w});
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) out.at(i, j) = in.at(h - 1 - i, j);
            break;
        case AugmentOp::Rot90:  // counter-clockwise
            out = Tensor({w, h});
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < h; ++j) out.at(i, j) = in.at(j, w - 1 - i);
            break;
        case AugmentOp::Rot180:
            out = Tensor({h, w});
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) out.at(i, j) = in.at(h - 1 - i, w - 1 - j);
            break;
        case AugmentOp::Rot270:
            out = Tensor({w, h});
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < h; ++j) out.at(i, j) = in.at(h - 1 - j, i);
            break;
    }
}

std::string sample_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", index);
    return buf;
}

std::uint32_t crc_of(const DatasetManifest& m, const ManifestEntry& e, const std::string& file) {
    (void)m;
    for (const auto& [name, crc] : e.crc)
        if (name == file) return crc;
    throw CorruptDatasetError("manifest entry missing checksum for " + file);
}

void check_crc(const std::string& dir, const ManifestEntry& e, const std::string& rel,
               const DatasetManifest& m) {
    const std::string path = dir + "/" + rel;
    if (!fs::exists(path)) throw CorruptDatasetError("missing file " + path);
    if (file_crc32(path) != crc_of(m, e, rel))
        throw CorruptDatasetError("checksum mismatch for " + path);
}

}  // namespace

PairedSample generate_phantom(std::uint64_t seed, int height, int width,
                              double max_displacement) {
    if (height < 32 || width < 32)
        throw std::invalid_argument("generate_phantom: size must be at least 32x32");
    if (max_displacement < 0.0)
        throw std::invalid_argument("generate_phantom: negative max_displacement");

    Rng rng(mix_seed(seed, kPhantomStream));
    PairedSample s;
    s.seed = seed;

    Shape shape = draw_shape(rng, height, width);
    s.gt_field = draw_field(rng, height, width, max_displacement);
    s.mr = render_mr(rng, shape, height, width);

    DisplacementField inv = invert_field(s.gt_field);
    s.us = render_us(rng, shape, inv, height, width);

    s.zone_mask = Tensor({height, width});
    for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j)
            s.zone_mask.at(i, j) = shape.norm(i, j) <= 1.0 ? 1.0 : 0.0;
    s.boundary_mask = boundary_band(s.zone_mask);
    return s;
}

PairedSample augment_pair(const PairedSample& sample, AugmentOp op) {
    const int h = sample.height(), w = sample.width();
    if ((op == AugmentOp::Rot90 || op == AugmentOp::Rot270) && h != w)
        throw std::invalid_argument("augment_pair: quarter rotations need square images");

    PairedSample out;
    out.seed = sample.seed;
    transform_image(sample.mr, out.mr, op);
    transform_image(sample.us, out.us, op);
    transform_image(sample.zone_mask, out.zone_mask, op);
    transform_image(sample.boundary_mask, out.boundary_mask, op);

    Tensor dy_t, dx_t;
    {
        Tensor dy({h, w}), dx({h, w});
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                dy.at(i, j) = sample.gt_field.dy(i, j);
                dx.at(i, j) = sample.gt_field.dx(i, j);
            }
        transform_image(dy, dy_t, op);
        transform_image(dx, dx_t, op);
    }
    const int oh = out.mr.dim(0), ow = out.mr.dim(1);
    out.gt_field = DisplacementField(oh, ow);
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double dy = dy_t.at(i, j), dx = dx_t.at(i, j);
            // Displacement vectors transform with the coordinate map.
            switch (op) {
                case AugmentOp::FlipH:  dx = -dx; break;
                case AugmentOp::FlipV:  dy = -dy; break;
                case AugmentOp::Rot90:  { double t = dy; dy = -dx; dx = t; } break;
                case AugmentOp::Rot180: dy = -dy; dx = -dx; break;
                case AugmentOp::Rot270: { double t = dy; dy = dx; dx = -t; } break;
            }
            out.gt_field.u.at(0, i, j) = dy;
            out.gt_field.u.at(1, i, j) = dx;
        }
    return out;
}

Tensor us_frame_zone_mask(const PairedSample& sample) {
    DisplacementField inv = invert_field(sample.gt_field);
    return warp(sample.zone_mask, inv, Interp::Nearest);
}

DatasetManifest save_dataset(const std::vector<PairedSample>& samples, const std::string& dir) {
    fs::create_directories(dir);
    DatasetManifest m;
    if (!samples.empty()) {
        m.height = samples[0].height();
        m.width = samples[0].width();
    }
    for (size_t k = 0; k < samples.size(); ++k) {
        const PairedSample& s = samples[k];
        if (s.height() != m.height || s.width() != m.width)
            throw std::invalid_argument("save_dataset: mixed sample sizes");
        ManifestEntry e;
        e.id = sample_id(static_cast<int>(k));
        e.seed = s.seed;
        e.mr = "mr_" + e.id + ".png";
        e.us = "us_" + e.id + ".png";
        e.zone = "zone_" + e.id + ".png";
        e.boundary = "boundary_" + e.id + ".png";
        e.field_bin = "field_" + e.id + ".bin";
        e.field_json = "field_" + e.id + ".json";
        write_png16(dir + "/" + e.mr, s.mr);
        write_png16(dir + "/" + e.us, s.us);
        write_png8_mask(dir + "/" + e.zone, s.zone_mask);
        write_png8_mask(dir + "/" + e.boundary, s.boundary_mask);
        write_field(dir + "/" + e.field_bin, dir + "/" + e.field_json, s.gt_field);
        for (const std::string& f : {e.mr, e.us, e.zone, e.boundary, e.field_bin, e.field_json})
            e.crc.emplace_back(f, file_crc32(dir + "/" + f));
        m.samples.push_back(std::move(e));
    }
    write_manifest(dir, m);
    return m;
}

void write_manifest(const std::string& dir, const DatasetManifest& m) {
    nlohmann::json j;
    j["version"] = m.version;
    j["image_size"] = {m.height, m.width};
    j["samples"] = nlohmann::json::array();
    for (const auto& e : m.samples) {
        nlohmann::json je;
        je["id"] = e.id;
        je["seed"] = e.seed;
        je["files"] = {{"mr", e.mr},       {"us", e.us},
                       {"zone", e.zone},   {"boundary", e.boundary},
                       {"field_bin", e.field_bin}, {"field_json", e.field_json}};
        nlohmann::json jc = nlohmann::json::object();
        for (const auto& [name, crc] : e.crc) jc[name] = crc;
        je["crc32"] = jc;
        j["samples"].push_back(je);
    }
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw IoError("cannot write " + dir + "/manifest.json");
    out << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw CorruptDatasetError("missing manifest.json in " + dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptDatasetError(std::string("malformed manifest.json: ") + e.what());
    }
    DatasetManifest m;
    try {
        m.version = j.at("version").get<std::string>();
        m.height = j.at("image_size").at(0).get<int>();
        m.width = j.at("image_size").at(1).get<int>();
        for (const auto& je : j.at("samples")) {
            ManifestEntry e;
            e.id = je.at("id").get<std::string>();
            e.seed = je.at("seed").get<std::uint64_t>();
            const auto& jf = je.at("files");
            e.mr = jf.at("mr").get<std::string>();
            e.us = jf.at("us").get<std::string>();
            e.zone = jf.at("zone").get<std::string>();
            e.boundary = jf.at("boundary").get<std::string>();
            e.field_bin = jf.at("field_bin").get<std::string>();
            e.field_json = jf.at("field_json").get<std::string>();
            for (const auto& [name, crc] : je.at("crc32").items())
                e.crc.emplace_back(name, crc.get<std::uint32_t>());
            m.samples.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptDatasetError(std::string("manifest.json missing fields: ") + e.what());
    }
    return m;
}

PairedSample load_sample(const std::string& dir, const DatasetManifest& m, int index) {
    if (index < 0 || index >= static_cast<int>(m.samples.size()))
        throw std::invalid_argument("load_sample: index out of range");
    const ManifestEntry& e = m.samples[index];
    for (const std::string& f : {e.mr, e.us, e.zone, e.boundary, e.field_bin, e.field_json})
        check_crc(dir, e, f, m);

    PairedSample s;
    s.seed = e.seed;
    s.mr = read_png16(dir + "/" + e.mr);
    s.us = read_png16(dir + "/" + e.us);
    s.zone_mask = read_png8_mask(dir + "/" + e.zone);
    s.boundary_mask = read_png8_mask(dir + "/" + e.boundary);
    s.gt_field = read_field(dir + "/" + e.field_bin, dir + "/" + e.field_json);
    for (const Tensor* t : {&s.mr, &s.us, &s.zone_mask, &s.boundary_mask})
        if (t->dim(0) != m.height || t->dim(1) != m.width)
            throw CorruptDatasetError("sample " + e.id + " has unexpected image size");
    if (s.gt_field.height() != m.height || s.gt_field.width() != m.width)
        throw CorruptDatasetError("sample " + e.id + " has unexpected field size");

    Tensor band = boundary_band(s.zone_mask);
    for (int i = 0; i < m.height; ++i)
        for (int j = 0; j < m.width; ++j)
            if (band.at(i, j) != s.boundary_mask.at(i, j))
                throw CorruptDatasetError("sample " + e.id + " boundary mask inconsistent");
    return s;
}

std::vector<PairedSample> load_dataset(const std::string& dir) {
    DatasetManifest m = read_manifest(dir);
    std::vector<PairedSample> out;
    out.reserve(m.samples.size());
    for (int i = 0; i < static_cast<int>(m.samples.size()); ++i)
        out.push_back(load_sample(dir, m, i));
    return out;
}

}  // namespace acmt
