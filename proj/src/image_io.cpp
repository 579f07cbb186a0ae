#include "acmt/image_io.hpp"

#include <png.h>
#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "json.hpp"

#include "acmt/errors.hpp"

namespace acmt {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngWrite {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWrite() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

struct PngRead {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngRead() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

void write_gray(const std::string& path, const Tensor& img, int bit_depth,
                const std::vector<std::uint8_t>& bytes) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot open for writing: " + path);
    PngWrite w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) throw IoError("png_create_write_struct failed");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(w.png))) throw IoError("libpng write error: " + path);

    png_init_io(w.png, f.get());
    const int h = img.dim(0), wd = img.dim(1);
    png_set_IHDR(w.png, w.info, static_cast<png_uint_32>(wd), static_cast<png_uint_32>(h), bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    const std::size_t stride = static_cast<std::size_t>(wd) * (bit_depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int i = 0; i < h; ++i)
        rows[static_cast<std::size_t>(i)] = const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(i) * stride);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

void read_gray(const std::string& path, int expect_depth, int& h, int& wd,
               std::vector<std::uint8_t>& bytes) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open for reading: " + path);
    PngRead r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png_create_read_struct failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png_create_info_struct failed");
    if (setjmp(png_jmpbuf(r.png))) throw CorruptDatasetError("malformed PNG: " + path);

    png_init_io(r.png, f.get());
    png_read_info(r.png, r.info);
    const int depth = png_get_bit_depth(r.png, r.info);
    const int color = png_get_color_type(r.png, r.info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != expect_depth)
        throw CorruptDatasetError("unexpected PNG format: " + path);
    h = static_cast<int>(png_get_image_height(r.png, r.info));
    wd = static_cast<int>(png_get_image_width(r.png, r.info));
    const std::size_t stride = static_cast<std::size_t>(wd) * (expect_depth / 8);
    bytes.resize(static_cast<std::size_t>(h) * stride);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int i = 0; i < h; ++i) rows[static_cast<std::size_t>(i)] = bytes.data() + static_cast<std::size_t>(i) * stride;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);
}

}  // namespace

void write_png16(const std::string& path, const Tensor& image) {
    if (image.ndim() != 2) throw std::invalid_argument("write_png16: expected {H,W}");
    const int h = image.dim(0), w = image.dim(1);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h * w) * 2);
    for (int i = 0; i < h * w; ++i) {
        double v = image[i];
        v = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
        const auto q = static_cast<std::uint16_t>(std::lround((v + 1.0) / 2.0 * 65535.0));
        // PNG stores 16-bit samples big-endian
        bytes[2 * static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(q >> 8);
        bytes[2 * static_cast<std::size_t>(i) + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    write_gray(path, image, 16, bytes);
}

Tensor read_png16(const std::string& path) {
    int h = 0, w = 0;
    std::vector<std::uint8_t> bytes;
    read_gray(path, 16, h, w, bytes);
    Tensor img({h, w});
    for (int i = 0; i < h * w; ++i) {
        const std::uint16_t q = static_cast<std::uint16_t>((bytes[2 * static_cast<std::size_t>(i)] << 8) |
                                                           bytes[2 * static_cast<std::size_t>(i) + 1]);
        img[i] = static_cast<double>(q) / 65535.0 * 2.0 - 1.0;
    }
    return img;
}

void write_png8_mask(const std::string& path, const Tensor& mask) {
    if (mask.ndim() != 2) throw std::invalid_argument("write_png8_mask: expected {H,W}");
    const int h = mask.dim(0), w = mask.dim(1);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h * w));
    for (int i = 0; i < h * w; ++i) bytes[static_cast<std::size_t>(i)] = mask[i] != 0.0 ? 255 : 0;
    write_gray(path, mask, 8, bytes);
}

Tensor read_png8_mask(const std::string& path) {
    int h = 0, w = 0;
    std::vector<std::uint8_t> bytes;
    read_gray(path, 8, h, w, bytes);
    Tensor mask({h, w});
    for (int i = 0; i < h * w; ++i) {
        const std::uint8_t v = bytes[static_cast<std::size_t>(i)];
        if (v != 0 && v != 255) throw CorruptDatasetError("non-binary mask value in " + path);
        mask[i] = v ? 1.0 : 0.0;
    }
    return mask;
}

void write_field(const std::string& bin_path, const std::string& json_path,
                 const DisplacementField& field) {
    const int h = field.height(), w = field.width();
    std::ofstream out(bin_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + bin_path);
    std::vector<float> buf(static_cast<std::size_t>(2 * h * w));
    for (int i = 0; i < 2 * h * w; ++i) buf[static_cast<std::size_t>(i)] = static_cast<float>(field.u[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw IoError("short write: " + bin_path);
    out.close();

    nlohmann::json meta{{"shape", {h, w}},
                        {"channels", {"dy", "dx"}},
                        {"dtype", "float32"},
                        {"order", "row-major"},
                        {"endianness", "little"}};
    std::ofstream js(json_path);
    if (!js) throw IoError("cannot open for writing: " + json_path);
    js << meta.dump(2) << "\n";
}

DisplacementField read_field(const std::string& bin_path, const std::string& json_path) {
    std::ifstream js(json_path);
    if (!js) throw CorruptDatasetError("missing field sidecar: " + json_path);
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const nlohmann::json::exception&) {
        throw CorruptDatasetError("malformed field sidecar: " + json_path);
    }
    if (!meta.contains("shape") || meta["shape"].size() != 2)
        throw CorruptDatasetError("field sidecar lacks shape: " + json_path);
    const int h = meta["shape"][0].get<int>();
    const int w = meta["shape"][1].get<int>();
    if (h <= 0 || w <= 0) throw CorruptDatasetError("bad field shape in " + json_path);

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw CorruptDatasetError("missing field file: " + bin_path);
    std::vector<float> buf(static_cast<std::size_t>(2 * h * w));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float)))
        throw CorruptDatasetError("field file truncated: " + bin_path);

    DisplacementField field(h, w);
    for (int i = 0; i < 2 * h * w; ++i) field.u[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]);
    return field;
}

std::uint32_t file_crc32(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    uLong crc = crc32(0L, Z_NULL, 0);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize n = in.gcount();
        if (n > 0) crc = crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace acmt
