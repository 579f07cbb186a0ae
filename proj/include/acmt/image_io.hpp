#ifndef ACMT_IMAGE_IO_HPP
#define ACMT_IMAGE_IO_HPP

#include <cstdint>
#include <string>

#include "acmt/field.hpp"
#include "acmt/tensor.hpp"

namespace acmt {

// Intensity images are stored as 16-bit grayscale PNG with
// stored = round((v + 1) / 2 * 65535); masks as 8-bit {0, 255} PNG.
// Displacement fields go to raw little-endian float32 planes [dy, dx]
// plus a JSON sidecar carrying the shape.

void write_png16(const std::string& path, const Tensor& image);
Tensor read_png16(const std::string& path);

void write_png8_mask(const std::string& path, const Tensor& mask);
Tensor read_png8_mask(const std::string& path);

void write_field(const std::string& bin_path, const std::string& json_path,
                 const DisplacementField& field);
DisplacementField read_field(const std::string& bin_path, const std::string& json_path);

// CRC32 (zlib) of a file's contents, as stored in dataset manifests.
std::uint32_t file_crc32(const std::string& path);

}  // namespace acmt

#endif
