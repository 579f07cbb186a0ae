#ifndef ACMT_PHANTOM_HPP
#define ACMT_PHANTOM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "acmt/field.hpp"
#include "acmt/tensor.hpp"

namespace acmt {

// A paired sample shares one anatomy: the MR-like rendering lives in the
// reference frame, the US-like rendering in a frame deformed by gt_field.
// Backward-warping the US-frame geometry with gt_field recovers the
// reference frame, so gt_field is the target a registrator should find.
struct PairedSample {
    Tensor mr;             // {H,W}, [-1,1]
    Tensor us;             // {H,W}, [-1,1]
    Tensor zone_mask;      // {H,W}, {0,1}, reference frame
    Tensor boundary_mask;  // zone XOR erode4(zone)
    DisplacementField gt_field;
    std::uint64_t seed = 0;

    int height() const { return mr.dim(0); }
    int width() const { return mr.dim(1); }
};

enum class AugmentOp { FlipH, FlipV, Rot90, Rot180, Rot270 };

// Deterministic synthetic pair. MR: piecewise zone intensities, smooth
// bias field, additive Gaussian noise. US: same geometry seen through the
// deformation, multiplicative Rayleigh speckle, bright boundary-normal rim,
// depth attenuation, log-style compression.
PairedSample generate_phantom(std::uint64_t seed, int height, int width,
                              double max_displacement = 5.0);

// Applies one spatial symmetry consistently to images, masks and field
// (displacement vectors are conjugated by the coordinate change).
PairedSample augment_pair(const PairedSample& sample, AugmentOp op);

// The US-frame zone mask, derived by pushing the reference mask through
// the inverse of gt_field; evaluation-side consumers warp it back.
Tensor us_frame_zone_mask(const PairedSample& sample);

struct ManifestEntry {
    std::string id;
    std::uint64_t seed = 0;
    std::string mr, us, zone, boundary, field_bin, field_json;  // paths relative to dir
    std::vector<std::pair<std::string, std::uint32_t>> crc;     // file -> crc32
};

struct DatasetManifest {
    std::string version = "1";
    int height = 0, width = 0;
    std::vector<ManifestEntry> samples;
};

DatasetManifest save_dataset(const std::vector<PairedSample>& samples, const std::string& dir);
void write_manifest(const std::string& dir, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& dir);
std::vector<PairedSample> load_dataset(const std::string& dir);

// Loads one sample listed in a manifest, verifying checksums and shapes.
PairedSample load_sample(const std::string& dir, const DatasetManifest& manifest, int index);

}  // namespace acmt

#endif
