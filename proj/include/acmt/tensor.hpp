#ifndef ACMT_TENSOR_HPP
#define ACMT_TENSOR_HPP

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "acmt/rng.hpp"

namespace acmt {

// Dense row-major double tensor with value semantics. Images are {H, W},
// feature maps {C, H, W}, displacement fields {2, H, W}, sample batches
// {N, D}. Small and predictable beats clever here.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v);
    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0);
    static Tensor from(std::vector<int> shape, std::vector<double> values);

    bool empty() const { return data_.empty(); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& shape() const { return shape_; }
    int numel() const { return static_cast<int>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

    // Indexed access; caller supplies as many indices as there are dims.
    double& at(int i, int j) { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i * shape_[1] + j)]; }
    double& at(int c, int i, int j) {
        return data_[static_cast<std::size_t>((c * shape_[1] + i) * shape_[2] + j)];
    }
    double at(int c, int i, int j) const {
        return data_[static_cast<std::size_t>((c * shape_[1] + i) * shape_[2] + j)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    // In-place elementwise helpers.
    Tensor& fill(double v);
    Tensor& add(const Tensor& o, double scale = 1.0);  // this += scale * o
    Tensor& scale(double s);
    Tensor& clamp(double lo, double hi);

    double sum() const;
    double mean() const;
    double min() const;
    double max() const;
    double max_abs() const;

    Tensor reshaped(std::vector<int> shape) const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);  // elementwise
Tensor operator*(double s, const Tensor& a);

// FNV-1a over the raw byte pattern; used for parameter fingerprints and
// file checksums where cryptographic strength is not needed.
std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fingerprint(const Tensor& t, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace acmt

#endif
