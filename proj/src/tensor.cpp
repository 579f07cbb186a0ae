#include "acmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace acmt {

namespace {
std::size_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty()) throw std::invalid_argument("Tensor: empty shape");
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = stddev * rng.normal();
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    Tensor t(std::move(shape));
    if (values.size() != t.data_.size())
        throw std::invalid_argument("Tensor::from: value count does not match shape");
    t.data_ = std::move(values);
    return t;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
    return *this;
}

Tensor& Tensor::add(const Tensor& o, double scale) {
    if (!same_shape(o)) throw std::invalid_argument("Tensor::add: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * o.data_[i];
    return *this;
}

Tensor& Tensor::scale(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

Tensor& Tensor::clamp(double lo, double hi) {
    for (auto& v : data_) v = std::min(hi, std::max(lo, v));
    return *this;
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double Tensor::mean() const { return sum() / static_cast<double>(data_.size()); }

double Tensor::min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::min(m, v);
    return m;
}

double Tensor::max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::max(m, v);
    return m;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    Tensor t;
    t.shape_ = std::move(shape);
    if (checked_numel(t.shape_) != data_.size())
        throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    t.data_ = data_;
    return t;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    Tensor r = a;
    r.add(b);
    return r;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    Tensor r = a;
    r.add(b, -1.0);
    return r;
}

Tensor operator*(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("Tensor: elementwise mul shape mismatch");
    Tensor r = a;
    for (int i = 0; i < r.numel(); ++i) r[i] *= b[i];
    return r;
}

Tensor operator*(double s, const Tensor& a) {
    Tensor r = a;
    r.scale(s);
    return r;
}

std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fingerprint(const Tensor& t, std::uint64_t h) {
    return fnv1a(t.data(), sizeof(double) * static_cast<std::size_t>(t.numel()), h);
}

}  // namespace acmt
