#include "acmt/mask_ops.hpp"

#include <stdexcept>

namespace acmt {

bool is_binary(const Tensor& mask) {
    if (mask.ndim() != 2) return false;
    for (int i = 0; i < mask.numel(); ++i)
        if (mask[i] != 0.0 && mask[i] != 1.0) return false;
    return true;
}

Tensor erode4(const Tensor& mask) {
    if (mask.ndim() != 2) throw std::invalid_argument("erode4: expected {H,W}");
    const int h = mask.dim(0), w = mask.dim(1);
    Tensor out({h, w});
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            if (mask.at(i, j) == 0.0) continue;
            // pixels touching the image edge are eroded away
            const bool keep = i > 0 && i < h - 1 && j > 0 && j < w - 1 && mask.at(i - 1, j) != 0.0 &&
                              mask.at(i + 1, j) != 0.0 && mask.at(i, j - 1) != 0.0 && mask.at(i, j + 1) != 0.0;
            out.at(i, j) = keep ? 1.0 : 0.0;
        }
    return out;
}

Tensor boundary_band(const Tensor& mask) {
    Tensor er = erode4(mask);
    Tensor out(mask.shape());
    for (int i = 0; i < mask.numel(); ++i) out[i] = (mask[i] != 0.0 && er[i] == 0.0) ? 1.0 : 0.0;
    return out;
}

int count_components4(const Tensor& mask) {
    if (mask.ndim() != 2) throw std::invalid_argument("count_components4: expected {H,W}");
    const int h = mask.dim(0), w = mask.dim(1);
    std::vector<char> seen(static_cast<std::size_t>(h * w), 0);
    std::vector<int> stack;
    int components = 0;
    for (int start = 0; start < h * w; ++start) {
        if (mask[start] == 0.0 || seen[static_cast<std::size_t>(start)]) continue;
        ++components;
        stack.push_back(start);
        seen[static_cast<std::size_t>(start)] = 1;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int i = p / w, j = p % w;
            const int nb[4] = {i > 0 ? p - w : -1, i < h - 1 ? p + w : -1, j > 0 ? p - 1 : -1,
                               j < w - 1 ? p + 1 : -1};
            for (int q : nb) {
                if (q >= 0 && mask[q] != 0.0 && !seen[static_cast<std::size_t>(q)]) {
                    seen[static_cast<std::size_t>(q)] = 1;
                    stack.push_back(q);
                }
            }
        }
    }
    return components;
}

std::pair<double, double> centroid(const Tensor& mask) {
    double si = 0.0, sj = 0.0, n = 0.0;
    const int h = mask.dim(0), w = mask.dim(1);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (mask.at(i, j) != 0.0) {
                si += i;
                sj += j;
                n += 1.0;
            }
    if (n == 0.0) throw std::invalid_argument("centroid: empty mask");
    return {si / n, sj / n};
}

std::vector<std::pair<int, int>> boundary_pixels(const Tensor& mask) {
    Tensor band = boundary_band(mask);
    std::vector<std::pair<int, int>> px;
    const int h = band.dim(0), w = band.dim(1);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (band.at(i, j) != 0.0) px.emplace_back(i, j);
    return px;
}

}  // namespace acmt
