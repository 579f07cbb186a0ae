#include "acmt/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "acmt/ops.hpp"

namespace acmt::ad {

namespace {
thread_local bool g_grad_enabled = true;

void accumulate(const std::shared_ptr<Node>& n, const Tensor& g) {
    if (!n->requires_grad) return;
    if (n->grad.empty()) n->grad = Tensor(n->value.shape());
    n->grad.add(g);
}
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Var::Var(Tensor value, bool requires_grad) : n_(std::make_shared<Node>()) {
    n_->value = std::move(value);
    n_->requires_grad = requires_grad && g_grad_enabled;
}

const Tensor& Var::grad() const {
    if (!has_grad()) throw std::logic_error("Var::grad: no gradient accumulated");
    return n_->grad;
}

void Var::zero_grad() {
    if (n_) n_->grad = Tensor();
}

Var Var::detach() const { return Var(n_->value, false); }

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (g_grad_enabled) {
        bool need = false;
        for (const auto& p : parents) need = need || p.requires_grad();
        if (need) {
            n->requires_grad = true;
            n->parents.reserve(parents.size());
            for (auto& p : parents) n->parents.push_back(p.node());
            n->backward_fn = std::move(fn);
        }
    }
    return Var(std::move(n));
}

void backward(const Var& root) {
    if (!root.defined()) throw std::invalid_argument("backward: undefined root");
    if (root.value().numel() != 1) throw std::invalid_argument("backward: root must be scalar");
    if (!root.requires_grad()) throw std::invalid_argument("backward: root does not require grad");

    // Iterative post-order DFS.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    auto* r = root.node().get();
    if (r->grad.empty()) r->grad = Tensor(r->value.shape());
    r->grad.fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------- arithmetic

Var add(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value())) throw std::invalid_argument("add: shape mismatch");
    Tensor y = a.value() + b.value();
    return make_op(std::move(y), {a, b}, [](Node& n) {
        accumulate(n.parents[0], n.grad);
        accumulate(n.parents[1], n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value())) throw std::invalid_argument("sub: shape mismatch");
    Tensor y = a.value() - b.value();
    return make_op(std::move(y), {a, b}, [](Node& n) {
        accumulate(n.parents[0], n.grad);
        Tensor g = n.grad;
        g.scale(-1.0);
        accumulate(n.parents[1], g);
    });
}

Var mul(const Var& a, const Var& b) {
    if (!a.value().same_shape(b.value())) throw std::invalid_argument("mul: shape mismatch");
    Tensor y = a.value() * b.value();
    return make_op(std::move(y), {a, b}, [](Node& n) {
        accumulate(n.parents[0], n.grad * n.parents[1]->value);
        accumulate(n.parents[1], n.grad * n.parents[0]->value);
    });
}

Var scale(const Var& a, double s) {
    Tensor y = a.value();
    y.scale(s);
    return make_op(std::move(y), {a}, [s](Node& n) {
        Tensor g = n.grad;
        g.scale(s);
        accumulate(n.parents[0], g);
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor y = a.value();
    for (int i = 0; i < y.numel(); ++i) y[i] += s;
    return make_op(std::move(y), {a}, [](Node& n) { accumulate(n.parents[0], n.grad); });
}

Var square(const Var& a) {
    Tensor y = a.value() * a.value();
    return make_op(std::move(y), {a}, [](Node& n) {
        Tensor g = n.grad * n.parents[0]->value;
        g.scale(2.0);
        accumulate(n.parents[0], g);
    });
}

Var abs_val(const Var& a) {
    Tensor y = a.value();
    for (int i = 0; i < y.numel(); ++i) y[i] = std::fabs(y[i]);
    return make_op(std::move(y), {a}, [](Node& n) {
        // subgradient 0 at 0
        Tensor g(n.grad.shape());
        const Tensor& x = n.parents[0]->value;
        for (int i = 0; i < g.numel(); ++i)
            g[i] = n.grad[i] * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
        accumulate(n.parents[0], g);
    });
}

Var silu(const Var& a) {
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (int i = 0; i < x.numel(); ++i) y[i] = x[i] / (1.0 + std::exp(-x[i]));
    return make_op(std::move(y), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Tensor g(x.shape());
        for (int i = 0; i < x.numel(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-x[i]));
            g[i] = n.grad[i] * s * (1.0 + x[i] * (1.0 - s));
        }
        accumulate(n.parents[0], g);
    });
}

Var tanh_op(const Var& a) {
    const Tensor& x = a.value();
    Tensor y(x.shape());
    for (int i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    return make_op(std::move(y), {a}, [](Node& n) {
        Tensor g(n.value.shape());
        for (int i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * (1.0 - n.value[i] * n.value[i]);
        accumulate(n.parents[0], g);
    });
}

Var mean_all(const Var& a) {
    Tensor y({1});
    y[0] = a.value().mean();
    const double inv = 1.0 / a.value().numel();
    return make_op(std::move(y), {a}, [inv](Node& n) {
        Tensor g(n.parents[0]->value.shape());
        g.fill(n.grad[0] * inv);
        accumulate(n.parents[0], g);
    });
}

// ----------------------------------------------------------------- structure

Var concat_channels(const Var& a, const Var& b) {
    const Tensor& ta = a.value();
    const Tensor& tb = b.value();
    if (ta.ndim() != 3 || tb.ndim() != 3 || ta.dim(1) != tb.dim(1) || ta.dim(2) != tb.dim(2))
        throw std::invalid_argument("concat_channels: incompatible shapes");
    Tensor y({ta.dim(0) + tb.dim(0), ta.dim(1), ta.dim(2)});
    std::copy(ta.data(), ta.data() + ta.numel(), y.data());
    std::copy(tb.data(), tb.data() + tb.numel(), y.data() + ta.numel());
    const int na = ta.numel();
    return make_op(std::move(y), {a, b}, [na](Node& n) {
        const auto& pa = n.parents[0];
        const auto& pb = n.parents[1];
        if (pa->requires_grad) {
            Tensor g(pa->value.shape());
            std::copy(n.grad.data(), n.grad.data() + na, g.data());
            accumulate(pa, g);
        }
        if (pb->requires_grad) {
            Tensor g(pb->value.shape());
            std::copy(n.grad.data() + na, n.grad.data() + n.grad.numel(), g.data());
            accumulate(pb, g);
        }
    });
}

Var flatten_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw std::invalid_argument("flatten_rows: empty");
    const int d = rows[0].value().numel();
    const int n_rows = static_cast<int>(rows.size());
    Tensor y({n_rows, d});
    for (int i = 0; i < n_rows; ++i) {
        if (rows[static_cast<std::size_t>(i)].value().numel() != d)
            throw std::invalid_argument("flatten_rows: ragged rows");
        std::copy(rows[static_cast<std::size_t>(i)].value().data(),
                  rows[static_cast<std::size_t>(i)].value().data() + d,
                  y.data() + static_cast<std::size_t>(i) * d);
    }
    return make_op(std::move(y), rows, [d](Node& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
            const auto& p = n.parents[i];
            if (!p->requires_grad) continue;
            Tensor g(p->value.shape());
            std::copy(n.grad.data() + i * static_cast<std::size_t>(d),
                      n.grad.data() + (i + 1) * static_cast<std::size_t>(d), g.data());
            accumulate(p, g);
        }
    });
}

Var concat_cols(const Var& a, const Var& b) {
    const Tensor& ta = a.value();
    const Tensor& tb = b.value();
    if (ta.ndim() != 2 || tb.ndim() != 2 || ta.dim(0) != tb.dim(0))
        throw std::invalid_argument("concat_cols: incompatible shapes");
    const int n_rows = ta.dim(0), da = ta.dim(1), db = tb.dim(1);
    Tensor y({n_rows, da + db});
    for (int i = 0; i < n_rows; ++i) {
        std::copy(ta.data() + static_cast<std::size_t>(i) * da, ta.data() + static_cast<std::size_t>(i + 1) * da,
                  y.data() + static_cast<std::size_t>(i) * (da + db));
        std::copy(tb.data() + static_cast<std::size_t>(i) * db, tb.data() + static_cast<std::size_t>(i + 1) * db,
                  y.data() + static_cast<std::size_t>(i) * (da + db) + da);
    }
    return make_op(std::move(y), {a, b}, [n_rows, da, db](Node& n) {
        const auto& pa = n.parents[0];
        const auto& pb = n.parents[1];
        if (pa->requires_grad) {
            Tensor g(pa->value.shape());
            for (int i = 0; i < n_rows; ++i)
                std::copy(n.grad.data() + static_cast<std::size_t>(i) * (da + db),
                          n.grad.data() + static_cast<std::size_t>(i) * (da + db) + da,
                          g.data() + static_cast<std::size_t>(i) * da);
            accumulate(pa, g);
        }
        if (pb->requires_grad) {
            Tensor g(pb->value.shape());
            for (int i = 0; i < n_rows; ++i)
                std::copy(n.grad.data() + static_cast<std::size_t>(i) * (da + db) + da,
                          n.grad.data() + static_cast<std::size_t>(i + 1) * (da + db),
                          g.data() + static_cast<std::size_t>(i) * db);
            accumulate(pb, g);
        }
    });
}

// ------------------------------------------------------------------- nn ops

Var conv2d(const Var& x, const Var& w, const Var& b) {
    Tensor y = ops::conv2d(x.value(), w.value(), &b.value(), 1);
    return make_op(std::move(y), {x, w, b}, [](Node& n) {
        const auto& px = n.parents[0];
        const auto& pw = n.parents[1];
        const auto& pb = n.parents[2];
        if (px->requires_grad)
            accumulate(px, ops::conv2d_input_grad(n.grad, pw->value, px->value.shape()));
        if (pw->requires_grad)
            accumulate(pw, ops::conv2d_weight_grad(px->value, n.grad, pw->value.dim(2), pw->value.dim(3)));
        if (pb->requires_grad) {
            const int co = n.grad.dim(0), npix = n.grad.dim(1) * n.grad.dim(2);
            Tensor g(pb->value.shape());
            for (int c = 0; c < co; ++c) {
                double s = 0.0;
                const double* row = n.grad.data() + static_cast<std::size_t>(c) * npix;
                for (int i = 0; i < npix; ++i) s += row[i];
                g[c] = s;
            }
            accumulate(pb, g);
        }
    });
}

Var conv2d(const Var& x, const Var& w) {
    Tensor y = ops::conv2d(x.value(), w.value(), nullptr, 1);
    return make_op(std::move(y), {x, w}, [](Node& n) {
        const auto& px = n.parents[0];
        const auto& pw = n.parents[1];
        if (px->requires_grad)
            accumulate(px, ops::conv2d_input_grad(n.grad, pw->value, px->value.shape()));
        if (pw->requires_grad)
            accumulate(pw, ops::conv2d_weight_grad(px->value, n.grad, pw->value.dim(2), pw->value.dim(3)));
    });
}

Var avgpool2(const Var& x) {
    Tensor y = ops::avgpool2(x.value());
    return make_op(std::move(y), {x}, [](Node& n) {
        accumulate(n.parents[0], ops::avgpool2_grad(n.grad, n.parents[0]->value.shape()));
    });
}

Var upsample2(const Var& x) {
    Tensor y = ops::upsample2(x.value());
    return make_op(std::move(y), {x}, [](Node& n) {
        accumulate(n.parents[0], ops::upsample2_grad(n.grad, n.parents[0]->value.shape()));
    });
}

Var linear(const Var& w, const Var& x, const Var& b) {
    const Tensor& wt = w.value();
    const Tensor& xt = x.value();
    if (wt.ndim() != 2 || xt.ndim() != 1 || wt.dim(1) != xt.dim(0) || b.value().numel() != wt.dim(0))
        throw std::invalid_argument("linear: incompatible shapes");
    const int m = wt.dim(0), d = wt.dim(1);
    Tensor y({m});
    for (int i = 0; i < m; ++i) {
        double s = b.value()[i];
        const double* row = wt.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) s += row[j] * xt[j];
        y[i] = s;
    }
    return make_op(std::move(y), {w, x, b}, [m, d](Node& n) {
        const auto& pw = n.parents[0];
        const auto& px = n.parents[1];
        const auto& pb = n.parents[2];
        if (pw->requires_grad) {
            Tensor g(pw->value.shape());
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < d; ++j) g[i * d + j] = n.grad[i] * px->value[j];
            accumulate(pw, g);
        }
        if (px->requires_grad) {
            Tensor g(px->value.shape());
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int i = 0; i < m; ++i) s += pw->value[i * d + j] * n.grad[i];
                g[j] = s;
            }
            accumulate(px, g);
        }
        if (pb->requires_grad) accumulate(pb, n.grad);
    });
}

Var film(const Var& x, const Var& scale_shift) {
    const Tensor& xt = x.value();
    const Tensor& ss = scale_shift.value();
    if (xt.ndim() != 3 || ss.numel() != 2 * xt.dim(0))
        throw std::invalid_argument("film: expected x {C,H,W}, scale_shift {2C}");
    const int c = xt.dim(0), npix = xt.dim(1) * xt.dim(2);
    Tensor y(xt.shape());
    for (int ch = 0; ch < c; ++ch) {
        const double sc = 1.0 + ss[ch], sh = ss[c + ch];
        const double* xp = xt.data() + static_cast<std::size_t>(ch) * npix;
        double* yp = y.data() + static_cast<std::size_t>(ch) * npix;
        for (int i = 0; i < npix; ++i) yp[i] = xp[i] * sc + sh;
    }
    return make_op(std::move(y), {x, scale_shift}, [c, npix](Node& n) {
        const auto& px = n.parents[0];
        const auto& pss = n.parents[1];
        if (px->requires_grad) {
            Tensor g(px->value.shape());
            for (int ch = 0; ch < c; ++ch) {
                const double sc = 1.0 + pss->value[ch];
                const double* gp = n.grad.data() + static_cast<std::size_t>(ch) * npix;
                double* o = g.data() + static_cast<std::size_t>(ch) * npix;
                for (int i = 0; i < npix; ++i) o[i] = gp[i] * sc;
            }
            accumulate(px, g);
        }
        if (pss->requires_grad) {
            Tensor g(pss->value.shape());
            for (int ch = 0; ch < c; ++ch) {
                const double* gp = n.grad.data() + static_cast<std::size_t>(ch) * npix;
                const double* xp = px->value.data() + static_cast<std::size_t>(ch) * npix;
                double s1 = 0.0, s2 = 0.0;
                for (int i = 0; i < npix; ++i) {
                    s1 += gp[i] * xp[i];
                    s2 += gp[i];
                }
                g[ch] = s1;
                g[c + ch] = s2;
            }
            accumulate(pss, g);
        }
    });
}

Var project(const Var& x, const Tensor& p) {
    const Tensor& xt = x.value();
    if (xt.ndim() != 2 || p.ndim() != 2 || xt.dim(1) != p.dim(0))
        throw std::invalid_argument("project: incompatible shapes");
    using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const MatRM> xm(xt.data(), xt.dim(0), xt.dim(1));
    Eigen::Map<const MatRM> pm(p.data(), p.dim(0), p.dim(1));
    Tensor y({xt.dim(0), p.dim(1)});
    Eigen::Map<MatRM> ym(y.data(), y.dim(0), y.dim(1));
    ym.noalias() = xm * pm;
    Tensor pcopy = p;
    return make_op(std::move(y), {x}, [pcopy = std::move(pcopy)](Node& n) {
        const auto& px = n.parents[0];
        Eigen::Map<const MatRM> gm(n.grad.data(), n.grad.dim(0), n.grad.dim(1));
        Eigen::Map<const MatRM> pm(pcopy.data(), pcopy.dim(0), pcopy.dim(1));
        Tensor g(px->value.shape());
        Eigen::Map<MatRM> out(g.data(), g.dim(0), g.dim(1));
        out.noalias() = gm * pm.transpose();
        accumulate(px, g);
    });
}

namespace {

double row_sqdist(const Tensor& s, int d, int i, int j) {
    double sq = 0.0;
    const double* a = s.data() + static_cast<std::size_t>(i) * d;
    const double* b = s.data() + static_cast<std::size_t>(j) * d;
    for (int k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        sq += diff * diff;
    }
    return sq;
}

struct PairDist {
    double dist;
    int i, j;
};

// Median pairwise distance plus the pair realising it. Ties break on the
// pair index so the choice never depends on library internals.
PairDist median_pair(const Tensor& samples) {
    if (samples.ndim() != 2) throw std::invalid_argument("median_pairwise_distance: expected {N,d}");
    const int n_s = samples.dim(0), d = samples.dim(1);
    if (n_s < 2) throw std::invalid_argument("median_pairwise_distance: need at least 2 samples");
    std::vector<PairDist> dist;
    dist.reserve(static_cast<std::size_t>(n_s) * (n_s - 1) / 2);
    for (int i = 0; i < n_s; ++i)
        for (int j = i + 1; j < n_s; ++j)
            dist.push_back({std::sqrt(row_sqdist(samples, d, i, j)), i, j});
    const std::size_t mid = dist.size() / 2;
    auto less = [n_s](const PairDist& a, const PairDist& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.i * n_s + a.j < b.i * n_s + b.j;
    };
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end(), less);
    return dist[mid];
}

// e_ij = -|s_i - s_j|^2 / (2 h^2); H = -(1/N) sum_i [ LSE_j(e_ij)
// - log(N-1) - (d/2) log(2 pi h^2) ]. Fills the per-row softmax weights
// (row-normalised, diagonal zero) that both backward passes reuse.
double loo_entropy_forward(const Tensor& s, double h, std::vector<double>& w) {
    const int n_s = s.dim(0), d = s.dim(1);
    std::vector<double> e(static_cast<std::size_t>(n_s) * n_s, 0.0);
    const double inv2h2 = 1.0 / (2.0 * h * h);
    for (int i = 0; i < n_s; ++i)
        for (int j = i + 1; j < n_s; ++j)
            e[static_cast<std::size_t>(i) * n_s + j] = e[static_cast<std::size_t>(j) * n_s + i] =
                -row_sqdist(s, d, i, j) * inv2h2;

    const double log_norm = std::log(static_cast<double>(n_s - 1)) +
                            0.5 * d * std::log(2.0 * M_PI * h * h);
    w.assign(static_cast<std::size_t>(n_s) * n_s, 0.0);
    double acc = 0.0;
    for (int i = 0; i < n_s; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_s; ++j)
            if (j != i) mx = std::max(mx, e[static_cast<std::size_t>(i) * n_s + j]);
        double sum = 0.0;
        for (int j = 0; j < n_s; ++j)
            if (j != i) sum += std::exp(e[static_cast<std::size_t>(i) * n_s + j] - mx);
        const double lse = mx + std::log(sum);
        for (int j = 0; j < n_s; ++j)
            if (j != i)
                w[static_cast<std::size_t>(i) * n_s + j] =
                    std::exp(e[static_cast<std::size_t>(i) * n_s + j] - lse);
        acc += lse - log_norm;
    }
    return -acc / n_s;
}

// dH/ds_k at fixed h: (g / (N h^2)) * sum_{j != k} (w_kj + w_jk) (s_k - s_j)
void entropy_grad_fixed_h(const Tensor& s, const std::vector<double>& w, double h, double g,
                          Tensor& out) {
    const int n_s = s.dim(0), d = s.dim(1);
    const double c = g / (static_cast<double>(n_s) * h * h);
    for (int k = 0; k < n_s; ++k) {
        double* ok = out.data() + static_cast<std::size_t>(k) * d;
        const double* sk = s.data() + static_cast<std::size_t>(k) * d;
        for (int j = 0; j < n_s; ++j) {
            if (j == k) continue;
            const double wkj = w[static_cast<std::size_t>(k) * n_s + j] +
                               w[static_cast<std::size_t>(j) * n_s + k];
            if (wkj == 0.0) continue;
            const double* sj = s.data() + static_cast<std::size_t>(j) * d;
            for (int t = 0; t < d; ++t) ok[t] += c * wkj * (sk[t] - sj[t]);
        }
    }
}

}  // namespace

Var loo_kde_entropy(const Var& samples, double h) {
    const Tensor& s = samples.value();
    if (s.ndim() != 2) throw std::invalid_argument("loo_kde_entropy: expected {N,d}");
    if (s.dim(0) < 2) throw std::invalid_argument("loo_kde_entropy: need at least 2 samples");
    if (!(h > 0.0)) throw std::invalid_argument("loo_kde_entropy: bandwidth must be positive");

    auto w = std::make_shared<std::vector<double>>();
    Tensor y({1});
    y[0] = loo_entropy_forward(s, h, *w);

    return make_op(std::move(y), {samples}, [w, h](Node& n) {
        const auto& ps = n.parents[0];
        Tensor out(ps->value.shape());
        entropy_grad_fixed_h(ps->value, *w, h, n.grad[0], out);
        accumulate(ps, out);
    });
}

Var loo_kde_entropy_mh(const Var& samples, double shrink) {
    const Tensor& s = samples.value();
    if (s.ndim() != 2) throw std::invalid_argument("loo_kde_entropy_mh: expected {N,d}");
    if (s.dim(0) < 2) throw std::invalid_argument("loo_kde_entropy_mh: need at least 2 samples");
    if (!(shrink > 0.0)) throw std::invalid_argument("loo_kde_entropy_mh: shrink must be positive");
    const PairDist med = median_pair(s);
    const double h = shrink * med.dist;
    if (!(h > 0.0)) throw std::invalid_argument("loo_kde_entropy_mh: degenerate samples");

    auto w = std::make_shared<std::vector<double>>();
    Tensor y({1});
    y[0] = loo_entropy_forward(s, h, *w);

    return make_op(std::move(y), {samples}, [w, h, shrink, med](Node& n) {
        const auto& ps = n.parents[0];
        const Tensor& s = ps->value;
        const int n_s = s.dim(0), d = s.dim(1);
        const double g = n.grad[0];
        Tensor out(s.shape());
        entropy_grad_fixed_h(s, *w, h, g, out);

        // Bandwidth path: dH/dh = d/h - (1/(N h^3)) sum_ij w_ij |s_i - s_j|^2,
        // and h moves only with the two samples of the median pair.
        double sum_ws = 0.0;
        for (int i = 0; i < n_s; ++i)
            for (int j = 0; j < n_s; ++j) {
                if (j == i) continue;
                const double wij = (*w)[static_cast<std::size_t>(i) * n_s + j];
                if (wij != 0.0) sum_ws += wij * row_sqdist(s, d, i, j);
            }
        const double dh = static_cast<double>(d) / h -
                          sum_ws / (static_cast<double>(n_s) * h * h * h);
        const double c = g * dh * shrink / med.dist;
        double* oa = out.data() + static_cast<std::size_t>(med.i) * d;
        double* ob = out.data() + static_cast<std::size_t>(med.j) * d;
        const double* sa = s.data() + static_cast<std::size_t>(med.i) * d;
        const double* sb = s.data() + static_cast<std::size_t>(med.j) * d;
        for (int t = 0; t < d; ++t) {
            const double v = c * (sa[t] - sb[t]);
            oa[t] += v;
            ob[t] -= v;
        }
        accumulate(ps, out);
    });
}

double median_pairwise_distance(const Tensor& samples) { return median_pair(samples).dist; }

}  // namespace acmt::ad
