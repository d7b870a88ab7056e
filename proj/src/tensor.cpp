#include "fga/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fga {

Tensor::Tensor(int h_, int w_, int c_, double fill) : h(h_), w(w_), c(c_) {
    if (h <= 0 || w <= 0 || c <= 0)
        throw std::invalid_argument("Tensor: dimensions must be positive");
    data.assign(size_t(h) * w * c, fill);
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

Tensor operator+(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "tensor add");
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "tensor sub");
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

Tensor operator*(const Tensor& a, double s) {
    Tensor out = a;
    for (double& v : out.data) v *= s;
    return out;
}

Tensor sign(const Tensor& g) {
    Tensor out = g;
    for (double& v : out.data) v = (v > 0.0) ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    return out;
}

double l1_norm(const Tensor& g) {
    double s = 0.0;
    for (double v : g.data) s += std::fabs(v);
    return s;
}

double linf_norm(const Tensor& g) {
    double m = 0.0;
    for (double v : g.data) m = std::max(m, std::fabs(v));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mean_abs_diff");
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += std::fabs(a.data[i] - b.data[i]);
    return s / double(a.data.size());
}

double mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / double(a.data.size());
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

bool all_finite(const Tensor& g) {
    for (double v : g.data)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_finite(const Tensor& g, const std::string& what) {
    if (!all_finite(g))
        throw std::runtime_error(what + ": non-finite value encountered");
}

Tensor clip_ball(const Tensor& x_orig, const Tensor& x_cand, double eps) {
    require_same_shape(x_orig, x_cand, "clip_ball");
    if (eps < 0.0) throw std::invalid_argument("clip_ball: eps must be >= 0");
    Tensor out = x_cand;
    for (size_t i = 0; i < out.data.size(); ++i) {
        double x = x_orig.data[i];
        double v = std::max(0.0, std::max(x - eps, out.data[i]));
        out.data[i] = std::min(255.0, std::min(x + eps, v));
    }
    return out;
}

void Kernel2D::validate() const {
    if (k < 1 || k % 2 == 0)
        throw std::invalid_argument("Kernel2D: side length must be odd and >= 1");
    if (w.size() != size_t(k) * k)
        throw std::invalid_argument("Kernel2D: weight count does not match side length");
    double sum = 0.0;
    for (double v : w) {
        if (!(v >= 0.0)) throw std::invalid_argument("Kernel2D: negative or NaN weight");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("Kernel2D: weights must sum to 1");
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (std::fabs(at(i, j) - at(k - 1 - i, k - 1 - j)) > 1e-12)
                throw std::invalid_argument("Kernel2D: weights not symmetric under 180-degree rotation");
}

Kernel2D gaussian_kernel(int k, double sigma) {
    if (k < 1 || k % 2 == 0)
        throw std::invalid_argument("gaussian_kernel: k must be odd and >= 1");
    if (!(sigma > 0.0))
        throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
    Kernel2D ker;
    ker.k = k;
    ker.w.resize(size_t(k) * k);
    const double c = (k - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            double d2 = (i - c) * (i - c) + (j - c) * (j - c);
            double v = std::exp(-d2 / (2.0 * sigma * sigma));
            ker.w[size_t(i) * k + j] = v;
            sum += v;
        }
    for (double& v : ker.w) v /= sum;
    return ker;
}

Tensor conv2d_same(const Tensor& g, const Kernel2D& ker) {
    ker.validate();
    if (ker.k > std::min(g.h, g.w))
        throw std::invalid_argument("conv2d_same: kernel larger than image");
    const int r0 = ker.k / 2;
    Tensor out(g.h, g.w, g.c, 0.0);
    for (int r = 0; r < g.h; ++r)
        for (int col = 0; col < g.w; ++col)
            for (int ch = 0; ch < g.c; ++ch) {
                double acc = 0.0;
                for (int i = 0; i < ker.k; ++i) {
                    int rr = r + i - r0;
                    if (rr < 0 || rr >= g.h) continue;
                    for (int j = 0; j < ker.k; ++j) {
                        int cc = col + j - r0;
                        if (cc < 0 || cc >= g.w) continue;
                        acc += ker.at(i, j) * g.at(rr, cc, ch);
                    }
                }
                out.at(r, col, ch) = acc;
            }
    return out;
}

Tensor translate(const Tensor& g, int di, int dj) {
    if (std::abs(di) >= g.h || std::abs(dj) >= g.w)
        throw std::invalid_argument("translate: shift exceeds image size");
    Tensor out(g.h, g.w, g.c, 0.0);
    for (int r = 0; r < g.h; ++r) {
        int sr = r - di;
        if (sr < 0 || sr >= g.h) continue;
        for (int col = 0; col < g.w; ++col) {
            int sc = col - dj;
            if (sc < 0 || sc >= g.w) continue;
            for (int ch = 0; ch < g.c; ++ch) out.at(r, col, ch) = g.at(sr, sc, ch);
        }
    }
    return out;
}

Tensor resize_nearest(const Tensor& x, int h2, int w2) {
    if (h2 < 1 || w2 < 1)
        throw std::invalid_argument("resize_nearest: target sides must be >= 1");
    Tensor out(h2, w2, x.c, 0.0);
    for (int r = 0; r < h2; ++r) {
        int sr = int((long long)r * x.h / h2);
        for (int col = 0; col < w2; ++col) {
            int sc = int((long long)col * x.w / w2);
            for (int ch = 0; ch < x.c; ++ch) out.at(r, col, ch) = x.at(sr, sc, ch);
        }
    }
    return out;
}

Tensor route_resize_grad(const Tensor& g, int h, int w) {
    if (h < 1 || w < 1)
        throw std::invalid_argument("route_resize_grad: source sides must be >= 1");
    Tensor out(h, w, g.c, 0.0);
    for (int r = 0; r < g.h; ++r) {
        int sr = int((long long)r * h / g.h);
        for (int col = 0; col < g.w; ++col) {
            int sc = int((long long)col * w / g.w);
            for (int ch = 0; ch < g.c; ++ch) out.at(sr, sc, ch) += g.at(r, col, ch);
        }
    }
    return out;
}

Tensor pad_zero(const Tensor& x, int top, int left, int H, int W) {
    if (top < 0 || left < 0 || top + x.h > H || left + x.w > W)
        throw std::invalid_argument("pad_zero: placement out of bounds");
    Tensor out(H, W, x.c, 0.0);
    for (int r = 0; r < x.h; ++r)
        for (int col = 0; col < x.w; ++col)
            for (int ch = 0; ch < x.c; ++ch)
                out.at(top + r, left + col, ch) = x.at(r, col, ch);
    return out;
}

Tensor crop(const Tensor& x, int top, int left, int h, int w) {
    if (top < 0 || left < 0 || top + h > x.h || left + w > x.w)
        throw std::invalid_argument("crop: window out of bounds");
    Tensor out(h, w, x.c, 0.0);
    for (int r = 0; r < h; ++r)
        for (int col = 0; col < w; ++col)
            for (int ch = 0; ch < x.c; ++ch)
                out.at(r, col, ch) = x.at(top + r, left + col, ch);
    return out;
}

double Rng::uniform() {
    return double(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int Rng::uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    uint64_t span = uint64_t(hi) - uint64_t(lo) + 1;
    return lo + int(eng_() % span);
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller; u clamped away from 0 so log is finite.
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t item) {
    uint64_t s = splitmix64(base ^ 0xA5A5A5A5A5A5A5A5ULL);
    s = splitmix64(s ^ splitmix64(stream));
    s = splitmix64(s ^ splitmix64(item));
    return s;
}

}  // namespace fga
