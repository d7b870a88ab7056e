#pragma once
// Dense real-valued H x W x C tensors (images in [0,255], gradients and
// moment accumulators unconstrained) plus the pixel-space primitives the
// attack family is built from: per-pixel epsilon-ball clipping, Gaussian
// kernels, same-size convolution, translation, and nearest resize / zero
// pad with exact gradient adjoints.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fga {

struct Shape {
    int h = 0, w = 0, c = 0;
    bool operator==(const Shape& o) const { return h == o.h && w == o.w && c == o.c; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
    long long elems() const { return 1LL * h * w * c; }
};

// Row-major, channel-last storage: data[(r*w + col)*c + ch].
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int h_, int w_, int c_, double fill = 0.0);
    explicit Tensor(Shape s, double fill = 0.0) : Tensor(s.h, s.w, s.c, fill) {}

    Shape shape() const { return {h, w, c}; }
    size_t size() const { return data.size(); }
    double& at(int r, int col, int ch) { return data[(size_t(r) * w + col) * c + ch]; }
    double at(int r, int col, int ch) const { return data[(size_t(r) * w + col) * c + ch]; }
    bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }
};

// --- elementwise helpers ----------------------------------------------------

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, double s);
inline Tensor operator*(double s, const Tensor& a) { return a * s; }

// sign with sign(0) = 0, so zero-gradient pixels never move.
Tensor sign(const Tensor& g);

double l1_norm(const Tensor& g);            // sum of |g| over all elements
double linf_norm(const Tensor& g);          // max |g|
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean_abs_diff(const Tensor& a, const Tensor& b);
double mse(const Tensor& a, const Tensor& b);
double dot(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& g);
// Throws std::runtime_error naming `what` if any element is NaN/Inf.
void require_finite(const Tensor& g, const std::string& what);

// --- epsilon-ball clipping (per-pixel, Eq. form min/max chain) ---------------

// o = min{255, x_orig+eps, max{0, x_orig-eps, x_cand}} elementwise.
// Guarantees o in [0,255] and |o - x_orig| <= eps (up to one rounding ulp).
Tensor clip_ball(const Tensor& x_orig, const Tensor& x_cand, double eps);

// --- kernels and convolution -------------------------------------------------

struct Kernel2D {
    int k = 1;                   // odd side length
    std::vector<double> w;       // k*k weights, row-major

    double at(int i, int j) const { return w[size_t(i) * k + j]; }
    // Enforces: odd k, non-negative weights, sum 1 within 1e-9, 180-degree
    // rotational symmetry. Throws std::invalid_argument on violation.
    void validate() const;
};

// Normalized isotropic Gaussian; weights ~ exp(-((i-c)^2+(j-c)^2)/(2 sigma^2)).
Kernel2D gaussian_kernel(int k, double sigma);

// Same-size correlation with zero padding, applied independently per channel.
Tensor conv2d_same(const Tensor& g, const Kernel2D& ker);

// Shifted copy: out[r][col] = g[r-di][col-dj], vacated positions zero.
Tensor translate(const Tensor& g, int di, int dj);

// --- resize / pad with exact adjoints ----------------------------------------

// Nearest-neighbor with floor convention: src_r = (r*h)/h2 (integer division).
Tensor resize_nearest(const Tensor& x, int h2, int w2);
// Adjoint of resize_nearest back to h x w: scatter-adds each cell to its source.
Tensor route_resize_grad(const Tensor& g, int h, int w);

// Zero-padded embedding of x at (top,left) inside an H x W canvas.
Tensor pad_zero(const Tensor& x, int top, int left, int H, int W);
// Adjoint of pad_zero: crop of the same window.
Tensor crop(const Tensor& x, int top, int left, int h, int w);

// --- deterministic randomness -------------------------------------------------

// mt19937_64 engine with hand-pinned samplers (uniform via the top 53 bits,
// normal via Box-Muller) so generated values do not depend on the standard
// library's unspecified distribution algorithms.
struct Rng {
    explicit Rng(uint64_t seed) : eng_(seed) {}
    uint64_t next_u64() { return eng_(); }
    double uniform();                    // [0, 1)
    double uniform(double lo, double hi);
    int uniform_int(int lo, int hi);     // inclusive range
    double normal();                     // standard normal, Box-Muller

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

uint64_t splitmix64(uint64_t x);
// Stable per-work-item seed: independent of thread scheduling.
uint64_t derive_seed(uint64_t base, uint64_t stream, uint64_t item);

}  // namespace fga
