#pragma once
// Input/gradient transforms that compose with any base attack: DIM random
// resize-and-pad (with exact gradient routing back through the transform),
// TIM Gaussian gradient smoothing, SIM scale-copy gradients, and the two
// Nesterov lookahead point forms.

#include <string>
#include <utility>

#include "fga/model.hpp"
#include "fga/tensor.hpp"

namespace fga {

struct DimConfig {
    double p = 0.7;        // probability of applying the transform
    double s_min = 0.9;    // minimum side fraction of the random resize
};

struct TimConfig {
    int k = 9;             // Gaussian kernel side length (odd)
    double sigma = 0.0;    // <= 0 selects the default k/3
    double effective_sigma() const { return sigma > 0.0 ? sigma : k / 3.0; }
};

struct SimConfig {
    int m = 5;             // number of scale copies x / 2^i, i = 0..m-1
};

// The geometry drawn by one dim_transform call, serializable so a run's
// transform draws can be replayed exactly.
struct TransformRecord {
    bool applied = false;
    int h2 = 0, w2 = 0;    // resize target
    int top = 0, left = 0; // pad placement
    std::string to_json() const;
    static TransformRecord from_json(const std::string& s);
};

// With probability p: resize to uniform (h2, w2), h2 in [ceil(s_min*H), H],
// then zero-pad back to H x W at a uniform placement. Draw order is pinned:
// bernoulli, h2, w2, top, left.
std::pair<Tensor, TransformRecord> dim_transform(const Tensor& x, const DimConfig& cfg, Rng& rng);
// Replays a recorded geometry on a same-shape input.
Tensor dim_apply_recorded(const Tensor& x, const TransformRecord& rec);
// Exact adjoint: crop adjoint first, then resize scatter-add adjoint.
Tensor dim_route_grad(const Tensor& g, const TransformRecord& rec);

// conv2d_same with gaussian_kernel(k, sigma).
Tensor tim_smooth(const Tensor& g, const TimConfig& cfg);

// Mean input-gradient over intensity-halved copies x / 2^i.
Tensor sim_gradient(const Classifier& model, const Tensor& x, int y, const SimConfig& cfg);
// Same evaluation, also returning the mean loss (the engine records it).
std::pair<double, Tensor> sim_loss_and_grad(const Classifier& model, const Tensor& x, int y,
                                            const SimConfig& cfg);

// AI-FGTM lookahead: x_adv + alpha_t * m / (sqrt(v) + delta). Not clipped.
Tensor nesterov_point(const Tensor& x_adv, const Tensor& m, const Tensor& v, double alpha_t,
                      double delta);
// Momentum lookahead: x_adv + alpha * mu * g.
Tensor nesterov_point_momentum(const Tensor& x_adv, const Tensor& g, double alpha, double mu);

}  // namespace fga
