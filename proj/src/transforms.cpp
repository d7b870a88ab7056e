#include "fga/transforms.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace fga {

std::string TransformRecord::to_json() const {
    json j;
    j["applied"] = applied;
    if (applied) {
        j["h2"] = h2;
        j["w2"] = w2;
        j["top"] = top;
        j["left"] = left;
    }
    return j.dump();
}

TransformRecord TransformRecord::from_json(const std::string& s) {
    json j = json::parse(s);
    TransformRecord rec;
    rec.applied = j.at("applied").get<bool>();
    if (rec.applied) {
        rec.h2 = j.at("h2").get<int>();
        rec.w2 = j.at("w2").get<int>();
        rec.top = j.at("top").get<int>();
        rec.left = j.at("left").get<int>();
    }
    return rec;
}

std::pair<Tensor, TransformRecord> dim_transform(const Tensor& x, const DimConfig& cfg, Rng& rng) {
    if (cfg.p < 0.0 || cfg.p > 1.0)
        throw std::invalid_argument("dim_transform: probability must be in [0,1]");
    if (!(cfg.s_min > 0.0) || cfg.s_min > 1.0)
        throw std::invalid_argument("dim_transform: s_min must be in (0,1]");
    TransformRecord rec;
    if (rng.uniform() >= cfg.p) return {x, rec};
    rec.applied = true;
    int h_lo = int(std::ceil(cfg.s_min * x.h));
    int w_lo = int(std::ceil(cfg.s_min * x.w));
    rec.h2 = rng.uniform_int(h_lo, x.h);
    rec.w2 = rng.uniform_int(w_lo, x.w);
    rec.top = rng.uniform_int(0, x.h - rec.h2);
    rec.left = rng.uniform_int(0, x.w - rec.w2);
    return {dim_apply_recorded(x, rec), rec};
}

Tensor dim_apply_recorded(const Tensor& x, const TransformRecord& rec) {
    if (!rec.applied) return x;
    if (rec.h2 < 1 || rec.w2 < 1 || rec.top < 0 || rec.left < 0 ||
        rec.top + rec.h2 > x.h || rec.left + rec.w2 > x.w)
        throw std::invalid_argument("dim_apply_recorded: record does not fit the input");
    return pad_zero(resize_nearest(x, rec.h2, rec.w2), rec.top, rec.left, x.h, x.w);
}

Tensor dim_route_grad(const Tensor& g, const TransformRecord& rec) {
    if (!rec.applied) return g;
    if (rec.top + rec.h2 > g.h || rec.left + rec.w2 > g.w)
        throw std::invalid_argument("dim_route_grad: record does not match gradient shape");
    Tensor inner = crop(g, rec.top, rec.left, rec.h2, rec.w2);
    return route_resize_grad(inner, g.h, g.w);
}

Tensor tim_smooth(const Tensor& g, const TimConfig& cfg) {
    if (cfg.k == 1) return g;
    return conv2d_same(g, gaussian_kernel(cfg.k, cfg.effective_sigma()));
}

std::pair<double, Tensor> sim_loss_and_grad(const Classifier& model, const Tensor& x, int y,
                                            const SimConfig& cfg) {
    if (cfg.m < 1) throw std::invalid_argument("sim_gradient: need m >= 1 scale copies");
    double loss = 0.0;
    Tensor g(x.shape(), 0.0);
    double scale = 1.0;
    for (int i = 0; i < cfg.m; ++i) {
        auto [li, gi] = model.loss_and_grad(x * scale, y);
        loss += li;
        for (size_t e = 0; e < g.data.size(); ++e) g.data[e] += gi.data[e];
        scale *= 0.5;
    }
    double inv = 1.0 / double(cfg.m);
    for (double& v : g.data) v *= inv;
    return {loss * inv, std::move(g)};
}

Tensor sim_gradient(const Classifier& model, const Tensor& x, int y, const SimConfig& cfg) {
    return sim_loss_and_grad(model, x, y, cfg).second;
}

Tensor nesterov_point(const Tensor& x_adv, const Tensor& m, const Tensor& v, double alpha_t,
                      double delta) {
    if (!x_adv.same_shape(m) || !x_adv.same_shape(v))
        throw std::invalid_argument("nesterov_point: shape mismatch");
    Tensor out = x_adv;
    for (size_t e = 0; e < out.data.size(); ++e) {
        double ve = v.data[e];
        if (ve < 0.0) throw std::runtime_error("nesterov_point: negative second moment");
        out.data[e] += alpha_t * m.data[e] / (std::sqrt(ve) + delta);
    }
    return out;
}

Tensor nesterov_point_momentum(const Tensor& x_adv, const Tensor& g, double alpha, double mu) {
    if (!x_adv.same_shape(g))
        throw std::invalid_argument("nesterov_point_momentum: shape mismatch");
    Tensor out = x_adv;
    for (size_t e = 0; e < out.data.size(); ++e) out.data[e] += alpha * mu * g.data[e];
    return out;
}

}  // namespace fga
