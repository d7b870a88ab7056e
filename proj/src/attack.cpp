#include "fga/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fga {

const char* base_name(AttackBase b) {
    switch (b) {
        case AttackBase::FGSM: return "fgsm";
        case AttackBase::BIM: return "bim";
        case AttackBase::MI_FGSM: return "mi-fgsm";
        case AttackBase::NIM: return "nim";
        case AttackBase::AI_FGTM: return "ai-fgtm";
    }
    return "?";
}

void AttackConfig::validate() const {
    if (eps < 0.0) throw std::invalid_argument("attack config: eps must be >= 0");
    if (iters < 1) throw std::invalid_argument("attack config: iters must be >= 1");
    if (!(mu1 > 0.0) || !(mu2 > 0.0))
        throw std::invalid_argument("attack config: mu1 and mu2 must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("attack config: beta1 and beta2 must lie in (0,1)");
    if (!(lambda > 0.0)) throw std::invalid_argument("attack config: lambda must be > 0");
    if (!(delta > 0.0)) throw std::invalid_argument("attack config: delta must be > 0");
    if (dim.p < 0.0 || dim.p > 1.0)
        throw std::invalid_argument("attack config: dim probability must be in [0,1]");
    if (!(dim.s_min > 0.0) || dim.s_min > 1.0)
        throw std::invalid_argument("attack config: dim s_min must be in (0,1]");
    if (tim.k < 1 || tim.k % 2 == 0)
        throw std::invalid_argument("attack config: TIM kernel must be odd and >= 1");
    if (sim.m < 1) throw std::invalid_argument("attack config: SIM copies must be >= 1");
}

std::vector<double> schedule_constant(double eps, int T) {
    if (T < 1) throw std::invalid_argument("schedule_constant: T must be >= 1");
    return std::vector<double>(size_t(T), eps / double(T));
}

std::vector<double> schedule_dynamic(double eps, int T, double beta1, double beta2) {
    if (T < 1) throw std::invalid_argument("schedule_dynamic: T must be >= 1");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("schedule_dynamic: betas must lie in (0,1)");
    std::vector<double> w(size_t(T), 0.0);
    double sum = 0.0;
    for (int t = 0; t < T; ++t) {
        w[t] = (1.0 - std::pow(beta1, t + 1)) / std::sqrt(1.0 - std::pow(beta2, t + 1));
        sum += w[t];
    }
    for (double& v : w) v *= eps / sum;
    return w;
}

Tensor fgsm(const Classifier& model, const Tensor& x, int y, double eps) {
    auto [loss, grad] = model.loss_and_grad(x, y);
    (void)loss;
    require_finite(grad, "fgsm gradient");
    return clip_ball(x, x + sign(grad) * eps, eps);
}

Tensor tanh_step(const Tensor& m, const Tensor& v, double lambda, double delta, double alpha_t) {
    if (!m.same_shape(v)) throw std::invalid_argument("tanh_step: shape mismatch");
    Tensor out = m;
    for (size_t e = 0; e < out.data.size(); ++e) {
        double ve = v.data[e];
        if (ve < 0.0) throw std::runtime_error("tanh_step: negative second moment");
        out.data[e] = alpha_t * std::tanh(lambda * m.data[e] / (std::sqrt(ve) + delta));
    }
    return out;
}

int hist_bin(double z) {
    if (z < -2.0) return 0;
    if (z >= 2.0) return kHistBins - 1;
    int b = int((z + 2.0) * (kHistInner / 4.0));
    if (b >= kHistInner) b = kHistInner - 1;   // guard the z just below 2.0 edge
    return 1 + b;
}

double hist_band_fraction(const HistRow& h) {
    // Inner bin i (0-based) has center -2 + (i+0.5)*(4/81); centers inside
    // (-0.5, 0.5) are exactly i = 30..50.
    int64_t total = 0, band = 0;
    for (int i = 0; i < kHistBins; ++i) total += h[i];
    for (int i = 30; i <= 50; ++i) band += h[1 + i];
    return total == 0 ? 0.0 : double(band) / double(total);
}

static HistRow histogram_of(const Tensor& z) {
    HistRow h{};
    for (double v : z.data) ++h[hist_bin(v)];
    return h;
}

// Floating-point slack for the exact-arithmetic ball bound: fl(x+eps)-x can
// exceed eps by about one ulp of 256.
static constexpr double kBallSlack = 1e-12;

static void check_ball(const Tensor& x, const Tensor& x_adv, double eps, int t) {
    for (size_t e = 0; e < x.data.size(); ++e) {
        double v = x_adv.data[e];
        if (!(v >= 0.0 && v <= 255.0))
            throw std::runtime_error("attack invariant violated: pixel outside [0,255] at iteration " +
                                     std::to_string(t));
        if (std::fabs(v - x.data[e]) > eps + kBallSlack)
            throw std::runtime_error("attack invariant violated: perturbation exceeds eps at iteration " +
                                     std::to_string(t));
    }
}

AttackResult run_attack(const Classifier& model, const Tensor& x, int y,
                        const AttackConfig& cfg, AttackBase base) {
    cfg.validate();
    if (x.shape() != model.input_shape())
        throw std::invalid_argument("run_attack: input shape mismatch");
    if (cfg.ni && (base == AttackBase::BIM || base == AttackBase::FGSM))
        throw std::invalid_argument("run_attack: NI flag requires a momentum or AI-FGTM base");

    const bool adam = (base == AttackBase::AI_FGTM);
    const bool nesterov = cfg.ni || base == AttackBase::NIM;
    const int T = (base == AttackBase::FGSM) ? 1 : cfg.iters;

    ScheduleKind sk = cfg.schedule;
    if (sk == ScheduleKind::Auto) sk = adam ? ScheduleKind::Dynamic : ScheduleKind::Constant;
    std::vector<double> alpha = (sk == ScheduleKind::Dynamic)
                                    ? schedule_dynamic(cfg.eps, T, cfg.beta1, cfg.beta2)
                                    : schedule_constant(cfg.eps, T);

    Rng rng(cfg.seed);
    Tensor x_adv = x;
    Tensor m(x.shape(), 0.0), v(x.shape(), 0.0), g(x.shape(), 0.0);

    AttackResult res;
    res.trace.iters.reserve(size_t(T));

    for (int t = 0; t < T; ++t) {
        // (1) step size; (2) optional Nesterov lookahead with the current state
        Tensor eval_x = x_adv;
        if (nesterov)
            eval_x = adam ? nesterov_point(x_adv, m, v, alpha[t], cfg.delta)
                          : nesterov_point_momentum(x_adv, g, alpha[t], cfg.mu);

        // (3) optional input diversity on the evaluation point
        TransformRecord route;
        if (cfg.di) {
            auto [xt, rec] = dim_transform(eval_x, cfg.dim, rng);
            eval_x = std::move(xt);
            route = rec;
        }

        // (4) gradient at the evaluation point (scale copies if SI)
        double loss;
        Tensor grad;
        if (cfg.si) {
            auto lg = sim_loss_and_grad(model, eval_x, y, cfg.sim);
            loss = lg.first;
            grad = std::move(lg.second);
        } else {
            auto lg = model.loss_and_grad(eval_x, y);
            loss = lg.first;
            grad = std::move(lg.second);
        }
        if (!std::isfinite(loss)) throw std::runtime_error("run_attack: non-finite loss");
        require_finite(grad, "run_attack gradient");

        // (5) route the gradient back through the transform; (7) TIM smoothing
        if (cfg.di) grad = dim_route_grad(grad, route);
        if (cfg.ti) grad = tim_smooth(grad, cfg.tim);

        // (8) accumulator update and the step
        Tensor step(x.shape(), 0.0);
        HistRow hist{};
        if (adam) {
            for (size_t e = 0; e < m.data.size(); ++e) {
                m.data[e] += cfg.mu1 * grad.data[e];
                v.data[e] += cfg.mu2 * grad.data[e] * grad.data[e];
            }
            Tensor z(x.shape(), 0.0);
            for (size_t e = 0; e < z.data.size(); ++e)
                z.data[e] = cfg.lambda * m.data[e] / (std::sqrt(v.data[e]) + cfg.delta);
            hist = histogram_of(z);
            for (size_t e = 0; e < step.data.size(); ++e)
                step.data[e] = alpha[t] * std::tanh(z.data[e]);
        } else if (base == AttackBase::FGSM) {
            hist = histogram_of(grad);
            step = sign(grad) * alpha[t];
        } else {
            // BIM / MI-FGSM / NIM share the momentum path; BIM pins mu = 0.
            double mu_eff = (base == AttackBase::BIM) ? 0.0 : cfg.mu;
            double n1 = l1_norm(grad);
            for (size_t e = 0; e < g.data.size(); ++e) {
                double ghat = n1 > 0.0 ? grad.data[e] / n1 : 0.0;
                g.data[e] = mu_eff * g.data[e] + ghat;
            }
            hist = histogram_of(g);
            step = sign(g) * alpha[t];
        }
        x_adv = clip_ball(x, x_adv + step, cfg.eps);

        if (cfg.check_invariants) {
            check_ball(x, x_adv, cfg.eps, t);
            require_finite(m, "attack state m");
            require_finite(v, "attack state v");
            require_finite(g, "attack state g");
            for (double ve : v.data)
                if (ve < 0.0) throw std::runtime_error("attack invariant violated: negative v");
        }

        IterRecord rec;
        rec.t = t;
        rec.alpha = alpha[t];
        rec.loss = loss;
        rec.linf = linf_norm(x_adv - x);
        rec.pm = mean_abs_diff(x_adv, x);
        rec.hist = hist;
        res.trace.iters.push_back(rec);
    }

    res.trace.final_loss = model.loss(x_adv, y);
    res.x_adv = std::move(x_adv);
    return res;
}

std::string AttackKind::canonical() const {
    std::string s;
    if (ni) s += "ni-";
    if (si) s += "si-";
    if (ti) s += "ti-";
    if (di) s += "di-";
    return s + base_name(base);
}

AttackKind parse_attack_name(const std::string& name) {
    AttackKind kind;
    std::string rest;
    rest.reserve(name.size());
    for (char ch : name)
        rest += (ch >= 'A' && ch <= 'Z') ? char(ch - 'A' + 'a') : ch;

    auto strip = [&](const char* prefix) {
        size_t n = std::string(prefix).size();
        if (rest.rfind(prefix, 0) == 0 && rest.size() > n) {
            rest = rest.substr(n);
            return true;
        }
        return false;
    };
    for (bool progress = true; progress;) {
        progress = false;
        if (!kind.ni && strip("ni-")) kind.ni = progress = true;
        if (!kind.ti && strip("ti-")) kind.ti = progress = true;
        if (!kind.si && strip("si-")) kind.si = progress = true;
        // "di-" must not swallow the "dim" alias's prefix... there is no
        // ambiguity: "dim" has no '-', so strip() only fires on "di-".
        if (!kind.di && strip("di-")) kind.di = progress = true;
    }

    if (rest == "fgsm") kind.base = AttackBase::FGSM;
    else if (rest == "bim") kind.base = AttackBase::BIM;
    else if (rest == "mi-fgsm" || rest == "mim") kind.base = AttackBase::MI_FGSM;
    else if (rest == "nim") kind.base = AttackBase::NIM;
    else if (rest == "ai-fgtm" || rest == "aitm") kind.base = AttackBase::AI_FGTM;
    else if (rest == "dim") { kind.di = true; kind.base = AttackBase::MI_FGSM; }
    else if (rest == "tim") { kind.ti = true; kind.base = AttackBase::MI_FGSM; }
    else
        throw std::invalid_argument("unknown attack name '" + name + "'");
    return kind;
}

}  // namespace fga
