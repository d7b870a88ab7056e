#include <stdexcept>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fga/attack.hpp"
#include "fga/dataset.hpp"
#include "fga/model.hpp"

using namespace fga;

static Tensor random_image(Shape s, uint64_t seed) {
    Rng rng(seed);
    Tensor x(s);
    for (double& v : x.data) v = double(rng.uniform_int(0, 255));
    return x;
}

static MlpModel small_victim(uint64_t seed = 19) {
    return MlpModel::random_init(Shape{8, 8, 3}, 4, 10, seed);
}

TEST_CASE("constant schedule splits eps evenly") {
    auto a = schedule_constant(16.0, 10);
    REQUIRE(a.size() == 10);
    for (double v : a) CHECK(v == doctest::Approx(1.6).epsilon(1e-15));
    CHECK_THROWS_AS(schedule_constant(16.0, 0), std::invalid_argument);
}

TEST_CASE("dynamic schedule is increasing and sums to eps") {
    auto a = schedule_dynamic(16.0, 10, 0.9, 0.99);
    REQUIRE(a.size() == 10);
    double sum = std::accumulate(a.begin(), a.end(), 0.0);
    CHECK(std::abs(sum - 16.0) < 1e-9);
    for (size_t t = 1; t < a.size(); ++t) CHECK(a[t] > a[t - 1]);
    // frozen endpoints of the default schedule
    CHECK(a.front() == doctest::Approx(0.9050516987045195).epsilon(1e-12));
    CHECK(a.back() == doctest::Approx(1.9063348386726597).epsilon(1e-12));

    CHECK_THROWS_AS(schedule_dynamic(16.0, 10, 1.0, 0.99), std::invalid_argument);
    CHECK_THROWS_AS(schedule_dynamic(16.0, 10, 0.9, 0.0), std::invalid_argument);
}

TEST_CASE("fgsm edge cases") {
    MlpModel m = small_victim();
    Tensor x = random_image(m.input_shape(), 1);
    CHECK(max_abs_diff(fgsm(m, x, 1, 0.0), x) == 0.0);

    LinearSoftmaxModel zero(Shape{8, 8, 3}, 4);   // zero weights, zero gradient
    CHECK(max_abs_diff(fgsm(zero, x, 1, 16.0), x) == 0.0);

    // every pixel moves by exactly eps*sign(grad), then pixel-domain clamps
    Tensor adv = fgsm(m, x, 2, 16.0);
    auto [loss, g] = m.loss_and_grad(x, 2);
    (void)loss;
    for (size_t e = 0; e < x.data.size(); ++e) {
        double want = x.data[e] + 16.0 * (g.data[e] > 0 ? 1.0 : (g.data[e] < 0 ? -1.0 : 0.0));
        want = std::min(255.0, std::max(0.0, want));
        CHECK(adv.data[e] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("run_attack traces and invariants") {
    MlpModel m = small_victim();
    Tensor x = random_image(m.input_shape(), 2);
    AttackConfig cfg;
    cfg.eps = 16.0;
    cfg.iters = 10;

    AttackResult r = run_attack(m, x, 1, cfg, AttackBase::AI_FGTM);
    REQUIRE(r.trace.iters.size() == 10);
    CHECK(max_abs_diff(r.x_adv, x) <= 16.0 + 1e-12);
    for (double v : r.x_adv.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 255.0);
    }
    auto sched = schedule_dynamic(16.0, 10, 0.9, 0.99);   // Auto resolves to dynamic
    for (int t = 0; t < 10; ++t) {
        CHECK(r.trace.iters[t].t == t);
        CHECK(r.trace.iters[t].alpha == doctest::Approx(sched[t]).epsilon(1e-15));
    }
    CHECK(r.trace.final_loss == doctest::Approx(m.loss(r.x_adv, 1)).epsilon(1e-12));

    AttackResult mi = run_attack(m, x, 1, cfg, AttackBase::MI_FGSM);
    CHECK(mi.trace.iters[0].alpha == doctest::Approx(1.6));   // Auto -> constant for sign bases

    // FGSM always runs a single iteration
    cfg.iters = 7;
    AttackResult f = run_attack(m, x, 1, cfg, AttackBase::FGSM);
    CHECK(f.trace.iters.size() == 1);
    CHECK(max_abs_diff(f.x_adv, fgsm(m, x, 1, 16.0)) == 0.0);
}

TEST_CASE("BIM is MI-FGSM with zero decay, bitwise") {
    MlpModel m = small_victim();
    for (uint64_t s = 0; s < 3; ++s) {
        Tensor x = random_image(m.input_shape(), 10 + s);
        AttackConfig cfg;
        cfg.iters = 8;
        AttackResult bim = run_attack(m, x, int(s % 4), cfg, AttackBase::BIM);
        AttackConfig cfg0 = cfg;
        cfg0.mu = 0.0;
        AttackResult mi = run_attack(m, x, int(s % 4), cfg0, AttackBase::MI_FGSM);
        CHECK(bim.x_adv.data == mi.x_adv.data);   // bitwise
    }
}

TEST_CASE("NIM first iteration equals MI-FGSM first iteration") {
    MlpModel m = small_victim();
    Tensor x = random_image(m.input_shape(), 31);
    AttackConfig cfg;
    cfg.iters = 1;
    AttackResult ni = run_attack(m, x, 2, cfg, AttackBase::NIM);
    AttackResult mi = run_attack(m, x, 2, cfg, AttackBase::MI_FGSM);
    CHECK(ni.x_adv.data == mi.x_adv.data);
}

TEST_CASE("huge lambda drives tanh steps onto the sign direction") {
    MlpModel m = small_victim();
    Tensor x = random_image(m.input_shape(), 4);
    AttackConfig cfg;
    cfg.lambda = 1e6;
    cfg.schedule = ScheduleKind::Constant;
    cfg.iters = 5;
    AttackResult r = run_attack(m, x, 3, cfg, AttackBase::AI_FGTM);

    // replicate the engine loop to expose m, v
    Tensor xa = x;
    Tensor mm(x.shape(), 0.0), vv(x.shape(), 0.0);
    int checked = 0;
    for (int t = 0; t < 5; ++t) {
        auto [loss, g] = m.loss_and_grad(xa, 3);
        (void)loss;
        for (size_t e = 0; e < g.data.size(); ++e) {
            mm.data[e] += cfg.mu1 * g.data[e];
            vv.data[e] += cfg.mu2 * g.data[e] * g.data[e];
        }
        Tensor step(x.shape(), 0.0);
        for (size_t e = 0; e < step.data.size(); ++e) {
            double z = cfg.lambda * mm.data[e] / (std::sqrt(vv.data[e]) + cfg.delta);
            step.data[e] = (16.0 / 5.0) * std::tanh(z);
            if (std::abs(z) > 1e-3) {
                ++checked;
                CHECK(step.data[e] * mm.data[e] > 0.0);   // sign agreement
            }
        }
        xa = clip_ball(x, xa + step, 16.0);
    }
    CHECK(checked > 0);
    CHECK(r.x_adv.data == xa.data);   // manual loop matches the engine bitwise
}

TEST_CASE("illegal flag combinations and bad configs are rejected") {
    MlpModel m = small_victim();
    Tensor x = random_image(m.input_shape(), 5);
    AttackConfig cfg;
    cfg.ni = true;
    CHECK_THROWS_AS(run_attack(m, x, 0, cfg, AttackBase::BIM), std::invalid_argument);
    CHECK_THROWS_AS(run_attack(m, x, 0, cfg, AttackBase::FGSM), std::invalid_argument);
    CHECK_NOTHROW(run_attack(m, x, 0, cfg, AttackBase::NIM));

    AttackConfig bad;
    bad.eps = -2.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = AttackConfig{};
    bad.iters = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = AttackConfig{};
    bad.beta2 = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = AttackConfig{};
    bad.delta = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("composed attacks stay inside the ball") {
    MlpModel m = small_victim();
    Tensor x = random_image(m.input_shape(), 6);
    AttackConfig cfg;
    cfg.iters = 6;
    cfg.di = cfg.ti = cfg.si = cfg.ni = true;
    cfg.tim.k = 3;
    cfg.sim.m = 2;
    cfg.seed = 99;
    for (AttackBase base : {AttackBase::MI_FGSM, AttackBase::NIM, AttackBase::AI_FGTM}) {
        AttackResult r = run_attack(m, x, 1, cfg, base);
        CHECK(max_abs_diff(r.x_adv, x) <= cfg.eps + 1e-12);
        for (double v : r.x_adv.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 255.0);
        }
    }
    // same seed, same DIM draws -> identical output
    AttackResult a = run_attack(m, x, 1, cfg, AttackBase::AI_FGTM);
    AttackResult b = run_attack(m, x, 1, cfg, AttackBase::AI_FGTM);
    CHECK(a.x_adv.data == b.x_adv.data);
}

TEST_CASE("histogram binning and band fraction") {
    CHECK(hist_bin(-2.0000001) == 0);             // underflow
    CHECK(hist_bin(2.0) == kHistBins - 1);        // overflow bin is [2, inf)
    CHECK(hist_bin(-2.0) == 1);                   // first inner bin
    CHECK(hist_bin(0.0) == 1 + kHistInner / 2);   // center bin
    CHECK(hist_bin(1.9999) == kHistInner);        // last inner bin

    HistRow h{};
    h[1 + kHistInner / 2] = 3;   // z = 0 lives inside (-0.5, 0.5)
    h[0] = 1;                    // underflow does not
    CHECK(hist_band_fraction(h) == doctest::Approx(0.75));

    // band edges: |z| slightly under 0.5 is in, slightly over is out
    HistRow edge{};
    edge[hist_bin(0.49)] = 1;
    CHECK(hist_band_fraction(edge) == doctest::Approx(1.0));
    HistRow outside{};
    outside[hist_bin(0.52)] = 1;
    CHECK(hist_band_fraction(outside) == doctest::Approx(0.0));
}

TEST_CASE("attack name grammar") {
    AttackKind k = parse_attack_name("mi-fgsm");
    CHECK(k.base == AttackBase::MI_FGSM);
    CHECK(!k.di);
    CHECK(k.canonical() == "mi-fgsm");

    k = parse_attack_name("TI-DIM");
    CHECK(k.base == AttackBase::MI_FGSM);
    CHECK(k.ti);
    CHECK(k.di);
    CHECK(k.canonical() == "ti-di-mi-fgsm");

    k = parse_attack_name("ni-ti-di-aitm");
    CHECK(k.base == AttackBase::AI_FGTM);
    CHECK(k.ni);
    CHECK(k.ti);
    CHECK(k.di);
    CHECK(!k.si);
    CHECK(k.canonical() == "ni-ti-di-ai-fgtm");

    CHECK(parse_attack_name("aitm").base == AttackBase::AI_FGTM);
    CHECK(parse_attack_name("mim").base == AttackBase::MI_FGSM);
    CHECK(parse_attack_name("dim").di);
    CHECK(parse_attack_name("tim").ti);
    CHECK(parse_attack_name("si-mi-fgsm").si);
    CHECK(parse_attack_name("nim").base == AttackBase::NIM);
    CHECK(parse_attack_name("fgsm").base == AttackBase::FGSM);
    CHECK(parse_attack_name("bim").base == AttackBase::BIM);

    CHECK_THROWS_AS(parse_attack_name("pgd"), std::invalid_argument);
    CHECK_THROWS_AS(parse_attack_name(""), std::invalid_argument);
}
