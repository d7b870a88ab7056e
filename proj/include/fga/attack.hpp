#pragma once
// The attack engine: step-size schedules, the base update rules (FGSM, BIM,
// MI-FGSM, NIM, AI-FGTM), and the composition layer that switches the DI /
// TI / SI / NI features on any base rule. Every iteration asserts the
// epsilon-ball and pixel-domain invariants.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fga/model.hpp"
#include "fga/tensor.hpp"
#include "fga/transforms.hpp"

namespace fga {

enum class AttackBase { FGSM, BIM, MI_FGSM, NIM, AI_FGTM };
enum class ScheduleKind { Auto, Constant, Dynamic };

const char* base_name(AttackBase b);

struct AttackConfig {
    double eps = 16.0;        // L-infinity budget, pixel units
    int iters = 10;           // T
    double mu = 1.0;          // momentum decay (MI/NIM accumulator)
    double mu1 = 1.5;         // first-moment factor
    double mu2 = 1.9;         // second-moment factor
    double beta1 = 0.9;       // schedule decay rates
    double beta2 = 0.99;
    double lambda = 1.3;      // tanh scale
    double delta = 1e-8;      // denominator stabilizer
    ScheduleKind schedule = ScheduleKind::Auto;   // Auto: dynamic for AI-FGTM, constant otherwise
    bool di = false, ti = false, si = false, ni = false;
    DimConfig dim;
    TimConfig tim;
    SimConfig sim;
    uint64_t seed = 0;        // drives DIM draws for this run
    bool check_invariants = true;

    void validate() const;    // throws std::invalid_argument on bad fields
};

// Per-iteration record; the histogram covers the iteration's accumulated
// direction tensor (lambda*m/(sqrt(v)+delta) for AI-FGTM, the momentum
// accumulator for MI/NIM, the normalized gradient for BIM/FGSM) in 81
// uniform bins on [-2,2] plus underflow/overflow.
inline constexpr int kHistInner = 81;
inline constexpr int kHistBins = kHistInner + 2;
using HistRow = std::array<int64_t, kHistBins>;

int hist_bin(double z);
// Fraction of histogram mass in bins whose centers lie in (-0.5, 0.5).
double hist_band_fraction(const HistRow& h);

struct IterRecord {
    int t = 0;
    double alpha = 0.0;
    double loss = 0.0;       // loss at this iteration's evaluation point
    double linf = 0.0;       // perturbation L-infinity after the update
    double pm = 0.0;         // mean |perturbation| after the update
    HistRow hist{};
};

struct RunTrace {
    std::vector<IterRecord> iters;
    double final_loss = 0.0;   // white-box loss at the final adversarial example
};

struct AttackResult {
    Tensor x_adv;
    RunTrace trace;
};

// Constant alpha = eps/T.
std::vector<double> schedule_constant(double eps, int T);
// Eq-style increasing schedule: alpha_t proportional to
// (1 - beta1^{t+1}) / sqrt(1 - beta2^{t+1}), normalized to sum to eps.
std::vector<double> schedule_dynamic(double eps, int T, double beta1, double beta2);

// Single-step sign attack: clip_ball(x, x + eps*sign(grad), eps).
Tensor fgsm(const Classifier& model, const Tensor& x, int y, double eps);

// One tanh update step: alpha_t * tanh(lambda * m / (sqrt(v) + delta)).
Tensor tanh_step(const Tensor& m, const Tensor& v, double lambda, double delta, double alpha_t);

AttackResult run_attack(const Classifier& model, const Tensor& x, int y,
                        const AttackConfig& cfg, AttackBase base);

// Attack-name grammar: optional "ni-"/"ti-"/"di-"/"si-" feature prefixes in
// any order, then a base (fgsm | bim | mi-fgsm | nim | ai-fgtm). Aliases:
// aitm = ai-fgtm, mim = mi-fgsm, dim = di-mi-fgsm, tim = ti-mi-fgsm (so
// ti-dim and ti-di-aitm parse to the customary compositions).
struct AttackKind {
    AttackBase base = AttackBase::MI_FGSM;
    bool di = false, ti = false, si = false, ni = false;
    std::string canonical() const;
};
AttackKind parse_attack_name(const std::string& name);

}  // namespace fga
