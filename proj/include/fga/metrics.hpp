#pragma once
// Evaluation of generated adversarial examples: success rate, mean
// perturbation, PSNR (peak 255, +inf sentinel for identical images), SSIM
// (uniform 8x8 sliding windows), and the cross-attack comparison table.

#include <string>
#include <utility>
#include <vector>

#include "fga/model.hpp"
#include "fga/tensor.hpp"

namespace fga {

// Fraction of pairs whose prediction differs from the true label.
double success_rate(const Classifier& model, const std::vector<std::pair<Tensor, int>>& pairs);

// Mean |x_adv - x| over all elements (Eq.-style P_m).
double mean_perturbation(const Tensor& x, const Tensor& x_adv);

// 10*log10(255^2 / MSE); +infinity when the images are identical.
double psnr(const Tensor& x, const Tensor& x_adv);

// Mean local SSIM over 8x8 windows (stride 1), constants C1=(0.01*255)^2 and
// C2=(0.03*255)^2, computed per channel and averaged.
double ssim(const Tensor& x, const Tensor& x_adv);

// Aggregated per-(attack, model) evaluation row.
struct RunReport {
    std::string attack;
    std::string model;                // victim or held-out model identifier
    double success = 0.0;
    double p_m = 0.0;
    double psnr_db = 0.0;
    double ssim_mean = 0.0;
    double loss_final = 0.0;          // mean loss of this model at the final examples
    std::vector<double> loss_curve;   // white-box mean loss per iteration (victim rows)
};

// Attack rows x model columns of success rates, plus a mean column.
struct ComparisonTable {
    std::vector<std::string> models;
    struct Row {
        std::string attack;
        std::vector<double> success;
        double mean = 0.0;
    };
    std::vector<Row> rows;
    std::string to_csv() const;
};

// Groups reports by attack (first-seen order); every attack must cover the
// same model set.
ComparisonTable compare_attacks(const std::vector<RunReport>& reports);

// Shared CSV float formatting (shortest round-trip-ish, fixed precision).
std::string fmt_double(double v);

}  // namespace fga
