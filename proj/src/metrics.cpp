#include "fga/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

namespace fga {

double success_rate(const Classifier& model, const std::vector<std::pair<Tensor, int>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("success_rate: empty batch");
    int flips = 0;
    for (const auto& [x_adv, y] : pairs)
        if (model.predict(x_adv) != y) ++flips;
    return double(flips) / double(pairs.size());
}

double mean_perturbation(const Tensor& x, const Tensor& x_adv) {
    return mean_abs_diff(x, x_adv);
}

double psnr(const Tensor& x, const Tensor& x_adv) {
    double m = mse(x, x_adv);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / m);
}

double ssim(const Tensor& x, const Tensor& x_adv) {
    if (!x.same_shape(x_adv)) throw std::invalid_argument("ssim: shape mismatch");
    constexpr int win = 8;
    if (x.h < win || x.w < win)
        throw std::invalid_argument("ssim: image smaller than the 8x8 window");
    constexpr double C1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double C2 = (0.03 * 255.0) * (0.03 * 255.0);
    const double inv_n = 1.0 / double(win * win);

    double total = 0.0;
    for (int ch = 0; ch < x.c; ++ch) {
        double acc = 0.0;
        int count = 0;
        for (int r = 0; r + win <= x.h; ++r)
            for (int col = 0; col + win <= x.w; ++col) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        double a = x.at(r + i, col + j, ch);
                        double b = x_adv.at(r + i, col + j, ch);
                        sa += a; sb += b; saa += a * a; sbb += b * b; sab += a * b;
                    }
                double ma = sa * inv_n, mb = sb * inv_n;
                double va = saa * inv_n - ma * ma;   // population (1/N) statistics
                double vb = sbb * inv_n - mb * mb;
                double cov = sab * inv_n - ma * mb;
                double s = ((2 * ma * mb + C1) * (2 * cov + C2)) /
                           ((ma * ma + mb * mb + C1) * (va + vb + C2));
                acc += s;
                ++count;
            }
        total += acc / double(count);
    }
    return total / double(x.c);
}

std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string ComparisonTable::to_csv() const {
    std::string out = "attack";
    for (const auto& m : models) out += "," + m;
    out += ",mean\n";
    for (const auto& row : rows) {
        out += row.attack;
        for (double v : row.success) out += "," + fmt_double(v);
        out += "," + fmt_double(row.mean) + "\n";
    }
    return out;
}

ComparisonTable compare_attacks(const std::vector<RunReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("compare_attacks: no reports");
    ComparisonTable table;
    std::vector<std::string> attacks;
    std::map<std::string, std::map<std::string, double>> cell;
    for (const auto& r : reports) {
        if (std::find(attacks.begin(), attacks.end(), r.attack) == attacks.end())
            attacks.push_back(r.attack);
        if (std::find(table.models.begin(), table.models.end(), r.model) == table.models.end())
            table.models.push_back(r.model);
        cell[r.attack][r.model] = r.success;
    }
    for (const auto& a : attacks) {
        ComparisonTable::Row row;
        row.attack = a;
        double sum = 0.0;
        for (const auto& m : table.models) {
            auto it = cell[a].find(m);
            if (it == cell[a].end())
                throw std::invalid_argument("compare_attacks: attack '" + a +
                                            "' is missing model '" + m + "'");
            row.success.push_back(it->second);
            sum += it->second;
        }
        row.mean = sum / double(table.models.size());
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace fga
