#include "fga/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "fga/image_io.hpp"

namespace fs = std::filesystem;

namespace fga {

std::vector<int> Dataset::indices(SplitTag tag) const {
    std::vector<int> out;
    for (size_t i = 0; i < split.size(); ++i)
        if (split[i] == tag) out.push_back(int(i));
    return out;
}

// Assigns per-class splits in dataset order: the first chunk of each class
// trains the victim, a small slice measures held-out accuracy, the rest is
// the attack pool.
static void assign_splits(Dataset& ds) {
    std::map<int, std::vector<int>> by_class;
    for (size_t i = 0; i < ds.labels.size(); ++i) by_class[ds.labels[i]].push_back(int(i));
    ds.split.assign(ds.images.size(), SplitTag::AttackPool);
    for (auto& [cls, idx] : by_class) {
        (void)cls;
        int n = int(idx.size());
        int n_train = std::max(1, n / 2);
        int n_hold = n / 6;
        for (int j = 0; j < n; ++j) {
            if (j < n_train)
                ds.split[idx[j]] = SplitTag::Train;
            else if (j < n_train + n_hold)
                ds.split[idx[j]] = SplitTag::HeldOut;
            else
                ds.split[idx[j]] = SplitTag::AttackPool;
        }
    }
}

Dataset generate_synthetic_dataset(int classes, int per_class, int image_side,
                                   double noise, double amplitude, uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("generate_synthetic_dataset: classes must be >= 2");
    if (per_class < 1) throw std::invalid_argument("generate_synthetic_dataset: per_class must be >= 1");
    if (image_side < 8) throw std::invalid_argument("generate_synthetic_dataset: image_side must be >= 8");
    if (noise < 0.0) throw std::invalid_argument("generate_synthetic_dataset: noise must be >= 0");

    const int side = image_side, C = 3;
    Rng rng(seed);

    // One fixed blob layout per class; all class patterns are drawn before
    // any image so per-class geometry is independent of per_class.
    std::vector<Tensor> patterns;
    patterns.reserve(classes);
    for (int k = 0; k < classes; ++k) {
        Tensor pat(side, side, C, 0.0);
        double chscale[3];
        for (int ch = 0; ch < C; ++ch) chscale[ch] = rng.uniform(0.5, 1.0);
        for (int b = 0; b < 3; ++b) {
            double cy = rng.uniform(0.15 * side, 0.85 * side);
            double cx = rng.uniform(0.15 * side, 0.85 * side);
            double sig = rng.uniform(side / 10.0, side / 6.0);
            for (int r = 0; r < side; ++r)
                for (int col = 0; col < side; ++col) {
                    double d2 = (r - cy) * (r - cy) + (col - cx) * (col - cx);
                    double g = amplitude * std::exp(-d2 / (2.0 * sig * sig));
                    for (int ch = 0; ch < C; ++ch) pat.at(r, col, ch) += g * chscale[ch];
                }
        }
        patterns.push_back(std::move(pat));
    }

    Dataset ds;
    ds.num_classes = classes;
    ds.images.reserve(size_t(classes) * per_class);
    for (int k = 0; k < classes; ++k)
        for (int i = 0; i < per_class; ++i) {
            double gain = 1.0 + 0.15 * rng.normal();
            Tensor img(side, side, C, 0.0);
            for (size_t e = 0; e < img.data.size(); ++e) {
                double v = patterns[k].data[e] * gain + noise * rng.normal();
                v = std::nearbyint(v);
                img.data[e] = std::min(255.0, std::max(0.0, v));
            }
            ds.images.push_back(std::move(img));
            ds.labels.push_back(k);
        }
    assign_splits(ds);
    return ds;
}

Dataset load_dataset_dir(const std::string& path) {
    fs::path dir(path);
    fs::path csv = dir / "labels.csv";
    std::ifstream f(csv);
    if (!f) throw std::runtime_error(csv.string() + ": cannot open labels file");
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(csv.string() + ": empty labels file");
    if (line != "filename,label")
        throw std::runtime_error(csv.string() + ": expected header 'filename,label'");

    std::vector<std::pair<std::string, int>> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw std::runtime_error(csv.string() + ": malformed row at line " + std::to_string(lineno));
        std::string name = line.substr(0, comma);
        int label = 0;
        try {
            label = std::stoi(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw std::runtime_error(csv.string() + ": bad label at line " + std::to_string(lineno));
        }
        rows.emplace_back(name, label);
    }
    if (rows.empty()) throw std::runtime_error(csv.string() + ": no labelled images");
    std::sort(rows.begin(), rows.end());

    Dataset ds;
    int max_label = 0;
    for (auto& [name, label] : rows) {
        if (label < 0) throw std::runtime_error(csv.string() + ": negative label for " + name);
        max_label = std::max(max_label, label);
        Tensor img = read_image((dir / name).string());
        if (!ds.images.empty() && !img.same_shape(ds.images.front()))
            throw std::runtime_error((dir / name).string() + ": shape differs from first image");
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    ds.num_classes = max_label + 1;
    assign_splits(ds);
    return ds;
}

void write_dataset_dir(const Dataset& ds, const std::string& path) {
    fs::create_directories(path);
    fs::path dir(path);
    std::ofstream csv(dir / "labels.csv");
    if (!csv) throw std::runtime_error((dir / "labels.csv").string() + ": cannot open for writing");
    csv << "filename,label\n";
    char name[64];
    for (size_t i = 0; i < ds.images.size(); ++i) {
        const Tensor& img = ds.images[i];
        const char* ext = (img.c == 3) ? "ppm" : "pgm";
        std::snprintf(name, sizeof(name), "img_%05zu.%s", i, ext);
        if (img.c == 3)
            write_ppm((dir / name).string(), img);
        else
            write_pgm((dir / name).string(), img);
        csv << name << "," << ds.labels[i] << "\n";
    }
    if (!csv) throw std::runtime_error((dir / "labels.csv").string() + ": write failed");
}

}  // namespace fga
