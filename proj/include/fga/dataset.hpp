#pragma once
// Synthetic class-conditioned blob dataset (the desk-scale victim-training
// substrate), directory load/store (PPM/PGM + labels.csv), and the
// train / held-out / attack-pool split bookkeeping.

#include <string>
#include <vector>

#include "fga/tensor.hpp"

namespace fga {

enum class SplitTag { Train = 0, HeldOut = 1, AttackPool = 2 };

struct Dataset {
    std::vector<Tensor> images;
    std::vector<int> labels;
    std::vector<SplitTag> split;
    int num_classes = 0;

    size_t size() const { return images.size(); }
    std::vector<int> indices(SplitTag tag) const;
};

// Renders per-class layouts of 3 Gaussian blobs (class-specific centers,
// widths and channel gains) at the given peak amplitude, adds per-image
// gain jitter and Gaussian pixel noise, rounds to integer values in
// [0,255]. Deterministic per seed. Split per class: max(1, per_class/2)
// train, per_class/6 held-out, remainder attack pool.
Dataset generate_synthetic_dataset(int classes, int per_class, int image_side,
                                   double noise, double amplitude, uint64_t seed);

// Directory layout: image files plus labels.csv ("filename,label" header).
Dataset load_dataset_dir(const std::string& path);
void write_dataset_dir(const Dataset& ds, const std::string& path);

}  // namespace fga
