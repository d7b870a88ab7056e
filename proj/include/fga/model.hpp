#pragma once
// Differentiable classifiers the attacks consume: softmax cross-entropy
// loss plus the gradient of that loss w.r.t. the input image. Two built-in
// trainable models (linear softmax and one-tanh-hidden-layer MLP, both with
// hand-written backprop and internal x/255 input scaling), an equal-weight
// ensemble wrapper, an SGD trainer, and ATNS+JSON checkpoints.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fga/dataset.hpp"
#include "fga/tensor.hpp"

namespace fga {

struct Classifier {
    virtual ~Classifier() = default;
    virtual int num_classes() const = 0;
    virtual Shape input_shape() const = 0;
    virtual std::vector<double> logits(const Tensor& x) const = 0;
    // Softmax cross-entropy loss and its gradient w.r.t. the input pixels.
    virtual std::pair<double, Tensor> loss_and_grad(const Tensor& x, int y) const = 0;

    // argmax of logits; ties break toward the lower class index.
    int predict(const Tensor& x) const;
    double loss(const Tensor& x, int y) const;

  protected:
    void check_input(const Tensor& x, int y) const;
};

// logits = W (x/255) + b with W stored as one row per class.
struct LinearSoftmaxModel : Classifier {
    Shape in;
    int classes = 0;
    std::vector<double> W;   // classes x D, row-major
    std::vector<double> b;   // classes

    LinearSoftmaxModel(Shape in_, int classes_);
    static LinearSoftmaxModel random_init(Shape in, int classes, uint64_t seed);

    int num_classes() const override { return classes; }
    Shape input_shape() const override { return in; }
    std::vector<double> logits(const Tensor& x) const override;
    std::pair<double, Tensor> loss_and_grad(const Tensor& x, int y) const override;
};

// One tanh hidden layer: logits = W2 tanh(W1 (x/255) + b1) + b2.
struct MlpModel : Classifier {
    Shape in;
    int classes = 0;
    int width = 0;
    std::vector<double> W1;   // width x D
    std::vector<double> b1;   // width
    std::vector<double> W2;   // classes x width
    std::vector<double> b2;   // classes

    MlpModel(Shape in_, int classes_, int width_);
    static MlpModel random_init(Shape in, int classes, int width, uint64_t seed);

    int num_classes() const override { return classes; }
    Shape input_shape() const override { return in; }
    std::vector<double> logits(const Tensor& x) const override;
    std::pair<double, Tensor> loss_and_grad(const Tensor& x, int y) const override;
};

// Equal-weight fusion: loss and gradient are the arithmetic means over
// members; logits (for predict) are the mean member logits.
struct EnsembleModel : Classifier {
    std::vector<std::shared_ptr<const Classifier>> members;

    explicit EnsembleModel(std::vector<std::shared_ptr<const Classifier>> members_);

    int num_classes() const override { return members.front()->num_classes(); }
    Shape input_shape() const override { return members.front()->input_shape(); }
    std::vector<double> logits(const Tensor& x) const override;
    std::pair<double, Tensor> loss_and_grad(const Tensor& x, int y) const override;
};

// Minibatch SGD on the dataset's Train split; a pure function of
// (initial parameters, dataset, hyper-parameters, seed). Returns accuracy
// on the HeldOut split (on the Train split if no held-out images exist).
// Throws on non-finite training loss and on unknown model kinds.
struct TrainResult {
    double holdout_accuracy = 0.0;
};
TrainResult train_model(Classifier& model, const Dataset& data, int epochs, double lr,
                        int batch_size, uint64_t seed);

double accuracy(const Classifier& model, const Dataset& data, SplitTag tag);

// Checkpoints: directory of per-parameter ATNS files plus manifest.json
// (kind, shapes, seed, accuracy). Ensembles store members in subdirectories.
struct CheckpointMeta {
    uint64_t seed = 0;
    double accuracy = 0.0;
};
void save_checkpoint(const Classifier& model, const std::string& dir, const CheckpointMeta& meta);
std::unique_ptr<Classifier> load_checkpoint(const std::string& dir);

}  // namespace fga
