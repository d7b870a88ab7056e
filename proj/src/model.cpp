#include "fga/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fga/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fga {

// Stable softmax cross-entropy pieces from raw logits.
static double log_sum_exp(const std::vector<double>& l) {
    double m = *std::max_element(l.begin(), l.end());
    double s = 0.0;
    for (double v : l) s += std::exp(v - m);
    return m + std::log(s);
}

static std::vector<double> softmax(const std::vector<double>& l) {
    double m = *std::max_element(l.begin(), l.end());
    double s = 0.0;
    std::vector<double> p(l.size());
    for (size_t i = 0; i < l.size(); ++i) {
        p[i] = std::exp(l[i] - m);
        s += p[i];
    }
    for (double& v : p) v /= s;
    return p;
}

void Classifier::check_input(const Tensor& x, int y) const {
    if (x.shape() != input_shape())
        throw std::invalid_argument("classifier: input shape mismatch");
    if (y < 0 || y >= num_classes())
        throw std::invalid_argument("classifier: label out of range");
}

int Classifier::predict(const Tensor& x) const {
    std::vector<double> l = logits(x);
    int best = 0;
    for (int k = 1; k < int(l.size()); ++k)
        if (l[k] > l[best]) best = k;   // strict >, so ties keep the lower index
    return best;
}

double Classifier::loss(const Tensor& x, int y) const {
    if (y < 0 || y >= num_classes())
        throw std::invalid_argument("classifier: label out of range");
    std::vector<double> l = logits(x);
    return log_sum_exp(l) - l[y];
}

// --- linear softmax -----------------------------------------------------------

LinearSoftmaxModel::LinearSoftmaxModel(Shape in_, int classes_) : in(in_), classes(classes_) {
    if (classes < 2) throw std::invalid_argument("LinearSoftmaxModel: need >= 2 classes");
    W.assign(size_t(classes) * in.elems(), 0.0);
    b.assign(size_t(classes), 0.0);
}

LinearSoftmaxModel LinearSoftmaxModel::random_init(Shape in, int classes, uint64_t seed) {
    LinearSoftmaxModel m(in, classes);
    Rng rng(seed);
    double scale = 1.0 / std::sqrt(double(in.elems()));
    for (double& v : m.W) v = scale * rng.normal();
    return m;
}

std::vector<double> LinearSoftmaxModel::logits(const Tensor& x) const {
    if (x.shape() != in) throw std::invalid_argument("classifier: input shape mismatch");
    const size_t D = x.data.size();
    std::vector<double> l(b);
    for (int k = 0; k < classes; ++k) {
        const double* wk = &W[size_t(k) * D];
        double acc = 0.0;
        for (size_t e = 0; e < D; ++e) acc += wk[e] * x.data[e];
        l[k] += acc / 255.0;
    }
    return l;
}

std::pair<double, Tensor> LinearSoftmaxModel::loss_and_grad(const Tensor& x, int y) const {
    check_input(x, y);
    std::vector<double> l = logits(x);
    std::vector<double> p = softmax(l);
    double loss = log_sum_exp(l) - l[y];
    Tensor g(in, 0.0);
    const size_t D = g.data.size();
    for (int k = 0; k < classes; ++k) {
        double d = p[k] - (k == y ? 1.0 : 0.0);
        if (d == 0.0) continue;
        const double* wk = &W[size_t(k) * D];
        for (size_t e = 0; e < D; ++e) g.data[e] += d * wk[e];
    }
    for (double& v : g.data) v /= 255.0;
    return {loss, std::move(g)};
}

// --- one-hidden-layer tanh MLP --------------------------------------------------

MlpModel::MlpModel(Shape in_, int classes_, int width_) : in(in_), classes(classes_), width(width_) {
    if (classes < 2) throw std::invalid_argument("MlpModel: need >= 2 classes");
    if (width < 1) throw std::invalid_argument("MlpModel: hidden width must be >= 1");
    W1.assign(size_t(width) * in.elems(), 0.0);
    b1.assign(size_t(width), 0.0);
    W2.assign(size_t(classes) * width, 0.0);
    b2.assign(size_t(classes), 0.0);
}

MlpModel MlpModel::random_init(Shape in, int classes, int width, uint64_t seed) {
    MlpModel m(in, classes, width);
    Rng rng(seed);
    double s1 = 1.0 / std::sqrt(double(in.elems()));
    for (double& v : m.W1) v = s1 * rng.normal();
    double s2 = 1.0 / std::sqrt(double(width));
    for (double& v : m.W2) v = s2 * rng.normal();
    return m;
}

// Hidden activations for a scaled input; shared by logits and backprop.
static void mlp_hidden(const MlpModel& m, const Tensor& x, std::vector<double>& h) {
    const size_t D = x.data.size();
    h.assign(size_t(m.width), 0.0);
    for (int j = 0; j < m.width; ++j) {
        const double* wj = &m.W1[size_t(j) * D];
        double acc = 0.0;
        for (size_t e = 0; e < D; ++e) acc += wj[e] * x.data[e];
        h[j] = std::tanh(acc / 255.0 + m.b1[j]);
    }
}

std::vector<double> MlpModel::logits(const Tensor& x) const {
    if (x.shape() != in) throw std::invalid_argument("classifier: input shape mismatch");
    std::vector<double> h;
    mlp_hidden(*this, x, h);
    std::vector<double> l(b2);
    for (int k = 0; k < classes; ++k) {
        const double* wk = &W2[size_t(k) * width];
        double acc = 0.0;
        for (int j = 0; j < width; ++j) acc += wk[j] * h[j];
        l[k] += acc;
    }
    return l;
}

std::pair<double, Tensor> MlpModel::loss_and_grad(const Tensor& x, int y) const {
    check_input(x, y);
    std::vector<double> h;
    mlp_hidden(*this, x, h);
    std::vector<double> l(b2);
    for (int k = 0; k < classes; ++k) {
        const double* wk = &W2[size_t(k) * width];
        double acc = 0.0;
        for (int j = 0; j < width; ++j) acc += wk[j] * h[j];
        l[k] += acc;
    }
    std::vector<double> p = softmax(l);
    double loss = log_sum_exp(l) - l[y];

    // dloss/dz1 = (W2^T (p - onehot)) * (1 - h^2), then back through W1/255.
    std::vector<double> dz(size_t(width), 0.0);
    for (int j = 0; j < width; ++j) {
        double acc = 0.0;
        for (int k = 0; k < classes; ++k)
            acc += (p[k] - (k == y ? 1.0 : 0.0)) * W2[size_t(k) * width + j];
        dz[j] = acc * (1.0 - h[j] * h[j]);
    }
    Tensor g(in, 0.0);
    const size_t D = g.data.size();
    for (int j = 0; j < width; ++j) {
        if (dz[j] == 0.0) continue;
        const double* wj = &W1[size_t(j) * D];
        double d = dz[j];
        for (size_t e = 0; e < D; ++e) g.data[e] += d * wj[e];
    }
    for (double& v : g.data) v /= 255.0;
    return {loss, std::move(g)};
}

// --- ensemble -------------------------------------------------------------------

EnsembleModel::EnsembleModel(std::vector<std::shared_ptr<const Classifier>> members_)
    : members(std::move(members_)) {
    if (members.empty()) throw std::invalid_argument("EnsembleModel: empty member list");
    for (auto& m : members) {
        if (!m) throw std::invalid_argument("EnsembleModel: null member");
        if (m->input_shape() != members.front()->input_shape() ||
            m->num_classes() != members.front()->num_classes())
            throw std::invalid_argument("EnsembleModel: members disagree on shape/classes");
    }
}

std::vector<double> EnsembleModel::logits(const Tensor& x) const {
    std::vector<double> acc(size_t(num_classes()), 0.0);
    for (auto& m : members) {
        std::vector<double> l = m->logits(x);
        for (size_t k = 0; k < acc.size(); ++k) acc[k] += l[k];
    }
    for (double& v : acc) v /= double(members.size());
    return acc;
}

std::pair<double, Tensor> EnsembleModel::loss_and_grad(const Tensor& x, int y) const {
    check_input(x, y);
    double loss = 0.0;
    Tensor g(input_shape(), 0.0);
    for (auto& m : members) {
        auto [li, gi] = m->loss_and_grad(x, y);
        loss += li;
        for (size_t e = 0; e < g.data.size(); ++e) g.data[e] += gi.data[e];
    }
    double inv = 1.0 / double(members.size());
    for (double& v : g.data) v *= inv;
    return {loss * inv, std::move(g)};
}

// --- training -------------------------------------------------------------------

double accuracy(const Classifier& model, const Dataset& data, SplitTag tag) {
    std::vector<int> idx = data.indices(tag);
    if (idx.empty()) return 0.0;
    int hits = 0;
    for (int i : idx)
        if (model.predict(data.images[i]) == data.labels[i]) ++hits;
    return double(hits) / double(idx.size());
}

static void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (int i = int(idx.size()) - 1; i > 0; --i)
        std::swap(idx[i], idx[size_t(rng.uniform_int(0, i))]);
}

// One SGD minibatch on the MLP; returns the mean batch loss.
static double mlp_sgd_batch(MlpModel& m, const Dataset& data, const std::vector<int>& batch,
                            double lr) {
    const size_t D = size_t(m.in.elems());
    const int n = int(batch.size());
    std::vector<double> H(size_t(n) * m.width);
    std::vector<double> R(size_t(n) * m.classes);   // (softmax - onehot)/n
    double loss_sum = 0.0;
    for (int s = 0; s < n; ++s) {
        const Tensor& x = data.images[batch[s]];
        int y = data.labels[batch[s]];
        std::vector<double> h;
        mlp_hidden(m, x, h);
        std::copy(h.begin(), h.end(), H.begin() + size_t(s) * m.width);
        std::vector<double> l(m.b2);
        for (int k = 0; k < m.classes; ++k) {
            const double* wk = &m.W2[size_t(k) * m.width];
            double acc = 0.0;
            for (int j = 0; j < m.width; ++j) acc += wk[j] * h[j];
            l[k] += acc;
        }
        std::vector<double> p = softmax(l);
        loss_sum += log_sum_exp(l) - l[y];
        for (int k = 0; k < m.classes; ++k)
            R[size_t(s) * m.classes + k] = (p[k] - (k == y ? 1.0 : 0.0)) / double(n);
    }

    // Output-layer step (uses pre-update W2 for the hidden deltas first).
    std::vector<double> dZ(size_t(n) * m.width);
    for (int s = 0; s < n; ++s)
        for (int j = 0; j < m.width; ++j) {
            double acc = 0.0;
            for (int k = 0; k < m.classes; ++k)
                acc += R[size_t(s) * m.classes + k] * m.W2[size_t(k) * m.width + j];
            double h = H[size_t(s) * m.width + j];
            dZ[size_t(s) * m.width + j] = acc * (1.0 - h * h);
        }
    for (int k = 0; k < m.classes; ++k) {
        double gb = 0.0;
        for (int s = 0; s < n; ++s) {
            double r = R[size_t(s) * m.classes + k];
            gb += r;
            double* wk = &m.W2[size_t(k) * m.width];
            const double* hs = &H[size_t(s) * m.width];
            for (int j = 0; j < m.width; ++j) wk[j] -= lr * r * hs[j];
        }
        m.b2[k] -= lr * gb;
    }
    for (int j = 0; j < m.width; ++j) {
        double* wj = &m.W1[size_t(j) * D];
        double gb = 0.0;
        for (int s = 0; s < n; ++s) {
            double d = dZ[size_t(s) * m.width + j];
            if (d == 0.0) continue;
            gb += d;
            const Tensor& x = data.images[batch[s]];
            double step = lr * d / 255.0;
            for (size_t e = 0; e < D; ++e) wj[e] -= step * x.data[e];
        }
        m.b1[j] -= lr * gb;
    }
    return loss_sum / double(n);
}

static double linear_sgd_batch(LinearSoftmaxModel& m, const Dataset& data,
                               const std::vector<int>& batch, double lr) {
    const size_t D = size_t(m.in.elems());
    const int n = int(batch.size());
    double loss_sum = 0.0;
    std::vector<double> R(size_t(n) * m.classes);
    for (int s = 0; s < n; ++s) {
        const Tensor& x = data.images[batch[s]];
        int y = data.labels[batch[s]];
        std::vector<double> l = m.logits(x);
        std::vector<double> p = softmax(l);
        loss_sum += log_sum_exp(l) - l[y];
        for (int k = 0; k < m.classes; ++k)
            R[size_t(s) * m.classes + k] = (p[k] - (k == y ? 1.0 : 0.0)) / double(n);
    }
    for (int k = 0; k < m.classes; ++k) {
        double* wk = &m.W[size_t(k) * D];
        double gb = 0.0;
        for (int s = 0; s < n; ++s) {
            double r = R[size_t(s) * m.classes + k];
            if (r == 0.0) continue;
            gb += r;
            const Tensor& x = data.images[batch[s]];
            double step = lr * r / 255.0;
            for (size_t e = 0; e < D; ++e) wk[e] -= step * x.data[e];
        }
        m.b[k] -= lr * gb;
    }
    return loss_sum / double(n);
}

TrainResult train_model(Classifier& model, const Dataset& data, int epochs, double lr,
                        int batch_size, uint64_t seed) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (!(lr > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    std::vector<int> train_idx = data.indices(SplitTag::Train);
    if (train_idx.empty()) throw std::invalid_argument("train: dataset has no training split");

    auto* mlp = dynamic_cast<MlpModel*>(&model);
    auto* lin = dynamic_cast<LinearSoftmaxModel*>(&model);
    if (!mlp && !lin)
        throw std::invalid_argument("train: model kind is not trainable (train members individually)");

    Rng rng(splitmix64(seed ^ 0x7261696E5F726E67ULL));   // "train_rng"
    std::vector<int> order = train_idx;
    for (int ep = 0; ep < epochs; ++ep) {
        shuffle_indices(order, rng);
        for (size_t s0 = 0; s0 < order.size(); s0 += size_t(batch_size)) {
            std::vector<int> batch(order.begin() + s0,
                                   order.begin() + std::min(order.size(), s0 + size_t(batch_size)));
            double l = mlp ? mlp_sgd_batch(*mlp, data, batch, lr)
                           : linear_sgd_batch(*lin, data, batch, lr);
            if (!std::isfinite(l))
                throw std::runtime_error("train: diverged (non-finite loss at epoch " +
                                         std::to_string(ep) + ")");
        }
    }
    TrainResult res;
    bool has_holdout = !data.indices(SplitTag::HeldOut).empty();
    res.holdout_accuracy = accuracy(model, data, has_holdout ? SplitTag::HeldOut : SplitTag::Train);
    return res;
}

// --- checkpoints ------------------------------------------------------------------

static Tensor matrix_tensor(const std::vector<double>& v, int rows, int cols) {
    Tensor t(rows, cols, 1, 0.0);
    std::copy(v.begin(), v.end(), t.data.begin());
    return t;
}

static std::vector<double> tensor_matrix(const Tensor& t, int rows, int cols,
                                         const std::string& what) {
    if (t.h != rows || t.w != cols || t.c != 1)
        throw std::runtime_error(what + ": checkpoint tensor has wrong shape");
    return t.data;
}

void save_checkpoint(const Classifier& model, const std::string& dir, const CheckpointMeta& meta) {
    fs::create_directories(dir);
    fs::path d(dir);
    json man;
    Shape in = model.input_shape();
    man["input"] = {{"h", in.h}, {"w", in.w}, {"c", in.c}};
    man["classes"] = model.num_classes();
    man["seed"] = meta.seed;
    man["accuracy"] = meta.accuracy;

    if (auto* lin = dynamic_cast<const LinearSoftmaxModel*>(&model)) {
        man["kind"] = "linear";
        write_atns((d / "W.atns").string(), matrix_tensor(lin->W, lin->classes, int(in.elems())));
        write_atns((d / "b.atns").string(), matrix_tensor(lin->b, 1, lin->classes));
    } else if (auto* mlp = dynamic_cast<const MlpModel*>(&model)) {
        man["kind"] = "mlp";
        man["width"] = mlp->width;
        write_atns((d / "W1.atns").string(), matrix_tensor(mlp->W1, mlp->width, int(in.elems())));
        write_atns((d / "b1.atns").string(), matrix_tensor(mlp->b1, 1, mlp->width));
        write_atns((d / "W2.atns").string(), matrix_tensor(mlp->W2, mlp->classes, mlp->width));
        write_atns((d / "b2.atns").string(), matrix_tensor(mlp->b2, 1, mlp->classes));
    } else if (auto* ens = dynamic_cast<const EnsembleModel*>(&model)) {
        man["kind"] = "ensemble";
        std::vector<std::string> names;
        for (size_t i = 0; i < ens->members.size(); ++i) {
            std::string sub = "member_" + std::to_string(i);
            save_checkpoint(*ens->members[i], (d / sub).string(), meta);
            names.push_back(sub);
        }
        man["members"] = names;
    } else {
        throw std::invalid_argument("save_checkpoint: unknown model kind");
    }
    std::ofstream f(d / "manifest.json");
    if (!f) throw std::runtime_error((d / "manifest.json").string() + ": cannot open for writing");
    f << man.dump(2) << "\n";
}

std::unique_ptr<Classifier> load_checkpoint(const std::string& dir) {
    fs::path d(dir);
    std::ifstream f(d / "manifest.json");
    if (!f) throw std::runtime_error((d / "manifest.json").string() + ": cannot open");
    json man;
    try {
        f >> man;
    } catch (const std::exception& e) {
        throw std::runtime_error((d / "manifest.json").string() + ": bad JSON: " + e.what());
    }
    std::string kind = man.at("kind").get<std::string>();
    if (kind == "ensemble") {
        std::vector<std::shared_ptr<const Classifier>> members;
        for (const auto& sub : man.at("members"))
            members.emplace_back(load_checkpoint((d / sub.get<std::string>()).string()));
        return std::make_unique<EnsembleModel>(std::move(members));
    }
    Shape in{man.at("input").at("h").get<int>(), man.at("input").at("w").get<int>(),
             man.at("input").at("c").get<int>()};
    int classes = man.at("classes").get<int>();
    if (kind == "linear") {
        auto m = std::make_unique<LinearSoftmaxModel>(in, classes);
        m->W = tensor_matrix(read_atns((d / "W.atns").string()), classes, int(in.elems()), "W");
        m->b = tensor_matrix(read_atns((d / "b.atns").string()), 1, classes, "b");
        return m;
    }
    if (kind == "mlp") {
        int width = man.at("width").get<int>();
        auto m = std::make_unique<MlpModel>(in, classes, width);
        m->W1 = tensor_matrix(read_atns((d / "W1.atns").string()), width, int(in.elems()), "W1");
        m->b1 = tensor_matrix(read_atns((d / "b1.atns").string()), 1, width, "b1");
        m->W2 = tensor_matrix(read_atns((d / "W2.atns").string()), classes, width, "W2");
        m->b2 = tensor_matrix(read_atns((d / "b2.atns").string()), 1, classes, "b2");
        return m;
    }
    throw std::runtime_error(dir + ": unknown checkpoint kind '" + kind + "'");
}

}  // namespace fga
