#include "fga/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fga/image_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace fga {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (ch == sep) {
            std::string t = trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    std::string t = trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

int parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" +
                                    value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config: key '" + key + "' expects a number, got '" +
                                    value + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw std::invalid_argument("config: key '" + key +
                                    "' expects a non-negative integer, got '" + value + "'");
    }
}

ScheduleKind parse_schedule(const std::string& value) {
    if (value == "auto") return ScheduleKind::Auto;
    if (value == "constant") return ScheduleKind::Constant;
    if (value == "dynamic") return ScheduleKind::Dynamic;
    throw std::invalid_argument("config: schedule must be auto|constant|dynamic, got '" +
                                value + "'");
}

std::string normalize_key(const std::string& key) {
    std::string k = trim(key);
    for (char& ch : k) {
        if (ch == '-') ch = '_';
        ch = char(std::tolower((unsigned char)ch));
    }
    return k;
}

// Attack names become artifact file stems; squash anything exotic.
std::string file_slug(const std::string& name) {
    std::string out;
    for (char ch : name) {
        if (std::isalnum((unsigned char)ch) || ch == '-')
            out += char(std::tolower((unsigned char)ch));
        else
            out += '_';
    }
    return out;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("io: cannot open " + path.string() + " for writing");
    f << content;
    if (!f) throw std::runtime_error("io: failed writing " + path.string());
}

void write_image_auto(const Tensor& img, const fs::path& stem) {
    if (img.c == 1)
        write_pgm(stem.string() + ".pgm", img);
    else
        write_ppm(stem.string() + ".ppm", img);
}

// Work-pool: N workers pull image indices from a shared counter. Results
// land in preallocated slots, so the output order never depends on thread
// scheduling.
void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    size_t nw = workers > 0 ? size_t(workers)
                            : std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    nw = std::min(nw, n);
    if (nw <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::mutex err_mtx;
    std::exception_ptr err;
    auto body = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mtx);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (size_t w = 0; w + 1 < nw; ++w) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::string timestamp_utc() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string ModelSpec::label() const {
    if (kind == "mlp") return "mlp" + std::to_string(width);
    return kind;
}

ModelSpec parse_model_spec(const std::string& text) {
    std::string t = trim(text);
    ModelSpec spec;
    auto colon = t.find(':');
    spec.kind = normalize_key(colon == std::string::npos ? t : t.substr(0, colon));
    if (spec.kind != "linear" && spec.kind != "mlp")
        throw std::invalid_argument("config: unknown model kind '" + spec.kind +
                                    "' (expected linear or mlp)");
    if (colon != std::string::npos) {
        spec.width = parse_int("model width", trim(t.substr(colon + 1)));
        if (spec.width < 1)
            throw std::invalid_argument("config: model width must be >= 1");
    }
    return spec;
}

std::vector<ModelSpec> parse_model_list(const std::string& text) {
    std::vector<ModelSpec> out;
    for (const auto& tok : split_list(text, ',')) out.push_back(parse_model_spec(tok));
    return out;
}

std::unique_ptr<Classifier> build_model(const ModelSpec& spec, Shape in, int classes,
                                        uint64_t seed) {
    if (spec.kind == "linear")
        return std::make_unique<LinearSoftmaxModel>(
            LinearSoftmaxModel::random_init(in, classes, seed));
    if (spec.kind == "mlp")
        return std::make_unique<MlpModel>(
            MlpModel::random_init(in, classes, spec.width, seed));
    throw std::invalid_argument("config: unknown model kind '" + spec.kind + "'");
}

void apply_attack_override(AttackConfig& cfg, const std::string& key,
                           const std::string& value) {
    std::string k = normalize_key(key);
    if (k == "eps") cfg.eps = parse_real(k, value);
    else if (k == "iters") cfg.iters = parse_int(k, value);
    else if (k == "mu") cfg.mu = parse_real(k, value);
    else if (k == "mu1") cfg.mu1 = parse_real(k, value);
    else if (k == "mu2") cfg.mu2 = parse_real(k, value);
    else if (k == "beta1") cfg.beta1 = parse_real(k, value);
    else if (k == "beta2") cfg.beta2 = parse_real(k, value);
    else if (k == "lambda") cfg.lambda = parse_real(k, value);
    else if (k == "delta") cfg.delta = parse_real(k, value);
    else if (k == "kernel") cfg.tim.k = parse_int(k, value);
    else if (k == "sigma") cfg.tim.sigma = parse_real(k, value);
    else if (k == "dim_p") cfg.dim.p = parse_real(k, value);
    else if (k == "dim_smin") cfg.dim.s_min = parse_real(k, value);
    else if (k == "sim_m") cfg.sim.m = parse_int(k, value);
    else if (k == "schedule") cfg.schedule = parse_schedule(trim(value));
    else
        throw std::invalid_argument("config: unknown attack override '" + key + "'");
}

AttackSpec parse_attack_spec(const std::string& token, const AttackConfig& base) {
    AttackSpec spec;
    spec.name = trim(token);
    if (spec.name.empty()) throw std::invalid_argument("config: empty attack token");
    std::string head = spec.name, tail;
    auto at = head.find('@');
    if (at != std::string::npos) {
        tail = head.substr(at + 1);
        head = trim(head.substr(0, at));
    }
    spec.kind = parse_attack_name(head);
    spec.cfg = base;
    spec.cfg.di = spec.kind.di;
    spec.cfg.ti = spec.kind.ti;
    spec.cfg.si = spec.kind.si;
    spec.cfg.ni = spec.kind.ni;
    for (const auto& kv : split_list(tail, ';')) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: attack override '" + kv +
                                        "' is not key=value");
        apply_attack_override(spec.cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    spec.cfg.validate();
    return spec;
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
    std::string k = normalize_key(key);
    std::string v = trim(value);
    if (k == "classes") cfg.classes = parse_int(k, v);
    else if (k == "per_class") cfg.per_class = parse_int(k, v);
    else if (k == "image_side" || k == "side") cfg.image_side = parse_int(k, v);
    else if (k == "noise") cfg.noise = parse_real(k, v);
    else if (k == "amplitude") cfg.amplitude = parse_real(k, v);
    else if (k == "data_dir") cfg.data_dir = v;
    else if (k == "victim") cfg.victim = parse_model_list(v);
    else if (k == "holdouts") cfg.holdouts = parse_model_list(v);
    else if (k == "epochs") cfg.epochs = parse_int(k, v);
    else if (k == "lr") cfg.lr = parse_real(k, v);
    else if (k == "train_batch") cfg.train_batch = parse_int(k, v);
    else if (k == "min_accuracy") cfg.min_accuracy = parse_real(k, v);
    else if (k == "attacks" || k == "attack") cfg.attacks = split_list(v, ',');
    else if (k == "batch") cfg.batch = parse_int(k, v);
    else if (k == "workers") cfg.workers = parse_int(k, v);
    else if (k == "seed") cfg.seed = parse_u64(k, v);
    else if (k == "out") cfg.out_dir = v;
    else if (k == "eps" || k == "iters" || k == "mu" || k == "mu1" || k == "mu2" ||
             k == "beta1" || k == "beta2" || k == "lambda" || k == "delta" ||
             k == "kernel" || k == "sigma" || k == "dim_p" || k == "dim_smin" ||
             k == "sim_m" || k == "schedule")
        apply_attack_override(cfg.base, k, v);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("io: cannot open config file '" + path + "'");
    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                                     ": expected 'key = value', got '" + line + "'");
        apply_config_entry(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

namespace {

// Per-image artifacts gathered from one attack over the split.
struct BatchRun {
    std::vector<AttackResult> results;
    std::vector<double> psnr_vals, ssim_vals, pm_vals;
    std::vector<std::pair<Tensor, int>> pairs;   // (x_adv, label)
};

std::string trace_csv(const BatchRun& run) {
    size_t T = run.results.front().trace.iters.size();
    size_t n = run.results.size();
    std::string csv = "t,alpha,loss,linf,p_m\n";
    for (size_t t = 0; t < T; ++t) {
        double loss = 0, linf = 0, pm = 0;
        for (const auto& r : run.results) {
            loss += r.trace.iters[t].loss;
            linf += r.trace.iters[t].linf;
            pm += r.trace.iters[t].pm;
        }
        const auto& rec = run.results.front().trace.iters[t];
        csv += std::to_string(rec.t) + "," + fmt_double(rec.alpha) + "," +
               fmt_double(loss / n) + "," + fmt_double(linf / n) + "," +
               fmt_double(pm / n) + "\n";
    }
    return csv;
}

std::string hist_csv(const BatchRun& run) {
    size_t T = run.results.front().trace.iters.size();
    std::string csv = "t,underflow";
    for (int b = 0; b < kHistInner; ++b) {
        char name[8];
        std::snprintf(name, sizeof(name), ",b%02d", b);
        csv += name;
    }
    csv += ",overflow\n";
    for (size_t t = 0; t < T; ++t) {
        HistRow sum{};
        for (const auto& r : run.results)
            for (int b = 0; b < kHistBins; ++b) sum[b] += r.trace.iters[t].hist[b];
        csv += std::to_string(run.results.front().trace.iters[t].t);
        for (int b = 0; b < kHistBins; ++b) csv += "," + std::to_string(sum[b]);
        csv += "\n";
    }
    return csv;
}

void export_examples(const BatchRun& run, const Dataset& data,
                     const std::vector<int>& split, const fs::path& dir) {
    size_t n = run.results.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // highest PSNR first (least visible perturbation); ties by image order
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return run.psnr_vals[a] > run.psnr_vals[b];
    });
    fs::create_directories(dir);
    size_t count = std::min<size_t>(10, n);
    auto emit = [&](const char* tag, size_t rank, size_t i) {
        const Tensor& clean = data.images[split[i]];
        const Tensor& adv = run.results[i].x_adv;
        Tensor diff = clean;   // mid-grey plus amplified signed difference
        for (size_t e = 0; e < diff.data.size(); ++e)
            diff.data[e] = 128.0 + 8.0 * (adv.data[e] - clean.data[e]);
        char stem[64];
        std::snprintf(stem, sizeof(stem), "%s_%02zu", tag, rank);
        write_image_auto(clean, dir / (std::string(stem) + "_clean"));
        write_image_auto(adv, dir / (std::string(stem) + "_adv"));
        write_image_auto(diff, dir / (std::string(stem) + "_diff"));
    };
    for (size_t r = 0; r < count; ++r) emit("best", r, order[r]);
    for (size_t r = 0; r < count; ++r) emit("worst", r, order[n - 1 - r]);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    auto t_start = std::chrono::steady_clock::now();
    if (cfg.victim.empty()) throw std::invalid_argument("config: victim list is empty");
    if (cfg.attacks.empty()) throw std::invalid_argument("config: attack list is empty");
    if (cfg.batch < 1) throw std::invalid_argument("config: batch must be >= 1");

    // parse attacks up front so config errors precede the training cost
    std::vector<AttackSpec> specs;
    for (const auto& token : cfg.attacks) specs.push_back(parse_attack_spec(token, cfg.base));

    Dataset data = cfg.data_dir.empty()
                       ? generate_synthetic_dataset(cfg.classes, cfg.per_class,
                                                    cfg.image_side, cfg.noise, cfg.amplitude,
                                                    derive_seed(cfg.seed, 0, 0))
                       : load_dataset_dir(cfg.data_dir);
    if (data.images.empty()) throw std::runtime_error("data: dataset is empty");
    Shape in = data.images.front().shape();

    auto build_trained = [&](const ModelSpec& ms, uint64_t init_seed, uint64_t train_seed) {
        std::unique_ptr<Classifier> model = build_model(ms, in, data.num_classes, init_seed);
        train_model(*model, data, cfg.epochs, cfg.lr, cfg.train_batch, train_seed);
        return std::shared_ptr<const Classifier>(std::move(model));
    };

    std::vector<std::shared_ptr<const Classifier>> victim_members;
    for (size_t i = 0; i < cfg.victim.size(); ++i)
        victim_members.push_back(build_trained(cfg.victim[i], derive_seed(cfg.seed, 1, 2 * i),
                                               derive_seed(cfg.seed, 1, 2 * i + 1)));
    std::shared_ptr<const Classifier> victim =
        victim_members.size() == 1
            ? victim_members.front()
            : std::make_shared<EnsembleModel>(victim_members);
    double vacc = accuracy(*victim, data, SplitTag::HeldOut);
    if (vacc < cfg.min_accuracy)
        throw std::runtime_error("contract: victim held-out accuracy " + fmt_double(vacc) +
                                 " is below the required " + fmt_double(cfg.min_accuracy));

    std::vector<std::shared_ptr<const Classifier>> holdout_models;
    std::vector<std::string> model_names{"whitebox"};
    std::vector<double> holdout_accs;
    for (size_t j = 0; j < cfg.holdouts.size(); ++j) {
        auto m = build_trained(cfg.holdouts[j], derive_seed(cfg.seed, 2 + j, 0),
                               derive_seed(cfg.seed, 2 + j, 1));
        double acc = accuracy(*m, data, SplitTag::HeldOut);
        std::string name = "holdout" + std::to_string(j) + "_" + cfg.holdouts[j].label();
        if (acc < cfg.min_accuracy)
            throw std::runtime_error("contract: " + name + " held-out accuracy " +
                                     fmt_double(acc) + " is below the required " +
                                     fmt_double(cfg.min_accuracy));
        holdout_models.push_back(std::move(m));
        model_names.push_back(name);
        holdout_accs.push_back(acc);
    }

    fs::path out(cfg.out_dir);
    fs::create_directories(out / "checkpoints");
    save_checkpoint(*victim, (out / "checkpoints" / "victim").string(),
                    {cfg.seed, vacc});
    for (size_t j = 0; j < holdout_models.size(); ++j)
        save_checkpoint(*holdout_models[j],
                        (out / "checkpoints" / model_names[j + 1]).string(),
                        {cfg.seed, holdout_accs[j]});

    // attack split: pool images the victim gets right, in dataset order
    std::vector<int> split;
    for (int idx : data.indices(SplitTag::AttackPool))
        if (victim->predict(data.images[idx]) == data.labels[idx]) split.push_back(idx);
    if (split.empty())
        throw std::runtime_error(
            "contract: attack split is empty (the victim misclassifies every "
            "attack-pool image)");
    if (split.size() > size_t(cfg.batch)) split.resize(size_t(cfg.batch));
    size_t n = split.size();

    ExperimentResult result;
    result.model_names = model_names;
    result.victim_accuracy = vacc;
    result.split_size = n;
    result.out_dir = cfg.out_dir;

    std::string report_csv = "attack,model,success_rate,p_m,psnr_db,ssim,loss_final\n";
    std::string curves_csv = "attack,t,mean_loss\n";

    for (size_t ai = 0; ai < specs.size(); ++ai) {
        const AttackSpec& spec = specs[ai];
        BatchRun run;
        run.results.resize(n);
        parallel_for(n, cfg.workers, [&](size_t i) {
            int idx = split[i];
            AttackConfig acfg = spec.cfg;
            acfg.seed = derive_seed(cfg.seed, 1000 + ai, uint64_t(idx));
            run.results[i] =
                run_attack(*victim, data.images[idx], data.labels[idx], acfg, spec.kind.base);
        });

        run.psnr_vals.resize(n);
        run.ssim_vals.resize(n);
        run.pm_vals.resize(n);
        for (size_t i = 0; i < n; ++i) {
            const Tensor& clean = data.images[split[i]];
            const Tensor& adv = run.results[i].x_adv;
            run.psnr_vals[i] = psnr(clean, adv);
            run.ssim_vals[i] = ssim(clean, adv);
            run.pm_vals[i] = mean_perturbation(clean, adv);
            run.pairs.emplace_back(adv, data.labels[split[i]]);
        }
        double mean_pm = std::accumulate(run.pm_vals.begin(), run.pm_vals.end(), 0.0) / n;
        double mean_psnr =
            std::accumulate(run.psnr_vals.begin(), run.psnr_vals.end(), 0.0) / n;
        double mean_ssim =
            std::accumulate(run.ssim_vals.begin(), run.ssim_vals.end(), 0.0) / n;

        std::string slug = file_slug(spec.name);
        write_text(out / ("trace_" + slug + ".csv"), trace_csv(run));
        write_text(out / ("hist_" + slug + ".csv"), hist_csv(run));
        export_examples(run, data, split, out / "examples" / slug);

        size_t T = run.results.front().trace.iters.size();
        std::vector<double> curve(T, 0.0);
        for (const auto& r : run.results)
            for (size_t t = 0; t < T; ++t) curve[t] += r.trace.iters[t].loss / double(n);
        for (size_t t = 0; t < T; ++t)
            curves_csv += spec.name + "," + std::to_string(run.results.front().trace.iters[t].t) +
                          "," + fmt_double(curve[t]) + "\n";

        for (size_t mi = 0; mi < model_names.size(); ++mi) {
            const Classifier& model = mi == 0 ? *victim : *holdout_models[mi - 1];
            RunReport rep;
            rep.attack = spec.name;
            rep.model = model_names[mi];
            rep.success = success_rate(model, run.pairs);
            rep.p_m = mean_pm;
            rep.psnr_db = mean_psnr;
            rep.ssim_mean = mean_ssim;
            if (mi == 0) {
                double fl = 0;
                for (const auto& r : run.results) fl += r.trace.final_loss;
                rep.loss_final = fl / n;
                rep.loss_curve = curve;
            } else {
                double fl = 0;
                for (size_t i = 0; i < n; ++i)
                    fl += model.loss(run.pairs[i].first, run.pairs[i].second);
                rep.loss_final = fl / n;
            }
            report_csv += rep.attack + "," + rep.model + "," + fmt_double(rep.success) + "," +
                          fmt_double(rep.p_m) + "," + fmt_double(rep.psnr_db) + "," +
                          fmt_double(rep.ssim_mean) + "," + fmt_double(rep.loss_final) + "\n";
            result.reports.push_back(std::move(rep));
        }
    }

    write_text(out / "report.csv", report_csv);
    write_text(out / "losscurves.csv", curves_csv);
    write_text(out / "comparison.csv", compare_attacks(result.reports).to_csv());

    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
    nlohmann::json meta;
    meta["generated_at"] = timestamp_utc();
    meta["elapsed_ms"] = elapsed;
    meta["seed"] = cfg.seed;
    meta["dataset"] = cfg.data_dir.empty()
                          ? nlohmann::json{{"kind", "synthetic"},
                                           {"classes", cfg.classes},
                                           {"per_class", cfg.per_class},
                                           {"image_side", cfg.image_side},
                                           {"noise", cfg.noise},
                                           {"amplitude", cfg.amplitude}}
                          : nlohmann::json{{"kind", "directory"}, {"path", cfg.data_dir}};
    meta["victim_accuracy"] = vacc;
    meta["holdout_accuracy"] = holdout_accs;
    meta["models"] = model_names;
    meta["split_size"] = n;
    std::vector<std::string> names;
    for (const auto& s : specs) names.push_back(s.name);
    meta["attacks"] = names;
    write_text(out / "meta.json", meta.dump(2) + "\n");

    return result;
}

}  // namespace fga
