// fga command line: synthetic data generation, model training, attack
// experiments, and report aggregation. Errors leave on stderr as a single
// "fga: error: ..." line; exit code 2 for usage/config problems, 1 for
// runtime failures.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fga/dataset.hpp"
#include "fga/experiment.hpp"
#include "fga/metrics.hpp"
#include "fga/model.hpp"

using namespace fga;

namespace {

std::string one_line(std::string s) {
    for (char& ch : s)
        if (ch == '\n' || ch == '\r') ch = ' ';
    return s;
}

int cmd_gen_data(int classes, int per_class, int side, double noise, double amplitude,
                 uint64_t seed, const std::string& out) {
    Dataset ds = generate_synthetic_dataset(classes, per_class, side, noise, amplitude, seed);
    write_dataset_dir(ds, out);
    std::printf("wrote %zu images (%d classes, %dx%d) to %s\n", ds.size(), classes, side,
                side, out.c_str());
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& model_spec, int epochs,
              double lr, int batch, uint64_t seed, const std::string& out) {
    Dataset ds = load_dataset_dir(data_dir);
    ModelSpec spec = parse_model_spec(model_spec);
    auto model = build_model(spec, ds.images.front().shape(), ds.num_classes,
                             derive_seed(seed, 1, 0));
    TrainResult tr = train_model(*model, ds, epochs, lr, batch, derive_seed(seed, 1, 1));
    save_checkpoint(*model, out, {seed, tr.holdout_accuracy});
    std::printf("trained %s: held-out accuracy %s; checkpoint in %s\n", spec.label().c_str(),
                fmt_double(tr.holdout_accuracy).c_str(), out.c_str());
    return 0;
}

int cmd_attack(const ExperimentConfig& cfg) {
    ExperimentResult res = run_experiment(cfg);
    std::fputs(compare_attacks(res.reports).to_csv().c_str(), stdout);
    std::printf("victim accuracy %s, attack split %zu images; artifacts in %s\n",
                fmt_double(res.victim_accuracy).c_str(), res.split_size,
                res.out_dir.c_str());
    return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
    std::ifstream f(in);
    if (!f) throw std::runtime_error("io: cannot open report file '" + in + "'");
    std::string line;
    if (!std::getline(f, line))
        throw std::runtime_error("report: '" + in + "' is empty");
    const std::string expect = "attack,model,success_rate,p_m,psnr_db,ssim,loss_final";
    if (line != expect)
        throw std::runtime_error("report: unexpected header '" + line + "'");
    std::vector<RunReport> reports;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 7)
            throw std::runtime_error("report: " + in + ":" + std::to_string(lineno) +
                                     ": expected 7 fields");
        RunReport r;
        r.attack = fields[0];
        r.model = fields[1];
        r.success = std::stod(fields[2]);
        reports.push_back(std::move(r));
    }
    std::string csv = compare_attacks(reports).to_csv();
    if (out.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        std::ofstream of(out, std::ios::binary);
        if (!of) throw std::runtime_error("io: cannot write '" + out + "'");
        of << csv;
        std::printf("comparison written to %s\n", out.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fast-gradient adversarial attack toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic blob dataset");
    int g_classes = 5, g_per = 120, g_side = 32;
    double g_noise = 2.0, g_amp = 40.0;
    uint64_t g_seed = 7;
    std::string g_out;
    gen->add_option("--classes", g_classes, "number of classes");
    gen->add_option("--per-class", g_per, "images per class");
    gen->add_option("--side", g_side, "image side length");
    gen->add_option("--noise", g_noise, "pixel noise sigma");
    gen->add_option("--amplitude", g_amp, "blob peak amplitude");
    gen->add_option("--seed", g_seed, "rng seed");
    gen->add_option("--out", g_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train a classifier on a dataset directory");
    std::string t_data, t_model = "mlp:32", t_out;
    int t_epochs = 60, t_batch = 32;
    double t_lr = 1.0;
    uint64_t t_seed = 7;
    train->add_option("--data", t_data, "dataset directory")->required();
    train->add_option("--model", t_model, "model spec (linear | mlp:WIDTH)");
    train->add_option("--epochs", t_epochs, "training epochs");
    train->add_option("--lr", t_lr, "learning rate");
    train->add_option("--batch", t_batch, "minibatch size");
    train->add_option("--seed", t_seed, "rng seed");
    train->add_option("--out", t_out, "checkpoint directory")->required();

    // attack
    auto* atk = app.add_subcommand("attack", "run the attack experiment pipeline");
    std::string a_config;
    atk->add_option("--config", a_config, "INI config file");
    // overrides arrive as strings so the config layer owns parsing/validation
    std::vector<std::pair<std::string, std::string>> override_keys = {
        {"--attack", "attacks"}, {"--eps", "eps"},       {"--iters", "iters"},
        {"--lambda", "lambda"},  {"--mu1", "mu1"},       {"--mu2", "mu2"},
        {"--beta1", "beta1"},    {"--beta2", "beta2"},   {"--kernel", "kernel"},
        {"--dim-p", "dim_p"},    {"--schedule", "schedule"}, {"--seed", "seed"},
        {"--out", "out"},        {"--batch", "batch"},   {"--workers", "workers"}};
    std::vector<std::string> override_vals(override_keys.size());
    for (size_t i = 0; i < override_keys.size(); ++i)
        atk->add_option(override_keys[i].first, override_vals[i],
                        "override config key '" + override_keys[i].second + "'");

    // report
    auto* rep = app.add_subcommand("report", "aggregate a report.csv into a comparison table");
    std::string r_in, r_out;
    rep->add_option("--in", r_in, "report.csv path")->required();
    rep->add_option("--out", r_out, "output CSV (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::fprintf(stderr, "fga: error: usage: %s\n", one_line(e.what()).c_str());
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(g_classes, g_per, g_side, g_noise, g_amp,
                                               g_seed, g_out);
        if (train->parsed())
            return cmd_train(t_data, t_model, t_epochs, t_lr, t_batch, t_seed, t_out);
        if (atk->parsed()) {
            ExperimentConfig cfg =
                a_config.empty() ? ExperimentConfig{} : load_experiment_config(a_config);
            for (size_t i = 0; i < override_keys.size(); ++i)
                if (atk->count(override_keys[i].first))
                    apply_config_entry(cfg, override_keys[i].second, override_vals[i]);
            return cmd_attack(cfg);
        }
        if (rep->parsed()) return cmd_report(r_in, r_out);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "fga: error: %s\n", one_line(e.what()).c_str());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fga: error: %s\n", one_line(e.what()).c_str());
        return 1;
    }
    return 0;
}
