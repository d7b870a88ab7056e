#pragma once
// End-to-end harness: experiment configs (flat INI plus CLI overrides),
// victim / held-out model training with an accuracy contract, attack-split
// construction, the parallel per-image attack loop, and artifact emission
// (report CSVs, per-iteration traces, histogram sidecars, best/worst image
// triples, checkpoints, meta.json).

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fga/attack.hpp"
#include "fga/dataset.hpp"
#include "fga/metrics.hpp"
#include "fga/model.hpp"

namespace fga {

struct ModelSpec {
    std::string kind;   // "linear" | "mlp"
    int width = 32;     // hidden width (mlp only)
    std::string label() const;   // "mlp32", "linear"
};
// "mlp:32" or "linear"; lists are comma-separated.
ModelSpec parse_model_spec(const std::string& text);
std::vector<ModelSpec> parse_model_list(const std::string& text);

std::unique_ptr<Classifier> build_model(const ModelSpec& spec, Shape in, int classes,
                                        uint64_t seed);

// Attack token: a name for parse_attack_name, optionally followed by '@' and
// ;-separated per-attack overrides, e.g. "ti-di-mi-fgsm@kernel=15;eps=8".
struct AttackSpec {
    std::string name;   // token as written; used as the report label
    AttackKind kind;
    AttackConfig cfg;
};
void apply_attack_override(AttackConfig& cfg, const std::string& key,
                           const std::string& value);
AttackSpec parse_attack_spec(const std::string& token, const AttackConfig& base);

struct ExperimentConfig {
    // dataset: synthetic blobs unless data_dir is given
    int classes = 5;
    int per_class = 120;
    int image_side = 32;
    double noise = 2.0;
    double amplitude = 40.0;
    std::string data_dir;

    // white-box victim (ensemble when >1 member) plus held-out models for
    // the transfer columns
    std::vector<ModelSpec> victim = {{"mlp", 32}};
    std::vector<ModelSpec> holdouts = {{"mlp", 24}, {"linear", 0}};
    int epochs = 60;
    double lr = 1.0;
    int train_batch = 32;
    double min_accuracy = 0.95;

    // attack set (tokens with optional @overrides) sharing `base` defaults
    std::vector<std::string> attacks = {"mi-fgsm", "ai-fgtm",
                                        "ti-di-mi-fgsm@kernel=15", "ti-di-ai-fgtm"};
    AttackConfig base;
    int batch = 200;      // attack-split cap

    int workers = 0;      // 0: derived from hardware_concurrency
    uint64_t seed = 7;
    std::string out_dir = "out";
};

// Flat "key = value" file; '#' starts a comment; keys accept '-' or '_'.
ExperimentConfig load_experiment_config(const std::string& path);
// Shared by the INI loader and CLI flag overrides; throws on unknown keys.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);

struct ExperimentResult {
    std::vector<RunReport> reports;        // attack-major; victim row first
    std::vector<std::string> model_names;  // victim then holdouts
    double victim_accuracy = 0.0;
    size_t split_size = 0;
    std::string out_dir;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace fga
