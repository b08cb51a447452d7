#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "quite/config.hpp"
#include "quite/grad_check.hpp"
#include "quite/imts.hpp"
#include "quite/model.hpp"

namespace quite::harness {

// ---------------------------------------------------------------- settings

struct DataSettings {
    std::string source = "synthetic";  // or a CSV path
    data::SyntheticConfig synthetic;
    double split_time = 24.0;
    double patch_size = 6.0;
    double test_fraction = 0.2;
    double val_fraction = 0.1;
    std::uint64_t split_seed = 1;
};

enum class Task { forecast, classify };

struct TrainSettings {
    Task task = Task::forecast;
    std::size_t epochs = 200;
    std::size_t patience = 50;
    std::size_t batch_size = 32;
    double learning_rate = 3e-3;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    bool raw_metrics = false;
    std::vector<double> sweep_ratios{0.0, 0.25, 0.5, 0.75};
    bool sweep_retrain = false;
    std::vector<std::string> variants{"add", "concat", "meanpool", "quite"};
    std::vector<std::size_t> grid_dims{32, 64};
    std::vector<std::size_t> grid_layers{1, 2, 3};
    std::vector<std::size_t> grid_heads{1, 2, 4, 8};
    std::string run_id = "run";
};

/// Parsed experiment: data.*, model.*, train.* keys over their defaults.
struct Experiment {
    Config raw;
    DataSettings data;
    model::ModelConfig model;  // num_variables / num_patches / grid_* are filled from the data
    TrainSettings train;

    static Experiment from_config(const Config& cfg);
    /// Every recognised key.
    static const std::set<std::string>& known_keys();
    std::string hash() const { return raw.hash(); }
};

// ---------------------------------------------------------------- data

struct PreparedData {
    std::vector<data::ForecastSplit> train, val, test;  // normalized
    data::Normalizer normalizer;
    data::TimeWindow scale;
    data::PatchSpec patches;
    std::size_t num_variables = 0;
    std::size_t num_patches = 0;
    std::size_t num_classes = 0;
    std::size_t dropped = 0;  // instances without history or targets
};

std::vector<data::ImtsInstance> load_instances(const Experiment& exp);
/// Instance-level split (seeded by data.split_seed, fixed across training
/// seeds), forecast cut at data.split_time, z-scoring fitted on train.
PreparedData prepare(const Experiment& exp);
PreparedData prepare(const Experiment& exp, const std::vector<data::ImtsInstance>& instances);

/// Model configuration for this data and a training seed.
model::ModelConfig model_config(const Experiment& exp, const PreparedData& data, std::uint64_t seed);

struct Batch {
    data::PaddedBatch x;
    model::QueryIndex index;
    std::vector<double> tau, target, mask;
    std::vector<int> labels;
};

Batch make_batch(const PreparedData& data, bool patched, const std::vector<const data::ForecastSplit*>& splits);

// ---------------------------------------------------------------- training

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> curve;
    std::size_t best_epoch = 0;
    double best_val = 0.0;
    bool early_stopped = false;
};

/// Adam over shuffled mini-batches; keeps the parameters with the lowest
/// validation loss. Stops after `patience` epochs without a strict decrease.
/// NumericalError carries the epoch number.
TrainResult train(model::Forecaster& model, const PreparedData& data, const TrainSettings& settings,
                  std::uint64_t seed);

double validation_loss(const model::Forecaster& model, const PreparedData& data, const TrainSettings& settings,
                       const std::vector<data::ForecastSplit>& splits);

// ---------------------------------------------------------------- metrics

struct ForecastMetrics {
    double mse = 0.0;
    double mae = 0.0;
    std::size_t count = 0;
};

struct TracePoint {
    std::string instance;
    std::size_t variable = 0;
    double time = 0.0;
    double truth = 0.0;
    double prediction = 0.0;
};

ForecastMetrics forecast_errors(const std::vector<double>& prediction, const std::vector<double>& truth);

/// Predictions for every query; values in normalized space unless `raw`.
std::vector<TracePoint> predict_splits(const model::Forecaster& model, const PreparedData& data,
                                       const std::vector<data::ForecastSplit>& splits, std::size_t batch_size,
                                       bool raw);
ForecastMetrics evaluate_forecast(const model::Forecaster& model, const PreparedData& data,
                                  const std::vector<data::ForecastSplit>& splits, std::size_t batch_size, bool raw);

/// Per-instance, per-variable history mean (0 = train mean when a variable
/// has no history).
ForecastMetrics mean_predictor(const PreparedData& data, const std::vector<data::ForecastSplit>& splits, bool raw);

/// Rank statistic with ties counted 1/2. Throws if only one class present.
double auroc(const std::vector<int>& labels, const std::vector<double>& scores);
/// Step-wise average precision over distinct score thresholds.
double average_precision(const std::vector<int>& labels, const std::vector<double>& scores);

struct ClassMetrics {
    double auroc = 0.0;
    double auprc = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// probabilities[i * C + c]. Binary: scores are P(class 1); multi-class:
/// AUROC/AUPRC are macro one-vs-rest. Precision/recall/F1 are macro.
ClassMetrics classification_metrics(const std::vector<int>& labels, const std::vector<double>& probabilities,
                                    std::size_t num_classes);
ClassMetrics evaluate_classify(const model::Forecaster& model, const PreparedData& data,
                               const std::vector<data::ForecastSplit>& splits, std::size_t batch_size);

struct Summary {
    double mean = 0.0;
    double std = 0.0;  // population
    double median = 0.0;
};
Summary summarize(const std::vector<double>& values);

// ---------------------------------------------------------------- runs

struct SeedRun {
    std::uint64_t seed = 0;
    TrainResult training;
    ForecastMetrics test;
    ClassMetrics classes;
};

/// Trains and evaluates one seed. `model_out`, when given, receives the model.
SeedRun run_seed(const Experiment& exp, const PreparedData& data, std::uint64_t seed,
                 std::unique_ptr<model::Forecaster>* model_out = nullptr);

struct VariantResult {
    std::string variant;
    std::vector<double> mse, mae;
};

/// Same data, splits and seeds for every embedding variant.
std::vector<VariantResult> ablate(const Experiment& exp, const PreparedData& data);

struct SweepPoint {
    double ratio = 0.0;
    std::vector<double> mse, mae;
};

/// History-only random removal at each ratio, seeded per (seed, ratio).
/// Re-evaluates each seed's model, or retrains when train.sweep_mode = retrain.
std::vector<SweepPoint> sparsity_sweep(const Experiment& exp, const PreparedData& data);
PreparedData remove_history(const PreparedData& data, double ratio, std::uint64_t seed, bool all_splits);

struct GridCell {
    std::size_t dim = 0, layers = 0, heads = 0;
    double val_loss = 0.0;
    double test_mse = 0.0;
};
std::vector<GridCell> grid_search(const Experiment& exp, const PreparedData& data);

// ---------------------------------------------------------------- cost

struct CostReport {
    std::size_t parameters = 0;
    std::uint64_t conventional_variable = 0;  // B N L_v D
    std::uint64_t conventional_patch = 0;     // B M N L_p D
    std::uint64_t query_variable = 0;         // B N ((L_v+1)^2 D + (L_v+1) D^2)
    std::uint64_t query_patch = 0;            // B M N ((L_p+1)^2 D + (L_p+1) D^2)
    std::map<std::string, std::uint64_t> stages;  // MAC estimates per stage
};

std::uint64_t conventional_variable_cost(std::uint64_t B, std::uint64_t N, std::uint64_t Lv, std::uint64_t D);
std::uint64_t conventional_patch_cost(std::uint64_t B, std::uint64_t M, std::uint64_t N, std::uint64_t Lp,
                                      std::uint64_t D);
std::uint64_t query_variable_cost(std::uint64_t B, std::uint64_t N, std::uint64_t Lv, std::uint64_t D);
std::uint64_t query_patch_cost(std::uint64_t B, std::uint64_t M, std::uint64_t N, std::uint64_t Lp, std::uint64_t D);

CostReport estimate_cost(const model::ModelConfig& config, std::uint64_t B, std::uint64_t Lv, std::uint64_t Lp,
                         std::uint64_t L_pred);

// ---------------------------------------------------------------- grad check

struct GradCheckEntry {
    std::string name;
    GradCheckReport report;
};

/// scope: ops, embed, model.
std::vector<GradCheckEntry> grad_check_suite(const std::string& scope, std::uint64_t seed = 1);

// ---------------------------------------------------------------- output

/// CSV with a `# config-hash:` line followed by the header row.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& config_hash, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);

private:
    std::string path_;
    std::size_t width_;
    std::unique_ptr<std::ofstream> out_;
};

std::string cell(double v);

struct RunArtifacts {
    std::string run_id;
    std::vector<EpochLog> curve;
    std::vector<TracePoint> trace;
    // Structured embeddings of the test instances: rows of
    // (instance, patch, variable, values...).
    struct EmbeddingRow {
        std::string instance;
        std::size_t patch = 0, variable = 0;
        std::vector<double> values;
    };
    std::vector<EmbeddingRow> embeddings;
};

RunArtifacts collect_artifacts(const std::string& run_id, const TrainResult& training, const model::Forecaster& model,
                               const PreparedData& data, std::size_t batch_size);

/// Writes <dir>/<run_id>_loss.csv always, and _trace.csv / _embeddings.csv
/// when the run has them. Returns the written paths.
std::vector<std::string> emit_plots(const RunArtifacts& run, const std::string& dir, const std::string& config_hash);

}  // namespace quite::harness
