#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "quite/tensor.hpp"

namespace quite::data {

/// One (value, timestamp, mask) triplet. Raw data always carries mask 1;
/// mask 0 only appears in padded arrays.
struct Observation {
    double value = 0.0;
    double time = 0.0;
    std::uint8_t mask = 1;
};

/// Irregular multivariate series: per-variable observation lists with
/// strictly increasing timestamps and no alignment across variables.
struct ImtsInstance {
    std::string id;
    std::vector<std::vector<Observation>> variables;
    std::optional<int> label;

    std::size_t num_variables() const { return variables.size(); }
    std::size_t num_observations() const;
};

struct TimeWindow {
    double start = 0.0;
    double end = 1.0;

    double length() const { return end - start; }
    /// Maps raw time into [0, 1] over the window.
    double rescale(double t) const { return (t - start) / length(); }
};

struct ForecastQuery {
    std::size_t variable = 0;
    double time = 0.0;
};

struct ForecastSplit {
    ImtsInstance history;
    std::vector<ForecastQuery> queries;
    std::vector<double> targets;
    double split_time = 0.0;
};

struct PatchGrid {
    double patch_size = 0.0;
    double stride = 0.0;
    TimeWindow window;
    std::size_t num_patches = 0;
    // assignment[n][i] is the patch index of observation i of variable n.
    std::vector<std::vector<std::size_t>> assignment;
};

// --- CSV -----------------------------------------------------------------

/// Reads `instance_id,variable_id,timestamp,value[,label]`. Lines starting
/// with '#' are comments. Variable ids are zero-based integers; every
/// instance gets max(variable_id) + 1 variables.
std::vector<ImtsInstance> load_csv(const std::string& path);
std::vector<ImtsInstance> parse_csv(const std::string& text, const std::string& source = "<memory>");

/// Writes reals with 17 significant digits so a load round-trips bit-exactly.
void save_csv(const std::string& path, const std::vector<ImtsInstance>& instances,
              const std::string& comment = "");
std::string format_csv(const std::vector<ImtsInstance>& instances, const std::string& comment = "");

std::string format_real(double value);

/// Sorts each variable by time and rejects duplicate timestamps.
void canonicalize(ImtsInstance& instance);

// --- Synthetic data ------------------------------------------------------

struct SyntheticConfig {
    std::size_t num_instances = 200;
    std::size_t num_variables = 4;
    double base_rate = 1.0;        // expected observations per variable per time unit
    double missing_ratio = 0.5;    // fraction removed after sampling
    std::vector<double> frequency; // cycles per time unit, per variable
    std::vector<double> phase;     // radians, per variable
    std::vector<double> amplitude; // per variable
    double coupling = 0.3;         // weight of the previous variable's clean signal
    double phase_jitter = 1.0;     // per-instance shared phase shift, as a fraction of 2 pi
    double offset_std = 0.0;       // per-instance level shift
    double noise_std = 0.1;
    double window_length = 48.0;
    std::uint64_t seed = 1;
    bool label_by_sign_of_mean = false;

    /// Fills per-variable signal specs for `num_variables` with a fixed,
    /// seed-independent pattern of periods between 12 and 30 time units.
    void fill_default_signals();
    void validate() const;
};

std::vector<ImtsInstance> generate_synthetic(const SyntheticConfig& config);

/// Per-instance RNG stream, independent of generation order.
std::mt19937_64 instance_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0);

// --- Forecasting split, patches ------------------------------------------

ForecastSplit split_forecast(const ImtsInstance& instance, double split_time, TimeWindow window);

std::size_t num_patches(TimeWindow window, double patch_size, double stride);
std::size_t patch_index(double t, TimeWindow window, double patch_size, double stride, std::size_t num_patches);
PatchGrid assign_patches(const ImtsInstance& history, double patch_size, double stride, TimeWindow window);

/// Drops each history observation independently with probability `ratio`.
ForecastSplit remove_history(const ForecastSplit& split, double ratio, std::mt19937_64& rng);

// --- Normalization -------------------------------------------------------

class Normalizer {
public:
    Normalizer() = default;
    Normalizer(std::vector<double> mean, std::vector<double> stddev);

    /// Per-variable z-score statistics (population std, floored at 1e-8).
    static Normalizer fit(const std::vector<ImtsInstance>& train);

    double transform(std::size_t variable, double value) const;
    double untransform(std::size_t variable, double value) const;
    ImtsInstance transform(const ImtsInstance& instance) const;
    ForecastSplit transform(const ForecastSplit& split) const;

    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& stddev() const { return std_; }

    static constexpr double kStdFloor = 1e-8;

private:
    std::vector<double> mean_;
    std::vector<double> std_;
};

// --- Batching ------------------------------------------------------------

/// Padded observation arrays. Shape is [B, N, L] (variable layout) or
/// [B, M, N, L] (patch layout). Times are rescaled into the model window.
struct PaddedBatch {
    Shape shape;
    std::vector<double> values;
    std::vector<double> times;
    std::vector<double> masks;

    std::size_t batch() const { return shape.front(); }
    bool patched() const { return shape.size() == 4; }
    std::size_t num_patches() const { return patched() ? shape[1] : 1; }
    std::size_t num_variables() const { return shape[shape.size() - 2]; }
    std::size_t max_length() const { return shape.back(); }

    Tensor values_tensor() const { return Tensor::from(shape, values); }
    Tensor times_tensor() const { return Tensor::from(shape, times); }
    Tensor masks_tensor() const { return Tensor::from(shape, masks); }
    double mask_sum() const;
};

struct PatchSpec {
    double patch_size = 6.0;
    double stride = 6.0;
    TimeWindow window;  // region the patches tile (the history window)
};

/// Pads per-variable observation lists to a common length.
PaddedBatch batch_pad(const std::vector<const ImtsInstance*>& instances, TimeWindow scale);
/// Pads per (patch, variable) observation lists to a common length.
PaddedBatch batch_pad(const std::vector<const ImtsInstance*>& instances, const PatchSpec& patches,
                      TimeWindow scale);

/// Forecast targets padded to the largest query count in the batch.
struct QueryBatch {
    std::size_t batch = 0;
    std::size_t max_queries = 0;
    std::vector<std::size_t> variable;  // [B * P]
    std::vector<double> time;           // rescaled, [B * P]
    std::vector<double> target;         // [B * P]
    std::vector<double> mask;           // [B * P]
};

QueryBatch batch_queries(const std::vector<const ForecastSplit*>& splits, TimeWindow scale);

}  // namespace quite::data
