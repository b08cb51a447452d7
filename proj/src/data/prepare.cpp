#include <algorithm>
#include <cmath>

#include "quite/errors.hpp"
#include "quite/imts.hpp"

namespace quite::data {

ForecastSplit split_forecast(const ImtsInstance& instance, double split_time, TimeWindow window) {
    if (!(split_time > window.start && split_time <= window.end)) {
        throw ValidationError("split time " + format_real(split_time) + " outside (" + format_real(window.start) +
                              ", " + format_real(window.end) + "]");
    }
    ForecastSplit split;
    split.split_time = split_time;
    split.history.id = instance.id;
    split.history.label = instance.label;
    split.history.variables.resize(instance.num_variables());
    for (std::size_t n = 0; n < instance.num_variables(); ++n) {
        for (const auto& o : instance.variables[n]) {
            if (o.time < split_time) {
                split.history.variables[n].push_back(o);
            } else {
                split.queries.push_back({n, o.time});
                split.targets.push_back(o.value);
            }
        }
    }
    if (split.history.num_observations() == 0) {
        throw ValidationError("degenerate split for instance '" + instance.id + "': no observation before " +
                              format_real(split_time));
    }
    return split;
}

std::size_t num_patches(TimeWindow window, double patch_size, double stride) {
    if (!(patch_size > 0.0)) throw ValidationError("patch_size must be positive");
    if (stride != patch_size) throw ValidationError("stride must equal patch_size (non-overlapping patches)");
    const double span = window.length() - patch_size;
    if (span <= 0.0) return 1;
    return static_cast<std::size_t>(std::ceil(span / stride)) + 1;
}

std::size_t patch_index(double t, TimeWindow window, double patch_size, double stride, std::size_t m_count) {
    if (t < window.start || t > window.end) {
        throw ValidationError("timestamp " + format_real(t) + " outside patch window [" + format_real(window.start) +
                              ", " + format_real(window.end) + "]");
    }
    auto m = static_cast<std::size_t>(std::floor((t - window.start) / stride));
    // Enforce the half-open rule exactly against rounding in the division.
    while (m > 0 && t < window.start + static_cast<double>(m) * stride) --m;
    while (t >= window.start + static_cast<double>(m + 1) * stride && m + 1 < m_count) ++m;
    (void)patch_size;
    return std::min(m, m_count - 1);
}

PatchGrid assign_patches(const ImtsInstance& history, double patch_size, double stride, TimeWindow window) {
    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.stride = stride;
    grid.window = window;
    grid.num_patches = num_patches(window, patch_size, stride);
    grid.assignment.resize(history.num_variables());
    for (std::size_t n = 0; n < history.num_variables(); ++n) {
        for (const auto& o : history.variables[n]) {
            grid.assignment[n].push_back(patch_index(o.time, window, patch_size, stride, grid.num_patches));
        }
    }
    return grid;
}

ForecastSplit remove_history(const ForecastSplit& split, double ratio, std::mt19937_64& rng) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw ValidationError("removal ratio must lie in [0, 1)");
    ForecastSplit out = split;
    if (ratio == 0.0) return out;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& obs : out.history.variables) {
        std::vector<Observation> kept;
        for (const auto& o : obs) {
            if (unit(rng) >= ratio) kept.push_back(o);
        }
        obs = std::move(kept);
    }
    return out;
}

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), std_(std::move(stddev)) {
    if (mean_.size() != std_.size()) throw ValidationError("normalizer: mean/std length mismatch");
}

Normalizer Normalizer::fit(const std::vector<ImtsInstance>& train) {
    std::size_t N = 0;
    for (const auto& inst : train) N = std::max(N, inst.num_variables());
    std::vector<double> sum(N, 0.0), count(N, 0.0);
    for (const auto& inst : train)
        for (std::size_t n = 0; n < inst.num_variables(); ++n)
            for (const auto& o : inst.variables[n]) {
                sum[n] += o.value;
                count[n] += 1.0;
            }
    std::string missing;
    for (std::size_t n = 0; n < N; ++n) {
        if (count[n] == 0.0) missing += (missing.empty() ? "" : ", ") + std::to_string(n);
    }
    if (!missing.empty()) throw ValidationError("normalizer: no training observations for variable(s) " + missing);
    std::vector<double> mean(N), sd(N, 0.0);
    for (std::size_t n = 0; n < N; ++n) mean[n] = sum[n] / count[n];
    for (const auto& inst : train)
        for (std::size_t n = 0; n < inst.num_variables(); ++n)
            for (const auto& o : inst.variables[n]) sd[n] += (o.value - mean[n]) * (o.value - mean[n]);
    for (std::size_t n = 0; n < N; ++n) sd[n] = std::max(std::sqrt(sd[n] / count[n]), kStdFloor);
    return Normalizer(std::move(mean), std::move(sd));
}

double Normalizer::transform(std::size_t variable, double value) const {
    return (value - mean_.at(variable)) / std_.at(variable);
}

double Normalizer::untransform(std::size_t variable, double value) const {
    return value * std_.at(variable) + mean_.at(variable);
}

ImtsInstance Normalizer::transform(const ImtsInstance& instance) const {
    ImtsInstance out = instance;
    for (std::size_t n = 0; n < out.num_variables(); ++n)
        for (auto& o : out.variables[n]) o.value = transform(n, o.value);
    return out;
}

ForecastSplit Normalizer::transform(const ForecastSplit& split) const {
    ForecastSplit out = split;
    out.history = transform(split.history);
    for (std::size_t j = 0; j < out.targets.size(); ++j) {
        out.targets[j] = transform(out.queries[j].variable, out.targets[j]);
    }
    return out;
}

double PaddedBatch::mask_sum() const {
    double s = 0.0;
    for (double m : masks) s += m;
    return s;
}

namespace {

std::size_t common_variables(const std::vector<const ImtsInstance*>& instances) {
    if (instances.empty()) throw ValidationError("batch_pad: empty batch");
    const std::size_t N = instances.front()->num_variables();
    for (const auto* inst : instances) {
        if (inst->num_variables() != N) {
            throw ValidationError("batch_pad: instance '" + inst->id + "' has " +
                                  std::to_string(inst->num_variables()) + " variables, expected " +
                                  std::to_string(N));
        }
    }
    return N;
}

}  // namespace

PaddedBatch batch_pad(const std::vector<const ImtsInstance*>& instances, TimeWindow scale) {
    const std::size_t N = common_variables(instances);
    std::size_t L = 0;
    for (const auto* inst : instances)
        for (const auto& v : inst->variables) L = std::max(L, v.size());
    PaddedBatch out;
    out.shape = {instances.size(), N, L};
    const std::size_t total = numel(out.shape);
    out.values.assign(total, 0.0);
    out.times.assign(total, 0.0);
    out.masks.assign(total, 0.0);
    for (std::size_t b = 0; b < instances.size(); ++b)
        for (std::size_t n = 0; n < N; ++n) {
            const auto& obs = instances[b]->variables[n];
            for (std::size_t i = 0; i < obs.size(); ++i) {
                const std::size_t at = (b * N + n) * L + i;
                out.values[at] = obs[i].value;
                out.times[at] = scale.rescale(obs[i].time);
                out.masks[at] = obs[i].mask;
            }
        }
    return out;
}

PaddedBatch batch_pad(const std::vector<const ImtsInstance*>& instances, const PatchSpec& patches,
                      TimeWindow scale) {
    const std::size_t N = common_variables(instances);
    const std::size_t M = num_patches(patches.window, patches.patch_size, patches.stride);
    // First pass: bucket observations to find the longest (patch, variable) list.
    std::vector<std::vector<std::vector<const Observation*>>> buckets(instances.size());
    std::size_t L = 0;
    for (std::size_t b = 0; b < instances.size(); ++b) {
        buckets[b].assign(M * N, {});
        for (std::size_t n = 0; n < N; ++n)
            for (const auto& o : instances[b]->variables[n]) {
                const std::size_t m = patch_index(o.time, patches.window, patches.patch_size, patches.stride, M);
                auto& slot = buckets[b][m * N + n];
                slot.push_back(&o);
                L = std::max(L, slot.size());
            }
    }
    PaddedBatch out;
    out.shape = {instances.size(), M, N, L};
    const std::size_t total = numel(out.shape);
    out.values.assign(total, 0.0);
    out.times.assign(total, 0.0);
    out.masks.assign(total, 0.0);
    for (std::size_t b = 0; b < instances.size(); ++b)
        for (std::size_t mn = 0; mn < M * N; ++mn) {
            const auto& slot = buckets[b][mn];
            for (std::size_t i = 0; i < slot.size(); ++i) {
                const std::size_t at = (b * M * N + mn) * L + i;
                out.values[at] = slot[i]->value;
                out.times[at] = scale.rescale(slot[i]->time);
                out.masks[at] = slot[i]->mask;
            }
        }
    return out;
}

QueryBatch batch_queries(const std::vector<const ForecastSplit*>& splits, TimeWindow scale) {
    QueryBatch out;
    out.batch = splits.size();
    for (const auto* s : splits) out.max_queries = std::max(out.max_queries, s->queries.size());
    const std::size_t total = out.batch * out.max_queries;
    out.variable.assign(total, 0);
    out.time.assign(total, 0.0);
    out.target.assign(total, 0.0);
    out.mask.assign(total, 0.0);
    for (std::size_t b = 0; b < splits.size(); ++b) {
        const auto& s = *splits[b];
        for (std::size_t j = 0; j < s.queries.size(); ++j) {
            const std::size_t at = b * out.max_queries + j;
            out.variable[at] = s.queries[j].variable;
            out.time[at] = scale.rescale(s.queries[j].time);
            out.target[at] = s.targets[j];
            out.mask[at] = 1.0;
        }
    }
    return out;
}

}  // namespace quite::data
