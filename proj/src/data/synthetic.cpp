#include <algorithm>
#include <cmath>
#include <numbers>

#include "quite/errors.hpp"
#include "quite/imts.hpp"

namespace quite::data {

void SyntheticConfig::fill_default_signals() {
    frequency.clear();
    phase.clear();
    amplitude.clear();
    for (std::size_t n = 0; n < num_variables; ++n) {
        const double period = 12.0 + 18.0 * static_cast<double>(n % 4) / 3.0;
        frequency.push_back(1.0 / period);
        phase.push_back(0.7 * static_cast<double>(n));
        amplitude.push_back(1.0 + 0.25 * static_cast<double>(n % 3));
    }
}

void SyntheticConfig::validate() const {
    if (num_variables == 0) throw ValidationError("synthetic: num_variables must be positive");
    if (frequency.size() != num_variables || phase.size() != num_variables || amplitude.size() != num_variables) {
        throw ValidationError("synthetic: per-variable signal specs must have num_variables entries");
    }
    if (!(missing_ratio >= 0.0 && missing_ratio < 1.0)) {
        throw ValidationError("synthetic: missing_ratio must lie in [0, 1)");
    }
    if (!(base_rate > 0.0) || !std::isfinite(base_rate)) throw ValidationError("synthetic: base_rate must be positive");
    if (!(window_length > 0.0) || !std::isfinite(window_length)) {
        throw ValidationError("synthetic: window_length must be positive");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std) || !std::isfinite(coupling) ||
        !std::isfinite(phase_jitter) || !(offset_std >= 0.0)) {
        throw ValidationError("synthetic: noise/coupling/jitter must be finite and nonnegative");
    }
    for (std::size_t n = 0; n < num_variables; ++n) {
        if (!std::isfinite(frequency[n]) || !std::isfinite(phase[n]) || !std::isfinite(amplitude[n])) {
            throw ValidationError("synthetic: non-finite signal spec for variable " + std::to_string(n));
        }
    }
}

std::mt19937_64 instance_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::vector<ImtsInstance> generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const std::size_t N = cfg.num_variables;
    std::vector<ImtsInstance> out;
    out.reserve(cfg.num_instances);
    for (std::size_t k = 0; k < cfg.num_instances; ++k) {
        auto rng = instance_rng(cfg.seed, k);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);

        const double shift = two_pi * cfg.phase_jitter * unit(rng);
        const double offset = cfg.offset_std * gauss(rng);
        auto clean = [&](std::size_t n, double t) {
            return cfg.amplitude[n] * std::sin(two_pi * cfg.frequency[n] * t + cfg.phase[n] + shift);
        };

        ImtsInstance inst;
        char id[32];
        std::snprintf(id, sizeof id, "syn-%06zu", k);
        inst.id = id;
        inst.variables.resize(N);
        double total = 0.0;
        std::size_t count = 0;
        for (std::size_t n = 0; n < N; ++n) {
            std::poisson_distribution<long> events(cfg.base_rate * cfg.window_length);
            const long m = events(rng);
            std::vector<double> times(static_cast<std::size_t>(m));
            for (auto& t : times) t = cfg.window_length * unit(rng);
            std::sort(times.begin(), times.end());
            times.erase(std::unique(times.begin(), times.end()), times.end());
            for (double t : times) {
                double x = offset + clean(n, t);
                if (N > 1 && cfg.coupling != 0.0) x += cfg.coupling * clean((n + N - 1) % N, t);
                if (cfg.noise_std > 0.0) x += cfg.noise_std * gauss(rng);
                // Removal draw happens for every sample so the stream layout
                // does not depend on missing_ratio.
                const bool keep = unit(rng) >= cfg.missing_ratio;
                if (keep) {
                    inst.variables[n].push_back({x, t, 1});
                    total += x;
                    ++count;
                }
            }
        }
        if (cfg.label_by_sign_of_mean) inst.label = (count > 0 && total / static_cast<double>(count) > 0.0) ? 1 : 0;
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace quite::data
