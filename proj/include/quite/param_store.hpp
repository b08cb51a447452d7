#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "quite/tensor.hpp"

namespace quite {

/// Named trainable tensors. Names are dot-separated paths
/// ("embed.time.freq"); iteration is sorted by name.
class ParamStore {
public:
    explicit ParamStore(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed), rng_(rng_seed) {}

    /// Registers a new parameter. Throws ValidationError on a duplicate name.
    Tensor add(const std::string& name, Tensor value);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    std::size_t size() const { return params_.size(); }
    std::size_t total_elements() const;
    std::vector<std::string> names() const;

    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();
    std::uint64_t seed() const { return rng_seed_; }
    std::mt19937_64& rng() { return rng_; }

private:
    std::map<std::string, Tensor> params_;
    std::uint64_t rng_seed_;
    std::mt19937_64 rng_;
};

/// Prefix helper so modules can register "<prefix>.<name>".
inline std::string join_path(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace quite
