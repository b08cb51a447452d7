#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "quite/config.hpp"
#include "quite/harness.hpp"

namespace quite::test {

// Pairwise ranking probability over every (positive, negative) pair.
inline double brute_auroc(const std::vector<int>& y, const std::vector<double>& s) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (y[i] != 1 || y[j] != 0) continue;
            pairs += 1.0;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    return wins / pairs;
}

// Mean over positives of the precision at that positive's score threshold.
inline double brute_average_precision(const std::vector<int>& y, const std::vector<double>& s) {
    double total = 0.0, positives = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 1) continue;
        positives += 1.0;
        double hits = 0.0, kept = 0.0;
        for (std::size_t j = 0; j < y.size(); ++j) {
            if (s[j] < s[i]) continue;
            kept += 1.0;
            hits += y[j];
        }
        total += hits / kept;
    }
    return total / positives;
}

inline Config small_config() {
    return Config::parse(
        "data.num_instances = 30\n"
        "data.num_variables = 2\n"
        "data.seed = 4\n"
        "model.dim = 8\n"
        "model.heads = 2\n"
        "train.epochs = 4\n"
        "train.batch_size = 8\n"
        "train.seeds = 1\n");
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace quite::test
