#include <algorithm>
#include <cmath>
#include <numeric>

#include "quite/errors.hpp"
#include "quite/harness.hpp"

namespace quite::harness {

namespace {

void check_binary(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size()) throw DimensionError("labels/scores length mismatch");
    for (int y : labels)
        if (y != 0 && y != 1) throw ValidationError("binary labels must be 0 or 1");
}

}  // namespace

double auroc(const std::vector<int>& labels, const std::vector<double>& scores) {
    check_binary(labels, scores);
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Midranks over tied groups.
    double positive_rank_sum = 0.0, positives = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) {
                positive_rank_sum += midrank;
                positives += 1.0;
            }
        i = j;
    }
    const double negatives = static_cast<double>(n) - positives;
    if (positives == 0.0 || negatives == 0.0) throw ValidationError("AUROC undefined: only one class present");
    return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double average_precision(const std::vector<int>& labels, const std::vector<double>& scores) {
    check_binary(labels, scores);
    const std::size_t n = labels.size();
    const double positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    if (positives == 0.0) throw ValidationError("average precision undefined: no positive labels");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double ap = 0.0, tp = 0.0, fp = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? tp : fp) += 1.0;
            ++j;
        }
        const double recall = tp / positives;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
        i = j;
    }
    return ap;
}

ClassMetrics classification_metrics(const std::vector<int>& labels, const std::vector<double>& probabilities,
                                    std::size_t num_classes) {
    const std::size_t n = labels.size();
    if (num_classes < 2) throw ValidationError("classification needs at least two classes");
    if (probabilities.size() != n * num_classes) throw DimensionError("probabilities must be [n, classes]");
    if (n == 0) throw ValidationError("empty test set");
    ClassMetrics m;
    std::vector<double> tp(num_classes, 0.0), predicted(num_classes, 0.0), actual(num_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = probabilities.begin() + static_cast<std::ptrdiff_t>(i * num_classes);
        const auto pred = static_cast<std::size_t>(std::max_element(row, row + static_cast<std::ptrdiff_t>(num_classes)) - row);
        const auto truth = static_cast<std::size_t>(labels[i]);
        if (labels[i] < 0 || truth >= num_classes) throw ValidationError("label out of range");
        predicted[pred] += 1.0;
        actual[truth] += 1.0;
        if (pred == truth) tp[truth] += 1.0;
    }
    double correct = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        correct += tp[c];
        const double p = predicted[c] > 0.0 ? tp[c] / predicted[c] : 0.0;
        const double r = actual[c] > 0.0 ? tp[c] / actual[c] : 0.0;
        m.precision += p;
        m.recall += r;
        m.f1 += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    const auto C = static_cast<double>(num_classes);
    m.accuracy = correct / static_cast<double>(n);
    m.precision /= C;
    m.recall /= C;
    m.f1 /= C;

    auto one_vs_rest = [&](std::size_t c, std::vector<int>& y, std::vector<double>& s) {
        y.resize(n);
        s.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<std::size_t>(labels[i]) == c ? 1 : 0;
            s[i] = probabilities[i * num_classes + c];
        }
    };
    std::vector<int> y;
    std::vector<double> s;
    if (num_classes == 2) {
        one_vs_rest(1, y, s);
        m.auroc = auroc(y, s);
        m.auprc = average_precision(y, s);
    } else {
        double used = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (actual[c] == 0.0 || actual[c] == static_cast<double>(n)) continue;
            one_vs_rest(c, y, s);
            m.auroc += auroc(y, s);
            m.auprc += average_precision(y, s);
            used += 1.0;
        }
        if (used == 0.0) throw ValidationError("AUROC undefined: only one class present");
        m.auroc /= used;
        m.auprc /= used;
    }
    return m;
}

Summary summarize(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("cannot summarize an empty list");
    Summary s;
    const auto n = static_cast<double>(values.size());
    for (double v : values) s.mean += v;
    s.mean /= n;
    for (double v : values) s.std += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(s.std / n);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return s;
}

}  // namespace quite::harness
