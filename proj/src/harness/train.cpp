#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "quite/adam.hpp"
#include "quite/errors.hpp"
#include "quite/harness.hpp"
#include "quite/ops.hpp"

namespace quite::harness {

namespace {

std::vector<std::vector<const data::ForecastSplit*>> chunks(const std::vector<data::ForecastSplit>& splits,
                                                            const std::vector<std::size_t>& order,
                                                            std::size_t batch_size) {
    std::vector<std::vector<const data::ForecastSplit*>> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        std::vector<const data::ForecastSplit*> part;
        for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) part.push_back(&splits[order[i]]);
        out.push_back(std::move(part));
    }
    return out;
}

std::vector<std::size_t> identity_order(std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    return order;
}

// Returns (summed loss, weight) so that batch losses can be pooled exactly.
std::pair<Tensor, double> batch_loss(const model::Forecaster& model, const Batch& batch, Task task) {
    if (task == Task::classify) {
        Tensor logits = model.classify(batch.x);
        return {ops::cross_entropy(logits, batch.labels), static_cast<double>(batch.labels.size())};
    }
    const Shape shape{batch.index.batch, batch.index.per_instance};
    Tensor pred = model.forecast(batch.x, batch.index, batch.tau);
    Tensor loss = ops::mse_loss(pred, Tensor::from(shape, batch.target), Tensor::from(shape, batch.mask));
    double weight = 0.0;
    for (double m : batch.mask) weight += m;
    return {loss, weight};
}

}  // namespace

double validation_loss(const model::Forecaster& model, const PreparedData& data, const TrainSettings& settings,
                       const std::vector<data::ForecastSplit>& splits) {
    NoGradGuard guard;
    double total = 0.0, weight = 0.0;
    for (const auto& part : chunks(splits, identity_order(splits.size()), settings.batch_size)) {
        auto [loss, w] = batch_loss(model, make_batch(data, model.config().patched(), part), settings.task);
        total += loss.item() * w;
        weight += w;
    }
    if (weight == 0.0) throw ValidationError("validation split has no targets");
    return total / weight;
}

TrainResult train(model::Forecaster& model, const PreparedData& data, const TrainSettings& settings,
                  std::uint64_t seed) {
    const bool patched = model.config().patched();
    AdamState adam;
    adam.learning_rate = settings.learning_rate;
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x5851F42D4C957F2DULL);

    TrainResult result;
    std::vector<std::vector<double>> best;
    auto snapshot = [&] {
        best.clear();
        for (const auto& [name, t] : model.params()) best.emplace_back(t.data().begin(), t.data().end());
    };
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<std::size_t> order = identity_order(data.train.size());

    for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
        try {
            std::shuffle(order.begin(), order.end(), rng);
            double total = 0.0, weight = 0.0;
            for (const auto& part : chunks(data.train, order, settings.batch_size)) {
                Batch batch = make_batch(data, patched, part);
                auto [loss, w] = batch_loss(model, batch, settings.task);
                if (!std::isfinite(loss.item())) throw NumericalError("training loss is not finite");
                loss.backward();
                // Parameters off the loss path (e.g. the time embedding under a
                // conventional classifier) take a zero step.
                for (const auto& [name, t] : model.params()) {
                    if (!t.has_grad()) Tensor(t).mutable_grad();
                }
                adam_step(model.params(), adam);
                total += loss.item() * w;
                weight += w;
            }
            const double val = validation_loss(model, data, settings, data.val);
            if (!std::isfinite(val)) throw NumericalError("validation loss is not finite");
            result.curve.push_back({epoch, total / weight, val});
            if (val < best_val) {
                best_val = val;
                result.best_epoch = epoch;
                since_best = 0;
                snapshot();
            } else if (++since_best >= settings.patience) {
                result.early_stopped = true;
                break;
            }
        } catch (const NumericalError& e) {
            throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
    }
    if (!best.empty()) {
        std::size_t i = 0;
        for (const auto& [name, t] : model.params()) {
            Tensor handle = t;
            std::copy(best[i].begin(), best[i].end(), handle.mutable_data().begin());
            ++i;
        }
    }
    result.best_val = best_val;
    return result;
}

std::vector<TracePoint> predict_splits(const model::Forecaster& model, const PreparedData& data,
                                       const std::vector<data::ForecastSplit>& splits, std::size_t batch_size,
                                       bool raw) {
    NoGradGuard guard;
    std::vector<TracePoint> out;
    for (const auto& part : chunks(splits, identity_order(splits.size()), batch_size)) {
        Batch batch = make_batch(data, model.config().patched(), part);
        Tensor pred = model.forecast(batch.x, batch.index, batch.tau);
        for (std::size_t b = 0; b < part.size(); ++b) {
            const auto& s = *part[b];
            for (std::size_t j = 0; j < s.queries.size(); ++j) {
                TracePoint p;
                p.instance = s.history.id;
                p.variable = s.queries[j].variable;
                p.time = s.queries[j].time;
                p.truth = s.targets[j];
                p.prediction = pred.at({b, j});
                if (raw) {
                    p.truth = data.normalizer.untransform(p.variable, p.truth);
                    p.prediction = data.normalizer.untransform(p.variable, p.prediction);
                }
                out.push_back(p);
            }
        }
    }
    return out;
}

ForecastMetrics forecast_errors(const std::vector<double>& prediction, const std::vector<double>& truth) {
    if (prediction.size() != truth.size()) throw DimensionError("prediction/truth length mismatch");
    if (truth.empty()) throw ValidationError("empty target set");
    ForecastMetrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = prediction[i] - truth[i];
        m.mse += e * e;
        m.mae += std::abs(e);
    }
    m.count = truth.size();
    m.mse /= static_cast<double>(m.count);
    m.mae /= static_cast<double>(m.count);
    return m;
}

ForecastMetrics evaluate_forecast(const model::Forecaster& model, const PreparedData& data,
                                  const std::vector<data::ForecastSplit>& splits, std::size_t batch_size, bool raw) {
    std::vector<double> pred, truth;
    for (const auto& p : predict_splits(model, data, splits, batch_size, raw)) {
        pred.push_back(p.prediction);
        truth.push_back(p.truth);
    }
    return forecast_errors(pred, truth);
}

ForecastMetrics mean_predictor(const PreparedData& data, const std::vector<data::ForecastSplit>& splits, bool raw) {
    std::vector<double> pred, truth;
    for (const auto& s : splits) {
        std::vector<double> mean(s.history.num_variables(), 0.0);
        for (std::size_t n = 0; n < mean.size(); ++n) {
            const auto& obs = s.history.variables[n];
            if (obs.empty()) continue;
            double sum = 0.0;
            for (const auto& o : obs) sum += o.value;
            mean[n] = sum / static_cast<double>(obs.size());
        }
        for (std::size_t j = 0; j < s.queries.size(); ++j) {
            const std::size_t n = s.queries[j].variable;
            pred.push_back(raw ? data.normalizer.untransform(n, mean[n]) : mean[n]);
            truth.push_back(raw ? data.normalizer.untransform(n, s.targets[j]) : s.targets[j]);
        }
    }
    return forecast_errors(pred, truth);
}

ClassMetrics evaluate_classify(const model::Forecaster& model, const PreparedData& data,
                               const std::vector<data::ForecastSplit>& splits, std::size_t batch_size) {
    NoGradGuard guard;
    std::vector<int> labels;
    std::vector<double> probs;
    for (const auto& part : chunks(splits, identity_order(splits.size()), batch_size)) {
        Batch batch = make_batch(data, model.config().patched(), part);
        Tensor p = ops::softmax(model.classify(batch.x));
        probs.insert(probs.end(), p.data().begin(), p.data().end());
        labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
    }
    return classification_metrics(labels, probs, model.config().num_classes);
}

SeedRun run_seed(const Experiment& exp, const PreparedData& data, std::uint64_t seed,
                 std::unique_ptr<model::Forecaster>* model_out) {
    auto model = std::make_unique<model::Forecaster>(model_config(exp, data, seed));
    SeedRun run;
    run.seed = seed;
    run.training = train(*model, data, exp.train, seed);
    if (exp.train.task == Task::classify) {
        run.classes = evaluate_classify(*model, data, data.test, exp.train.batch_size);
    } else {
        run.test = evaluate_forecast(*model, data, data.test, exp.train.batch_size, exp.train.raw_metrics);
    }
    if (model_out) *model_out = std::move(model);
    return run;
}

}  // namespace quite::harness
