#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "quite/errors.hpp"
#include "quite/harness.hpp"

namespace quite::harness {

namespace {

std::vector<std::string> split_names(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    for (char c : text + ",") {
        if (c == ',') {
            if (!item.empty()) out.push_back(item);
            item.clear();
        } else if (c != ' ') {
            item += c;
        }
    }
    return out;
}

}  // namespace

const std::set<std::string>& Experiment::known_keys() {
    static const std::set<std::string> keys{
        "data.source",        "data.num_instances", "data.num_variables", "data.base_rate",
        "data.missing_ratio", "data.window",        "data.noise_std",     "data.coupling",
        "data.phase_jitter",  "data.offset_std",    "data.seed",          "data.labels",
        "data.split_time",    "data.patch_size",    "data.test_fraction", "data.val_fraction",
        "data.split_seed",    "model.architecture", "model.embedding",    "model.query_init",
        "model.dim",          "model.heads",        "model.layers",       "model.grid_width",
        "train.task",         "train.epochs",       "train.patience",     "train.batch_size",
        "train.learning_rate", "train.seeds",       "train.metrics",      "train.sweep_ratios",
        "train.sweep_mode",   "train.variants",     "train.grid_dims",    "train.grid_layers",
        "train.grid_heads",   "train.run_id",
    };
    return keys;
}

Experiment Experiment::from_config(const Config& cfg) {
    cfg.check_known(known_keys());
    Experiment exp;
    exp.raw = cfg;

    TrainSettings& t = exp.train;
    const std::string task = cfg.get("train.task", "forecast");
    if (task == "forecast") t.task = Task::forecast;
    else if (task == "classify") t.task = Task::classify;
    else throw ValidationError("train.task must be forecast or classify, got '" + task + "'");
    t.epochs = cfg.get_size("train.epochs", t.epochs);
    t.patience = cfg.get_size("train.patience", t.patience);
    t.batch_size = cfg.get_size("train.batch_size", t.batch_size);
    t.learning_rate = cfg.get_double("train.learning_rate", t.learning_rate);
    if (cfg.has("train.seeds")) {
        t.seeds.clear();
        for (std::size_t s : cfg.get_sizes("train.seeds", {})) t.seeds.push_back(s);
    }
    const std::string metrics = cfg.get("train.metrics", "normalized");
    if (metrics != "normalized" && metrics != "raw") throw ValidationError("train.metrics must be normalized or raw");
    t.raw_metrics = metrics == "raw";
    t.sweep_ratios = cfg.get_doubles("train.sweep_ratios", t.sweep_ratios);
    const std::string mode = cfg.get("train.sweep_mode", "reevaluate");
    if (mode != "reevaluate" && mode != "retrain") throw ValidationError("train.sweep_mode must be reevaluate or retrain");
    t.sweep_retrain = mode == "retrain";
    if (cfg.has("train.variants")) t.variants = split_names(cfg.get("train.variants", ""));
    t.grid_dims = cfg.get_sizes("train.grid_dims", t.grid_dims);
    t.grid_layers = cfg.get_sizes("train.grid_layers", t.grid_layers);
    t.grid_heads = cfg.get_sizes("train.grid_heads", t.grid_heads);
    t.run_id = cfg.get("train.run_id", t.run_id);
    if (t.patience == 0) throw ValidationError("train.patience must be >= 1");
    if (t.seeds.empty()) throw ValidationError("train.seeds must not be empty");
    if (t.batch_size == 0) throw ValidationError("train.batch_size must be >= 1");
    if (!(t.learning_rate >= 0.0)) throw ValidationError("train.learning_rate must be >= 0");
    for (double r : t.sweep_ratios)
        if (!(r >= 0.0 && r < 1.0)) throw ValidationError("removal ratios must lie in [0, 1)");
    for (const auto& v : t.variants) embed::parse_embedding_kind(v);
    if (t.run_id.empty() || t.run_id.find_first_of("/\\ ") != std::string::npos) {
        throw ValidationError("train.run_id must be a plain file-name fragment");
    }

    DataSettings& d = exp.data;
    data::SyntheticConfig& s = d.synthetic;
    d.source = cfg.get("data.source", d.source);
    s.num_instances = cfg.get_size("data.num_instances", s.num_instances);
    s.num_variables = cfg.get_size("data.num_variables", s.num_variables);
    s.base_rate = cfg.get_double("data.base_rate", s.base_rate);
    s.missing_ratio = cfg.get_double("data.missing_ratio", s.missing_ratio);
    s.window_length = cfg.get_double("data.window", s.window_length);
    s.noise_std = cfg.get_double("data.noise_std", s.noise_std);
    s.coupling = cfg.get_double("data.coupling", s.coupling);
    s.phase_jitter = cfg.get_double("data.phase_jitter", s.phase_jitter);
    s.offset_std = cfg.get_double("data.offset_std", t.task == Task::classify ? 1.0 : s.offset_std);
    s.seed = cfg.get_u64("data.seed", s.seed);
    s.label_by_sign_of_mean = cfg.get_bool("data.labels", t.task == Task::classify);
    s.fill_default_signals();
    s.validate();
    d.split_time = cfg.get_double("data.split_time", t.task == Task::classify ? s.window_length : d.split_time);
    d.patch_size = cfg.get_double("data.patch_size", d.patch_size);
    d.test_fraction = cfg.get_double("data.test_fraction", d.test_fraction);
    d.val_fraction = cfg.get_double("data.val_fraction", d.val_fraction);
    d.split_seed = cfg.get_u64("data.split_seed", d.split_seed);
    if (!(d.split_time > 0.0 && d.split_time <= s.window_length)) {
        throw ValidationError("data.split_time must lie in (0, data.window]");
    }
    if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0) || !(d.val_fraction > 0.0 && d.val_fraction < 1.0)) {
        throw ValidationError("data.test_fraction and data.val_fraction must lie in (0, 1)");
    }
    data::num_patches({0.0, d.split_time}, d.patch_size, d.patch_size);

    std::map<std::string, std::string> model_entries;
    for (const auto& [k, v] : cfg.entries())
        if (k.rfind("model.", 0) == 0) model_entries[k] = v;
    exp.model = model::ModelConfig::from_entries(model_entries);
    return exp;
}

std::vector<data::ImtsInstance> load_instances(const Experiment& exp) {
    if (exp.data.source == "synthetic") return data::generate_synthetic(exp.data.synthetic);
    return data::load_csv(exp.data.source);
}

PreparedData prepare(const Experiment& exp) { return prepare(exp, load_instances(exp)); }

PreparedData prepare(const Experiment& exp, const std::vector<data::ImtsInstance>& instances) {
    const DataSettings& d = exp.data;
    const bool classify = exp.train.task == Task::classify;
    if (instances.size() < 3) throw ValidationError("need at least 3 instances to split train/val/test");
    PreparedData out;
    out.num_variables = instances.front().num_variables();
    for (const auto& inst : instances) {
        if (inst.num_variables() != out.num_variables) {
            throw ValidationError("instance '" + inst.id + "' has " + std::to_string(inst.num_variables()) +
                                  " variables, expected " + std::to_string(out.num_variables));
        }
    }
    out.scale = {0.0, d.synthetic.window_length};
    out.patches = {d.patch_size, d.patch_size, {0.0, d.split_time}};
    out.num_patches = data::num_patches(out.patches.window, d.patch_size, d.patch_size);

    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(d.split_seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n = order.size();
    const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(d.test_fraction * n)));
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(d.val_fraction * (n - n_test))));
    if (n_test + n_val >= n) throw ValidationError("split fractions leave no training instances");
    std::vector<std::size_t> test(order.begin(), order.begin() + n_test);
    std::vector<std::size_t> val(order.begin() + n_test, order.begin() + n_test + n_val);
    std::vector<std::size_t> train(order.begin() + n_test + n_val, order.end());
    for (auto* part : {&test, &val, &train}) std::sort(part->begin(), part->end());

    std::vector<data::ImtsInstance> train_instances;
    for (std::size_t i : train) train_instances.push_back(instances[i]);
    out.normalizer = data::Normalizer::fit(train_instances);

    int max_label = -1;
    auto build = [&](const std::vector<std::size_t>& idx, std::vector<data::ForecastSplit>& dst) {
        for (std::size_t i : idx) {
            const auto& inst = instances[i];
            data::ForecastSplit split;
            if (classify) {
                if (!inst.label) throw ValidationError("instance '" + inst.id + "' has no label");
                if (inst.num_observations() == 0) {
                    ++out.dropped;
                    continue;
                }
                split.history = inst;
                split.split_time = d.split_time;
                max_label = std::max(max_label, *inst.label);
            } else {
                try {
                    split = data::split_forecast(inst, d.split_time, out.scale);
                } catch (const ValidationError&) {
                    ++out.dropped;
                    continue;
                }
                if (split.queries.empty()) {
                    ++out.dropped;
                    continue;
                }
            }
            dst.push_back(out.normalizer.transform(split));
        }
    };
    build(train, out.train);
    build(val, out.val);
    build(test, out.test);
    if (out.train.empty() || out.val.empty() || out.test.empty()) {
        throw ValidationError("a data split is empty after dropping degenerate instances");
    }
    if (classify) {
        out.num_classes = static_cast<std::size_t>(std::max(2, max_label + 1));
        for (const auto* part : {&out.train, &out.val, &out.test})
            for (const auto& s : *part)
                if (*s.history.label < 0) throw ValidationError("labels must be nonnegative");
    }
    return out;
}

model::ModelConfig model_config(const Experiment& exp, const PreparedData& data, std::uint64_t seed) {
    model::ModelConfig m = exp.model;
    m.num_variables = data.num_variables;
    m.num_patches = data.num_patches;
    m.num_classes = exp.train.task == Task::classify ? data.num_classes : 0;
    m.grid_origin = 0.0;
    m.grid_region = m.patched() ? data.patches.patch_size / data.scale.length()
                                : data.patches.window.length() / data.scale.length();
    m.seed = seed;
    m.validate();
    return m;
}

Batch make_batch(const PreparedData& data, bool patched, const std::vector<const data::ForecastSplit*>& splits) {
    Batch b;
    std::vector<const data::ImtsInstance*> histories;
    for (const auto* s : splits) histories.push_back(&s->history);
    b.x = patched ? data::batch_pad(histories, data.patches, data.scale) : data::batch_pad(histories, data.scale);
    const data::QueryBatch q = data::batch_queries(splits, data.scale);
    b.index = {q.batch, q.max_queries, q.variable};
    b.tau = q.time;
    b.target = q.target;
    b.mask = q.mask;
    for (const auto* s : splits) b.labels.push_back(s->history.label.value_or(0));
    return b;
}

}  // namespace quite::harness
