#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "quite/checkpoint.hpp"
#include "quite/errors.hpp"
#include "quite/harness.hpp"
#include "quite/tensor.hpp"

using namespace quite;
using namespace quite::harness;

namespace {

struct Common {
    std::string config_path;
    std::string out_dir = ".";
};

// Leftover `--key value` / `--key=value` pairs become config overrides.
Config build_config(const Common& common, const std::vector<std::string>& extras) {
    Config cfg = common.config_path.empty() ? Config{} : Config::load(common.config_path);
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& arg = extras[i];
        if (arg.rfind("--", 0) != 0) throw ValidationError("unexpected argument '" + arg + "'");
        std::string key = arg.substr(2), value;
        const auto eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) throw ValidationError("override --" + key + " needs a value");
            value = extras[++i];
        }
        cfg.set(key, value);
    }
    return cfg;
}

std::string out_path(const Common& common, const std::string& name) {
    std::filesystem::create_directories(common.out_dir);
    return (std::filesystem::path(common.out_dir) / name).string();
}

std::vector<std::string> forecast_header() { return {"seed", "mse", "mae", "best_epoch", "epochs_run"}; }
std::vector<std::string> classify_header() {
    return {"seed", "auroc", "auprc", "accuracy", "precision", "recall", "f1", "best_epoch", "epochs_run"};
}

std::vector<double> metric_values(const Experiment& exp, const SeedRun& run) {
    if (exp.train.task == Task::forecast) return {run.test.mse, run.test.mae};
    const auto& c = run.classes;
    return {c.auroc, c.auprc, c.accuracy, c.precision, c.recall, c.f1};
}

void write_summary_rows(CsvWriter& csv, const std::vector<std::vector<double>>& columns, std::size_t trailing) {
    std::vector<std::string> mean_row{"mean"}, std_row{"std"};
    for (const auto& col : columns) {
        const Summary s = summarize(col);
        mean_row.push_back(cell(s.mean));
        std_row.push_back(cell(s.std));
    }
    for (std::size_t i = 0; i < trailing; ++i) {
        mean_row.push_back("");
        std_row.push_back("");
    }
    csv.row(mean_row);
    csv.row(std_row);
}

void save_model(const model::Forecaster& m, const std::string& base, const Experiment& exp, std::uint64_t seed) {
    auto meta = m.config().to_entries();
    meta["run.config_hash"] = exp.hash();
    meta["run.seed"] = std::to_string(seed);
    save_checkpoint(base, m.params(), meta);
}

int cmd_gen(const Experiment& exp, const Common& common, const std::string& output) {
    const auto instances = data::generate_synthetic(exp.data.synthetic);
    const std::string path = output.empty() ? out_path(common, exp.train.run_id + "_data.csv") : output;
    data::save_csv(path, instances, "config-hash: " + exp.hash());
    std::cout << "wrote " << instances.size() << " instances to " << path << "\n";
    return 0;
}

int cmd_train(const Experiment& exp, const Common& common) {
    const PreparedData data = prepare(exp);
    const bool forecast = exp.train.task == Task::forecast;
    CsvWriter metrics(out_path(common, exp.train.run_id + "_metrics.csv"), exp.hash(),
                      forecast ? forecast_header() : classify_header());
    std::vector<std::vector<double>> columns;
    for (std::uint64_t seed : exp.train.seeds) {
        std::unique_ptr<model::Forecaster> m;
        const SeedRun run = run_seed(exp, data, seed, &m);
        const std::string tag = exp.train.run_id + "_seed" + std::to_string(seed);
        save_model(*m, out_path(common, tag), exp, seed);
        RunArtifacts curve;
        curve.run_id = tag;
        curve.curve = run.training.curve;
        emit_plots(curve, common.out_dir, exp.hash());

        const auto values = metric_values(exp, run);
        if (columns.empty()) columns.resize(values.size());
        std::vector<std::string> row{std::to_string(seed)};
        for (std::size_t i = 0; i < values.size(); ++i) {
            columns[i].push_back(values[i]);
            row.push_back(cell(values[i]));
        }
        row.push_back(std::to_string(run.training.best_epoch));
        row.push_back(std::to_string(run.training.curve.size()));
        metrics.row(row);
        std::cout << "seed " << seed << ": best epoch " << run.training.best_epoch;
        if (forecast) std::cout << ", test mse " << cell(run.test.mse) << ", mae " << cell(run.test.mae);
        else std::cout << ", test auroc " << cell(run.classes.auroc) << ", accuracy " << cell(run.classes.accuracy);
        std::cout << "\n";
    }
    write_summary_rows(metrics, columns, 2);
    if (forecast) {
        const ForecastMetrics base = mean_predictor(data, data.test, exp.train.raw_metrics);
        std::cout << "mean-predictor mse " << cell(base.mse) << ", mae " << cell(base.mae) << "\n";
    }
    return 0;
}

std::unique_ptr<model::Forecaster> load_for(const std::string& checkpoint, const Experiment& exp,
                                            const PreparedData& data) {
    auto m = model::Forecaster::load(checkpoint);
    const auto& c = m->config();
    if (c.num_variables != data.num_variables) {
        throw ValidationError("checkpoint has " + std::to_string(c.num_variables) + " variables, data has " +
                              std::to_string(data.num_variables));
    }
    if (c.patched() && c.num_patches != data.num_patches) throw ValidationError("checkpoint patch count differs from data");
    if ((exp.train.task == Task::classify) != c.classifier()) throw ValidationError("checkpoint head does not match train.task");
    return m;
}

int cmd_eval(const Experiment& exp, const Common& common, const std::string& checkpoint) {
    const PreparedData data = prepare(exp);
    auto m = load_for(checkpoint, exp, data);
    if (exp.train.task == Task::forecast) {
        const ForecastMetrics r = evaluate_forecast(*m, data, data.test, exp.train.batch_size, exp.train.raw_metrics);
        const ForecastMetrics base = mean_predictor(data, data.test, exp.train.raw_metrics);
        CsvWriter csv(out_path(common, exp.train.run_id + "_eval.csv"), exp.hash(),
                      {"model", "mse", "mae", "targets"});
        csv.row({"checkpoint", cell(r.mse), cell(r.mae), std::to_string(r.count)});
        csv.row({"mean_predictor", cell(base.mse), cell(base.mae), std::to_string(base.count)});
        std::cout << "test mse " << cell(r.mse) << ", mae " << cell(r.mae) << " over " << r.count << " targets\n";
    } else {
        const ClassMetrics c = evaluate_classify(*m, data, data.test, exp.train.batch_size);
        CsvWriter csv(out_path(common, exp.train.run_id + "_eval.csv"), exp.hash(),
                      {"auroc", "auprc", "accuracy", "precision", "recall", "f1"});
        csv.row({cell(c.auroc), cell(c.auprc), cell(c.accuracy), cell(c.precision), cell(c.recall), cell(c.f1)});
        std::cout << "test auroc " << cell(c.auroc) << ", auprc " << cell(c.auprc) << ", accuracy "
                  << cell(c.accuracy) << "\n";
    }
    return 0;
}

int cmd_ablate(const Experiment& exp, const Common& common) {
    if (exp.train.task != Task::forecast) throw ValidationError("ablate runs the forecasting task");
    const PreparedData data = prepare(exp);
    CsvWriter csv(out_path(common, exp.train.run_id + "_ablate.csv"), exp.hash(),
                  {"variant", "mse_mean", "mse_std", "mae_mean", "mae_std"});
    for (const auto& r : ablate(exp, data)) {
        const Summary mse = summarize(r.mse), mae = summarize(r.mae);
        csv.row({r.variant, cell(mse.mean), cell(mse.std), cell(mae.mean), cell(mae.std)});
        std::cout << r.variant << ": mse " << cell(mse.mean) << " +- " << cell(mse.std) << "\n";
    }
    return 0;
}

int cmd_sweep(const Experiment& exp, const Common& common) {
    if (exp.train.task != Task::forecast) throw ValidationError("sweep-sparsity runs the forecasting task");
    const PreparedData data = prepare(exp);
    CsvWriter csv(out_path(common, exp.train.run_id + "_sparsity.csv"), exp.hash(),
                  {"ratio", "mse_median", "mse_mean", "mse_std", "mae_mean", "mae_std"});
    for (const auto& p : sparsity_sweep(exp, data)) {
        const Summary mse = summarize(p.mse), mae = summarize(p.mae);
        csv.row({cell(p.ratio), cell(mse.median), cell(mse.mean), cell(mse.std), cell(mae.mean), cell(mae.std)});
        std::cout << "ratio " << cell(p.ratio) << ": median mse " << cell(mse.median) << "\n";
    }
    return 0;
}

int cmd_grad_check(const std::string& scope, const std::string& fault, double factor, std::uint64_t seed) {
    if (!fault.empty()) fault_injection::set_gradient_fault(fault, factor);
    const auto entries = grad_check_suite(scope, seed);
    fault_injection::clear_gradient_fault();
    std::size_t failed = 0;
    std::printf("%-40s %14s %6s\n", "check", "max_rel_err", "status");
    for (const auto& e : entries) {
        const bool ok = e.report.passed();
        failed += ok ? 0 : 1;
        std::printf("%-40s %14.3e %6s\n", e.name.c_str(), e.report.max_rel_err, ok ? "PASS" : "FAIL");
        if (!ok) std::printf("  worst coordinate: %s\n", e.report.worst.c_str());
    }
    std::printf("%zu/%zu checks passed\n", entries.size() - failed, entries.size());
    return failed == 0 ? 0 : 2;
}

int cmd_cost(const Experiment& exp, const Common& common, std::uint64_t B, std::uint64_t Lv, std::uint64_t Lp,
             std::uint64_t L_pred) {
    model::ModelConfig m = exp.model;
    m.num_variables = exp.data.synthetic.num_variables;
    m.num_patches = data::num_patches({0.0, exp.data.split_time}, exp.data.patch_size, exp.data.patch_size);
    m.grid_region = m.patched() ? exp.data.patch_size / exp.data.synthetic.window_length
                                : exp.data.split_time / exp.data.synthetic.window_length;
    if (exp.train.task == Task::classify) m.num_classes = 2;
    m.seed = exp.train.seeds.front();
    const CostReport r = estimate_cost(m, B, Lv, Lp, L_pred);
    CsvWriter csv(out_path(common, exp.train.run_id + "_cost.csv"), exp.hash(), {"quantity", "value"});
    std::vector<std::pair<std::string, std::uint64_t>> rows{
        {"parameters", r.parameters},
        {"conventional_variable", r.conventional_variable},
        {"conventional_patch", r.conventional_patch},
        {"query_variable", r.query_variable},
        {"query_patch", r.query_patch},
    };
    for (const auto& [stage, macs] : r.stages) rows.emplace_back("stage_" + stage, macs);
    for (const auto& [name, value] : rows) {
        csv.row({name, std::to_string(value)});
        std::cout << name << " = " << value << "\n";
    }
    return 0;
}

int cmd_emit_plots(const Experiment& exp, const Common& common, const std::string& checkpoint) {
    const PreparedData data = prepare(exp);
    RunArtifacts run;
    if (checkpoint.empty()) {
        std::unique_ptr<model::Forecaster> m;
        const std::uint64_t seed = exp.train.seeds.front();
        const SeedRun r = run_seed(exp, data, seed, &m);
        run = collect_artifacts(exp.train.run_id, r.training, *m, data, exp.train.batch_size);
    } else {
        auto m = load_for(checkpoint, exp, data);
        run = collect_artifacts(exp.train.run_id, TrainResult{}, *m, data, exp.train.batch_size);
    }
    for (const auto& path : emit_plots(run, common.out_dir, exp.hash())) std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_grid(const Experiment& exp, const Common& common) {
    const PreparedData data = prepare(exp);
    CsvWriter csv(out_path(common, exp.train.run_id + "_grid.csv"), exp.hash(),
                  {"dim", "layers", "heads", "val_loss", "test_mse"});
    const auto cells = grid_search(exp, data);
    const GridCell* best = &cells.front();
    for (const auto& c : cells) {
        csv.row({std::to_string(c.dim), std::to_string(c.layers), std::to_string(c.heads), cell(c.val_loss),
                 cell(c.test_mse)});
        if (c.val_loss < best->val_loss) best = &c;
    }
    std::cout << "best: dim " << best->dim << ", layers " << best->layers << ", heads " << best->heads
              << " (val loss " << cell(best->val_loss) << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Query-based irregular time series embedding: training and evaluation harness"};
    app.require_subcommand(1);
    Common common;
    std::string output, checkpoint, scope = "ops", fault;
    double fault_factor = 1.5;
    std::uint64_t grad_seed = 1, B = 32, Lv = 24, Lp = 6, L_pred = 24;

    auto add = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->allow_extras();
        sub->add_option("-c,--config", common.config_path, "key = value config file");
        sub->add_option("-o,--out", common.out_dir, "output directory");
        return sub;
    };
    CLI::App* gen = add("gen", "generate the synthetic dataset as CSV");
    gen->add_option("--output", output, "CSV path (default <out>/<run_id>_data.csv)");
    CLI::App* train_cmd = add("train", "train one model per seed, write checkpoints and CSVs");
    CLI::App* eval = add("eval", "evaluate a checkpoint on the test split");
    eval->add_option("--checkpoint", checkpoint, "checkpoint base path")->required();
    CLI::App* ablate_cmd = add("ablate", "compare embedding variants on shared splits and seeds");
    CLI::App* sweep = add("sweep-sparsity", "MSE against extra history removal");
    CLI::App* grad = app.add_subcommand("grad-check", "finite-difference gradient checks");
    grad->add_option("--scope", scope, "ops, embed, model or all")->check(CLI::IsMember({"ops", "embed", "model", "all"}));
    grad->add_option("--fault", fault, "scale the backward pass of this op (mutation test)");
    grad->add_option("--fault-factor", fault_factor, "gradient scale for --fault");
    grad->add_option("--seed", grad_seed, "input seed");
    CLI::App* cost = add("cost", "parameter count and multiply-accumulate estimates");
    cost->add_option("--batch", B, "batch size B");
    cost->add_option("--lv", Lv, "observations per variable L_v");
    cost->add_option("--lp", Lp, "observations per patch L_p");
    cost->add_option("--lpred", L_pred, "forecast queries per variable");
    CLI::App* plots = add("emit-plots", "loss curve, forecast trace and embedding CSVs");
    plots->add_option("--checkpoint", checkpoint, "use a trained checkpoint instead of training");
    CLI::App* grid = add("grid-search", "dim x layers x heads grid on the first seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (grad->parsed()) return cmd_grad_check(scope, fault, fault_factor, grad_seed);
        CLI::App* sub = app.get_subcommands().front();
        const Experiment exp = Experiment::from_config(build_config(common, sub->remaining()));
        if (sub == gen) return cmd_gen(exp, common, output);
        if (sub == train_cmd) return cmd_train(exp, common);
        if (sub == eval) return cmd_eval(exp, common, checkpoint);
        if (sub == ablate_cmd) return cmd_ablate(exp, common);
        if (sub == sweep) return cmd_sweep(exp, common);
        if (sub == cost) return cmd_cost(exp, common, B, Lv, Lp, L_pred);
        if (sub == plots) return cmd_emit_plots(exp, common, checkpoint);
        if (sub == grid) return cmd_grid(exp, common);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
