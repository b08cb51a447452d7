#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "quite/embed.hpp"
#include "quite/errors.hpp"
#include "quite/harness.hpp"
#include "quite/model.hpp"
#include "harness_support.hpp"
#include "test_support.hpp"

using namespace quite;
using namespace quite::harness;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, pattern, a);
    return buf;
}

double max_diff(const Tensor& a, const Tensor& b) { return test::max_abs_diff(a, b); }

const data::TimeWindow kScale{0.0, 48.0};
const data::PatchSpec kPatches{6.0, 6.0, {0.0, 24.0}};

std::vector<data::ImtsInstance> random_instances(std::mt19937_64& rng, std::size_t B, std::size_t N) {
    std::vector<data::ImtsInstance> out;
    for (std::size_t b = 0; b < B; ++b) {
        auto inst = test::random_history(rng, N, 6, 24.0, 1);
        data::canonicalize(inst);
        out.push_back(std::move(inst));
    }
    return out;
}

data::PaddedBatch pad(const std::vector<data::ImtsInstance>& instances, bool patched) {
    std::vector<const data::ImtsInstance*> ptrs;
    for (const auto& i : instances) ptrs.push_back(&i);
    return patched ? data::batch_pad(ptrs, kPatches, kScale) : data::batch_pad(ptrs, kScale);
}

// One extra padded position per slot, holding a random value and timestamp
// with mask 0.
data::PaddedBatch append_masked(const data::PaddedBatch& in, std::mt19937_64& rng) {
    std::normal_distribution<double> value(0.0, 3.0);
    std::uniform_real_distribution<double> when(0.0, 1.0);
    const std::size_t L = in.max_length(), slots = in.values.size() / L;
    data::PaddedBatch out = in;
    out.shape.back() = L + 1;
    out.values.clear();
    out.times.clear();
    out.masks.clear();
    for (std::size_t s = 0; s < slots; ++s) {
        for (std::size_t l = 0; l < L; ++l) {
            out.values.push_back(in.values[s * L + l]);
            out.times.push_back(in.times[s * L + l]);
            out.masks.push_back(in.masks[s * L + l]);
        }
        out.values.push_back(value(rng));
        out.times.push_back(when(rng));
        out.masks.push_back(0.0);
    }
    return out;
}

// Shuffles the L positions of every slot together with their masks.
data::PaddedBatch shuffle_slots(const data::PaddedBatch& in, std::mt19937_64& rng) {
    const std::size_t L = in.max_length(), slots = in.values.size() / L;
    data::PaddedBatch out = in;
    std::vector<std::size_t> order(L);
    for (std::size_t s = 0; s < slots; ++s) {
        for (std::size_t l = 0; l < L; ++l) order[l] = l;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t l = 0; l < L; ++l) {
            out.values[s * L + l] = in.values[s * L + order[l]];
            out.times[s * L + l] = in.times[s * L + order[l]];
            out.masks[s * L + l] = in.masks[s * L + order[l]];
        }
    }
    return out;
}

model::ModelConfig small_model(std::mt19937_64& rng, std::size_t N, std::size_t M) {
    model::ModelConfig c;
    c.num_variables = N;
    c.num_patches = M;
    c.dim = 8;
    c.heads = 2;
    c.layers = 1;
    c.query_init = embed::QueryInit::xavier;
    c.seed = rng();
    return c;
}

struct VariableEmbedding {
    ParamStore params;
    embed::TimeEmbedder time;
    embed::QuiteEmbedding embedding;
    VariableEmbedding(std::uint64_t seed, std::size_t N, std::size_t D, std::size_t heads)
        : params(seed), time(params, "time", D), embedding(params, "embed", layout(N, D, heads), time) {}
    static embed::EmbeddingLayout layout(std::size_t N, std::size_t D, std::size_t heads) {
        embed::EmbeddingLayout l;
        l.num_variables = N;
        l.dim = D;
        l.heads = heads;
        l.query_init = embed::QueryInit::xavier;
        return l;
    }
};

Tensor grid_tau(std::mt19937_64& rng, std::size_t B, std::size_t P) {
    std::uniform_real_distribution<double> when(0.5, 1.0);
    std::vector<double> tau(B * P);
    for (auto& t : tau) t = when(rng);
    return Tensor::from({B, P}, std::move(tau));
}

// ---------------------------------------------------------------- 1

Outcome criterion_gradients() {
    const auto start = Clock::now();
    const auto entries = grad_check_suite("all", 1);
    const double elapsed = seconds_since(start);
    double worst = 0.0;
    std::string worst_name, failed;
    bool has_model = false;
    for (const auto& e : entries) {
        if (e.report.max_rel_err > worst) {
            worst = e.report.max_rel_err;
            worst_name = e.name;
        }
        if (!e.report.passed() || e.report.max_rel_err > 1e-4) failed += " " + e.name;
        has_model = has_model || e.name == "quitepp_forecast";
    }
    Outcome o;
    o.pass = failed.empty() && has_model && elapsed < 120.0;
    o.detail = std::to_string(entries.size()) + " checks, worst rel err " + fmt("%.2e", worst) + " (" + worst_name +
               "), " + fmt("%.1f s", elapsed) + (failed.empty() ? "" : ", failed:" + failed);
    return o;
}

// ---------------------------------------------------------------- 2

Outcome criterion_mask_neutrality() {
    std::mt19937_64 rng(2);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<std::size_t> pickN(1, 4), pickB(1, 3);
        const std::size_t N = pickN(rng), B = pickB(rng);
        const auto instances = random_instances(rng, B, N);
        model::Forecaster m(small_model(rng, N, 4));
        VariableEmbedding var(rng(), N, 8, 2);
        const data::PaddedBatch xp = pad(instances, true), xv = pad(instances, false);
        const data::PaddedBatch xp2 = append_masked(xp, rng), xv2 = append_masked(xv, rng);
        const Tensor tau = grid_tau(rng, B, 3);
        NoGradGuard guard;
        worst = std::max(worst, max_diff(var.embedding.forward(xv).embedding, var.embedding.forward(xv2).embedding));
        worst = std::max(worst, max_diff(m.embed(xp).embedding, m.embed(xp2).embedding));
        worst = std::max(worst, max_diff(m.forecast_grid(xp, tau), m.forecast_grid(xp2, tau)));
    }
    return {worst < 1e-9, "100 trials, max change " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 3

Outcome criterion_permutation() {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<std::size_t> pickN(1, 4), pickB(1, 3);
        const std::size_t N = pickN(rng), B = pickB(rng);
        const auto instances = random_instances(rng, B, N);
        model::Forecaster m(small_model(rng, N, 4));
        VariableEmbedding var(rng(), N, 8, 2);
        const data::PaddedBatch xp = pad(instances, true), xv = pad(instances, false);
        NoGradGuard guard;
        worst = std::max(worst, max_diff(var.embedding.forward(xv).embedding,
                                         var.embedding.forward(shuffle_slots(xv, rng)).embedding));
        worst = std::max(worst, max_diff(m.embed(xp).embedding, m.embed(shuffle_slots(xp, rng)).embedding));
    }
    return {worst < 1e-9, "100 trials, max change " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 4

Outcome criterion_shapes() {
    std::mt19937_64 rng(4);
    int bad = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<std::size_t> pickN(1, 5), pickB(1, 3), pickP(1, 6), pickH(1, 3), pickL(1, 2);
        const std::size_t N = pickN(rng), B = pickB(rng), P = pickP(rng), heads = pickH(rng), D = 4 * heads;
        const double patch = std::vector<double>{4.0, 6.0, 8.0, 12.0}[rng() % 4];
        const data::PatchSpec spec{patch, patch, {0.0, 24.0}};
        const std::size_t M = data::num_patches(spec.window, patch, patch);
        model::ModelConfig c;
        c.num_variables = N;
        c.num_patches = M;
        c.dim = D;
        c.heads = heads;
        c.layers = pickL(rng);
        c.seed = rng();
        model::Forecaster m(c);
        VariableEmbedding var(rng(), N, D, heads);
        const auto instances = random_instances(rng, B, N);
        std::vector<const data::ImtsInstance*> ptrs;
        for (const auto& i : instances) ptrs.push_back(&i);
        NoGradGuard guard;
        const Shape evar = var.embedding.forward(data::batch_pad(ptrs, kScale)).embedding.shape();
        const data::PaddedBatch xp = data::batch_pad(ptrs, spec, kScale);
        const Shape epatch = m.embed(xp).embedding.shape();
        const Shape y = m.forecast_grid(xp, grid_tau(rng, B, P)).shape();
        const bool ok = evar == Shape{B, N, D} && epatch == Shape{B, M, N, D} && y == Shape{B, P, N} &&
                        m.decoder()->output_input_width() == 2 * D;
        bad += ok ? 0 : 1;
    }
    return {bad == 0, "50 configs, " + std::to_string(bad) + " mismatches"};
}

// ---------------------------------------------------------------- 5-8

struct Benchmark {
    Experiment exp;
    PreparedData data;
    double baseline = 0.0;
    std::vector<double> quite_mse, seconds;
    std::vector<std::unique_ptr<model::Forecaster>> models;
};

Benchmark run_benchmark() {
    Benchmark b{Experiment::from_config(Config{}), {}, 0.0, {}, {}, {}};
    b.data = prepare(b.exp);
    b.baseline = mean_predictor(b.data, b.data.test, false).mse;
    for (std::uint64_t seed : b.exp.train.seeds) {
        const auto start = Clock::now();
        std::unique_ptr<model::Forecaster> m;
        const SeedRun run = run_seed(b.exp, b.data, seed, &m);
        b.seconds.push_back(seconds_since(start));
        b.quite_mse.push_back(run.test.mse);
        b.models.push_back(std::move(m));
        std::printf("  benchmark seed %llu: mse %.4f, best epoch %zu, %.1f s\n", static_cast<unsigned long long>(seed),
                    run.test.mse, run.training.best_epoch, b.seconds.back());
        std::fflush(stdout);
    }
    return b;
}

std::vector<double> variant_mse(const Benchmark& b, const std::function<void(Experiment&)>& change,
                                const char* label) {
    Experiment e = b.exp;
    change(e);
    std::vector<double> out;
    for (std::uint64_t seed : e.train.seeds) out.push_back(run_seed(e, b.data, seed).test.mse);
    std::printf("  %s: median mse %.4f\n", label, summarize(out).median);
    std::fflush(stdout);
    return out;
}

Outcome criterion_forecasting(const Benchmark& b) {
    const double median = summarize(b.quite_mse).median;
    const double slowest = *std::max_element(b.seconds.begin(), b.seconds.end());
    Outcome o;
    o.pass = median <= 0.5 * b.baseline && slowest <= 300.0;
    o.detail = "median mse " + fmt("%.4f", median) + " vs mean predictor " + fmt("%.4f", b.baseline) + " (ratio " +
               fmt("%.3f", median / b.baseline) + "), slowest seed " + fmt("%.1f s", slowest);
    return o;
}

Outcome criterion_ablation(const Benchmark& b) {
    auto with = [](embed::EmbeddingKind k) { return [k](Experiment& e) { e.model.embedding = k; }; };
    const double q = summarize(b.quite_mse).median;
    const double mp = summarize(variant_mse(b, with(embed::EmbeddingKind::meanpool), "meanpool")).median;
    const double add = summarize(variant_mse(b, with(embed::EmbeddingKind::add), "add")).median;
    return {q <= mp && q <= add,
            "median mse quite " + fmt("%.4f", q) + ", meanpool " + fmt("%.4f", mp) + ", add " + fmt("%.4f", add)};
}

Outcome criterion_initialization(const Benchmark& b) {
    auto with = [](embed::QueryInit q) { return [q](Experiment& e) { e.model.query_init = q; }; };
    std::vector<double> medians{summarize(b.quite_mse).median};
    medians.push_back(summarize(variant_mse(b, with(embed::QueryInit::xavier), "xavier")).median);
    medians.push_back(summarize(variant_mse(b, with(embed::QueryInit::uniform), "uniform")).median);
    medians.push_back(summarize(variant_mse(b, with(embed::QueryInit::zero), "zero")).median);
    const double lo = *std::min_element(medians.begin(), medians.end());
    const double hi = *std::max_element(medians.begin(), medians.end());
    return {hi <= 1.15 * lo, "median mse random " + fmt("%.4f", medians[0]) + ", xavier " + fmt("%.4f", medians[1]) +
                                 ", uniform " + fmt("%.4f", medians[2]) + ", zero " + fmt("%.4f", medians[3]) +
                                 ", spread " + fmt("%.1f%%", 100.0 * (hi / lo - 1.0))};
}

// Re-evaluates each seed's benchmark model on thinned test histories.
Outcome criterion_sparsity(const Benchmark& b) {
    std::vector<double> medians;
    std::string detail;
    for (double ratio : b.exp.train.sweep_ratios) {
        std::vector<double> mse;
        for (std::size_t i = 0; i < b.models.size(); ++i) {
            const PreparedData thin = remove_history(b.data, ratio, b.exp.train.seeds[i], false);
            mse.push_back(evaluate_forecast(*b.models[i], thin, thin.test, b.exp.train.batch_size, false).mse);
        }
        medians.push_back(summarize(mse).median);
        detail += (detail.empty() ? "" : ", ") + fmt("%.2f", ratio) + " -> " + fmt("%.4f", medians.back());
    }
    bool monotone = true;
    for (std::size_t i = 1; i < medians.size(); ++i) monotone = monotone && medians[i] >= medians[i - 1];
    return {monotone && medians.front() == summarize(b.quite_mse).median, "median mse " + detail};
}

// ---------------------------------------------------------------- 9

std::size_t manifest_total(const std::string& path) {
    std::size_t total = 0;
    for (const auto& line : test::lines_of(test::slurp(path))) {
        if (line.rfind("param ", 0) != 0) continue;
        const std::string shape = line.substr(line.find_last_of(' ') + 1);
        std::size_t count = 1;
        if (shape != "-") {
            std::stringstream ss(shape);
            for (std::string part; std::getline(ss, part, 'x');) count *= std::stoul(part);
        }
        total += count;
    }
    return total;
}

Outcome criterion_cost() {
    std::mt19937_64 rng(9);
    const fs::path dir = fs::temp_directory_path() / "quite_acceptance_cost";
    fs::remove_all(dir);
    fs::create_directories(dir);
    int bad = 0;
    std::string first;
    const model::Architecture archs[] = {model::Architecture::quitepp, model::Architecture::patch_transformer,
                                         model::Architecture::variate_transformer};
    const embed::EmbeddingKind kinds[] = {embed::EmbeddingKind::quite, embed::EmbeddingKind::add,
                                          embed::EmbeddingKind::concat, embed::EmbeddingKind::meanpool,
                                          embed::EmbeddingKind::conventional};
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<std::uint64_t> small(1, 6), len(1, 40);
        model::ModelConfig c;
        c.architecture = archs[rng() % 3];
        c.embedding = kinds[rng() % 5];
        c.num_variables = small(rng);
        c.num_patches = small(rng);
        c.heads = 1 + rng() % 2;
        c.dim = 4 * c.heads * small(rng);
        c.layers = 1 + rng() % 2;
        c.num_classes = trial % 4 == 0 ? 2 + rng() % 3 : 0;
        c.grid_width = small(rng);
        c.seed = rng();
        const std::uint64_t B = small(rng), Lv = len(rng), Lp = len(rng) % 8 + 1, Lpred = small(rng);
        const CostReport r = estimate_cost(c, B, Lv, Lp, Lpred);
        model::Forecaster m(c);
        const std::string base = (dir / ("m" + std::to_string(trial))).string();
        m.save(base);
        const std::uint64_t N = c.num_variables, M = c.num_patches, D = c.dim;
        std::uint64_t qv = 0, qp = 0;
        for (std::uint64_t i = 0; i < B * N; ++i) qv += (Lv + 1) * (Lv + 1) * D + (Lv + 1) * D * D;
        for (std::uint64_t i = 0; i < B * M * N; ++i) qp += (Lp + 1) * (Lp + 1) * D + (Lp + 1) * D * D;
        const std::uint64_t listed = manifest_total(base + ".manifest");
        std::string why;
        if (r.parameters != listed) why += " manifest " + std::to_string(listed) + "/" + std::to_string(r.parameters);
        if (r.parameters != m.params().total_elements()) why += " store";
        if (r.conventional_variable != B * N * Lv * D) why += " conv_var";
        if (r.conventional_patch != B * M * N * Lp * D) why += " conv_patch";
        if (r.query_variable != qv) why += " query_var";
        if (r.query_patch != qp) why += " query_patch";
        if (!why.empty()) {
            ++bad;
            if (first.empty()) first = "; trial " + std::to_string(trial) + ":" + why;
        }
    }
    fs::remove_all(dir);
    return {bad == 0, "20 configs, " + std::to_string(bad) + " mismatches" + first};
}

// ---------------------------------------------------------------- 10

Outcome criterion_metrics() {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> size(2, 12), coarse(0, 5), bit(0, 1);
    std::uniform_real_distribution<double> fine(0.0, 1.0);
    double worst = 0.0;
    int cases = 0;
    while (cases < 1000) {
        const int n = size(rng);
        std::vector<int> y(n);
        std::vector<double> s(n);
        for (int i = 0; i < n; ++i) {
            y[i] = bit(rng);
            s[i] = cases % 3 == 0 ? coarse(rng) / 5.0 : fine(rng);
        }
        const auto pos = std::count(y.begin(), y.end(), 1);
        if (pos == 0 || pos == n) continue;
        worst = std::max(worst, std::abs(auroc(y, s) - test::brute_auroc(y, s)));
        worst = std::max(worst, std::abs(average_precision(y, s) - test::brute_average_precision(y, s)));
        ++cases;
    }
    double worst_err = 0.0;
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> p(3), t(3);
        for (int i = 0; i < 3; ++i) {
            p[i] = normal(rng);
            t[i] = normal(rng);
        }
        const double e0 = p[0] - t[0], e1 = p[1] - t[1], e2 = p[2] - t[2];
        const ForecastMetrics m = forecast_errors(p, t);
        worst_err = std::max(worst_err, std::abs(m.mse - (e0 * e0 + e1 * e1 + e2 * e2) / 3.0));
        worst_err = std::max(worst_err, std::abs(m.mae - (std::abs(e0) + std::abs(e1) + std::abs(e2)) / 3.0));
    }
    return {worst <= 1e-12 && worst_err <= 1e-12,
            "1000 ranking cases, max diff " + fmt("%.1e", worst) + "; 3-element errors, max diff " +
                fmt("%.1e", worst_err)};
}

// ---------------------------------------------------------------- 11

int run_cli(const std::string& args) {
    const int status = std::system((std::string(QUITE_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_determinism() {
    const fs::path root = fs::temp_directory_path() / "quite_acceptance_determinism";
    fs::remove_all(root);
    const std::string args = " --data.num_instances 40 --train.epochs 15 --train.seeds 1,2 --model.dim 8";
    for (const char* run : {"a", "b"}) {
        const std::string out = (root / run).string();
        if (run_cli("train -o " + out + args) != 0 || run_cli("emit-plots -o " + out + args) != 0) {
            return {false, "cli run failed"};
        }
    }
    std::size_t files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        const fs::path other = root / "b" / entry.path().filename();
        ++files;
        if (!fs::exists(other) || test::slurp(entry.path().string()) != test::slurp(other.string())) ++differing;
    }
    std::size_t files_b = 0;
    for ([[maybe_unused]] const auto& entry : fs::directory_iterator(root / "b")) ++files_b;
    fs::remove_all(root);
    return {files >= 10 && differing == 0 && files == files_b,
            std::to_string(files) + " files (CSVs, manifests, blobs), " + std::to_string(differing) + " differ"};
}

// ---------------------------------------------------------------- 12

Outcome criterion_plug_and_play() {
    const embed::EmbeddingKind kinds[] = {embed::EmbeddingKind::quite, embed::EmbeddingKind::add,
                                          embed::EmbeddingKind::concat, embed::EmbeddingKind::meanpool,
                                          embed::EmbeddingKind::conventional};
    int configs = 0, bad = 0;
    for (auto arch : {model::Architecture::quitepp, model::Architecture::patch_transformer,
                      model::Architecture::variate_transformer}) {
        for (std::size_t layers : {1, 2}) {
            for (std::size_t classes : {0, 3}) {
                model::ModelConfig c;
                c.architecture = arch;
                c.layers = layers;
                c.num_classes = classes;
                c.num_variables = 3;
                c.dim = 8;
                c.heads = 2;
                c.seed = 5;
                ++configs;
                std::map<std::string, Shape> reference;
                std::vector<std::vector<double>> reference_values;
                for (auto kind : kinds) {
                    c.embedding = kind;
                    model::Forecaster m(c);
                    std::vector<std::vector<double>> values;
                    for (const auto& [name, t] : m.params())
                        if (name.rfind("embed.", 0) != 0) values.emplace_back(t.data().begin(), t.data().end());
                    if (kind == kinds[0]) {
                        reference = m.backbone_manifest();
                        reference_values = values;
                    } else if (m.backbone_manifest() != reference || values != reference_values) {
                        ++bad;
                    }
                }
            }
        }
    }
    return {bad == 0, std::to_string(configs) + " backbone configs x 5 embeddings, " + std::to_string(bad) +
                          " manifest or init differences"};
}

}  // namespace

int main(int argc, char** argv) {
    // Optional criterion numbers on the command line restrict the run.
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    auto selected = [&](int id) { return only.empty() || only.count(id) > 0; };
    int failures = 0, ran = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& body) {
        if (!selected(id)) return;
        ++ran;
        const auto start = Clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("CRITERION %2d %-28s %s  %s [%.1f s]\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                    seconds_since(start));
        std::fflush(stdout);
    };

    report(1, "gradient-suite", criterion_gradients);
    report(2, "mask-neutrality", criterion_mask_neutrality);
    report(3, "permutation-invariance", criterion_permutation);
    report(4, "shape-contracts", criterion_shapes);

    std::unique_ptr<Benchmark> bench;
    if (selected(5) || selected(6) || selected(7) || selected(8)) {
        try {
            bench = std::make_unique<Benchmark>(run_benchmark());
        } catch (const std::exception& e) {
            std::printf("  benchmark failed: %s\n", e.what());
        }
    }
    auto on_bench = [&](Outcome (*f)(const Benchmark&)) {
        return [&, f]() { return bench ? f(*bench) : Outcome{false, "benchmark did not run"}; };
    };
    report(5, "forecast-vs-mean-predictor", on_bench(criterion_forecasting));
    report(6, "embedding-ablation", on_bench(criterion_ablation));
    report(7, "query-init-robustness", on_bench(criterion_initialization));
    report(8, "sparsity-monotone", on_bench(criterion_sparsity));

    report(9, "cost-estimator", criterion_cost);
    report(10, "metric-oracles", criterion_metrics);
    report(11, "determinism", criterion_determinism);
    report(12, "plug-and-play", criterion_plug_and_play);

    std::printf("%d of %d criteria failed\n", failures, ran);
    return failures == 0 ? 0 : 1;
}
