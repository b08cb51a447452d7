#include <cstdio>
#include <filesystem>

#include "quite/errors.hpp"
#include "quite/harness.hpp"

namespace quite::harness {

std::string cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& config_hash, const std::vector<std::string>& header)
    : path_(path), width_(header.size()), out_(std::make_unique<std::ofstream>(path, std::ios::binary)) {
    if (!*out_) throw ValidationError("cannot write '" + path + "'");
    *out_ << "# config-hash: " << config_hash << "\n";
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) {
        throw DimensionError(path_ + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(width_));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) *out_ << (i ? "," : "") << cells[i];
    *out_ << "\n";
    if (!*out_) throw ValidationError("write failed for '" + path_ + "'");
}

RunArtifacts collect_artifacts(const std::string& run_id, const TrainResult& training, const model::Forecaster& model,
                               const PreparedData& data, std::size_t batch_size) {
    RunArtifacts run;
    run.run_id = run_id;
    run.curve = training.curve;
    if (!model.config().classifier()) run.trace = predict_splits(model, data, data.test, batch_size, false);

    NoGradGuard guard;
    const bool patched = model.config().patched();
    for (std::size_t start = 0; start < data.test.size(); start += batch_size) {
        std::vector<const data::ImtsInstance*> histories;
        for (std::size_t i = start; i < std::min(data.test.size(), start + batch_size); ++i)
            histories.push_back(&data.test[i].history);
        const data::PaddedBatch x = patched ? data::batch_pad(histories, data.patches, data.scale)
                                            : data::batch_pad(histories, data.scale);
        const Tensor e = model.embed(x).embedding;
        const std::size_t M = patched ? e.dim(1) : 1, N = e.dim(-2), D = e.dim(-1);
        const auto values = e.data();
        for (std::size_t b = 0; b < histories.size(); ++b)
            for (std::size_t m = 0; m < M; ++m)
                for (std::size_t n = 0; n < N; ++n) {
                    RunArtifacts::EmbeddingRow row;
                    row.instance = histories[b]->id;
                    row.patch = m;
                    row.variable = n;
                    const std::size_t off = ((b * M + m) * N + n) * D;
                    row.values.assign(values.begin() + off, values.begin() + off + D);
                    run.embeddings.push_back(std::move(row));
                }
    }
    return run;
}

std::vector<std::string> emit_plots(const RunArtifacts& run, const std::string& dir, const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    std::vector<std::string> written;

    const std::string loss_path = (base / (run.run_id + "_loss.csv")).string();
    {
        CsvWriter csv(loss_path, config_hash, {"epoch", "train_loss", "val_loss"});
        for (const auto& e : run.curve) csv.row({std::to_string(e.epoch), cell(e.train_loss), cell(e.val_loss)});
    }
    written.push_back(loss_path);

    if (!run.trace.empty()) {
        const std::string path = (base / (run.run_id + "_trace.csv")).string();
        CsvWriter csv(path, config_hash, {"instance", "variable", "timestamp", "truth", "prediction"});
        for (const auto& p : run.trace)
            csv.row({p.instance, std::to_string(p.variable), cell(p.time), cell(p.truth), cell(p.prediction)});
        written.push_back(path);
    }
    if (!run.embeddings.empty()) {
        const std::string path = (base / (run.run_id + "_embeddings.csv")).string();
        std::vector<std::string> header{"instance", "patch", "variable"};
        const std::size_t D = run.embeddings.front().values.size();
        for (std::size_t d = 0; d < D; ++d) header.push_back("e" + std::to_string(d));
        CsvWriter csv(path, config_hash, header);
        for (const auto& r : run.embeddings) {
            std::vector<std::string> cells{r.instance, std::to_string(r.patch), std::to_string(r.variable)};
            for (double v : r.values) cells.push_back(cell(v));
            csv.row(cells);
        }
        written.push_back(path);
    }
    return written;
}

}  // namespace quite::harness
