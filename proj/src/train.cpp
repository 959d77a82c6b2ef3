#include "cangat/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cangat/error.hpp"
#include "cangat/eval.hpp"
#include "cangat/nn.hpp"

namespace cangat {

void adam_step(const std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), {});
        state.v.assign(params.size(), {});
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(beta2, double(state.t));

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        const std::vector<double>& g = p.grad();
        std::vector<double>& value = p.mutable_value();
        std::vector<double>& m = state.m[i];
        std::vector<double>& v = state.v[i];
        if (m.size() != g.size()) {
            m.assign(g.size(), 0.0);
            v.assign(g.size(), 0.0);
        }
        for (std::size_t k = 0; k < g.size(); ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            value[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

namespace {

void fisher_yates(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.uniform_int(i)]);
}

int label_of(const WindowGraph& g) { return g.label == Label::Attack ? 1 : 0; }

} // namespace

SplitIndices split_dataset(const WindowDataset& data, double val_fraction, std::uint64_t seed,
                           bool chronological) {
    const std::size_t n = data.graphs.size();
    if (n == 0) raise(Errc::EmptyDataset, "dataset has no graphs");
    if (n < 2) raise(Errc::EmptyDataset, "need at least 2 graphs to split");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        raise(Errc::ConfigError, "val_fraction must lie in (0, 1)");

    SplitIndices split;
    if (chronological) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return data.graphs[a].window_start_index < data.graphs[b].window_start_index;
        });
        std::size_t n_val = static_cast<std::size_t>(std::llround(double(n) * val_fraction));
        n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
        split.train.assign(order.begin(), order.end() - std::ptrdiff_t(n_val));
        split.val.assign(order.end() - std::ptrdiff_t(n_val), order.end());
    } else {
        std::vector<std::size_t> by_class[2];
        for (std::size_t i = 0; i < n; ++i) by_class[label_of(data.graphs[i])].push_back(i);
        Rng rng(Rng::derive(seed, 0x5B17));
        for (auto& cls : by_class) {
            fisher_yates(cls, rng);
            std::size_t n_val =
                static_cast<std::size_t>(std::llround(double(cls.size()) * val_fraction));
            if (n_val >= cls.size() && !cls.empty()) n_val = cls.size() - 1;
            split.val.insert(split.val.end(), cls.begin(), cls.begin() + std::ptrdiff_t(n_val));
            split.train.insert(split.train.end(), cls.begin() + std::ptrdiff_t(n_val), cls.end());
        }
        if (split.val.empty()) {
            // Tiny dataset: steal one sample so validation is never empty.
            split.val.push_back(split.train.back());
            split.train.pop_back();
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    if (split.train.empty()) raise(Errc::EmptyDataset, "training split ended up empty");
    return split;
}

namespace {

struct ValScore {
    double loss = 0.0;
    double acc = 0.0;
    double f1 = 0.0;
};

ValScore score_validation(const GatModel& model, const WindowDataset& data,
                          const std::vector<std::size_t>& val, const TrainConfig& cfg) {
    NoGradGuard guard;
    ValScore out;
    std::vector<int> preds, labels;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < val.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(start + cfg.batch_size, val.size());
        std::vector<const WindowGraph*> chunk;
        for (std::size_t k = start; k < end; ++k) chunk.push_back(&data.graphs[val[k]]);
        BatchedGraph batch = make_batch(chunk);
        Tensor logits = model.forward(batch, /*training=*/false);
        loss_sum +=
            hard_loss(logits, batch.labels, cfg.use_focal, cfg.gamma_focal).item() *
            double(batch.num_graphs);
        Tensor probs = softmax(logits, 1);
        for (std::size_t i = 0; i < batch.num_graphs; ++i) {
            preds.push_back(probs.at(i, 1) >= 0.5 ? 1 : 0);
            labels.push_back(batch.labels[i]);
        }
    }
    out.loss = loss_sum / double(val.size());
    Metrics m = compute_metrics(confusion(preds, labels));
    out.acc = m.accuracy;
    out.f1 = m.f1;
    return out;
}

// Global-norm gradient clipping; a no-op when clip <= 0.
void clip_gradients(const std::vector<std::pair<std::string, Tensor>>& params, double clip) {
    if (clip <= 0.0) return;
    double sq = 0.0;
    for (const auto& [name, p] : params)
        for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm <= clip) return;
    const double factor = clip / norm;
    for (auto& [name, p] : params) {
        Tensor t = p;
        for (double& g : t.mutable_grad()) g *= factor;
    }
}

TrainResult run_training(GatModel model, const WindowDataset& data, const TrainConfig& cfg,
                         const GatModel* teacher) {
    if (data.graphs.empty()) raise(Errc::EmptyDataset, "dataset has no graphs");

    TrainResult result;
    if (cfg.epochs == 0) {
        result.model = std::move(model);
        return result;
    }

    const SplitIndices split = split_dataset(data, cfg.val_fraction, cfg.seed,
                                             cfg.chronological_split);
    {
        bool has[2] = {false, false};
        for (std::size_t i : split.train) has[label_of(data.graphs[i])] = true;
        if (!has[0] || !has[1])
            raise(Errc::SingleClassDataset, "training split needs both classes");
    }

    const auto& params = model.named_params();
    AdamState adam;
    LossConfig loss_cfg;
    loss_cfg.alpha = cfg.alpha;
    loss_cfg.tau = cfg.tau;
    loss_cfg.gamma = cfg.gamma_focal;
    loss_cfg.use_focal = cfg.use_focal;

    double best_metric = -1.0;
    std::vector<std::vector<double>> best_values = model.snapshot_values();
    result.best_epoch = 0;

    std::vector<std::size_t> order = split.train;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const bool distill_stage = teacher != nullptr && epoch > cfg.warmup_epochs;
        Rng shuffle_rng(Rng::derive(cfg.seed, 0xE000000 + epoch));
        fisher_yates(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            std::vector<const WindowGraph*> chunk;
            for (std::size_t k = start; k < end; ++k) chunk.push_back(&data.graphs[order[k]]);
            BatchedGraph batch = make_batch(chunk);

            for (const auto& [name, p] : params) p.zero_grad();
            Rng dropout_rng(Rng::derive(Rng::derive(cfg.seed, 0xD000000 + epoch), batch_index));
            Tensor logits = model.forward(batch, /*training=*/true, &dropout_rng);

            Tensor loss;
            if (distill_stage) {
                Tensor teacher_logits;
                {
                    NoGradGuard guard;
                    teacher_logits = teacher->forward(batch, /*training=*/false);
                }
                loss = kd_loss(logits, teacher_logits, batch.labels, loss_cfg);
            } else {
                loss = hard_loss(logits, batch.labels, cfg.use_focal, cfg.gamma_focal);
            }
            loss.backward();
            clip_gradients(params, cfg.clip_norm);
            adam_step(params, adam, cfg.lr);
            loss_sum += loss.item() * double(batch.num_graphs);
        }

        const ValScore val = score_validation(model, data, split.val, cfg);
        EpochStats stats;
        stats.epoch = epoch;
        stats.stage = teacher == nullptr ? "teacher" : (distill_stage ? "distill" : "warmup");
        stats.train_loss = loss_sum / double(order.size());
        stats.val_loss = val.loss;
        stats.val_acc = val.acc;
        stats.val_f1 = val.f1;
        result.history.push_back(stats);

        const double metric = cfg.select_by_f1 ? val.f1 : val.acc;
        if (metric > best_metric) {
            best_metric = metric;
            best_values = model.snapshot_values();
            result.best_epoch = epoch;
            result.best_val_acc = val.acc;
            result.best_val_f1 = val.f1;
        }
    }

    model.restore_values(best_values);
    result.model = std::move(model);
    return result;
}

} // namespace

TrainResult train_teacher(const WindowDataset& data, const ArchConfig& arch,
                          const TrainConfig& cfg) {
    return run_training(build_model(arch, cfg.seed), data, cfg, nullptr);
}

TrainResult distill_student(const GatModel& teacher, const WindowDataset& data,
                            const ArchConfig& arch, const TrainConfig& cfg) {
    if (!teacher.initialized()) raise(Errc::InvalidArch, "teacher model has no parameters");
    return run_training(build_model(arch, cfg.seed), data, cfg, &teacher);
}

void write_history_csv(const History& history, const std::string& path,
                       const std::string& config_json, std::uint64_t config_hash) {
    std::ofstream out(path);
    if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
    char buf[160];
    std::snprintf(buf, sizeof(buf), "# config_hash %016llx\n",
                  static_cast<unsigned long long>(config_hash));
    out << "# training history v1\n" << buf;
    if (!config_json.empty()) out << "# config " << config_json << "\n";
    out << "epoch,stage,train_loss,val_loss,val_acc,val_f1\n";
    for (const EpochStats& e : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%s,%.12g,%.12g,%.12g,%.12g\n", e.epoch,
                      e.stage.c_str(), e.train_loss, e.val_loss, e.val_acc, e.val_f1);
        out << buf;
    }
    if (!out) raise(Errc::IoError, "failed writing history '" + path + "'");
}

} // namespace cangat
