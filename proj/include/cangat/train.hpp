#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cangat/graph.hpp"
#include "cangat/model.hpp"

namespace cangat {

struct TrainConfig {
    double lr = 5e-4;
    std::size_t batch_size = 128;
    std::size_t epochs = 100;
    std::size_t warmup_epochs = 5; // hard-loss-only stage of distillation
    double alpha = 0.5;            // hard-loss weight in the distillation mix
    double tau = 2.0;              // distillation temperature
    double gamma_focal = 1.0;
    bool use_focal = false;
    std::size_t window = 50;
    std::size_t stride = 50;
    double val_fraction = 0.2;
    std::uint64_t seed = 1;
    bool chronological_split = false; // default: stratified random
    bool select_by_f1 = false;        // default: best validation accuracy
    double clip_norm = 0.0;           // 0 disables gradient clipping
};

struct EpochStats {
    std::size_t epoch = 0;      // 1-based
    std::string stage;          // "teacher", "warmup" or "distill"
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double val_f1 = 0.0;
};
using History = std::vector<EpochStats>;

// Per-parameter first/second moment estimates plus the shared step counter.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t t = 0;
};

// One bias-corrected Adam update over all named parameters; gradients are
// consumed (zeroed) by the caller afterwards.
void adam_step(const std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

// Stratified-by-label random split (or a chronological one), deterministic in
// the seed.  Guarantees a non-empty validation set and at least one training
// sample per present class.
SplitIndices split_dataset(const WindowDataset& data, double val_fraction, std::uint64_t seed,
                           bool chronological);

struct TrainResult {
    GatModel model; // parameters of the best validation epoch
    History history;
    std::size_t best_epoch = 0;
    double best_val_acc = 0.0;
    double best_val_f1 = 0.0;
};

TrainResult train_teacher(const WindowDataset& data, const ArchConfig& arch,
                          const TrainConfig& cfg);

// Stage 1 (epochs 1..warmup_epochs): hard loss only.  Stage 2: mixed
// hard/soft distillation loss against the frozen teacher.
TrainResult distill_student(const GatModel& teacher, const WindowDataset& data,
                            const ArchConfig& arch, const TrainConfig& cfg);

// CSV with a '#'-comment header carrying the config echo; columns
// epoch,stage,train_loss,val_loss,val_acc,val_f1.
void write_history_csv(const History& history, const std::string& path,
                       const std::string& config_json, std::uint64_t config_hash);

} // namespace cangat
