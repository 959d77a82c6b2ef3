#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cangat/graph.hpp"
#include "cangat/nn.hpp"
#include "cangat/rng.hpp"
#include "cangat/tensor.hpp"

namespace cangat {

struct ArchConfig {
    std::size_t gat_layers = 5;
    std::size_t heads = 8;
    std::size_t hidden = 32;
    std::size_t linear_layers = 3;
    double dropout = 0.2;
    std::size_t in_dim = kNodeFeatureDim;
    std::size_t out_dim = 2;
    // LSTM width of the layer aggregator; kept at hidden/4 so the deep model
    // stays dominated by its attention stack.
    std::size_t jk_hidden = 8;
    bool edge_weight_attention = true;

    bool operator==(const ArchConfig&) const = default;
};

ArchConfig teacher_arch(); // 5 layers, 8 heads, 32 hidden, 3 linear
ArchConfig student_arch(); // 2 layers, 4 heads, 32 hidden, 3 linear

// Disjoint union of window graphs: one big node table plus a node->graph map
// so pooling can split it back apart.
struct BatchedGraph {
    Tensor x; // total_nodes x in_dim
    EdgeArrays edges;
    std::vector<std::uint32_t> graph_of_node;
    std::size_t num_graphs = 0;
    std::vector<int> labels; // 1 = attack
};

BatchedGraph make_batch(const std::vector<const WindowGraph*>& graphs);
BatchedGraph make_batch(const WindowGraph& graph);

class GatModel {
public:
    GatModel() = default;

    const ArchConfig& arch() const { return arch_; }
    bool initialized() const { return !named_params_.empty(); }

    // Stable registration order; the same names appear in checkpoints.
    const std::vector<std::pair<std::string, Tensor>>& named_params() const {
        return named_params_;
    }
    std::size_t parameter_count() const;

    // num_graphs x out_dim logits.  In training mode dropout draws from rng
    // (required when arch.dropout > 0); eval mode never touches it.
    // `captures` (optional) receives per-GAT-layer attention coefficients.
    Tensor forward(const BatchedGraph& batch, bool training, Rng* rng = nullptr,
                   std::vector<AttentionCapture>* captures = nullptr) const;

    // Deep copy of all parameter values (snapshot/restore for best-epoch
    // selection).
    std::vector<std::vector<double>> snapshot_values() const;
    void restore_values(const std::vector<std::vector<double>>& values);

private:
    friend GatModel build_model(const ArchConfig&, std::uint64_t);
    friend GatModel model_from_params(const ArchConfig&,
                                      const std::vector<std::pair<std::string, Tensor>>&);

    void register_param(const std::string& name, const Tensor& t);

    ArchConfig arch_;
    std::vector<GatLayerParams> gat_;
    JkParams jk_;
    std::vector<Tensor> head_w_;
    std::vector<Tensor> head_b_;
    std::vector<std::pair<std::string, Tensor>> named_params_;
};

// Glorot-uniform weights, zero biases, reproducible from the seed alone.
GatModel build_model(const ArchConfig& arch, std::uint64_t seed);

// Rebuild a model around existing parameter tensors (checkpoint loading);
// names and shapes must match what build_model would produce.
GatModel model_from_params(const ArchConfig& arch,
                           const std::vector<std::pair<std::string, Tensor>>& params);

// --- checkpointing -----------------------------------------------------------

struct CheckpointMeta {
    std::uint64_t epoch = 0;
    double val_acc = 0.0;
    double val_f1 = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::uint64_t window = 0;
    std::uint64_t stride = 0;
    std::string config_json; // effective run configuration echo
};

struct LoadedModel {
    GatModel model;
    CheckpointMeta meta;
};

void save_checkpoint(const GatModel& model, const CheckpointMeta& meta, const std::string& path);
LoadedModel load_checkpoint(const std::string& path);

// Raises ArchMismatch unless the loaded architecture equals `expected`.
void require_arch(const LoadedModel& loaded, const ArchConfig& expected);

} // namespace cangat
