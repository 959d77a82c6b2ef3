#pragma once

#include <cstdint>
#include <vector>

#include "cangat/graph.hpp"
#include "cangat/tensor.hpp"

namespace cangat {

// --- graph attention layer ---------------------------------------------------

struct GatHeadParams {
    Tensor weight; // in_dim x head_dim
    Tensor attn;   // (2*head_dim + 1) x 1: [dest | source | edge] slots
};

struct GatLayerParams {
    std::vector<GatHeadParams> heads;
    bool concat_heads = true;     // false: average head outputs
    bool use_edge_weight = true;  // feed log(1+w) into the attention score
};

// Edge list unpacked for tensor ops, with a weight-1 self-loop injected for
// every node that lacks one so each node has at least one in-neighbor.
struct EdgeArrays {
    std::vector<std::uint32_t> src;
    std::vector<std::uint32_t> dst;
    std::vector<double> log_weight; // log(1 + multiplicity)
};

EdgeArrays prepare_edges(const std::vector<GraphEdge>& edges, std::size_t num_nodes);

// Normalized attention coefficients recorded during a forward pass, one
// vector per head, indexed like EdgeArrays.
struct AttentionCapture {
    std::vector<std::vector<double>> per_head;
    std::vector<std::uint32_t> dst;
};

// One multi-head attention layer.  Hidden layers use ELU and concatenate
// heads; the final layer is linear and averages heads (set via params /
// final_layer).
Tensor gat_layer(const Tensor& x, const EdgeArrays& edges, const GatLayerParams& params,
                 bool final_layer, AttentionCapture* capture = nullptr);

// --- LSTM / Jumping-Knowledge -------------------------------------------------

struct LstmParams {
    Tensor wx; // d_in x 4*d_h, fused gates [input | forget | candidate | output]
    Tensor wh; // d_h x 4*d_h
    Tensor b;  // 1 x 4*d_h
    std::size_t hidden() const { return wh.rows(); }
};

struct LstmState {
    Tensor h;
    Tensor c;
};

LstmState lstm_cell(const Tensor& x_t, const LstmState& prev, const LstmParams& params);

struct JkParams {
    std::vector<Tensor> proj_w; // per layer: layer_width x d
    std::vector<Tensor> proj_b; // per layer: 1 x d
    LstmParams fwd;
    LstmParams bwd;
    Tensor out_w; // 2*d_h x 2*d_h
    Tensor out_b; // 1 x 2*d_h
};

// Treat each node's per-layer representations as a sequence: forward LSTM
// over layers 1..L, backward LSTM over layers L..1, concatenate the two
// terminal hidden states, then a linear projection.
Tensor jk_aggregate(const std::vector<Tensor>& layer_reprs, const JkParams& params);

// Column-wise mean over nodes of one graph.
Tensor global_mean_pool(const Tensor& node_embeddings);

// --- losses ---------------------------------------------------------------------

struct LossConfig {
    double alpha = 0.5;    // weight of the hard term in the distillation mix
    double tau = 2.0;      // softening temperature
    double gamma = 1.0;    // focal-loss focusing exponent
    bool use_focal = false;
};

// Temperature-softened class probabilities, row-wise.
Tensor soften(const Tensor& logits, double tau);

// Reference scalar form of the focal loss: -(1-p_t)^gamma * log(p_t).
double focal_loss(double p_t, double gamma);

// Mean cross-entropy of softmax(logits) against labels (0/1); focal-modulated
// with exponent gamma when use_focal.
Tensor hard_loss(const Tensor& logits, const std::vector<int>& labels, bool use_focal,
                 double gamma);

// alpha * hard + (1-alpha) * tau^2 * KL(soften(teacher) || soften(student)),
// averaged over the batch; no gradient flows into the teacher logits.
Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
               const std::vector<int>& labels, const LossConfig& cfg);

} // namespace cangat
