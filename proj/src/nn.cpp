#include "cangat/nn.hpp"

#include <cmath>

#include "cangat/error.hpp"

namespace cangat {

EdgeArrays prepare_edges(const std::vector<GraphEdge>& edges, std::size_t num_nodes) {
    if (num_nodes == 0) raise(Errc::EmptyGraph, "graph has no nodes");
    EdgeArrays ea;
    std::vector<char> has_self(num_nodes, 0);
    for (const GraphEdge& e : edges) {
        if (e.src >= num_nodes || e.dst >= num_nodes)
            raise(Errc::EdgeIndexOutOfRange, "edge endpoint outside node table");
        ea.src.push_back(e.src);
        ea.dst.push_back(e.dst);
        ea.log_weight.push_back(std::log1p(double(e.weight)));
        if (e.src == e.dst) has_self[e.src] = 1;
    }
    for (std::size_t v = 0; v < num_nodes; ++v) {
        if (!has_self[v]) {
            ea.src.push_back(static_cast<std::uint32_t>(v));
            ea.dst.push_back(static_cast<std::uint32_t>(v));
            ea.log_weight.push_back(std::log1p(1.0));
        }
    }
    return ea;
}

Tensor gat_layer(const Tensor& x, const EdgeArrays& edges, const GatLayerParams& params,
                 bool final_layer, AttentionCapture* capture) {
    if (params.heads.empty()) raise(Errc::ShapeMismatch, "gat_layer needs at least one head");
    const std::size_t n = x.rows();
    const std::size_t m = edges.src.size();
    if (m == 0) raise(Errc::EmptyGraph, "gat_layer needs at least one edge");

    Tensor edge_slot =
        params.use_edge_weight
            ? Tensor::from_data(m, 1, edges.log_weight)
            : Tensor::zeros(m, 1);
    if (capture) {
        capture->per_head.clear();
        capture->dst = edges.dst;
    }

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(params.heads.size());
    for (const GatHeadParams& head : params.heads) {
        const std::size_t d = head.weight.cols();
        if (head.attn.rows() != 2 * d + 1 || head.attn.cols() != 1)
            raise(Errc::ShapeMismatch, "attention vector must be (2*head_dim + 1) x 1");

        Tensor wh = matmul(x, head.weight);            // n x d
        Tensor dst_feat = gather_rows(wh, edges.dst);  // m x d
        Tensor src_feat = gather_rows(wh, edges.src);  // m x d
        Tensor scored = concat_cols({dst_feat, src_feat, edge_slot}); // m x (2d+1)
        Tensor score = leaky_relu(matmul(scored, head.attn), 0.2);    // m x 1
        Tensor alpha = segment_softmax(score, edges.dst, n);          // m x 1
        if (capture) capture->per_head.push_back(alpha.value());

        Tensor messages = mul(src_feat, alpha);        // column-broadcast weights
        head_outputs.push_back(segment_sum(messages, edges.dst, n));
    }

    Tensor combined;
    if (params.concat_heads) {
        combined = concat_cols(head_outputs);
    } else {
        combined = head_outputs[0];
        for (std::size_t h = 1; h < head_outputs.size(); ++h)
            combined = add(combined, head_outputs[h]);
        combined = scale(combined, 1.0 / double(head_outputs.size()));
    }
    return final_layer ? combined : elu(combined);
}

LstmState lstm_cell(const Tensor& x_t, const LstmState& prev, const LstmParams& params) {
    const std::size_t d = params.hidden();
    if (params.wx.cols() != 4 * d || params.b.cols() != 4 * d || params.wh.cols() != 4 * d)
        raise(Errc::ShapeMismatch, "LSTM parameter widths disagree");
    Tensor gates = add(add(matmul(x_t, params.wx), matmul(prev.h, params.wh)), params.b);
    Tensor i = sigmoid(slice_cols(gates, 0, d));
    Tensor f = sigmoid(slice_cols(gates, d, d));
    Tensor g = tanh_act(slice_cols(gates, 2 * d, d));
    Tensor o = sigmoid(slice_cols(gates, 3 * d, d));
    LstmState next;
    next.c = add(mul(f, prev.c), mul(i, g));
    next.h = mul(o, tanh_act(next.c));
    return next;
}

Tensor jk_aggregate(const std::vector<Tensor>& layer_reprs, const JkParams& params) {
    const std::size_t L = layer_reprs.size();
    if (L == 0) raise(Errc::EmptyLayerList, "jk_aggregate needs at least one layer");
    if (params.proj_w.size() != L || params.proj_b.size() != L)
        raise(Errc::ShapeMismatch, "one projection per layer required");

    const std::size_t n = layer_reprs[0].rows();
    std::vector<Tensor> seq;
    seq.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
        if (layer_reprs[l].rows() != n)
            raise(Errc::ShapeMismatch, "layer representations disagree on node count");
        seq.push_back(add(matmul(layer_reprs[l], params.proj_w[l]), params.proj_b[l]));
    }

    const std::size_t d_h = params.fwd.hidden();
    LstmState fstate{Tensor::zeros(n, d_h), Tensor::zeros(n, d_h)};
    for (std::size_t l = 0; l < L; ++l) fstate = lstm_cell(seq[l], fstate, params.fwd);

    LstmState bstate{Tensor::zeros(n, params.bwd.hidden()), Tensor::zeros(n, params.bwd.hidden())};
    for (std::size_t l = L; l-- > 0;) bstate = lstm_cell(seq[l], bstate, params.bwd);

    Tensor cat = concat_cols({fstate.h, bstate.h});
    return add(matmul(cat, params.out_w), params.out_b);
}

Tensor global_mean_pool(const Tensor& node_embeddings) {
    if (node_embeddings.rows() == 0) raise(Errc::EmptyGraph, "pooling over zero nodes");
    return col_mean(node_embeddings);
}

// --- losses -----------------------------------------------------------------

Tensor soften(const Tensor& logits, double tau) {
    if (tau <= 0.0) raise(Errc::NonPositiveTemperature, "temperature must be positive");
    return softmax(scale(logits, 1.0 / tau), 1);
}

double focal_loss(double p_t, double gamma) {
    if (!(p_t > 0.0) || p_t > 1.0)
        raise(Errc::ProbabilityOutOfRange, "p_t must lie in (0, 1]");
    if (gamma < 0.0) raise(Errc::ProbabilityOutOfRange, "gamma must be non-negative");
    return -std::pow(1.0 - p_t, gamma) * std::log(p_t);
}

namespace {

// B x num_classes one-hot selector for the true class of each sample.
Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes) {
    std::vector<double> data(labels.size() * num_classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || std::size_t(labels[i]) >= num_classes)
            raise(Errc::InvalidLabel, "label must be 0 or 1");
        data[i * num_classes + std::size_t(labels[i])] = 1.0;
    }
    return Tensor::from_data(labels.size(), num_classes, std::move(data));
}

} // namespace

Tensor hard_loss(const Tensor& logits, const std::vector<int>& labels, bool use_focal,
                 double gamma) {
    if (labels.empty() || logits.rows() != labels.size())
        raise(Errc::LengthMismatch, "one label per logit row required");
    Tensor logp = log_softmax(logits, 1);
    Tensor logp_true = row_sum(mul(logp, one_hot(labels, logits.cols()))); // B x 1
    if (!use_focal) return neg(reduce_mean(logp_true));
    Tensor p_true = exp(logp_true);
    Tensor focus = powc(sub(Tensor::full(labels.size(), 1, 1.0), p_true), gamma);
    return neg(reduce_mean(mul(focus, logp_true)));
}

Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
               const std::vector<int>& labels, const LossConfig& cfg) {
    if (cfg.tau <= 0.0) raise(Errc::NonPositiveTemperature, "temperature must be positive");
    if (student_logits.rows() != teacher_logits.rows() ||
        student_logits.cols() != teacher_logits.cols())
        raise(Errc::ShapeMismatch, "student and teacher logits must agree in shape");

    Tensor hard = hard_loss(student_logits, labels, cfg.use_focal, cfg.gamma);

    // Teacher side is data, not a differentiable input.
    Tensor t = detach(teacher_logits);
    Tensor t_log_soft = log_softmax(scale(t, 1.0 / cfg.tau), 1);
    Tensor t_soft = exp(t_log_soft);
    Tensor s_log_soft = log_softmax(scale(student_logits, 1.0 / cfg.tau), 1);

    Tensor kl_rows = row_sum(mul(t_soft, sub(t_log_soft, s_log_soft))); // B x 1
    Tensor soft = scale(reduce_mean(kl_rows), cfg.tau * cfg.tau);

    return add(scale(hard, cfg.alpha), scale(soft, 1.0 - cfg.alpha));
}

} // namespace cangat
