#include "cangat/eval.hpp"

#include <algorithm>
#include <cmath>

#include "cangat/error.hpp"
#include "cangat/nn.hpp"

namespace cangat {

ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        raise(Errc::LengthMismatch, "prediction and label counts differ");
    if (predictions.empty()) raise(Errc::EmptyDataset, "nothing to score");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool pred = predictions[i] != 0;
        const bool truth = labels[i] != 0;
        if (pred && truth) ++c.tp;
        else if (!pred && !truth) ++c.tn;
        else if (pred && !truth) ++c.fp;
        else ++c.fn;
    }
    return c;
}

Metrics compute_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) raise(Errc::EmptyCounts, "no observations in confusion counts");
    Metrics m;
    m.accuracy = double(c.tp + c.tn) / double(c.total());
    if (c.tp + c.fp > 0) {
        m.precision = double(c.tp) / double(c.tp + c.fp);
    } else {
        m.degenerate_precision = true;
    }
    if (c.tp + c.fn > 0) {
        m.recall = double(c.tp) / double(c.tp + c.fn);
    } else {
        m.degenerate_recall = true;
    }
    if (m.precision + m.recall > 0.0)
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

std::vector<double> predict_probs(const GatModel& model,
                                  const std::vector<const WindowGraph*>& graphs,
                                  std::size_t batch_size) {
    if (graphs.empty()) raise(Errc::EmptyDataset, "no graphs to score");
    if (batch_size == 0) batch_size = graphs.size();
    NoGradGuard guard;
    std::vector<double> probs;
    probs.reserve(graphs.size());
    for (std::size_t start = 0; start < graphs.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, graphs.size());
        std::vector<const WindowGraph*> chunk(graphs.begin() + std::ptrdiff_t(start),
                                              graphs.begin() + std::ptrdiff_t(end));
        BatchedGraph batch = make_batch(chunk);
        Tensor probs_t = softmax(model.forward(batch, /*training=*/false), 1);
        for (std::size_t i = 0; i < batch.num_graphs; ++i) probs.push_back(probs_t.at(i, 1));
    }
    return probs;
}

EvalReport evaluate(const GatModel& model, const WindowDataset& data, double threshold,
                    std::size_t batch_size) {
    if (data.graphs.empty()) raise(Errc::EmptyDataset, "dataset has no graphs");
    threshold = std::clamp(threshold, 0.0, 1.0);

    std::vector<const WindowGraph*> ptrs;
    std::vector<int> labels;
    ptrs.reserve(data.graphs.size());
    for (const WindowGraph& g : data.graphs) {
        ptrs.push_back(&g);
        labels.push_back(g.label == Label::Attack ? 1 : 0);
    }
    const std::vector<double> probs = predict_probs(model, ptrs, batch_size);

    std::vector<int> preds(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) preds[i] = probs[i] >= threshold ? 1 : 0;

    EvalReport report;
    report.counts = confusion(preds, labels);
    report.metrics = compute_metrics(report.counts);
    report.num_graphs = data.graphs.size();
    report.threshold = threshold;
    return report;
}

std::vector<Detection> detect_stream(const GatModel& model,
                                     const std::vector<CanMessage>& messages, std::size_t window,
                                     std::size_t stride, double threshold) {
    threshold = std::clamp(threshold, 0.0, 1.0);
    WindowDataset ds = build_windows(messages, window, stride);
    if (ds.graphs.empty()) raise(Errc::EmptyTrace, "trace shorter than one window");

    std::vector<const WindowGraph*> ptrs;
    ptrs.reserve(ds.graphs.size());
    for (const WindowGraph& g : ds.graphs) ptrs.push_back(&g);
    const std::vector<double> probs = predict_probs(model, ptrs);

    std::vector<Detection> out;
    out.reserve(ds.graphs.size());
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        Detection d;
        d.window_index = i;
        d.t_start = ds.graphs[i].t_start;
        d.t_end = ds.graphs[i].t_end;
        d.prob_attack = probs[i];
        d.verdict = probs[i] >= threshold;
        out.push_back(d);
    }
    return out;
}

} // namespace cangat
