#pragma once

#include <cstdint>
#include <vector>

#include "cangat/can.hpp"
#include "cangat/graph.hpp"
#include "cangat/model.hpp"

namespace cangat {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t total() const { return tp + tn + fp + fn; }
};

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Set when the corresponding denominator was zero and the value was
    // defined as 0 instead of NaN.
    bool degenerate_precision = false;
    bool degenerate_recall = false;
};

// Positive class is attack (1).
ConfusionCounts confusion(const std::vector<int>& predictions, const std::vector<int>& labels);
Metrics compute_metrics(const ConfusionCounts& c);

// Attack probability (softmax over the two logits) for every graph, computed
// in eval mode in batches; order follows the dataset.
std::vector<double> predict_probs(const GatModel& model, const std::vector<const WindowGraph*>& graphs,
                                  std::size_t batch_size = 128);

// Metrics of thresholded predictions against the dataset labels.
struct EvalReport {
    ConfusionCounts counts;
    Metrics metrics;
    std::size_t num_graphs = 0;
    double threshold = 0.5;
};
EvalReport evaluate(const GatModel& model, const WindowDataset& data, double threshold = 0.5,
                    std::size_t batch_size = 128);

struct Detection {
    std::uint64_t window_index = 0; // ordinal of the window in the stream
    double t_start = 0.0;
    double t_end = 0.0;
    double prob_attack = 0.0;
    bool verdict = false;
};

// Windowed scoring over a raw message stream; threshold is clamped to [0,1].
std::vector<Detection> detect_stream(const GatModel& model, const std::vector<CanMessage>& messages,
                                     std::size_t window, std::size_t stride, double threshold);

} // namespace cangat
