#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cangat/can.hpp"

namespace cangat {

// Number of features per node: [ id/2047, count/window, mean normalized payload ].
constexpr std::size_t kNodeFeatureDim = 3;

struct GraphEdge {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    std::uint64_t weight = 0; // multiplicity of the (src, dst) consecutive pair
};

// A message-sequence window turned into a directed graph.  Nodes are the
// unique arbitration ids seen in the window (ascending); an edge src->dst with
// weight w means id[src] was immediately followed by id[dst] w times.
struct WindowGraph {
    std::vector<std::uint16_t> node_ids; // ascending, unique
    std::vector<double> x;               // num_nodes x kNodeFeatureDim, row-major
    std::vector<GraphEdge> edges;        // sorted by (src, dst)
    Label label = Label::Benign;
    std::uint64_t window_start_index = 0; // index of the first message in the trace

    // Not serialized; useful when mapping detections back to time.
    double t_start = 0.0;
    double t_end = 0.0;

    std::size_t num_nodes() const { return node_ids.size(); }
    std::size_t node_index(std::uint16_t can_id) const; // raises IdNotInWindow
};

struct WindowDataset {
    std::size_t window = 0;
    std::size_t stride = 0;
    std::vector<WindowGraph> graphs;
    // Messages with Label::Unknown counted as benign during window labeling.
    std::size_t unknown_treated_benign = 0;
};

// Build the graph for one window of `count` consecutive messages.
WindowGraph build_window_graph(const CanMessage* msgs, std::size_t count,
                               std::uint64_t window_start_index,
                               std::size_t* unknown_counter = nullptr);

// Slide a window of `window` messages over the trace with the given stride.
// Trailing messages that do not fill a whole window are dropped.
WindowDataset build_windows(const std::vector<CanMessage>& trace, std::size_t window,
                            std::size_t stride);

} // namespace cangat
