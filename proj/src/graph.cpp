#include "cangat/graph.hpp"

#include <algorithm>
#include <map>

#include "cangat/error.hpp"

namespace cangat {

std::size_t WindowGraph::node_index(std::uint16_t can_id) const {
    auto it = std::lower_bound(node_ids.begin(), node_ids.end(), can_id);
    if (it == node_ids.end() || *it != can_id)
        raise(Errc::IdNotInWindow, "id 0x" + std::to_string(can_id) + " has no node");
    return static_cast<std::size_t>(it - node_ids.begin());
}

WindowGraph build_window_graph(const CanMessage* msgs, std::size_t count,
                               std::uint64_t window_start_index,
                               std::size_t* unknown_counter) {
    if (count < 2) raise(Errc::WindowTooSmall, "a window needs at least 2 messages");

    WindowGraph g;
    g.window_start_index = window_start_index;
    g.t_start = msgs[0].timestamp;
    g.t_end = msgs[count - 1].timestamp;

    // Unique ids, ascending.
    g.node_ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) g.node_ids.push_back(msgs[i].can_id);
    std::sort(g.node_ids.begin(), g.node_ids.end());
    g.node_ids.erase(std::unique(g.node_ids.begin(), g.node_ids.end()), g.node_ids.end());

    const std::size_t n = g.node_ids.size();
    std::vector<std::uint64_t> occurrences(n, 0);
    std::vector<double> payload_sum(n, 0.0);

    bool any_attack = false;
    for (std::size_t i = 0; i < count; ++i) {
        const CanMessage& m = msgs[i];
        const std::size_t j = g.node_index(m.can_id);
        occurrences[j] += 1;
        double bytes = 0.0;
        for (int b = 0; b < m.dlc; ++b) bytes += double(m.payload[b]);
        payload_sum[j] += bytes / (8.0 * 255.0);
        if (m.label == Label::Attack) any_attack = true;
        if (m.label == Label::Unknown && unknown_counter) ++*unknown_counter;
    }
    g.label = any_attack ? Label::Attack : Label::Benign;

    g.x.resize(n * kNodeFeatureDim);
    for (std::size_t j = 0; j < n; ++j) {
        g.x[j * kNodeFeatureDim + 0] = double(g.node_ids[j]) / double(kMaxCanId);
        g.x[j * kNodeFeatureDim + 1] = double(occurrences[j]) / double(count);
        g.x[j * kNodeFeatureDim + 2] = payload_sum[j] / double(occurrences[j]);
    }

    // Consecutive-pair edges with multiplicity; self-edges arise naturally
    // when the same id appears twice in a row.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> weight;
    for (std::size_t i = 0; i + 1 < count; ++i) {
        auto src = static_cast<std::uint32_t>(g.node_index(msgs[i].can_id));
        auto dst = static_cast<std::uint32_t>(g.node_index(msgs[i + 1].can_id));
        weight[{src, dst}] += 1;
    }
    g.edges.reserve(weight.size());
    for (const auto& [key, w] : weight) g.edges.push_back({key.first, key.second, w});
    return g;
}

WindowDataset build_windows(const std::vector<CanMessage>& trace, std::size_t window,
                            std::size_t stride) {
    if (trace.empty()) raise(Errc::EmptyTrace, "trace has no messages");
    if (window < 2) raise(Errc::WindowTooSmall, "window must be at least 2 messages");
    if (stride < 1) raise(Errc::ConfigError, "stride must be at least 1");

    WindowDataset ds;
    ds.window = window;
    ds.stride = stride;
    for (std::size_t start = 0; start + window <= trace.size(); start += stride)
        ds.graphs.push_back(build_window_graph(trace.data() + start, window, start,
                                               &ds.unknown_treated_benign));
    return ds;
}

} // namespace cangat
