#include <map>
#include <set>
#include <sstream>

#include "cangat/dataset_io.hpp"
#include "cangat/error.hpp"
#include "cangat/graph.hpp"
#include "cangat/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cangat;

namespace {

CanMessage msg(double ts, std::uint16_t id, Label label = Label::Benign,
               std::uint8_t byte0 = 0, std::uint8_t dlc = 1) {
    CanMessage m;
    m.timestamp = ts;
    m.can_id = id;
    m.dlc = dlc;
    m.payload[0] = byte0;
    m.label = label;
    return m;
}

std::vector<CanMessage> random_window(Rng& rng, std::size_t count, std::uint16_t id_span) {
    std::vector<CanMessage> msgs;
    for (std::size_t i = 0; i < count; ++i) {
        CanMessage m;
        m.timestamp = 0.001 * double(i);
        m.can_id = static_cast<std::uint16_t>(rng.uniform_int(id_span));
        m.dlc = static_cast<std::uint8_t>(rng.uniform_int(9));
        for (int b = 0; b < m.dlc; ++b)
            m.payload[b] = static_cast<std::uint8_t>(rng.uniform_int(256));
        m.label = rng.uniform01() < 0.1 ? Label::Attack : Label::Benign;
        msgs.push_back(m);
    }
    return msgs;
}

} // namespace

TEST_SUITE("graph") {

TEST_CASE("hand-worked window: ids [1,2,1,1]") {
    std::vector<CanMessage> msgs = {
        msg(0.0, 1, Label::Benign, 0xFF, 8), // all-0xFF byte not set; byte0 only
        msg(0.1, 2, Label::Benign, 0x00, 0),
        msg(0.2, 1, Label::Benign, 0xFF, 1),
        msg(0.3, 1, Label::Benign, 0x00, 1),
    };
    // Make message 0 carry a full 0xFF payload (8 bytes).
    for (int b = 0; b < 8; ++b) msgs[0].payload[b] = 0xFF;

    WindowGraph g = build_window_graph(msgs.data(), msgs.size(), 17);
    CHECK(g.window_start_index == 17);
    CHECK(g.t_start == doctest::Approx(0.0));
    CHECK(g.t_end == doctest::Approx(0.3));
    REQUIRE(g.node_ids == std::vector<std::uint16_t>{1, 2});
    CHECK(g.label == Label::Benign);

    // Node 0 = id 1: 3 occurrences; payload means of {1.0, 255/2040, 0}.
    CHECK(g.x[0] == doctest::Approx(1.0 / 2047.0));
    CHECK(g.x[1] == doctest::Approx(3.0 / 4.0));
    CHECK(g.x[2] == doctest::Approx((1.0 + 255.0 / 2040.0 + 0.0) / 3.0));
    // Node 1 = id 2: 1 occurrence, empty payload.
    CHECK(g.x[3] == doctest::Approx(2.0 / 2047.0));
    CHECK(g.x[4] == doctest::Approx(1.0 / 4.0));
    CHECK(g.x[5] == doctest::Approx(0.0));

    // Consecutive pairs: 1->2, 2->1, 1->1 (one each), sorted by (src, dst).
    REQUIRE(g.edges.size() == 3);
    CHECK(g.edges[0].src == 0);
    CHECK(g.edges[0].dst == 0);
    CHECK(g.edges[0].weight == 1);
    CHECK(g.edges[1].src == 0);
    CHECK(g.edges[1].dst == 1);
    CHECK(g.edges[1].weight == 1);
    CHECK(g.edges[2].src == 1);
    CHECK(g.edges[2].dst == 0);
    CHECK(g.edges[2].weight == 1);
}

TEST_CASE("any attack message makes the window an attack window") {
    std::vector<CanMessage> msgs = {msg(0, 1), msg(1, 2, Label::Attack), msg(2, 3)};
    CHECK(build_window_graph(msgs.data(), msgs.size(), 0).label == Label::Attack);

    std::vector<CanMessage> benign = {msg(0, 1), msg(1, 2), msg(2, 3)};
    CHECK(build_window_graph(benign.data(), benign.size(), 0).label == Label::Benign);
}

TEST_CASE("unknown labels count as benign and are tallied") {
    std::vector<CanMessage> msgs = {msg(0, 1, Label::Unknown), msg(1, 2, Label::Unknown)};
    std::size_t unknown = 0;
    WindowGraph g = build_window_graph(msgs.data(), msgs.size(), 0, &unknown);
    CHECK(g.label == Label::Benign);
    CHECK(unknown == 2);
}

TEST_CASE("windows smaller than 2 messages are rejected") {
    std::vector<CanMessage> one = {msg(0, 1)};
    try {
        build_window_graph(one.data(), 1, 0);
        FAIL("expected Error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::WindowTooSmall);
    }
}

TEST_CASE("node_index finds ids and rejects absent ones") {
    std::vector<CanMessage> msgs = {msg(0, 5), msg(1, 9), msg(2, 5)};
    WindowGraph g = build_window_graph(msgs.data(), msgs.size(), 0);
    CHECK(g.node_index(5) == 0);
    CHECK(g.node_index(9) == 1);
    try {
        g.node_index(7);
        FAIL("expected Error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IdNotInWindow);
    }
}

TEST_CASE("conservation laws hold on random windows") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t count = 2 + rng.uniform_int(60);
        auto msgs = random_window(rng, count, 20);
        WindowGraph g = build_window_graph(msgs.data(), count, 0);

        std::uint64_t weight_sum = 0;
        for (const auto& e : g.edges) weight_sum += e.weight;
        CHECK(weight_sum == count - 1); // every consecutive pair lands in exactly one edge

        double count_sum = 0.0;
        for (std::size_t j = 0; j < g.num_nodes(); ++j)
            count_sum += g.x[j * kNodeFeatureDim + 1];
        CHECK(count_sum == doctest::Approx(1.0).epsilon(1e-12)); // sum of count/W

        for (std::size_t j = 0; j < g.num_nodes(); ++j) {
            CHECK(g.x[j * kNodeFeatureDim + 2] >= 0.0);
            CHECK(g.x[j * kNodeFeatureDim + 2] <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("edges match a brute-force pair count") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t count = 2 + rng.uniform_int(40);
        auto msgs = random_window(rng, count, 8);
        WindowGraph g = build_window_graph(msgs.data(), count, 0);

        std::map<std::pair<std::uint16_t, std::uint16_t>, std::uint64_t> expect;
        for (std::size_t i = 0; i + 1 < count; ++i)
            expect[{msgs[i].can_id, msgs[i + 1].can_id}] += 1;

        REQUIRE(g.edges.size() == expect.size());
        for (const auto& e : g.edges) {
            auto key = std::make_pair(g.node_ids[e.src], g.node_ids[e.dst]);
            REQUIRE(expect.count(key) == 1);
            CHECK(expect[key] == e.weight);
        }
    }
}

TEST_CASE("build_windows slides with the configured stride") {
    std::vector<CanMessage> trace;
    for (int i = 0; i < 10; ++i) trace.push_back(msg(double(i), std::uint16_t(i % 3)));

    WindowDataset ds = build_windows(trace, 4, 2);
    CHECK(ds.window == 4);
    CHECK(ds.stride == 2);
    REQUIRE(ds.graphs.size() == 4); // starts 0, 2, 4, 6
    CHECK(ds.graphs[0].window_start_index == 0);
    CHECK(ds.graphs[3].window_start_index == 6);

    // Non-overlapping default-style stride drops the ragged tail.
    WindowDataset tail = build_windows(trace, 4, 4);
    REQUIRE(tail.graphs.size() == 2); // starts 0, 4; messages 8..9 dropped
}

TEST_CASE("build_windows validates inputs") {
    std::vector<CanMessage> trace = {msg(0, 1), msg(1, 2)};
    auto code_of = [&](auto fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::IoError;
    };
    CHECK(code_of([&] { build_windows({}, 4, 4); }) == Errc::EmptyTrace);
    CHECK(code_of([&] { build_windows(trace, 1, 1); }) == Errc::WindowTooSmall);
    CHECK(code_of([&] { build_windows(trace, 2, 0); }) == Errc::ConfigError);
}

TEST_CASE("binary serialization round-trips bit-exactly") {
    Rng rng(31337);
    WindowDataset ds;
    ds.window = 50;
    ds.stride = 25;
    ds.unknown_treated_benign = 3;
    for (int k = 0; k < 5; ++k) {
        auto msgs = random_window(rng, 50, 30);
        ds.graphs.push_back(build_window_graph(msgs.data(), msgs.size(), k * 25));
    }

    std::string dir = scratch_dir("graph");
    std::string path = dir + "/ds.bin";
    write_graphs_binary(ds, path);
    WindowDataset back = read_graphs(path);

    CHECK(back.window == ds.window);
    CHECK(back.stride == ds.stride);
    CHECK(back.unknown_treated_benign == ds.unknown_treated_benign);
    REQUIRE(back.graphs.size() == ds.graphs.size());
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        const auto& a = ds.graphs[i];
        const auto& b = back.graphs[i];
        CHECK(a.node_ids == b.node_ids);
        CHECK(a.label == b.label);
        CHECK(a.window_start_index == b.window_start_index);
        REQUIRE(a.x.size() == b.x.size());
        for (std::size_t j = 0; j < a.x.size(); ++j) CHECK(a.x[j] == b.x[j]); // exact
        REQUIRE(a.edges.size() == b.edges.size());
        for (std::size_t j = 0; j < a.edges.size(); ++j) {
            CHECK(a.edges[j].src == b.edges[j].src);
            CHECK(a.edges[j].dst == b.edges[j].dst);
            CHECK(a.edges[j].weight == b.edges[j].weight);
        }
    }
}

TEST_CASE("text serialization round-trips bit-exactly") {
    Rng rng(99);
    WindowDataset ds;
    ds.window = 10;
    ds.stride = 10;
    auto msgs = random_window(rng, 10, 5);
    ds.graphs.push_back(build_window_graph(msgs.data(), msgs.size(), 0));

    std::stringstream buf;
    write_graphs_text(ds, buf);
    WindowDataset back = read_graphs(buf);

    REQUIRE(back.graphs.size() == 1);
    CHECK(back.window == 10);
    CHECK(back.graphs[0].node_ids == ds.graphs[0].node_ids);
    for (std::size_t j = 0; j < ds.graphs[0].x.size(); ++j)
        CHECK(back.graphs[0].x[j] == ds.graphs[0].x[j]); // %.17g preserves doubles
}

TEST_CASE("truncated binary files raise CorruptCheckpoint") {
    Rng rng(5);
    WindowDataset ds;
    ds.window = 8;
    ds.stride = 8;
    auto msgs = random_window(rng, 8, 4);
    ds.graphs.push_back(build_window_graph(msgs.data(), msgs.size(), 0));

    std::ostringstream full;
    write_graphs_binary(ds, full);
    std::string bytes = full.str();
    for (std::size_t cut : {bytes.size() / 4, bytes.size() / 2, bytes.size() - 3}) {
        std::istringstream in(bytes.substr(0, cut));
        try {
            read_graphs(in);
            FAIL("expected Error at cut ", cut);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::CorruptCheckpoint);
        }
    }
}

TEST_CASE("edge indices out of range are rejected on load") {
    // Craft a text dataset whose edge points past the node table.
    std::string text =
        "cangat-graphs v1\n"
        "window 4 stride 4 count 1 unknown 0\n"
        "graph 0 R 2 1\n"
        "node 001 0.1 0.5 0.0\n"
        "node 002 0.2 0.5 0.0\n"
        "edge 0 7 3\n";
    std::istringstream in(text);
    try {
        read_graphs(in);
        FAIL("expected Error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EdgeIndexOutOfRange);
    }
}

} // TEST_SUITE
