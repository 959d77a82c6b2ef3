#include "cangat/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cangat/error.hpp"
#include "wire.hpp"

namespace cangat {

namespace {

constexpr char kMagic[4] = {'C', 'G', 'G', 'R'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kWhat = "graph dataset";

using wire::put_f64;
using wire::put_u16;
using wire::put_u32;
using wire::put_u64;

std::uint16_t get_u16(std::istream& in) { return wire::get_u16(in, kWhat); }
std::uint32_t get_u32(std::istream& in) { return wire::get_u32(in, kWhat); }
std::uint64_t get_u64(std::istream& in) { return wire::get_u64(in, kWhat); }
double get_f64(std::istream& in) { return wire::get_f64(in, kWhat); }

char label_letter(Label l) {
    switch (l) {
        case Label::Benign: return 'R';
        case Label::Attack: return 'T';
        default: return 'U';
    }
}

Label letter_label(char c) {
    switch (c) {
        case 'R': return Label::Benign;
        case 'T': return Label::Attack;
        case 'U': return Label::Unknown;
        default: raise(Errc::InvalidLabel, std::string("bad label letter '") + c + "'");
    }
}

WindowDataset read_graphs_binary(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        raise(Errc::CorruptCheckpoint, "not a graph dataset file");
    const std::uint32_t version = get_u32(in);
    if (version != kVersion)
        raise(Errc::VersionMismatch,
              "graph file version " + std::to_string(version) + ", expected " +
                  std::to_string(kVersion));

    WindowDataset ds;
    ds.window = get_u64(in);
    ds.stride = get_u64(in);
    const std::uint64_t count = get_u64(in);
    ds.unknown_treated_benign = get_u64(in);

    ds.graphs.reserve(count);
    for (std::uint64_t gi = 0; gi < count; ++gi) {
        WindowGraph g;
        g.window_start_index = get_u64(in);
        char lab;
        in.read(&lab, 1);
        if (!in) raise(Errc::CorruptCheckpoint, "graph file truncated");
        g.label = letter_label(lab);

        const std::uint64_t n = get_u64(in);
        if (n == 0) raise(Errc::EmptyGraph, "graph with zero nodes");
        g.node_ids.resize(n);
        for (auto& id : g.node_ids) id = get_u16(in);
        g.x.resize(n * kNodeFeatureDim);
        for (auto& v : g.x) v = get_f64(in);

        const std::uint64_t m = get_u64(in);
        g.edges.resize(m);
        for (auto& e : g.edges) {
            e.src = get_u32(in);
            e.dst = get_u32(in);
            e.weight = get_u64(in);
            if (e.src >= n || e.dst >= n)
                raise(Errc::EdgeIndexOutOfRange, "edge endpoint outside node table");
        }
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

WindowDataset read_graphs_text(std::istream& in) {
    std::string tok;
    std::string version;
    if (!(in >> tok >> version) || tok != "cangat-graphs" || version != "v1")
        raise(Errc::CorruptCheckpoint, "not a graph dataset file");

    WindowDataset ds;
    std::uint64_t count = 0;
    in >> tok >> ds.window >> tok >> ds.stride >> tok >> count >> tok >>
        ds.unknown_treated_benign;
    if (!in) raise(Errc::CorruptCheckpoint, "bad graph text header");

    for (std::uint64_t gi = 0; gi < count; ++gi) {
        WindowGraph g;
        std::uint64_t n = 0, m = 0;
        char lab;
        if (!(in >> tok) || tok != "graph")
            raise(Errc::CorruptCheckpoint, "expected 'graph' record");
        in >> g.window_start_index >> lab >> n >> m;
        if (!in) raise(Errc::CorruptCheckpoint, "bad graph record header");
        if (n == 0) raise(Errc::EmptyGraph, "graph with zero nodes");
        g.label = letter_label(lab);

        g.node_ids.resize(n);
        g.x.resize(n * kNodeFeatureDim);
        for (std::uint64_t j = 0; j < n; ++j) {
            unsigned id = 0;
            if (!(in >> tok) || tok != "node")
                raise(Errc::CorruptCheckpoint, "expected 'node' record");
            in >> std::hex >> id >> std::dec;
            g.node_ids[j] = static_cast<std::uint16_t>(id);
            for (std::size_t f = 0; f < kNodeFeatureDim; ++f) in >> g.x[j * kNodeFeatureDim + f];
            if (!in) raise(Errc::CorruptCheckpoint, "bad node record");
        }
        g.edges.resize(m);
        for (auto& e : g.edges) {
            if (!(in >> tok) || tok != "edge")
                raise(Errc::CorruptCheckpoint, "expected 'edge' record");
            in >> e.src >> e.dst >> e.weight;
            if (!in) raise(Errc::CorruptCheckpoint, "bad edge record");
            if (e.src >= n || e.dst >= n)
                raise(Errc::EdgeIndexOutOfRange, "edge endpoint outside node table");
        }
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

} // namespace

void write_graphs_binary(const WindowDataset& ds, std::ostream& out) {
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, ds.window);
    put_u64(out, ds.stride);
    put_u64(out, ds.graphs.size());
    put_u64(out, ds.unknown_treated_benign);
    for (const WindowGraph& g : ds.graphs) {
        put_u64(out, g.window_start_index);
        const char lab = label_letter(g.label);
        out.write(&lab, 1);
        put_u64(out, g.node_ids.size());
        for (std::uint16_t id : g.node_ids) put_u16(out, id);
        for (double v : g.x) put_f64(out, v);
        put_u64(out, g.edges.size());
        for (const GraphEdge& e : g.edges) {
            put_u32(out, e.src);
            put_u32(out, e.dst);
            put_u64(out, e.weight);
        }
    }
    if (!out) raise(Errc::IoError, "failed writing graph dataset");
}

void write_graphs_binary(const WindowDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
    write_graphs_binary(ds, out);
}

void write_graphs_text(const WindowDataset& ds, std::ostream& out) {
    char buf[64];
    out << "cangat-graphs v1\n";
    out << "window " << ds.window << " stride " << ds.stride << " count " << ds.graphs.size()
        << " unknown " << ds.unknown_treated_benign << "\n";
    for (const WindowGraph& g : ds.graphs) {
        out << "graph " << g.window_start_index << ' ' << label_letter(g.label) << ' '
            << g.node_ids.size() << ' ' << g.edges.size() << "\n";
        for (std::size_t j = 0; j < g.node_ids.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "node %03X", unsigned(g.node_ids[j]));
            out << buf;
            for (std::size_t f = 0; f < kNodeFeatureDim; ++f) {
                std::snprintf(buf, sizeof(buf), " %.17g", g.x[j * kNodeFeatureDim + f]);
                out << buf;
            }
            out << "\n";
        }
        for (const GraphEdge& e : g.edges)
            out << "edge " << e.src << ' ' << e.dst << ' ' << e.weight << "\n";
    }
    if (!out) raise(Errc::IoError, "failed writing graph dataset");
}

void write_graphs_text(const WindowDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
    write_graphs_text(ds, out);
}

WindowDataset read_graphs(std::istream& in) {
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    if (!in && in.gcount() == 0) raise(Errc::CorruptCheckpoint, "empty graph dataset");
    in.clear();
    in.seekg(0);
    if (std::memcmp(magic, kMagic, 4) == 0) return read_graphs_binary(in);
    return read_graphs_text(in);
}

WindowDataset read_graphs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::IoError, "cannot open graph dataset '" + path + "'");
    return read_graphs(in);
}

} // namespace cangat
