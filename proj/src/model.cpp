#include "cangat/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cangat/error.hpp"
#include "wire.hpp"

namespace cangat {

ArchConfig teacher_arch() {
    ArchConfig a;
    a.gat_layers = 5;
    a.heads = 8;
    a.hidden = 32;
    a.linear_layers = 3;
    a.dropout = 0.2;
    return a;
}

ArchConfig student_arch() {
    ArchConfig a = teacher_arch();
    a.gat_layers = 2;
    a.heads = 4;
    return a;
}

namespace {

void validate_arch(const ArchConfig& a) {
    if (a.gat_layers < 1 || a.heads < 1 || a.hidden < 1 || a.linear_layers < 1 ||
        a.in_dim < 1 || a.out_dim < 2 || a.jk_hidden < 1)
        raise(Errc::InvalidArch, "all architecture dimensions must be positive");
    if (a.dropout < 0.0 || a.dropout >= 1.0)
        raise(Errc::InvalidArch, "dropout must lie in [0, 1)");
}

// Hidden GAT layers concatenate their heads, the last one averages them.
std::size_t gat_output_width(const ArchConfig& a, std::size_t layer) {
    return layer + 1 == a.gat_layers ? a.hidden : a.heads * a.hidden;
}

std::size_t gat_input_width(const ArchConfig& a, std::size_t layer) {
    return layer == 0 ? a.in_dim : gat_output_width(a, layer - 1);
}

std::size_t head_input_width(const ArchConfig& a, std::size_t i) {
    return i == 0 ? 2 * a.jk_hidden : a.hidden;
}

std::size_t head_output_width(const ArchConfig& a, std::size_t i) {
    return i + 1 == a.linear_layers ? a.out_dim : a.hidden;
}

// Supplies each parameter tensor during assembly: fresh-initialized for
// build_model, pulled from a checkpoint for model_from_params.
using ParamSource = std::function<Tensor(const std::string& name, std::size_t rows,
                                         std::size_t cols, bool is_weight)>;

} // namespace

void GatModel::register_param(const std::string& name, const Tensor& t) {
    named_params_.emplace_back(name, t);
}

std::size_t GatModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_params_) n += t.numel();
    return n;
}

std::vector<std::vector<double>> GatModel::snapshot_values() const {
    std::vector<std::vector<double>> out;
    out.reserve(named_params_.size());
    for (const auto& [name, t] : named_params_) out.push_back(t.value());
    return out;
}

void GatModel::restore_values(const std::vector<std::vector<double>>& values) {
    if (values.size() != named_params_.size())
        raise(Errc::ShapeMismatch, "snapshot does not match parameter list");
    for (std::size_t i = 0; i < values.size(); ++i) {
        Tensor t = named_params_[i].second;
        if (values[i].size() != t.numel())
            raise(Errc::ShapeMismatch, "snapshot entry has wrong size");
        t.mutable_value() = values[i];
    }
}

struct ModelParts {
    std::vector<GatLayerParams> gat;
    JkParams jk;
    std::vector<Tensor> head_w;
    std::vector<Tensor> head_b;
    std::vector<std::pair<std::string, Tensor>> named;
};

namespace {

ModelParts assemble(const ArchConfig& arch, const ParamSource& source) {
    validate_arch(arch);
    ModelParts p;
    auto take = [&](const std::string& name, std::size_t r, std::size_t c, bool is_weight) {
        Tensor t = source(name, r, c, is_weight);
        p.named.emplace_back(name, t);
        return t;
    };

    for (std::size_t l = 0; l < arch.gat_layers; ++l) {
        GatLayerParams layer;
        layer.concat_heads = l + 1 != arch.gat_layers;
        layer.use_edge_weight = arch.edge_weight_attention;
        const std::size_t in = gat_input_width(arch, l);
        for (std::size_t h = 0; h < arch.heads; ++h) {
            const std::string base = "gat" + std::to_string(l) + ".head" + std::to_string(h);
            GatHeadParams head;
            head.weight = take(base + ".weight", in, arch.hidden, true);
            head.attn = take(base + ".attn", 2 * arch.hidden + 1, 1, true);
            layer.heads.push_back(head);
        }
        p.gat.push_back(std::move(layer));
    }

    for (std::size_t l = 0; l < arch.gat_layers; ++l) {
        const std::string base = "jk.proj" + std::to_string(l);
        p.jk.proj_w.push_back(take(base + ".w", gat_output_width(arch, l), arch.hidden, true));
        p.jk.proj_b.push_back(take(base + ".b", 1, arch.hidden, false));
    }
    for (const char* dir : {"fwd", "bwd"}) {
        LstmParams& lstm = dir[0] == 'f' ? p.jk.fwd : p.jk.bwd;
        const std::string base = std::string("jk.") + dir;
        lstm.wx = take(base + ".wx", arch.hidden, 4 * arch.jk_hidden, true);
        lstm.wh = take(base + ".wh", arch.jk_hidden, 4 * arch.jk_hidden, true);
        lstm.b = take(base + ".b", 1, 4 * arch.jk_hidden, false);
    }
    p.jk.out_w = take("jk.out.w", 2 * arch.jk_hidden, 2 * arch.jk_hidden, true);
    p.jk.out_b = take("jk.out.b", 1, 2 * arch.jk_hidden, false);

    for (std::size_t i = 0; i < arch.linear_layers; ++i) {
        const std::string base = "head" + std::to_string(i);
        p.head_w.push_back(take(base + ".w", head_input_width(arch, i),
                                head_output_width(arch, i), true));
        p.head_b.push_back(take(base + ".b", 1, head_output_width(arch, i), false));
    }
    return p;
}

} // namespace

GatModel build_model(const ArchConfig& arch, std::uint64_t seed) {
    Rng rng(Rng::derive(seed, 0x1717));
    ModelParts parts = assemble(arch, [&rng](const std::string&, std::size_t r, std::size_t c,
                                             bool is_weight) {
        std::vector<double> data(r * c, 0.0);
        if (is_weight) {
            const double limit = std::sqrt(6.0 / double(r + c));
            for (double& v : data) v = rng.uniform(-limit, limit);
        }
        return Tensor::from_data(r, c, std::move(data), /*requires_grad=*/true);
    });
    GatModel m;
    m.arch_ = arch;
    m.gat_ = std::move(parts.gat);
    m.jk_ = std::move(parts.jk);
    m.head_w_ = std::move(parts.head_w);
    m.head_b_ = std::move(parts.head_b);
    m.named_params_ = std::move(parts.named);
    return m;
}

GatModel model_from_params(const ArchConfig& arch,
                           const std::vector<std::pair<std::string, Tensor>>& params) {
    std::size_t next = 0;
    ModelParts parts =
        assemble(arch, [&](const std::string& name, std::size_t r, std::size_t c, bool) {
            if (next >= params.size())
                raise(Errc::CorruptCheckpoint, "missing parameter block '" + name + "'");
            const auto& [pname, t] = params[next++];
            if (pname != name || t.rows() != r || t.cols() != c)
                raise(Errc::CorruptCheckpoint, "parameter block mismatch at '" + name + "'");
            return t;
        });
    if (next != params.size())
        raise(Errc::CorruptCheckpoint, "checkpoint carries extra parameter blocks");
    GatModel m;
    m.arch_ = arch;
    m.gat_ = std::move(parts.gat);
    m.jk_ = std::move(parts.jk);
    m.head_w_ = std::move(parts.head_w);
    m.head_b_ = std::move(parts.head_b);
    m.named_params_ = std::move(parts.named);
    return m;
}

BatchedGraph make_batch(const std::vector<const WindowGraph*>& graphs) {
    if (graphs.empty()) raise(Errc::EmptyDataset, "cannot batch zero graphs");
    BatchedGraph b;
    b.num_graphs = graphs.size();

    std::size_t total_nodes = 0;
    for (const WindowGraph* g : graphs) {
        if (g->num_nodes() == 0) raise(Errc::EmptyGraph, "graph with zero nodes");
        total_nodes += g->num_nodes();
    }

    std::vector<double> x;
    x.reserve(total_nodes * kNodeFeatureDim);
    std::vector<GraphEdge> edges;
    b.graph_of_node.reserve(total_nodes);
    std::uint32_t offset = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const WindowGraph* g = graphs[gi];
        x.insert(x.end(), g->x.begin(), g->x.end());
        for (const GraphEdge& e : g->edges)
            edges.push_back({e.src + offset, e.dst + offset, e.weight});
        for (std::size_t k = 0; k < g->num_nodes(); ++k)
            b.graph_of_node.push_back(static_cast<std::uint32_t>(gi));
        b.labels.push_back(g->label == Label::Attack ? 1 : 0);
        offset += static_cast<std::uint32_t>(g->num_nodes());
    }
    b.x = Tensor::from_data(total_nodes, kNodeFeatureDim, std::move(x));
    b.edges = prepare_edges(edges, total_nodes);
    return b;
}

BatchedGraph make_batch(const WindowGraph& graph) { return make_batch({&graph}); }

Tensor GatModel::forward(const BatchedGraph& batch, bool training, Rng* rng,
                         std::vector<AttentionCapture>* captures) const {
    if (!initialized()) raise(Errc::InvalidArch, "model has no parameters");
    const bool want_dropout = training && arch_.dropout > 0.0;
    if (want_dropout && !rng)
        raise(Errc::ConfigError, "training-mode forward needs a dropout random stream");
    if (captures) captures->assign(arch_.gat_layers, {});

    Tensor h = batch.x;
    std::vector<Tensor> layer_outputs;
    layer_outputs.reserve(arch_.gat_layers);
    for (std::size_t l = 0; l < arch_.gat_layers; ++l) {
        if (want_dropout) h = dropout(h, arch_.dropout, true, *rng);
        h = gat_layer(h, batch.edges, gat_[l], l + 1 == arch_.gat_layers,
                      captures ? &(*captures)[l] : nullptr);
        layer_outputs.push_back(h);
    }

    Tensor nodes = jk_aggregate(layer_outputs, jk_);
    Tensor pooled = segment_mean(nodes, batch.graph_of_node, batch.num_graphs);

    Tensor z = pooled;
    for (std::size_t i = 0; i < head_w_.size(); ++i) {
        z = add(matmul(z, head_w_[i]), head_b_[i]);
        if (i + 1 < head_w_.size()) {
            z = elu(z);
            if (want_dropout) z = dropout(z, arch_.dropout, true, *rng);
        }
    }
    return z;
}

// --- checkpoint io --------------------------------------------------------------

namespace {
constexpr char kCkptMagic[4] = {'C', 'G', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;
constexpr const char* kWhat = "checkpoint";
} // namespace

void save_checkpoint(const GatModel& model, const CheckpointMeta& meta, const std::string& path) {
    if (!model.initialized()) raise(Errc::InvalidArch, "cannot checkpoint an empty model");
    std::ostringstream body;
    body.write(kCkptMagic, 4);
    wire::put_u32(body, kCkptVersion);

    const ArchConfig& a = model.arch();
    wire::put_u64(body, a.gat_layers);
    wire::put_u64(body, a.heads);
    wire::put_u64(body, a.hidden);
    wire::put_u64(body, a.linear_layers);
    wire::put_u64(body, a.in_dim);
    wire::put_u64(body, a.out_dim);
    wire::put_u64(body, a.jk_hidden);
    wire::put_f64(body, a.dropout);
    body.put(a.edge_weight_attention ? 1 : 0);

    wire::put_u64(body, meta.epoch);
    wire::put_f64(body, meta.val_acc);
    wire::put_f64(body, meta.val_f1);
    wire::put_u64(body, meta.seed);
    wire::put_u64(body, meta.config_hash);
    wire::put_u64(body, meta.window);
    wire::put_u64(body, meta.stride);
    wire::put_str(body, meta.config_json);

    const auto& params = model.named_params();
    wire::put_u64(body, params.size());
    for (const auto& [name, t] : params) {
        wire::put_str(body, name);
        wire::put_u64(body, t.rows());
        wire::put_u64(body, t.cols());
        for (double v : t.value()) wire::put_f64(body, v);
    }

    const std::string payload = body.str();
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::IoError, "cannot open '" + path + "' for writing");
    out.write(payload.data(), std::streamsize(payload.size()));
    wire::put_u64(out, wire::fnv1a64(payload));
    if (!out) raise(Errc::IoError, "failed writing checkpoint '" + path + "'");
}

LoadedModel load_checkpoint(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) raise(Errc::IoError, "cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << file.rdbuf();
    const std::string bytes = ss.str();
    if (bytes.size() < 16) raise(Errc::CorruptCheckpoint, "checkpoint too short");

    std::istringstream tail(bytes.substr(bytes.size() - 8));
    const std::uint64_t stored = wire::get_u64(tail, kWhat);
    if (wire::fnv1a64(bytes.data(), bytes.size() - 8) != stored)
        raise(Errc::CorruptCheckpoint, "checkpoint integrity hash mismatch");

    std::istringstream in(bytes.substr(0, bytes.size() - 8));
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
        raise(Errc::CorruptCheckpoint, "not a checkpoint file");
    const std::uint32_t version = wire::get_u32(in, kWhat);
    if (version != kCkptVersion)
        raise(Errc::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                         ", expected " + std::to_string(kCkptVersion));

    ArchConfig a;
    a.gat_layers = wire::get_u64(in, kWhat);
    a.heads = wire::get_u64(in, kWhat);
    a.hidden = wire::get_u64(in, kWhat);
    a.linear_layers = wire::get_u64(in, kWhat);
    a.in_dim = wire::get_u64(in, kWhat);
    a.out_dim = wire::get_u64(in, kWhat);
    a.jk_hidden = wire::get_u64(in, kWhat);
    a.dropout = wire::get_f64(in, kWhat);
    const int ew = in.get();
    if (ew < 0) wire::truncated(kWhat);
    a.edge_weight_attention = ew != 0;

    CheckpointMeta meta;
    meta.epoch = wire::get_u64(in, kWhat);
    meta.val_acc = wire::get_f64(in, kWhat);
    meta.val_f1 = wire::get_f64(in, kWhat);
    meta.seed = wire::get_u64(in, kWhat);
    meta.config_hash = wire::get_u64(in, kWhat);
    meta.window = wire::get_u64(in, kWhat);
    meta.stride = wire::get_u64(in, kWhat);
    meta.config_json = wire::get_str(in, kWhat);

    const std::uint64_t count = wire::get_u64(in, kWhat);
    std::vector<std::pair<std::string, Tensor>> params;
    params.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = wire::get_str(in, kWhat, 1u << 12);
        const std::uint64_t rows = wire::get_u64(in, kWhat);
        const std::uint64_t cols = wire::get_u64(in, kWhat);
        if (rows == 0 || cols == 0 || rows * cols > (1u << 28))
            raise(Errc::CorruptCheckpoint, "implausible parameter shape");
        std::vector<double> data(rows * cols);
        for (double& v : data) v = wire::get_f64(in, kWhat);
        params.emplace_back(std::move(name),
                            Tensor::from_data(rows, cols, std::move(data), true));
    }

    LoadedModel loaded;
    loaded.model = model_from_params(a, params);
    loaded.meta = std::move(meta);
    return loaded;
}

void require_arch(const LoadedModel& loaded, const ArchConfig& expected) {
    if (!(loaded.model.arch() == expected))
        raise(Errc::ArchMismatch, "checkpoint architecture differs from the expected one");
}

} // namespace cangat
