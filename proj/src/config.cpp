#include "cangat/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cangat/error.hpp"
#include "wire.hpp"

namespace cangat {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& origin, const std::string& what) {
    raise(Errc::ConfigError, origin + ": " + what);
}

template <class T>
void read_field(const json& obj, const char* key, T& out, const std::string& origin) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        bad(origin, std::string("field '") + key + "' has the wrong type");
    }
}

void check_keys(const json& obj, std::initializer_list<const char*> known,
                const std::string& origin, const char* section) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) bad(origin, std::string("unknown key '") + it.key() + "' in " + section);
    }
}

void read_arch(const json& obj, ArchConfig& a, const std::string& origin, const char* section) {
    check_keys(obj,
               {"gat_layers", "heads", "hidden", "linear_layers", "dropout", "jk_hidden",
                "edge_weight_attention"},
               origin, section);
    read_field(obj, "gat_layers", a.gat_layers, origin);
    read_field(obj, "heads", a.heads, origin);
    read_field(obj, "hidden", a.hidden, origin);
    read_field(obj, "linear_layers", a.linear_layers, origin);
    read_field(obj, "dropout", a.dropout, origin);
    read_field(obj, "jk_hidden", a.jk_hidden, origin);
    read_field(obj, "edge_weight_attention", a.edge_weight_attention, origin);
}

json arch_to_json(const ArchConfig& a) {
    return json{{"gat_layers", a.gat_layers},
                {"heads", a.heads},
                {"hidden", a.hidden},
                {"linear_layers", a.linear_layers},
                {"dropout", a.dropout},
                {"jk_hidden", a.jk_hidden},
                {"edge_weight_attention", a.edge_weight_attention}};
}

} // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        bad(origin, std::string("invalid JSON: ") + e.what());
    }
    if (!root.is_object()) bad(origin, "top level must be a JSON object");
    check_keys(root, {"train", "teacher_arch", "student_arch", "threshold"}, origin,
               "the top-level object");

    RunConfig cfg;
    if (root.contains("train")) {
        const json& t = root.at("train");
        check_keys(t,
                   {"lr", "batch_size", "epochs", "warmup_epochs", "alpha", "tau", "gamma_focal",
                    "use_focal", "window", "stride", "val_fraction", "seed",
                    "chronological_split", "select_by_f1", "clip_norm"},
                   origin, "'train'");
        read_field(t, "lr", cfg.train.lr, origin);
        read_field(t, "batch_size", cfg.train.batch_size, origin);
        read_field(t, "epochs", cfg.train.epochs, origin);
        read_field(t, "warmup_epochs", cfg.train.warmup_epochs, origin);
        read_field(t, "alpha", cfg.train.alpha, origin);
        read_field(t, "tau", cfg.train.tau, origin);
        read_field(t, "gamma_focal", cfg.train.gamma_focal, origin);
        read_field(t, "use_focal", cfg.train.use_focal, origin);
        read_field(t, "window", cfg.train.window, origin);
        read_field(t, "stride", cfg.train.stride, origin);
        read_field(t, "val_fraction", cfg.train.val_fraction, origin);
        read_field(t, "seed", cfg.train.seed, origin);
        read_field(t, "chronological_split", cfg.train.chronological_split, origin);
        read_field(t, "select_by_f1", cfg.train.select_by_f1, origin);
        read_field(t, "clip_norm", cfg.train.clip_norm, origin);
    }
    if (root.contains("teacher_arch"))
        read_arch(root.at("teacher_arch"), cfg.teacher, origin, "'teacher_arch'");
    if (root.contains("student_arch"))
        read_arch(root.at("student_arch"), cfg.student, origin, "'student_arch'");
    read_field(root, "threshold", cfg.threshold, origin);

    if (cfg.train.alpha < 0.0 || cfg.train.alpha > 1.0) bad(origin, "alpha must lie in [0, 1]");
    if (cfg.train.tau <= 0.0) bad(origin, "tau must be positive");
    if (cfg.threshold < 0.0 || cfg.threshold > 1.0)
        bad(origin, "threshold must lie in [0, 1]");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::IoError, "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path);
}

std::string config_to_json(const RunConfig& cfg) {
    json root{{"train",
               json{{"lr", cfg.train.lr},
                    {"batch_size", cfg.train.batch_size},
                    {"epochs", cfg.train.epochs},
                    {"warmup_epochs", cfg.train.warmup_epochs},
                    {"alpha", cfg.train.alpha},
                    {"tau", cfg.train.tau},
                    {"gamma_focal", cfg.train.gamma_focal},
                    {"use_focal", cfg.train.use_focal},
                    {"window", cfg.train.window},
                    {"stride", cfg.train.stride},
                    {"val_fraction", cfg.train.val_fraction},
                    {"seed", cfg.train.seed},
                    {"chronological_split", cfg.train.chronological_split},
                    {"select_by_f1", cfg.train.select_by_f1},
                    {"clip_norm", cfg.train.clip_norm}}},
              {"teacher_arch", arch_to_json(cfg.teacher)},
              {"student_arch", arch_to_json(cfg.student)},
              {"threshold", cfg.threshold}};
    return root.dump(); // ordered keys, single line: canonical and hashable
}

std::uint64_t config_hash(const RunConfig& cfg) { return wire::fnv1a64(config_to_json(cfg)); }

std::string resolve_path(const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    const char* base = std::getenv("CANGAT_DATA_DIR");
    if (!base || !*base) return path;
    std::string b(base);
    if (b.back() != '/') b += '/';
    return b + path;
}

} // namespace cangat
