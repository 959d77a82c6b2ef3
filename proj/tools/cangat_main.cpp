// cangat: CAN-bus intrusion detection pipeline.
//
// Subcommands: synth, graphs, train-teacher, distill, eval, detect.
// Exit codes: 0 ok, 2 usage/config error, 3 data error, 4 model error.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cangat/can.hpp"
#include "cangat/config.hpp"
#include "cangat/dataset_io.hpp"
#include "cangat/error.hpp"
#include "cangat/eval.hpp"
#include "cangat/graph.hpp"
#include "cangat/model.hpp"
#include "cangat/synth.hpp"
#include "cangat/train.hpp"

namespace {

using namespace cangat;

TraceFormat parse_format(const std::string& name) {
    if (name == "canonical") return TraceFormat::CanonicalCsv;
    if (name == "candump") return TraceFormat::CandumpText;
    if (name == "benchmark") return TraceFormat::BenchmarkCsv;
    raise(Errc::UnsupportedFormat, "unknown trace format '" + name + "'");
}

bool format_has_labels(TraceFormat f) { return f != TraceFormat::CandumpText; }

TraceData read_trace_arg(const std::string& path, const std::string& format) {
    const TraceFormat f = parse_format(format);
    TraceSource source{f, resolve_path(path), format_has_labels(f)};
    return read_trace(source);
}

// Optional flag overrides applied on top of the config file.
struct TrainOverrides {
    std::optional<std::size_t> epochs, batch_size, warmup_epochs;
    std::optional<double> lr, alpha, tau, gamma_focal, val_fraction, clip_norm;
    std::optional<std::uint64_t> seed;
    bool use_focal = false, select_by_f1 = false, chronological = false;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--epochs", epochs, "Training epochs");
        cmd->add_option("--batch-size", batch_size, "Graphs per minibatch");
        cmd->add_option("--warmup-epochs", warmup_epochs, "Hard-loss-only epochs (distill)");
        cmd->add_option("--lr", lr, "Adam learning rate");
        cmd->add_option("--alpha", alpha, "Hard-loss weight of the distillation mix");
        cmd->add_option("--tau", tau, "Distillation temperature");
        cmd->add_option("--gamma-focal", gamma_focal, "Focal-loss focusing exponent");
        cmd->add_option("--val-fraction", val_fraction, "Validation fraction of the split");
        cmd->add_option("--clip-norm", clip_norm, "Global gradient-norm clip (0 = off)");
        cmd->add_option("--seed", seed, "Random seed controlling all randomness");
        cmd->add_flag("--use-focal", use_focal, "Focal-modulate the hard loss");
        cmd->add_flag("--select-by-f1", select_by_f1, "Pick best epoch by validation F1");
        cmd->add_flag("--chronological-split", chronological,
                      "Split train/val by time instead of stratified random");
    }

    void apply(TrainConfig& t) const {
        if (epochs) t.epochs = *epochs;
        if (batch_size) t.batch_size = *batch_size;
        if (warmup_epochs) t.warmup_epochs = *warmup_epochs;
        if (lr) t.lr = *lr;
        if (alpha) t.alpha = *alpha;
        if (tau) t.tau = *tau;
        if (gamma_focal) t.gamma_focal = *gamma_focal;
        if (val_fraction) t.val_fraction = *val_fraction;
        if (clip_norm) t.clip_norm = *clip_norm;
        if (seed) t.seed = *seed;
        if (use_focal) t.use_focal = true;
        if (select_by_f1) t.select_by_f1 = true;
        if (chronological) t.chronological_split = true;
    }
};

RunConfig effective_config(const std::string& config_path, const TrainOverrides& over) {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : load_run_config(resolve_path(config_path));
    over.apply(cfg.train);
    return cfg;
}

void print_train_summary(const char* what, const TrainResult& r) {
    std::printf("%s: best epoch %zu of %zu, val_acc %.4f, val_f1 %.4f\n", what, r.best_epoch,
                r.history.size(), r.best_val_acc, r.best_val_f1);
}

void save_train_outputs(const TrainResult& result, const RunConfig& cfg,
                        const WindowDataset& data, const std::string& out_path,
                        const std::string& history_path) {
    CheckpointMeta meta;
    meta.epoch = result.best_epoch;
    meta.val_acc = result.best_val_acc;
    meta.val_f1 = result.best_val_f1;
    meta.seed = cfg.train.seed;
    meta.config_hash = config_hash(cfg);
    meta.window = data.window;
    meta.stride = data.stride;
    meta.config_json = config_to_json(cfg);
    save_checkpoint(result.model, meta, resolve_path(out_path));
    if (!history_path.empty())
        write_history_csv(result.history, resolve_path(history_path), meta.config_json,
                          meta.config_hash);
}

int run(int argc, char** argv) {
    CLI::App app{"CAN-bus intrusion detection: window graphs, attention models, distillation"};
    app.require_subcommand(1);

    // synth ------------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic CAN trace");
    std::string synth_scenario, synth_out;
    std::optional<std::uint64_t> synth_seed;
    synth->add_option("--scenario", synth_scenario, "Scenario description file")->required();
    synth->add_option("--out", synth_out, "Output trace CSV")->required();
    synth->add_option("--seed", synth_seed, "Override the scenario seed");
    synth->callback([&] {
        SynthScenario scenario = parse_scenario_file(resolve_path(synth_scenario));
        if (synth_seed) scenario.seed = *synth_seed;
        const std::vector<CanMessage> trace = generate_scenario(scenario);
        write_canonical_csv(resolve_path(synth_out), trace);
        std::size_t attacks = 0;
        for (const CanMessage& m : trace) attacks += m.label == Label::Attack ? 1 : 0;
        std::printf("synth: %zu messages (%zu attack) over %.1f s -> %s\n", trace.size(),
                    attacks, scenario.horizon, synth_out.c_str());
    });

    // graphs ------------------------------------------------------------------
    auto* graphs = app.add_subcommand("graphs", "Build window graphs from a trace");
    std::string g_trace, g_out, g_format = "canonical";
    std::size_t g_window = 50, g_stride = 50;
    bool g_text = false;
    graphs->add_option("--trace", g_trace, "Input trace file")->required();
    graphs->add_option("--out", g_out, "Output graph dataset")->required();
    graphs->add_option("--format", g_format, "Trace format: canonical|candump|benchmark")
        ->check(CLI::IsMember({"canonical", "candump", "benchmark"}));
    graphs->add_option("--window", g_window, "Messages per window");
    graphs->add_option("--stride", g_stride, "Messages between window starts");
    graphs->add_flag("--text", g_text, "Write the line-oriented text form");
    graphs->callback([&] {
        TraceData trace = read_trace_arg(g_trace, g_format);
        WindowDataset ds = build_windows(trace.messages, g_window, g_stride);
        if (g_text)
            write_graphs_text(ds, resolve_path(g_out));
        else
            write_graphs_binary(ds, resolve_path(g_out));
        std::size_t attacks = 0;
        for (const WindowGraph& g : ds.graphs) attacks += g.label == Label::Attack ? 1 : 0;
        std::printf("graphs: %zu messages (%zu skipped) -> %zu windows (%zu attack) -> %s\n",
                    trace.summary.parsed, trace.summary.skipped, ds.graphs.size(), attacks,
                    g_out.c_str());
        if (ds.unknown_treated_benign > 0)
            std::printf("graphs: note: %zu unlabeled messages counted as benign\n",
                        ds.unknown_treated_benign);
    });

    // train-teacher -------------------------------------------------------------
    auto* tt = app.add_subcommand("train-teacher", "Train the full-size model");
    std::string tt_graphs, tt_out, tt_history, tt_config;
    TrainOverrides tt_over;
    tt->add_option("--graphs", tt_graphs, "Graph dataset")->required();
    tt->add_option("--out", tt_out, "Output checkpoint")->required();
    tt->add_option("--history", tt_history, "Per-epoch metrics CSV");
    tt->add_option("--config", tt_config, "Run configuration JSON");
    tt_over.add_flags(tt);
    tt->callback([&] {
        RunConfig cfg = effective_config(tt_config, tt_over);
        WindowDataset ds = read_graphs(resolve_path(tt_graphs));
        cfg.train.window = ds.window;
        cfg.train.stride = ds.stride;
        TrainResult result = train_teacher(ds, cfg.teacher, cfg.train);
        save_train_outputs(result, cfg, ds, tt_out, tt_history);
        print_train_summary("train-teacher", result);
    });

    // distill ---------------------------------------------------------------------
    auto* di = app.add_subcommand("distill", "Distill the compact model from a teacher");
    std::string di_graphs, di_teacher, di_out, di_history, di_config;
    TrainOverrides di_over;
    di->add_option("--graphs", di_graphs, "Graph dataset")->required();
    di->add_option("--teacher", di_teacher, "Teacher checkpoint")->required();
    di->add_option("--out", di_out, "Output checkpoint")->required();
    di->add_option("--history", di_history, "Per-epoch metrics CSV");
    di->add_option("--config", di_config, "Run configuration JSON");
    di_over.add_flags(di);
    di->callback([&] {
        RunConfig cfg = effective_config(di_config, di_over);
        WindowDataset ds = read_graphs(resolve_path(di_graphs));
        cfg.train.window = ds.window;
        cfg.train.stride = ds.stride;
        LoadedModel teacher = load_checkpoint(resolve_path(di_teacher));
        if (teacher.meta.val_acc < 0.6)
            std::fprintf(stderr,
                         "warning: teacher validation accuracy %.3f looks untrained\n",
                         teacher.meta.val_acc);
        TrainResult result = distill_student(teacher.model, ds, cfg.student, cfg.train);
        save_train_outputs(result, cfg, ds, di_out, di_history);
        print_train_summary("distill", result);
    });

    // eval ---------------------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "Score a checkpoint against a labeled dataset");
    std::string ev_ckpt, ev_graphs, ev_report;
    double ev_threshold = 0.5;
    ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint")->required();
    ev->add_option("--graphs", ev_graphs, "Graph dataset")->required();
    ev->add_option("--threshold", ev_threshold, "Attack-probability decision threshold");
    ev->add_option("--report", ev_report, "Write a JSON report here");
    ev->callback([&] {
        LoadedModel loaded = load_checkpoint(resolve_path(ev_ckpt));
        WindowDataset ds = read_graphs(resolve_path(ev_graphs));
        if (loaded.meta.window != ds.window || loaded.meta.stride != ds.stride)
            raise(Errc::ArchMismatch,
                  "checkpoint was trained on window/stride " +
                      std::to_string(loaded.meta.window) + "/" +
                      std::to_string(loaded.meta.stride) + " but the dataset uses " +
                      std::to_string(ds.window) + "/" + std::to_string(ds.stride));

        EvalReport r = evaluate(loaded.model, ds, ev_threshold);
        std::printf("windows    %zu\n", r.num_graphs);
        std::printf("threshold  %.3f\n", r.threshold);
        std::printf("accuracy   %.4f\n", r.metrics.accuracy);
        std::printf("precision  %.4f%s\n", r.metrics.precision,
                    r.metrics.degenerate_precision ? " (no positive predictions)" : "");
        std::printf("recall     %.4f%s\n", r.metrics.recall,
                    r.metrics.degenerate_recall ? " (no positive labels)" : "");
        std::printf("f1         %.4f\n", r.metrics.f1);
        std::printf("counts     tp=%llu tn=%llu fp=%llu fn=%llu\n",
                    static_cast<unsigned long long>(r.counts.tp),
                    static_cast<unsigned long long>(r.counts.tn),
                    static_cast<unsigned long long>(r.counts.fp),
                    static_cast<unsigned long long>(r.counts.fn));

        if (!ev_report.empty()) {
            char hash_hex[17];
            std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                          static_cast<unsigned long long>(loaded.meta.config_hash));
            nlohmann::json report{
                {"accuracy", r.metrics.accuracy},
                {"precision", r.metrics.precision},
                {"recall", r.metrics.recall},
                {"f1", r.metrics.f1},
                {"degenerate_precision", r.metrics.degenerate_precision},
                {"degenerate_recall", r.metrics.degenerate_recall},
                {"counts",
                 {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp},
                  {"fn", r.counts.fn}}},
                {"num_windows", r.num_graphs},
                {"threshold", r.threshold},
                {"window", ds.window},
                {"stride", ds.stride},
                {"checkpoint",
                 {{"epoch", loaded.meta.epoch},
                  {"val_acc", loaded.meta.val_acc},
                  {"val_f1", loaded.meta.val_f1},
                  {"seed", loaded.meta.seed},
                  {"config_hash", hash_hex}}}};
            std::ofstream out(resolve_path(ev_report));
            if (!out) raise(Errc::IoError, "cannot open '" + ev_report + "' for writing");
            out << report.dump(2) << "\n";
        }
    });

    // detect ---------------------------------------------------------------------------
    auto* de = app.add_subcommand("detect", "Windowed detection over a raw trace");
    std::string de_ckpt, de_trace, de_out, de_format = "canonical";
    std::size_t de_window = 0, de_stride = 0;
    double de_threshold = 0.5;
    de->add_option("--checkpoint", de_ckpt, "Model checkpoint")->required();
    de->add_option("--trace", de_trace, "Input trace file")->required();
    de->add_option("--out", de_out, "Detection CSV")->required();
    de->add_option("--format", de_format, "Trace format: canonical|candump|benchmark")
        ->check(CLI::IsMember({"canonical", "candump", "benchmark"}));
    de->add_option("--window", de_window, "Messages per window (default: from checkpoint)");
    de->add_option("--stride", de_stride, "Window stride (default: from checkpoint)");
    de->add_option("--threshold", de_threshold, "Attack-probability decision threshold");
    de->callback([&] {
        LoadedModel loaded = load_checkpoint(resolve_path(de_ckpt));
        TraceData trace = read_trace_arg(de_trace, de_format);
        const std::size_t window = de_window ? de_window : loaded.meta.window;
        const std::size_t stride = de_stride ? de_stride : loaded.meta.stride;

        const auto t0 = std::chrono::steady_clock::now();
        std::vector<Detection> hits =
            detect_stream(loaded.model, trace.messages, window, stride, de_threshold);
        const auto t1 = std::chrono::steady_clock::now();

        std::ofstream out(resolve_path(de_out));
        if (!out) raise(Errc::IoError, "cannot open '" + de_out + "' for writing");
        out << "window_index,start_ts,end_ts,prob,verdict\n";
        char line[128];
        std::size_t flagged = 0;
        for (const Detection& d : hits) {
            std::snprintf(line, sizeof(line), "%llu,%.6f,%.6f,%.12g,%d\n",
                          static_cast<unsigned long long>(d.window_index), d.t_start, d.t_end,
                          d.prob_attack, d.verdict ? 1 : 0);
            out << line;
            flagged += d.verdict ? 1 : 0;
        }
        if (!out) raise(Errc::IoError, "failed writing '" + de_out + "'");

        const double secs = std::chrono::duration<double>(t1 - t0).count();
        std::printf("detect: %zu windows, %zu flagged -> %s\n", hits.size(), flagged,
                    de_out.c_str());
        std::fprintf(stderr, "detect: %.0f windows/s\n",
                     secs > 0 ? double(hits.size()) / secs : 0.0);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // help/version exit clean, usage errors exit 2
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const cangat::Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", cangat::errc_name(e.code()), e.what());
        switch (cangat::errc_class(e.code())) {
            case cangat::ErrClass::Usage: return 2;
            case cangat::ErrClass::Data: return 3;
            case cangat::ErrClass::Model: return 4;
        }
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
