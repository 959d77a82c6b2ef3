// End-to-end checks of the command-line binary: every subcommand runs through
// a real (tiny) pipeline, and failures map to the documented exit codes.

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    const std::string dir = scratch_dir("cli_io");
    const std::string out_path = dir + "/out" + std::to_string(counter) + ".txt";
    const std::string err_path = dir + "/err" + std::to_string(counter) + ".txt";
    ++counter;
    const std::string cmd =
        std::string(CANGAT_BIN) + " " + args + " >" + out_path + " 2>" + err_path;
    const int status = std::system(cmd.c_str());
    CliResult r;
    if (status != -1 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
}

const char* kScenario = R"(# tiny mixed-traffic scenario for CLI checks
horizon = 12
seed = 5

[ecu]
id = 0x100
period = 0.01
payload = counter

[ecu]
id = 0x200
period = 0.02
bytes = de ad be ef 00 00 00 00

[ecu]
id = 0x300
period = 0.04
payload = random_walk

[attack]
kind = flooding
start = 3.0
duration = 1.5
rate = 300

[attack]
kind = spoofing
start = 8.0
duration = 1.5
rate = 150
target_id = 0x100
payload = ff ff ff ff ff ff ff ff
)";

const char* kConfig = R"({
  "train": {"epochs": 3, "batch_size": 32, "lr": 0.01, "warmup_epochs": 1,
            "val_fraction": 0.25, "seed": 7},
  "teacher_arch": {"gat_layers": 2, "heads": 2, "hidden": 8, "jk_hidden": 2, "dropout": 0.1},
  "student_arch": {"gat_layers": 1, "heads": 2, "hidden": 6, "jk_hidden": 2, "dropout": 0.1}
})";

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
    CHECK(run_cli("--help").exit_code == 0);
    const CliResult help = run_cli("--help");
    CHECK(help.out.find("synth") != std::string::npos);
    CHECK(help.out.find("distill") != std::string::npos);

    CHECK(run_cli("").exit_code == 2);                    // a subcommand is required
    CHECK(run_cli("synth --bogus x").exit_code == 2);     // unknown flag
    CHECK(run_cli("frobnicate").exit_code == 2);          // unknown subcommand
    CHECK(run_cli("synth --out only.csv").exit_code == 2); // missing required flag
}

TEST_CASE("full pipeline: synth, graphs, train, distill, eval, detect") {
    const std::string dir = scratch_dir("cli_pipeline");
    write_file(dir + "/scenario.cfg", kScenario);
    write_file(dir + "/run.json", kConfig);

    const CliResult synth =
        run_cli("synth --scenario " + dir + "/scenario.cfg --out " + dir + "/trace.csv");
    REQUIRE(synth.exit_code == 0);
    CHECK(synth.out.find("synth:") != std::string::npos);
    CHECK(synth.out.find("attack)") != std::string::npos);

    const CliResult graphs = run_cli("graphs --trace " + dir + "/trace.csv --out " + dir +
                                     "/train.graphs --window 20 --stride 20");
    REQUIRE(graphs.exit_code == 0);
    CHECK(graphs.out.find("windows") != std::string::npos);

    const CliResult teacher =
        run_cli("train-teacher --graphs " + dir + "/train.graphs --out " + dir +
                "/teacher.ckpt --history " + dir + "/teacher_history.csv --config " + dir +
                "/run.json");
    REQUIRE(teacher.exit_code == 0);
    CHECK(teacher.out.find("train-teacher: best epoch") != std::string::npos);
    const std::string history = read_file(dir + "/teacher_history.csv");
    CHECK(history.find("epoch,stage,train_loss,val_loss,val_acc,val_f1") != std::string::npos);
    CHECK(history.find("\n1,teacher,") != std::string::npos);

    const CliResult distill =
        run_cli("distill --graphs " + dir + "/train.graphs --teacher " + dir +
                "/teacher.ckpt --out " + dir + "/student.ckpt --config " + dir + "/run.json");
    REQUIRE(distill.exit_code == 0);
    CHECK(distill.out.find("distill: best epoch") != std::string::npos);

    const CliResult eval = run_cli("eval --checkpoint " + dir + "/student.ckpt --graphs " +
                                   dir + "/train.graphs --report " + dir + "/report.json");
    REQUIRE(eval.exit_code == 0);
    CHECK(eval.out.find("accuracy") != std::string::npos);
    CHECK(eval.out.find("counts") != std::string::npos);
    const nlohmann::json report = nlohmann::json::parse(read_file(dir + "/report.json"));
    CHECK(report.contains("accuracy"));
    CHECK(report.contains("f1"));
    CHECK(report["num_windows"].get<std::size_t>() > 50);
    CHECK(report["window"].get<std::size_t>() == 20);
    CHECK(report["checkpoint"].contains("config_hash"));

    const CliResult detect = run_cli("detect --checkpoint " + dir + "/teacher.ckpt --trace " +
                                     dir + "/trace.csv --out " + dir + "/detections.csv");
    REQUIRE(detect.exit_code == 0);
    CHECK(detect.out.find("detect:") != std::string::npos);
    CHECK(detect.err.find("windows/s") != std::string::npos); // throughput on stderr only
    CHECK(detect.out.find("windows/s") == std::string::npos);
    const std::string csv = read_file(dir + "/detections.csv");
    CHECK(csv.rfind("window_index,start_ts,end_ts,prob,verdict\n", 0) == 0);
    CHECK(count_lines(csv) == report["num_windows"].get<std::size_t>() + 1);

    // Same seed twice: the trace file must be byte-identical.
    const CliResult synth2 =
        run_cli("synth --scenario " + dir + "/scenario.cfg --out " + dir + "/trace2.csv");
    REQUIRE(synth2.exit_code == 0);
    CHECK(read_file(dir + "/trace.csv") == read_file(dir + "/trace2.csv"));
    // A different seed changes it.
    const CliResult synth3 = run_cli("synth --scenario " + dir + "/scenario.cfg --out " + dir +
                                     "/trace3.csv --seed 99");
    REQUIRE(synth3.exit_code == 0);
    CHECK(read_file(dir + "/trace.csv") != read_file(dir + "/trace3.csv"));

    // Window/stride mismatch between checkpoint and dataset is a model error.
    const CliResult graphs10 = run_cli("graphs --trace " + dir + "/trace.csv --out " + dir +
                                       "/w10.graphs --window 10 --stride 10");
    REQUIRE(graphs10.exit_code == 0);
    const CliResult mismatch = run_cli("eval --checkpoint " + dir + "/teacher.ckpt --graphs " +
                                       dir + "/w10.graphs");
    CHECK(mismatch.exit_code == 4);
    CHECK(mismatch.err.find("ArchMismatch") != std::string::npos);
}

TEST_CASE("data and config failures map to exit codes") {
    const std::string dir = scratch_dir("cli_errors");

    const CliResult missing = run_cli("graphs --trace " + dir + "/nope.csv --out " + dir +
                                      "/x.graphs");
    CHECK(missing.exit_code == 3);
    CHECK(missing.err.find("IoError") != std::string::npos);

    const CliResult no_ckpt = run_cli("detect --checkpoint " + dir + "/nope.ckpt --trace " +
                                      dir + "/nope.csv --out " + dir + "/d.csv");
    CHECK(no_ckpt.exit_code == 3);

    write_file(dir + "/bad_scenario.cfg", "[ecu]\nid = 0x1\nperiod = 0.01\nwarp = 9\n");
    const CliResult bad_key =
        run_cli("synth --scenario " + dir + "/bad_scenario.cfg --out " + dir + "/t.csv");
    CHECK(bad_key.exit_code == 2);
    CHECK(bad_key.err.find("ConfigError") != std::string::npos);

    write_file(dir + "/bad.json", R"({"train": {"alpha": 3.0}})");
    write_file(dir + "/empty.graphs", "");
    const CliResult bad_cfg = run_cli("train-teacher --graphs " + dir +
                                      "/empty.graphs --out " + dir + "/m.ckpt --config " + dir +
                                      "/bad.json");
    CHECK(bad_cfg.exit_code == 2); // config rejected before the dataset is touched

    // Corrupt graph file: data error.
    write_file(dir + "/garbage.graphs", "not a graph dataset at all");
    const CliResult garbage = run_cli("eval --checkpoint " + dir + "/nope.ckpt --graphs " + dir +
                                      "/garbage.graphs");
    CHECK(garbage.exit_code == 3); // checkpoint opens first and is missing
}

} // TEST_SUITE
