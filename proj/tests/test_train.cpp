#include <cmath>
#include <set>

#include "cangat/error.hpp"
#include "cangat/eval.hpp"
#include "cangat/train.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cangat;

namespace {

ArchConfig toy_arch() {
    ArchConfig a;
    a.gat_layers = 2;
    a.heads = 2;
    a.hidden = 6;
    a.linear_layers = 3;
    a.dropout = 0.1;
    a.jk_hidden = 2;
    return a;
}

// Separable two-class window set: attack windows contain the reserved id
// 0x7FF, benign ones never do.  Payload bytes vary per window so graphs are
// not literal copies of one another.
WindowDataset separable_dataset(std::size_t per_class, std::uint64_t seed = 5) {
    Rng rng(seed);
    WindowDataset ds;
    ds.window = 6;
    ds.stride = 6;
    std::uint64_t start = 0;
    for (std::size_t k = 0; k < 2 * per_class; ++k) {
        const bool attack = k % 2 == 1;
        std::vector<CanMessage> msgs;
        for (int i = 0; i < 6; ++i) {
            CanMessage m;
            m.timestamp = double(start + i) * 0.001;
            m.can_id = (i % 2 == 0) ? 0x010 : 0x020;
            if (attack && i == 3) m.can_id = 0x7FF;
            m.dlc = 2;
            m.payload[0] = static_cast<std::uint8_t>(rng.uniform_int(256));
            m.payload[1] = static_cast<std::uint8_t>(rng.uniform_int(256));
            m.label = (attack && i == 3) ? Label::Attack : Label::Benign;
            msgs.push_back(m);
        }
        ds.graphs.push_back(build_window_graph(msgs.data(), msgs.size(), start));
        start += 6;
    }
    return ds;
}

TrainConfig fast_config() {
    TrainConfig cfg;
    cfg.lr = 0.01;
    cfg.batch_size = 16;
    cfg.epochs = 15;
    cfg.warmup_epochs = 3;
    cfg.val_fraction = 0.25;
    cfg.seed = 11;
    return cfg;
}

} // namespace

TEST_SUITE("train") {

TEST_CASE("adam takes a unit-scaled first step and ignores zero gradients") {
    Tensor p = Tensor::from_data(1, 2, {1.0, -2.0}, true);
    std::vector<std::pair<std::string, Tensor>> params = {{"p", p}};
    AdamState state;

    p.mutable_grad()[0] = 0.5;
    p.mutable_grad()[1] = -4.0;
    adam_step(params, state, 0.1);
    // First step: lr * g / (|g| + eps) = lr * sign(g), to within eps.
    CHECK(p.value()[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
    CHECK(p.value()[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
    CHECK(state.t == 1);

    // Zero gradient: moments stay zero, value untouched.
    Tensor q = Tensor::from_data(1, 1, {3.5}, true);
    std::vector<std::pair<std::string, Tensor>> qparams = {{"q", q}};
    AdamState qstate;
    q.zero_grad();
    adam_step(qparams, qstate, 0.1);
    CHECK(q.value()[0] == 3.5);
}

TEST_CASE("adam second step with a constant gradient keeps unit scaling") {
    Tensor p = Tensor::from_data(1, 1, {1.0}, true);
    std::vector<std::pair<std::string, Tensor>> params = {{"p", p}};
    AdamState state;
    for (int i = 0; i < 2; ++i) {
        p.zero_grad();
        p.mutable_grad()[0] = 0.5;
        adam_step(params, state, 0.1);
    }
    // Bias correction makes mhat = g and vhat = g^2 for a constant gradient.
    CHECK(p.value()[0] == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("stratified split is deterministic and class-balanced") {
    WindowDataset ds = separable_dataset(25); // 25 benign + 25 attack
    SplitIndices a = split_dataset(ds, 0.2, 42, false);
    SplitIndices b = split_dataset(ds, 0.2, 42, false);
    SplitIndices c = split_dataset(ds, 0.2, 43, false);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.val != c.val);

    CHECK(a.train.size() == 40);
    CHECK(a.val.size() == 10);
    std::size_t val_attack = 0;
    for (std::size_t i : a.val)
        if (ds.graphs[i].label == Label::Attack) ++val_attack;
    CHECK(val_attack == 5); // 20% of each class

    // Index sets partition the dataset.
    std::set<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.val.begin(), a.val.end());
    CHECK(all.size() == 50);
}

TEST_CASE("chronological split holds out the latest windows") {
    WindowDataset ds = separable_dataset(10);
    SplitIndices s = split_dataset(ds, 0.25, 1, true);
    CHECK(s.val.size() == 5);
    std::uint64_t max_train = 0, min_val = UINT64_MAX;
    for (std::size_t i : s.train)
        max_train = std::max(max_train, ds.graphs[i].window_start_index);
    for (std::size_t i : s.val)
        min_val = std::min(min_val, ds.graphs[i].window_start_index);
    CHECK(max_train < min_val);
}

TEST_CASE("split validates its inputs") {
    WindowDataset ds = separable_dataset(5);
    CHECK_THROWS_AS(split_dataset(ds, 0.0, 1, false), Error);
    CHECK_THROWS_AS(split_dataset(ds, 1.0, 1, false), Error);
    WindowDataset empty;
    CHECK_THROWS_AS(split_dataset(empty, 0.2, 1, false), Error);
}

TEST_CASE("teacher training separates an easy dataset") {
    WindowDataset ds = separable_dataset(30);
    TrainResult r = train_teacher(ds, toy_arch(), fast_config());
    REQUIRE(r.history.size() == 15);
    CHECK(r.best_val_acc >= 0.99);
    for (const EpochStats& e : r.history) {
        CHECK(e.stage == "teacher");
        CHECK(std::isfinite(e.train_loss));
    }
    CHECK(r.best_epoch >= 1);
    CHECK(r.best_epoch <= 15);

    // The returned model really is the best-epoch snapshot.
    EvalReport rep = evaluate(r.model, ds);
    CHECK(rep.metrics.accuracy >= 0.99);
}

TEST_CASE("training is reproducible end to end") {
    WindowDataset ds = separable_dataset(15);
    TrainConfig cfg = fast_config();
    cfg.epochs = 5;
    TrainResult a = train_teacher(ds, toy_arch(), cfg);
    TrainResult b = train_teacher(ds, toy_arch(), cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_loss == b.history[i].val_loss);
        CHECK(a.history[i].val_acc == b.history[i].val_acc);
    }
    for (std::size_t i = 0; i < a.model.named_params().size(); ++i)
        CHECK(a.model.named_params()[i].second.value() ==
              b.model.named_params()[i].second.value());
}

TEST_CASE("distillation stages run warmup then mixed loss and track the teacher") {
    WindowDataset ds = separable_dataset(30);
    TrainConfig cfg = fast_config();
    TrainResult teacher = train_teacher(ds, toy_arch(), cfg);

    auto teacher_before = teacher.model.snapshot_values();
    TrainConfig scfg = fast_config();
    scfg.epochs = 10;
    scfg.warmup_epochs = 3;
    TrainResult student = distill_student(teacher.model, ds, toy_arch(), scfg);

    REQUIRE(student.history.size() == 10);
    for (std::size_t i = 0; i < 3; ++i) CHECK(student.history[i].stage == "warmup");
    for (std::size_t i = 3; i < 10; ++i) CHECK(student.history[i].stage == "distill");

    CHECK(std::abs(student.best_val_acc - teacher.best_val_acc) <= 0.01);

    // The teacher's parameters never move during distillation.
    auto teacher_after = teacher.model.snapshot_values();
    CHECK(teacher_before == teacher_after);
}

TEST_CASE("alpha=1 distillation walks the exact hard-loss trajectory") {
    WindowDataset ds = separable_dataset(12);
    TrainConfig cfg = fast_config();
    cfg.epochs = 6;
    TrainResult teacher = train_teacher(ds, toy_arch(), cfg);

    TrainConfig all_distill = cfg;
    all_distill.alpha = 1.0;
    all_distill.warmup_epochs = 0; // every epoch uses the blended loss
    TrainConfig all_warmup = cfg;
    all_warmup.warmup_epochs = cfg.epochs; // every epoch uses the hard loss

    TrainResult a = distill_student(teacher.model, ds, toy_arch(), all_distill);
    TrainResult b = distill_student(teacher.model, ds, toy_arch(), all_warmup);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].stage == "distill");
        CHECK(b.history[i].stage == "warmup");
        CHECK(a.history[i].train_loss == b.history[i].train_loss); // bit-for-bit
        CHECK(a.history[i].val_acc == b.history[i].val_acc);
    }
    for (std::size_t i = 0; i < a.model.named_params().size(); ++i)
        CHECK(a.model.named_params()[i].second.value() ==
              b.model.named_params()[i].second.value());
}

TEST_CASE("epochs=0 returns the freshly initialized model with empty history") {
    WindowDataset ds = separable_dataset(5);
    TrainConfig cfg = fast_config();
    cfg.epochs = 0;
    TrainResult r = train_teacher(ds, toy_arch(), cfg);
    CHECK(r.history.empty());
    CHECK(r.best_epoch == 0);
    GatModel fresh = build_model(toy_arch(), cfg.seed);
    for (std::size_t i = 0; i < fresh.named_params().size(); ++i)
        CHECK(r.model.named_params()[i].second.value() ==
              fresh.named_params()[i].second.value());
}

TEST_CASE("single-class training data is rejected") {
    WindowDataset ds = separable_dataset(10);
    for (auto& g : ds.graphs) g.label = Label::Benign;
    CHECK_THROWS_AS(train_teacher(ds, toy_arch(), fast_config()), Error);
}

TEST_CASE("distillation requires an initialized teacher") {
    WindowDataset ds = separable_dataset(5);
    GatModel empty_teacher;
    CHECK_THROWS_AS(distill_student(empty_teacher, ds, toy_arch(), fast_config()), Error);
}

TEST_CASE("gradient clipping: generous bounds are exact no-ops, tight ones still train") {
    WindowDataset ds = separable_dataset(10);
    TrainConfig cfg = fast_config();
    cfg.epochs = 3;

    // A bound far above any real gradient norm must not perturb a single bit.
    TrainConfig loose = cfg;
    loose.clip_norm = 1e9;
    TrainConfig off = cfg;
    off.clip_norm = 0.0;
    TrainResult a = train_teacher(ds, toy_arch(), loose);
    TrainResult b = train_teacher(ds, toy_arch(), off);
    for (std::size_t i = 0; i < a.model.named_params().size(); ++i)
        CHECK(a.model.named_params()[i].second.value() ==
              b.model.named_params()[i].second.value());

    // An aggressive bound still produces finite, well-formed training.
    TrainConfig tight = cfg;
    tight.clip_norm = 1e-3;
    TrainResult t = train_teacher(ds, toy_arch(), tight);
    REQUIRE(t.history.size() == 3);
    for (const EpochStats& e : t.history) CHECK(std::isfinite(e.train_loss));
    bool differs = false;
    for (std::size_t i = 0; i < t.model.named_params().size(); ++i)
        if (t.model.named_params()[i].second.value() !=
            b.model.named_params()[i].second.value())
            differs = true;
    CHECK(differs);
}

TEST_CASE("history csv carries config echo and one row per epoch") {
    WindowDataset ds = separable_dataset(8);
    TrainConfig cfg = fast_config();
    cfg.epochs = 4;
    TrainResult r = train_teacher(ds, toy_arch(), cfg);

    std::string dir = scratch_dir("train");
    std::string path = dir + "/history.csv";
    write_history_csv(r.history, path, "{\"epochs\":4}", 0xABCDULL);
    std::string text = read_file(path);
    CHECK(text.find("# training history v1\n") != std::string::npos);
    CHECK(text.find("# config_hash 000000000000abcd\n") != std::string::npos);
    CHECK(text.find("# config {\"epochs\":4}\n") != std::string::npos);
    CHECK(text.find("epoch,stage,train_loss,val_loss,val_acc,val_f1\n") != std::string::npos);
    CHECK(text.find("\n1,teacher,") != std::string::npos);
    CHECK(text.find("\n4,teacher,") != std::string::npos);
    std::size_t rows = 0;
    for (char ch : text)
        if (ch == '\n') ++rows;
    CHECK(rows == 4 + 4); // 3 comment lines + header + 4 epochs
}

} // TEST_SUITE
