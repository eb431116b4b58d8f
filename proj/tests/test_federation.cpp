#include <doctest.h>

#include <cmath>

#include "privsim/federation.hpp"
#include "privsim/metrics.hpp"
#include "privsim/runlog.hpp"

using namespace privsim;

namespace {

RunConfig small_config() {
    RunConfig cfg;
    cfg.seed = 2024;
    cfg.dataset.synthetic = SynthSpec{800, 4, 0.02, kDefaultYFloor};
    cfg.hidden = {4};
    cfg.participants = 4;
    cfg.partition.validation_size = 80;
    cfg.partition.test_size = 80;
    cfg.server.m = 4;
    cfg.server.k = 2;
    cfg.training.iterations = 5;
    cfg.training.batch_size = 32;
    cfg.training.learning_rate = 0.005;
    cfg.privacy.eps1 = 1.0;
    cfg.privacy.eps2 = 1.0;
    cfg.termination.rounds = 6;
    cfg.resolve_and_validate();
    return cfg;
}

std::string records_fingerprint(const SimulationResult& r) {
    std::string s;
    for (const auto& rec : r.records) s += record_line(rec, false) + "\n";
    return s;
}

}  // namespace

TEST_CASE("aggregate: idempotent mean, arithmetic, brute-force oracle, mismatch") {
    Architecture a;
    a.input_dim = 2;
    a.hidden = {3};
    a.task = Task::Regression;
    ModelParams w = init_params(a, 5);
    ModelParams mean = aggregate({w, w, w});
    for (std::size_t l = 0; l < w.layers.size(); ++l)
        CHECK(max_abs_diff(mean.layers[l], w.layers[l]) < 1e-15);

    ModelParams s1, s2, s3;
    s1.layers.push_back(Matrix(1, 1, 1.0));
    s2.layers.push_back(Matrix(1, 1, 2.0));
    s3.layers.push_back(Matrix(1, 1, 3.0));
    CHECK(aggregate({s1, s2, s3}).layers[0](0, 0) == doctest::Approx(2.0));

    Rng rng(9);
    std::vector<ModelParams> uploads;
    for (int i = 0; i < 5; ++i) uploads.push_back(init_params(a, 100 + i));
    ModelParams got = aggregate(uploads);
    for (std::size_t l = 0; l < got.layers.size(); ++l)
        for (std::size_t i = 0; i < got.layers[l].size(); ++i) {
            double sum = 0.0;
            for (const auto& u : uploads) sum += u.layers[l].data()[i];
            CHECK(got.layers[l].data()[i] == doctest::Approx(sum / 5.0).epsilon(1e-12));
        }

    ModelParams bad;
    bad.layers.push_back(Matrix(2, 2, 0.0));
    CHECK_THROWS_WITH_AS(aggregate({s1, bad}), doctest::Contains("upload 1"),
                         std::invalid_argument);
}

TEST_CASE("model-average fixed point") {
    Architecture a;
    a.input_dim = 3;
    a.hidden = {5};
    a.task = Task::Regression;
    ModelParams w = init_params(a, 77);
    ModelParams fixed = aggregate(std::vector<ModelParams>(4, w));
    for (std::size_t l = 0; l < w.layers.size(); ++l)
        CHECK(max_abs_diff(fixed.layers[l], w.layers[l]) < 1e-15);
}

TEST_CASE("malicious upload: range and reproducibility") {
    Architecture a;
    a.input_dim = 3;
    a.hidden = {4};
    a.task = Task::Regression;
    Rng r1(6), r2(6);
    ModelParams m1 = malicious_upload(a, r1);
    ModelParams m2 = malicious_upload(a, r2);
    for (std::size_t l = 0; l < m1.layers.size(); ++l) {
        CHECK(max_abs_diff(m1.layers[l], m2.layers[l]) == 0.0);
        for (double v : m1.layers[l].data()) {
            REQUIRE(v >= 0.0);
            REQUIRE(v < 1.0);
        }
    }
}

TEST_CASE("local_round: zero iterations returns the synced weights unchanged") {
    RunConfig cfg = small_config();
    World world = build_world(cfg);
    Participant& p = world.participants[0];
    TrainingConfig t = cfg.training;
    t.iterations = 0;
    Rng noise(1);
    ModelParams out = local_round(p, world.arch, world.init, t, true, sensitivity(world.arch),
                                  cfg.privacy.eps2, noise);
    for (std::size_t l = 0; l < out.layers.size(); ++l)
        CHECK(max_abs_diff(out.layers[l], world.init.layers[l]) == 0.0);
}

TEST_CASE("local_round is deterministic under a fixed seed") {
    RunConfig cfg = small_config();
    World w1 = build_world(cfg);
    World w2 = build_world(cfg);
    Rng n1(42), n2(42);
    ModelParams a = local_round(w1.participants[1], w1.arch, w1.init, cfg.training, true,
                                sensitivity(w1.arch), cfg.privacy.eps2, n1);
    ModelParams b = local_round(w2.participants[1], w2.arch, w2.init, cfg.training, true,
                                sensitivity(w2.arch), cfg.privacy.eps2, n2);
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        CHECK(max_abs_diff(a.layers[l], b.layers[l]) == 0.0);
}

TEST_CASE("local training descends on noiseless data when the noise vanishes") {
    // one epoch, iteration by iteration; the surrogate loss over the shard
    // should fall monotonically in nearly all seeded runs
    int monotone = 0;
    const int seeds = 40;
    for (int seed = 0; seed < seeds; ++seed) {
        RunConfig cfg = small_config();
        cfg.seed = 5000 + seed;
        cfg.dataset.synthetic->noise_sd = 0.0;
        cfg.training.learning_rate = 0.002;
        World world = build_world(cfg);
        Participant& p = world.participants[0];
        TrainingConfig t = cfg.training;
        t.iterations = 1;

        auto shard_loss = [&](const ModelParams& params) {
            Matrix h = hidden_activations(world.arch, params, p.shard.features);
            Matrix y(p.shard.n(), 1);
            for (std::size_t i = 0; i < p.shard.n(); ++i) y(i, 0) = p.shard.labels[i];
            return direct_loss_value(h, y, params.layers.back(), Task::Regression) /
                   double(p.shard.n());
        };

        ModelParams cur = world.init;
        double prev = shard_loss(cur);
        bool ok = true;
        Rng noise(seed);
        for (int it = 0; it < 10; ++it) {
            cur = local_round(p, world.arch, cur, t, true, sensitivity(world.arch), 1e12, noise);
            double now = shard_loss(cur);
            if (now > prev + 1e-12) ok = false;
            prev = now;
        }
        if (ok) ++monotone;
    }
    CHECK(double(monotone) / seeds >= 0.95);
}

TEST_CASE("run_simulation: record shape, threshold accounting, determinism across threads") {
    RunConfig cfg = small_config();
    SimulationResult r1 = run_simulation(cfg);
    REQUIRE(r1.records.size() == 6);
    for (const auto& rec : r1.records) {
        CHECK(rec.uploaders.size() == cfg.server.m);   // exactly M scored per round
        CHECK(rec.scores.size() == cfg.server.m);
        CHECK(rec.selected.size() == cfg.server.k);
        for (std::size_t id : rec.selected)
            CHECK(std::find(rec.uploaders.begin(), rec.uploaders.end(), id) !=
                  rec.uploaders.end());
        CHECK(!rec.digest.empty());
    }

    SimulationResult r2 = run_simulation(cfg);
    CHECK(records_fingerprint(r1) == records_fingerprint(r2));

    RunConfig threaded = cfg;
    threaded.threads = 3;
    SimulationResult r3 = run_simulation(threaded);
    CHECK(records_fingerprint(r1) == records_fingerprint(r3));
}

TEST_CASE("preassign collect mode is deterministic and trains only the chosen") {
    RunConfig cfg = small_config();
    cfg.server.collect = CollectMode::Preassign;
    cfg.server.m = 2;
    cfg.server.k = 1;
    SimulationResult r1 = run_simulation(cfg);
    SimulationResult r2 = run_simulation(cfg);
    CHECK(records_fingerprint(r1) == records_fingerprint(r2));
    for (const auto& rec : r1.records) CHECK(rec.uploaders.size() == 2);
}

TEST_CASE("a delayed joiner does not change earlier rounds") {
    RunConfig with_joiner = small_config();
    with_joiner.participants = 5;
    with_joiner.profiles.clean = -1;
    with_joiner.server.m = 3;
    with_joiner.server.k = 2;
    with_joiner.termination.rounds = 8;
    with_joiner.schedule.push_back({4, 4, std::nullopt, std::nullopt});  // joins at round 4
    with_joiner.resolve_and_validate();

    RunConfig without = with_joiner;
    without.schedule.clear();
    without.schedule.push_back({4, 1000, std::nullopt, std::nullopt});  // never joins
    without.resolve_and_validate();

    SimulationResult a = run_simulation(with_joiner);
    SimulationResult b = run_simulation(without);
    REQUIRE(a.records.size() >= 4);
    for (std::size_t r = 0; r < 4; ++r)
        CHECK(record_line(a.records[r], false) == record_line(b.records[r], false));
    // and the joiner actually appears later
    bool seen = false;
    for (const auto& rec : a.records)
        for (std::size_t id : rec.uploaders)
            if (id == 4) seen = true;
    CHECK(seen);
}

TEST_CASE("too few live participants aborts the round") {
    RunConfig cfg = small_config();
    cfg.schedule.push_back({0, 0, 3, std::nullopt});  // leaves at round 3
    cfg.schedule.push_back({1, 0, 3, std::nullopt});
    cfg.resolve_and_validate();
    CHECK_THROWS_WITH_AS(run_simulation(cfg), doctest::Contains("live participants"),
                         std::runtime_error);
}

TEST_CASE("config invariants rejected before round 1") {
    RunConfig cfg = small_config();
    cfg.server.k = 10;  // K > M
    CHECK_THROWS_AS(cfg.resolve_and_validate(), ConfigError);

    RunConfig cfg2 = small_config();
    cfg2.server.m = 40;  // M > N
    CHECK_THROWS_AS(cfg2.resolve_and_validate(), ConfigError);
}

TEST_CASE("degenerate single-participant protocol tracks the stand-alone baseline") {
    RunConfig cfg;
    cfg.seed = 99;
    cfg.dataset.synthetic = SynthSpec{300, 3, 0.05, kDefaultYFloor};
    cfg.hidden = {2};
    cfg.participants = 1;
    cfg.partition.validation_size = 30;
    cfg.partition.test_size = 30;
    cfg.server.m = 1;
    cfg.server.k = 1;
    cfg.training.iterations = 3;
    cfg.training.batch_size = 32;
    cfg.training.learning_rate = 0.005;
    cfg.privacy.eps2 = 1e9;
    cfg.termination.rounds = 10;
    cfg.resolve_and_validate();

    SimOptions keep;
    keep.keep_weight_history = true;
    SimulationResult dp = run_simulation(cfg, keep);
    SimulationResult sa = baseline_standalone(cfg, 0, keep);
    REQUIRE(dp.weight_history.size() == sa.weight_history.size());
    for (std::size_t r = 0; r < dp.weight_history.size(); ++r)
        for (std::size_t l = 0; l < dp.weight_history[r].layers.size(); ++l)
            CHECK(max_abs_diff(dp.weight_history[r].layers[l], sa.weight_history[r].layers[l]) <
                  1e-9);
}

TEST_CASE("standalone equals centralized when one participant holds all data") {
    RunConfig cfg = small_config();
    cfg.participants = 1;
    cfg.profiles.clean = -1;
    cfg.server.m = 1;
    cfg.server.k = 1;
    cfg.resolve_and_validate();
    SimulationResult c = baseline_centralized(cfg);
    SimulationResult s = baseline_standalone(cfg, 0);
    CHECK(records_fingerprint(c) == records_fingerprint(s));
}

TEST_CASE("baseline ordering: centralized beats DP runs and small-shard standalone") {
    RunConfig cfg;
    cfg.seed = 31;
    cfg.dataset.synthetic = SynthSpec{2000, 4, 0.0, kDefaultYFloor};
    cfg.hidden = {4};
    cfg.participants = 10;
    cfg.partition.validation_size = 200;
    cfg.partition.test_size = 300;
    cfg.server.m = 5;
    cfg.server.k = 3;
    cfg.training.iterations = 10;
    cfg.training.batch_size = 32;
    cfg.training.learning_rate = 0.01;
    cfg.privacy.eps1 = 1.0;
    cfg.privacy.eps2 = 1.0;
    cfg.termination.rounds = 120;
    cfg.resolve_and_validate();

    SimulationResult central = baseline_centralized(cfg);
    SimulationResult dp = run_simulation(cfg);
    SimulationResult solo = baseline_standalone(cfg, 0);
    double c = central.records.back().metric;
    double d = dp.records.back().metric;
    double s = solo.records.back().metric;
    CHECK(c < d);   // noiseless centralized beats the DP collaborative run
    CHECK(s >= c);  // a tenth of the data cannot beat all of it
}

TEST_CASE("noiseless fit beats the observation-noise floor computed by the oracle") {
    // generate noisy data, train centralized on it, compare against the
    // regenerated noiseless ground truth on the held-out test rows
    RunConfig cfg;
    cfg.seed = 207;
    cfg.dataset.synthetic = SynthSpec{10000, 4, 0.08, kDefaultYFloor};
    cfg.hidden = {8};
    cfg.participants = 1;
    cfg.partition.validation_size = 500;
    cfg.partition.test_size = 1500;
    cfg.server.m = 1;
    cfg.server.k = 1;
    cfg.training.iterations = 60;
    cfg.training.batch_size = 64;
    cfg.training.learning_rate = 0.01;
    cfg.termination.rounds = 30;
    cfg.resolve_and_validate();

    SimulationResult fit = baseline_centralized(cfg);

    // oracle: same seed with the noise switched off reproduces the truth
    SynthSpec clean = *cfg.dataset.synthetic;
    clean.noise_sd = 0.0;
    Rng master(cfg.seed);
    Rng synth_rng = master.child(streams::kDataset).child(0);
    Dataset truth = synth_regression(clean, synth_rng);

    Rng noisy_rng = master.child(streams::kDataset).child(0);
    Dataset noisy = synth_regression(*cfg.dataset.synthetic, noisy_rng);

    Rng part_rng = master.child(streams::kDataset).child(1);
    PartitionSpec pspec;
    pspec.participants = 1;
    pspec.validation_size = 500;
    pspec.test_size = 1500;
    PartitionPlan plan = partition(noisy, pspec, part_rng);

    std::vector<double> truth_test, noisy_test;
    for (std::size_t i : plan.test) {
        truth_test.push_back(truth.labels[i]);
        noisy_test.push_back(noisy.labels[i]);
    }
    double noise_floor = mre(noisy_test, truth_test);  // how far the noise moved labels

    Dataset test_rows = take(noisy, plan.test);
    Matrix z = forward(fit.arch, fit.final_params, test_rows.features);
    std::vector<double> preds(test_rows.n());
    for (std::size_t i = 0; i < test_rows.n(); ++i) preds[i] = z(i, 0);
    double model_error = mre(preds, truth_test);  // distance to the true function

    CHECK(model_error < noise_floor);
}

TEST_CASE("epoch bookkeeping matches the batch arithmetic") {
    RunConfig cfg = small_config();
    cfg.participants = 2;
    cfg.profiles.clean = -1;
    cfg.server.m = 2;
    cfg.server.k = 1;
    cfg.partition.validation_size = 100;
    cfg.partition.test_size = 100;
    // 300 rows per shard, batch 50 -> 6 batches per epoch; 4 iterations per
    // round and 6 rounds = 24 batches -> 4 epochs
    cfg.dataset.synthetic = SynthSpec{800, 4, 0.02, kDefaultYFloor};
    cfg.training.batch_size = 50;
    cfg.training.iterations = 4;
    cfg.termination.rounds = 6;
    cfg.resolve_and_validate();
    SimulationResult r = run_simulation(cfg);
    CHECK(r.epochs == 4);
    LedgerReport lr = ledger_report(r.ledger, r.epochs);
    CHECK(lr.per_epoch == std::max(cfg.privacy.eps1, cfg.privacy.eps2));
    CHECK(lr.cumulative == doctest::Approx(4.0 * lr.per_epoch));
}

TEST_CASE("target-metric termination records rounds_to_target") {
    RunConfig cfg = small_config();
    cfg.dataset.synthetic->noise_sd = 0.0;
    cfg.privacy.eps2 = 1e9;
    cfg.termination.rounds.reset();
    cfg.termination.target_metric = 1.5;  // loose target, reached immediately
    cfg.termination.max_rounds = 50;
    SimulationResult r = run_simulation(cfg);
    REQUIRE(r.rounds_to_target.has_value());
    CHECK(*r.rounds_to_target == r.records.size());
    CHECK(r.records.back().metric <= 1.5);
}

TEST_CASE("local drop-out threshold removes a participant") {
    RunConfig cfg = small_config();
    cfg.participants = 6;
    cfg.profiles.clean = -1;
    cfg.server.m = 3;
    cfg.server.k = 2;
    cfg.termination.rounds = 10;
    // absurdly generous local target: participant 0 drops after its first upload
    cfg.schedule.push_back({0, 0, std::nullopt, 100.0});
    cfg.resolve_and_validate();
    SimulationResult r = run_simulation(cfg);
    bool early = false, late = false;
    for (const auto& rec : r.records)
        for (std::size_t id : rec.uploaders) {
            if (id == 0 && rec.round <= 1) early = true;
            if (id == 0 && rec.round > 2) late = true;
        }
    CHECK(!late);
    (void)early;
}
