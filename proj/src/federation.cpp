#include "privsim/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include "privsim/metrics.hpp"

namespace privsim {

namespace {

void shuffle_ids(std::vector<std::size_t>& ids, Rng& rng) {
    for (std::size_t i = ids.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
        if (j >= i) j = i - 1;
        std::swap(ids[i - 1], ids[j]);
    }
}

/// Deterministic static-partition parallel loop; results ordered by index
/// regardless of thread count.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::exception_ptr error;
    std::mutex error_mu;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            try {
                for (std::size_t i = t; i < n; i += threads) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

Matrix batch_features(const Dataset& shard, const std::vector<std::size_t>& idx) {
    Matrix x(idx.size(), shard.dim());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < shard.dim(); ++c) x(r, c) = shard.features(idx[r], c);
    return x;
}

Matrix batch_targets(const Dataset& shard, const std::vector<std::size_t>& idx,
                     const Architecture& arch) {
    if (arch.task == Task::Regression) {
        Matrix y(idx.size(), 1);
        for (std::size_t r = 0; r < idx.size(); ++r) y(r, 0) = shard.labels[idx[r]];
        return y;
    }
    std::vector<double> labels(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) labels[r] = shard.labels[idx[r]];
    return one_hot(labels, arch.output_dim);
}

double evaluate(const Architecture& arch, const ModelParams& params, const Dataset& ds,
                double y_floor, ClfSemantics semantics) {
    Matrix z = forward(arch, params, ds.features);
    if (arch.task == Task::Regression) {
        std::vector<double> preds(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i) preds[i] = z(i, 0);
        return mre(preds, ds.labels, y_floor);
    }
    std::vector<std::size_t> pred(ds.n()), truth(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        truth[i] = static_cast<std::size_t>(ds.labels[i]);
        if (semantics == ClfSemantics::Argmax) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < z.cols(); ++j)
                if (z(i, j) > z(i, best)) best = j;
            pred[i] = best;
        } else {
            pred[i] = z.cols();  // no-match sentinel
            bool ok = true;
            std::size_t hot = z.cols();
            for (std::size_t j = 0; j < z.cols(); ++j) {
                if (z(i, j) >= 0.5) {
                    if (hot != z.cols()) ok = false;
                    hot = j;
                }
            }
            if (ok && hot != z.cols()) pred[i] = hot;
        }
    }
    return accuracy(pred, truth);
}

struct MetricDirection {
    static bool reached(Task task, double metric, double target) {
        return task == Task::Regression ? metric <= target : metric >= target;
    }
};

}  // namespace

std::vector<std::size_t> BatchCursor::next(std::size_t batch_size, Rng& shuffle_rng) {
    if (n_ == 0) throw std::invalid_argument("batch cursor: empty shard");
    if (order_.empty() || pos_ >= order_.size()) {
        if (order_.empty()) {
            order_.resize(n_);
            std::iota(order_.begin(), order_.end(), std::size_t{0});
        }
        shuffle_ids(order_, shuffle_rng);
        pos_ = 0;
    }
    if (pos_ == 0) ++epochs_;
    std::size_t take = std::min(batch_size, n_ - pos_);
    std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
    pos_ += take;
    return idx;
}

ModelParams local_round(Participant& p, const Architecture& arch, const ModelParams& global,
                        const TrainingConfig& training, bool perturb, const Sensitivity& delta,
                        double eps2, Rng& noise_rng) {
    p.params = global;
    if (p.shard.n() < training.batch_size && !p.warned_small_shard) {
        std::cerr << "privsim: participant " << p.id << ": shard (" << p.shard.n()
                  << " rows) smaller than batch size " << training.batch_size
                  << "; using whole shard per batch\n";
        p.warned_small_shard = true;
    }
    const std::size_t first_trained =
        training.mode == TrainMode::LastLayer ? p.params.layers.size() - 1 : 0;

    for (std::size_t j = 0; j < training.iterations; ++j) {
        std::vector<std::size_t> idx = p.cursor.next(training.batch_size, p.shuffle_rng);
        Matrix x = batch_features(p.shard, idx);
        Matrix y = batch_targets(p.shard, idx, arch);
        Matrix h = hidden_activations(arch, p.params, x);
        PolyLossCoeffs c = batch_coeffs(h, y, arch.task);
        if (perturb) c = perturb_coeffs(c, delta, eps2, noise_rng);
        Gradients g = grad(c, arch, p.params, x, y);

        if (training.grad_clamp > 0.0) {
            double peak = 0.0;
            for (std::size_t l = first_trained; l < g.dW.size(); ++l)
                for (double v : g.dW[l].data()) peak = std::max(peak, std::abs(v));
            if (peak > training.grad_clamp) {
                double s = training.grad_clamp / peak;
                for (std::size_t l = first_trained; l < g.dW.size(); ++l)
                    for (double& v : g.dW[l].data()) v *= s;
            }
        }
        for (std::size_t l = first_trained; l < g.dW.size(); ++l)
            axpy(p.params.layers[l], -training.learning_rate, g.dW[l]);
    }
    return p.params;
}

ModelParams malicious_upload(const Architecture& arch, Rng& rng) {
    ModelParams p;
    for (auto [r, c] : arch.layer_shapes()) {
        Matrix w(r, c);
        for (double& v : w.data()) v = rng.uniform01();
        p.layers.push_back(std::move(w));
    }
    return p;
}

ModelParams aggregate(const std::vector<ModelParams>& uploads) {
    if (uploads.empty()) throw std::invalid_argument("aggregate: no uploads");
    ModelParams mean = uploads.front();
    for (std::size_t u = 1; u < uploads.size(); ++u) {
        if (!uploads[u].same_shapes(mean))
            throw std::invalid_argument("aggregate: upload " + std::to_string(u) +
                                        " has mismatched shapes");
        for (std::size_t l = 0; l < mean.layers.size(); ++l)
            axpy(mean.layers[l], 1.0, uploads[u].layers[l]);
    }
    const double inv = 1.0 / static_cast<double>(uploads.size());
    for (auto& w : mean.layers)
        for (double& v : w.data()) v *= inv;
    return mean;
}

World build_world(const RunConfig& cfg) {
    World world;
    Rng master(cfg.seed);
    Rng data_rng = master.child(streams::kDataset);

    Dataset full;
    Encoder encoder;
    nlohmann::ordered_json manifest;
    std::optional<SpecialRule> special;

    if (cfg.dataset.synthetic) {
        SynthSpec spec = *cfg.dataset.synthetic;
        spec.y_floor = cfg.dataset.y_floor;
        Rng synth_rng = data_rng.child(0);
        full = synth_regression(spec, synth_rng);
        if (cfg.dataset.add_bias_column) {
            Matrix withbias(full.n(), full.dim() + 1);
            for (std::size_t r = 0; r < full.n(); ++r) {
                for (std::size_t c = 0; c < full.dim(); ++c) withbias(r, c) = full.features(r, c);
                withbias(r, full.dim()) = 1.0;
            }
            full.features = std::move(withbias);
        }
        manifest["source"] = "synthetic";
        manifest["n"] = spec.n;
        manifest["d"] = spec.d;
        manifest["noise_sd"] = spec.noise_sd;
        manifest["y_floor"] = spec.y_floor;
        manifest["seed"] = cfg.seed;
        if (cfg.partition.special_rule) {
            // synthetic feature columns are named x0..x{d-1}
            const std::string& name = cfg.partition.special_rule->column;
            if (name.size() < 2 || name[0] != 'x')
                throw ConfigError("config: field 'partition.special_rule.column': synthetic "
                                  "columns are named x0..x" + std::to_string(spec.d - 1));
            std::size_t col = std::stoul(name.substr(1));
            if (col >= spec.d)
                throw ConfigError("config: field 'partition.special_rule.column': " + name +
                                  " out of range");
            special = SpecialRule{name, cfg.partition.special_rule->low,
                                  cfg.partition.special_rule->high, col};
        }
    } else {
        RawTable table = read_csv(cfg.dataset.csv_path);
        Schema schema = Schema::from_file(cfg.dataset.schema_path);
        PrepareOptions opt;
        opt.label_log1p = cfg.dataset.label_log1p;
        opt.y_floor = cfg.dataset.y_floor;
        opt.add_bias_column = cfg.dataset.add_bias_column;
        opt.classification_label = cfg.task == Task::Classification;
        full = prepare(table, schema, opt, &encoder);
        manifest = encoder.manifest();
        manifest["source"] = cfg.dataset.csv_path;
        manifest["seed"] = cfg.seed;
        for (const auto& w : encoder.warnings()) std::cerr << "privsim: " << w << "\n";
        if (cfg.partition.special_rule) {
            special = SpecialRule{cfg.partition.special_rule->column,
                                  cfg.partition.special_rule->low,
                                  cfg.partition.special_rule->high,
                                  encoder.feature_index(cfg.partition.special_rule->column)};
        }
    }

    world.arch.input_dim = full.dim();
    world.arch.hidden = cfg.hidden;
    world.arch.task = cfg.task;
    world.arch.featurizer = cfg.featurizer;
    if (cfg.task == Task::Classification) {
        world.arch.output_dim = encoder.num_classes();
        if (world.arch.output_dim < 2)
            throw ConfigError("config: classification needs at least two label classes");
        if (world.arch.featurizer.kind == FeaturizerSpec::Kind::Identity)
            world.arch.featurizer.width = world.arch.input_dim;
    } else {
        world.arch.output_dim = 1;
    }

    PartitionSpec pspec;
    pspec.participants = cfg.participants;
    const std::size_t n = full.n();
    pspec.validation_size = cfg.partition.validation_size >= 0
                                ? static_cast<std::size_t>(cfg.partition.validation_size)
                                : n / 10;
    pspec.test_size = cfg.partition.test_size >= 0
                          ? static_cast<std::size_t>(cfg.partition.test_size)
                          : n / 10;
    pspec.special = special;
    pspec.special_participants = cfg.profiles.special;
    Rng part_rng = data_rng.child(1);
    PartitionPlan plan = partition(full, pspec, part_rng);

    world.validation = take(full, plan.validation);
    world.test = take(full, plan.test);
    if (!plan.special_test.empty()) world.special_test = take(full, plan.special_test);

    const std::vector<ReliabilityProfile> profiles = cfg.profile_by_id();
    world.participants.reserve(cfg.participants);
    for (std::size_t id = 0; id < cfg.participants; ++id) {
        Participant p;
        p.id = id;
        p.profile = profiles[id];
        Dataset shard = take(full, plan.shards[id]);
        if (p.profile.kind == ReliabilityProfile::Kind::Unreliable && p.profile.p > 0) {
            Rng corrupt_rng = data_rng.child(100 + id);
            shard = corrupt(shard, p.profile, corrupt_rng, cfg.profiles.corrupt_label_only);
        }
        if (shard.n() == 0 && p.profile.kind != ReliabilityProfile::Kind::Malicious)
            throw ConfigError("config: participant " + std::to_string(id) +
                              " received an empty shard; reduce validation/test sizes");
        p.shard = std::move(shard);
        p.cursor = BatchCursor(p.shard.n());
        p.shuffle_rng = master.child(streams::kParticipantBase + id).child(streams::kShuffle);
        for (const auto& e : cfg.schedule)
            if (e.participant == id) p.schedule = e;
        world.participants.push_back(std::move(p));
    }

    world.init = init_params(world.arch, master.child(streams::kInit).seed());
    for (auto& p : world.participants) p.params = world.init;
    world.manifest = std::move(manifest);
    return world;
}

SimulationResult run_simulation(const RunConfig& cfg, const SimOptions& opts) {
    World world = build_world(cfg);
    const Architecture& arch = world.arch;
    const std::size_t M = cfg.server.m;
    const std::size_t K = cfg.server.k;
    if (world.validation.n() == 0)
        throw ConfigError("config: field 'partition.validation_size': server scoring needs a "
                          "non-empty validation set");

    Rng master(cfg.seed);
    Rng server_rng = master.child(streams::kServer);
    const Sensitivity delta = sensitivity(arch);
    const double du = utility_sensitivity(arch.task);

    SimulationResult result;
    result.arch = arch;
    result.manifest = world.manifest;
    result.ledger.eps1 = cfg.privacy.eps1;
    result.ledger.eps2 = cfg.privacy.eps2;

    ModelParams global = world.init;
    const std::size_t round_budget =
        cfg.termination.rounds ? *cfg.termination.rounds : cfg.termination.max_rounds;

    for (std::size_t round = 0; round < round_budget; ++round) {
        auto t0 = std::chrono::steady_clock::now();

        std::vector<std::size_t> live;
        for (const auto& p : world.participants) {
            if (p.dropped) continue;
            if (round < p.schedule.join_round) continue;
            if (p.schedule.leave_round && round >= *p.schedule.leave_round) continue;
            live.push_back(p.id);
        }
        if (live.empty()) break;  // everyone left: protocol ends
        if (live.size() < M)
            throw std::runtime_error("round " + std::to_string(round) + ": only " +
                                     std::to_string(live.size()) + " live participants, need M=" +
                                     std::to_string(M));

        Rng round_rng = server_rng.child(round);
        Rng arrival_rng = round_rng.child(streams::kArrival);
        std::vector<std::size_t> order = live;
        shuffle_ids(order, arrival_rng);
        std::vector<std::size_t> uploaders(order.begin(),
                                           order.begin() + static_cast<std::ptrdiff_t>(M));

        // Threshold mode: everyone races, the first M uploads are kept and
        // the rest get the stop signal. Preassign mode: only the chosen M
        // train at all.
        const std::vector<std::size_t>& trainees =
            cfg.server.collect == CollectMode::Threshold ? live : uploaders;

        std::vector<ModelParams> uploads(world.participants.size());
        parallel_for(trainees.size(), cfg.threads, [&](std::size_t i) {
            Participant& p = world.participants[trainees[i]];
            Rng noise_rng = master.child(streams::kParticipantBase + p.id)
                                .child(streams::kNoiseBase + round);
            if (p.profile.kind == ReliabilityProfile::Kind::Malicious) {
                uploads[p.id] = malicious_upload(arch, noise_rng);
            } else {
                uploads[p.id] =
                    local_round(p, arch, global, cfg.training, true, delta, cfg.privacy.eps2,
                                noise_rng);
            }
        });

        std::vector<double> scores(M);
        parallel_for(M, cfg.threads, [&](std::size_t i) {
            const ModelParams& params = uploads[uploaders[i]];
            scores[i] = arch.task == Task::Regression
                            ? score_regression(arch, params, world.validation)
                            : score_classification(arch, params, world.validation,
                                                   cfg.server.clf_semantics ==
                                                           ClfSemantics::Argmax
                                                       ? ClfScoreSemantics::Argmax
                                                       : ClfScoreSemantics::PerClassThreshold);
        });

        Rng select_rng = round_rng.child(streams::kSelection);
        std::vector<std::size_t> picks = exp_sample(scores, K, cfg.privacy.eps1, du, select_rng);

        std::vector<ModelParams> chosen;
        std::vector<std::size_t> selected_ids;
        chosen.reserve(K);
        for (std::size_t pick : picks) {
            selected_ids.push_back(uploaders[pick]);
            chosen.push_back(uploads[uploaders[pick]]);
        }
        global = aggregate(chosen);

        std::size_t epochs = 0;
        for (const auto& p : world.participants) epochs = std::max(epochs, p.cursor.epochs_touched());
        result.ledger.events.push_back({std::max<std::size_t>(epochs, 1), "selection",
                                        cfg.privacy.eps1});
        result.ledger.events.push_back({std::max<std::size_t>(epochs, 1), "objective",
                                        cfg.privacy.eps2});
        result.epochs = epochs;

        RoundRecord rec;
        rec.round = round;
        rec.uploaders = uploaders;
        rec.scores = scores;
        rec.selected = selected_ids;
        rec.digest = params_digest(global);
        rec.metric = evaluate(arch, global, world.test, cfg.dataset.y_floor,
                              cfg.server.clf_semantics);
        if (world.special_test.n() > 0)
            rec.special_metric = evaluate(arch, global, world.special_test, cfg.dataset.y_floor,
                                          cfg.server.clf_semantics);
        if (K < M) {
            double sel = 0.0, unsel = 0.0;
            std::vector<bool> is_sel(M, false);
            for (std::size_t pick : picks) is_sel[pick] = true;
            for (std::size_t i = 0; i < M; ++i) (is_sel[i] ? sel : unsel) += scores[i];
            rec.score_gap = sel / static_cast<double>(K) -
                            unsel / static_cast<double>(M - K);
        }
        rec.epochs = epochs;
        rec.eps1 = cfg.privacy.eps1;
        rec.eps2 = cfg.privacy.eps2;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                t0)
                          .count();
        if (opts.on_record) opts.on_record(rec);
        result.records.push_back(std::move(rec));
        if (opts.keep_weight_history) result.weight_history.push_back(global);
        if (cfg.checkpoint_every > 0 && (round + 1) % cfg.checkpoint_every == 0 &&
            opts.on_checkpoint)
            opts.on_checkpoint(round, arch, global);

        // local drop-out rule: a participant leaves once its own error on
        // its shard is small enough
        for (std::size_t id : uploaders) {
            Participant& p = world.participants[id];
            if (!p.schedule.local_target || p.dropped) continue;
            if (p.shard.n() == 0) continue;
            double local = evaluate(arch, p.params, p.shard, cfg.dataset.y_floor,
                                    cfg.server.clf_semantics);
            if (MetricDirection::reached(arch.task, local, *p.schedule.local_target))
                p.dropped = true;
        }

        if (cfg.termination.target_metric &&
            MetricDirection::reached(arch.task, result.records.back().metric,
                                     *cfg.termination.target_metric)) {
            result.rounds_to_target = round + 1;
            break;
        }
    }

    result.final_params = std::move(global);
    return result;
}

namespace {

SimulationResult run_sgd_baseline(const RunConfig& cfg, Participant trainer,
                                  const Architecture& arch, const World& world,
                                  const SimOptions& opts) {
    SimulationResult result;
    result.arch = arch;
    result.manifest = world.manifest;
    result.ledger.eps1 = 0.0;
    result.ledger.eps2 = 0.0;

    const Sensitivity delta = sensitivity(arch);
    ModelParams global = world.init;
    const std::size_t round_budget =
        cfg.termination.rounds ? *cfg.termination.rounds : cfg.termination.max_rounds;
    Rng unused_noise(0);

    for (std::size_t round = 0; round < round_budget; ++round) {
        global = local_round(trainer, arch, global, cfg.training, /*perturb=*/false, delta,
                             cfg.privacy.eps2, unused_noise);
        RoundRecord rec;
        rec.round = round;
        rec.digest = params_digest(global);
        rec.metric = evaluate(arch, global, world.test, cfg.dataset.y_floor,
                              cfg.server.clf_semantics);
        if (world.special_test.n() > 0)
            rec.special_metric = evaluate(arch, global, world.special_test, cfg.dataset.y_floor,
                                          cfg.server.clf_semantics);
        rec.epochs = trainer.cursor.epochs_touched();
        result.epochs = rec.epochs;
        if (opts.on_record) opts.on_record(rec);
        result.records.push_back(std::move(rec));
        if (opts.keep_weight_history) result.weight_history.push_back(global);
        if (cfg.checkpoint_every > 0 && (round + 1) % cfg.checkpoint_every == 0 &&
            opts.on_checkpoint)
            opts.on_checkpoint(round, arch, global);
        if (cfg.termination.target_metric &&
            MetricDirection::reached(arch.task, result.records.back().metric,
                                     *cfg.termination.target_metric)) {
            result.rounds_to_target = round + 1;
            break;
        }
    }
    result.final_params = std::move(global);
    return result;
}

}  // namespace

SimulationResult baseline_centralized(const RunConfig& cfg, const SimOptions& opts) {
    World world = build_world(cfg);
    // union of all shards, in participant order
    Dataset all;
    std::size_t total = 0;
    for (const auto& p : world.participants) total += p.shard.n();
    if (total == 0) throw ConfigError("config: baseline has no training rows");
    all.features = Matrix(total, world.participants.front().shard.dim());
    all.labels.resize(total);
    std::size_t at = 0;
    for (const auto& p : world.participants) {
        for (std::size_t r = 0; r < p.shard.n(); ++r, ++at) {
            for (std::size_t c = 0; c < p.shard.dim(); ++c)
                all.features(at, c) = p.shard.features(r, c);
            all.labels[at] = p.shard.labels[r];
        }
    }
    Participant trainer;
    trainer.id = 0;
    trainer.shard = std::move(all);
    trainer.cursor = BatchCursor(trainer.shard.n());
    trainer.shuffle_rng = Rng(cfg.seed).child(streams::kParticipantBase).child(streams::kShuffle);
    return run_sgd_baseline(cfg, std::move(trainer), world.arch, world, opts);
}

SimulationResult baseline_standalone(const RunConfig& cfg, std::size_t participant,
                                     const SimOptions& opts) {
    World world = build_world(cfg);
    if (participant >= world.participants.size())
        throw ConfigError("config: standalone participant " + std::to_string(participant) +
                          " out of range");
    Participant trainer = std::move(world.participants[participant]);
    if (trainer.shard.n() == 0)
        throw ConfigError("config: standalone participant has an empty shard");
    return run_sgd_baseline(cfg, std::move(trainer), world.arch, world, opts);
}

}  // namespace privsim
