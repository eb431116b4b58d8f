#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "privsim/config.hpp"
#include "privsim/dataset.hpp"
#include "privsim/dp.hpp"
#include "privsim/model.hpp"
#include "privsim/objective.hpp"

namespace privsim {

/// Disjoint mini-batch schedule over a shard: consecutive slices of a
/// shuffled index order, reshuffled when a pass completes, so the batches
/// of one epoch partition the shard.
class BatchCursor {
public:
    explicit BatchCursor(std::size_t n) : n_(n) {}

    /// Indices of the next batch. A shard smaller than the batch size is
    /// returned whole (the caller warns once).
    std::vector<std::size_t> next(std::size_t batch_size, Rng& shuffle_rng);

    std::size_t epochs_touched() const { return epochs_; }

private:
    std::size_t n_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    std::size_t epochs_ = 0;
};

struct Participant {
    std::size_t id = 0;
    Dataset shard;
    ReliabilityProfile profile;
    ModelParams params;
    BatchCursor cursor{0};
    Rng shuffle_rng{0};
    ScheduleEntry schedule;
    bool dropped = false;
    bool warned_small_shard = false;
};

/// One communication round of local work: sync to the global weights, then
/// `iterations` SGD steps on freshly perturbed batch objectives (noise
/// scale delta/eps2, drawn from noise_rng per batch). Returns the
/// sanitized weights to upload.
ModelParams local_round(Participant& p, const Architecture& arch, const ModelParams& global,
                        const TrainingConfig& training, bool perturb, const Sensitivity& delta,
                        double eps2, Rng& noise_rng);

/// Fabricated upload: every weight entry uniform in [0, 1), independent of
/// any local data.
ModelParams malicious_upload(const Architecture& arch, Rng& rng);

/// Elementwise mean; throws naming the offending upload on shape mismatch.
ModelParams aggregate(const std::vector<ModelParams>& uploads);

struct RoundRecord {
    std::size_t round = 0;
    std::vector<std::size_t> uploaders;  // arrival order, size M
    std::vector<double> scores;          // aligned with uploaders
    std::vector<std::size_t> selected;   // K ids, draw order
    std::string digest;                  // averaged-params digest
    double metric = 0.0;                 // test MRE (regression) or accuracy
    std::optional<double> special_metric;
    std::optional<double> score_gap;     // mean(selected) - mean(unselected)
    std::size_t epochs = 0;              // max epochs touched so far
    double eps1 = 0.0;
    double eps2 = 0.0;
    double wall_ms = 0.0;                // logged only when enabled
};

struct SimulationResult {
    std::vector<RoundRecord> records;
    Architecture arch;
    ModelParams final_params;
    BudgetLedger ledger;
    std::size_t epochs = 0;
    std::optional<std::size_t> rounds_to_target;
    nlohmann::ordered_json manifest;
    std::vector<ModelParams> weight_history;  // per round, when requested
};

struct SimOptions {
    bool keep_weight_history = false;
    std::function<void(const RoundRecord&)> on_record;  // streamed, for line-flushed logs
    std::function<void(std::size_t round, const Architecture&, const ModelParams&)> on_checkpoint;
};

/// Everything derived from a RunConfig before round 1: encoded data,
/// partition, per-participant shards (with corruption applied), the shared
/// initial weights and the server-held sets.
struct World {
    Architecture arch;
    std::vector<Participant> participants;
    Dataset validation, test, special_test;
    ModelParams init;
    nlohmann::ordered_json manifest;
};

World build_world(const RunConfig& cfg);

/// The full protocol: collect M uploads -> score on the validation set ->
/// sample K via the exponential mechanism -> average -> broadcast; repeats
/// until the round budget is exhausted, the target metric is reached, or
/// no participant remains.
SimulationResult run_simulation(const RunConfig& cfg, const SimOptions& opts = {});

/// Unperturbed SGD on the union of all shards; same metrics cadence (one
/// log entry per `iterations` steps).
SimulationResult baseline_centralized(const RunConfig& cfg, const SimOptions& opts = {});

/// Unperturbed local SGD for one participant, no collaboration.
SimulationResult baseline_standalone(const RunConfig& cfg, std::size_t participant,
                                     const SimOptions& opts = {});

}  // namespace privsim
