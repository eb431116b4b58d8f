#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "privsim/dataset.hpp"
#include "privsim/model.hpp"

namespace privsim {

/// Invalid or inconsistent run configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TrainMode { Full, LastLayer };
enum class CollectMode { Threshold, Preassign };
enum class ClfSemantics { Argmax, PerClassThreshold };

struct DatasetConfig {
    std::optional<SynthSpec> synthetic;
    std::string csv_path;     // with schema_path, the alternative source
    std::string schema_path;
    bool label_log1p = false;
    double y_floor = kDefaultYFloor;
    bool add_bias_column = false;
};

struct ProfilesConfig {
    std::int64_t clean = -1;  // -1: everyone not otherwise assigned
    std::size_t unreliable = 0;
    double p = 0.0;
    std::size_t malicious = 0;
    std::size_t special = 0;
    bool corrupt_label_only = false;
};

struct ScheduleEntry {
    std::size_t participant = 0;
    std::size_t join_round = 0;
    std::optional<std::size_t> leave_round;
    std::optional<double> local_target;  // drop out once the local error is this small
};

struct SpecialRuleConfig {
    std::string column;
    double low = 0.0;
    double high = 1.0;
};

struct PartitionConfig {
    std::int64_t validation_size = -1;  // -1: n/10
    std::int64_t test_size = -1;        // -1: n/10
    std::optional<SpecialRuleConfig> special_rule;
};

struct ServerConfig {
    std::size_t m = 0;  // 0: round(N/2), at least 1
    std::size_t k = 0;  // 0: round(M/2), at least 1
    CollectMode collect = CollectMode::Threshold;
    ClfSemantics clf_semantics = ClfSemantics::Argmax;
};

struct TrainingConfig {
    std::size_t iterations = 100;
    std::size_t batch_size = 128;
    double learning_rate = 0.01;
    TrainMode mode = TrainMode::Full;
    double grad_clamp = 0.0;  // 0 disables the safety clamp
};

struct PrivacyConfig {
    double eps1 = 1.0;  // selection budget per round
    double eps2 = 1.0;  // objective-perturbation budget per batch
};

struct TerminationConfig {
    std::optional<std::size_t> rounds;
    std::optional<double> target_metric;
    std::size_t max_rounds = 100000;  // cap when only a target is given
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "privsim-out";
    std::size_t threads = 1;

    DatasetConfig dataset;
    std::vector<std::size_t> hidden = {80};
    Task task = Task::Regression;
    FeaturizerSpec featurizer;  // classification input transform

    std::size_t participants = 1;
    ProfilesConfig profiles;
    std::vector<ScheduleEntry> schedule;

    PartitionConfig partition;
    ServerConfig server;
    TrainingConfig training;
    PrivacyConfig privacy;
    TerminationConfig termination;

    std::size_t checkpoint_every = 0;  // rounds between checkpoints; 0 = final only
    bool log_timing = false;           // wall time per round in the log (breaks replay diffs)

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);

    /// Applies all derivable defaults (M, K, featurizer seed) and checks
    /// the cross-field invariants; throws ConfigError naming the field.
    void resolve_and_validate();

    /// Materialized configuration; feeding it back reproduces the run.
    nlohmann::ordered_json to_json() const;

    /// Profile of each participant id, in order: special ids first, then
    /// clean, unreliable, malicious.
    std::vector<ReliabilityProfile> profile_by_id() const;
};

}  // namespace privsim
