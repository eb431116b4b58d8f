#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "privsim/matrix.hpp"
#include "privsim/rng.hpp"

namespace privsim {

inline constexpr double kDefaultYFloor = 0.05;

enum class ColumnKind { Numeric, Categorical, Binary, Label };

/// Column name -> kind, in CSV header order. Exactly one Label column.
struct Schema {
    std::vector<std::string> columns;
    std::vector<ColumnKind> kinds;

    static Schema from_json(const nlohmann::json& j);
    static Schema from_file(const std::string& path);
    ColumnKind kind_of(const std::string& column) const;
};

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Comma-separated, UTF-8, header row required. Double quotes escape
/// embedded commas/quotes.
RawTable read_csv(const std::string& path);
RawTable parse_csv(std::istream& in, const std::string& origin);

/// Prepared data: every feature entry and every regression label lies in
/// [0, 1]; classification labels hold the class index.
struct Dataset {
    Matrix features;             // n x d
    std::vector<double> labels;  // n
    std::size_t n() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
};

struct PrepareOptions {
    bool label_log1p = false;   // log(1+x) before min-max scaling the label
    double y_floor = kDefaultYFloor;
    bool add_bias_column = false;  // append a constant-1 feature
    bool classification_label = false;  // label column is categorical -> class index
};

/// Fitted column encodings: binary {a,b} -> {0,1}, categorical -> one-hot
/// with a frozen vocabulary, numeric -> min-max to [0,1]. The fit is
/// persisted as a JSON manifest so later transforms reuse identical
/// encodings; an unseen category at transform time is an error.
class Encoder {
public:
    static Encoder fit(const RawTable& table, const Schema& schema, const PrepareOptions& opt);
    static Encoder from_manifest(const nlohmann::json& manifest);

    Dataset transform(const RawTable& table) const;
    nlohmann::ordered_json manifest() const;

    const std::vector<std::string>& warnings() const { return warnings_; }
    /// Encoded feature index of a named input column (numeric/binary only).
    std::size_t feature_index(const std::string& column) const;
    std::size_t encoded_dim() const;
    std::size_t num_classes() const { return label_vocab_.size(); }
    double y_floor() const { return opt_.y_floor; }

private:
    struct Column {
        std::string name;
        ColumnKind kind = ColumnKind::Numeric;
        std::vector<std::string> vocab;  // binary/categorical
        double min = 0.0, max = 1.0;     // numeric/label
        bool constant = false;
        std::size_t offset = 0;          // first encoded feature index
    };
    std::vector<Column> columns_;
    std::vector<std::string> label_vocab_;  // classification labels
    PrepareOptions opt_;
    std::vector<std::string> warnings_;
};

/// fit + transform in one step.
Dataset prepare(const RawTable& table, const Schema& schema, const PrepareOptions& opt,
                Encoder* fitted = nullptr);

/// Rows whose value in `column` falls outside [low, high] are held out for
/// the special participants and the special test set.
struct SpecialRule {
    std::string column;
    double low = 0.0;
    double high = 1.0;
    std::size_t feature_index = 0;  // resolved against the encoded features
};

struct PartitionSpec {
    std::size_t participants = 1;
    std::size_t validation_size = 0;
    std::size_t test_size = 0;
    std::optional<SpecialRule> special;
    std::size_t special_participants = 0;  // how many shards take the held-out rows
};

/// Disjoint row-index sets; shards are listed participant-by-participant
/// (special participants first when a special rule is active).
struct PartitionPlan {
    std::vector<std::vector<std::size_t>> shards;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::vector<std::size_t> special_test;
};

PartitionPlan partition(const Dataset& ds, const PartitionSpec& spec, Rng& rng);

Dataset take(const Dataset& ds, const std::vector<std::size_t>& idx);

struct ReliabilityProfile {
    enum class Kind { Clean, Unreliable, Malicious, Special };
    Kind kind = Kind::Clean;
    double p = 0.0;  // unreliable: fraction of rows replaced by noise

    static ReliabilityProfile clean() { return {}; }
    static ReliabilityProfile unreliable(double p) { return {Kind::Unreliable, p}; }
    static ReliabilityProfile malicious() { return {Kind::Malicious, 0.0}; }
    static ReliabilityProfile special() { return {Kind::Special, 0.0}; }
};

/// Replace floor(p * n) uniformly chosen rows with independent uniform
/// [0,1) noise (features and label; label only if label_only). Rows not
/// chosen are untouched.
Dataset corrupt(const Dataset& shard, const ReliabilityProfile& profile, Rng& rng,
                bool label_only = false);

struct SynthSpec {
    std::size_t n = 1000;
    std::size_t d = 8;
    double noise_sd = 0.0;
    double y_floor = kDefaultYFloor;
};

/// Synthetic regression data: features uniform [0,1); label =
/// sigmoid(linear + quadratic form) + gaussian(noise_sd), clipped to
/// [y_floor, 1]. The same rng seed with noise_sd = 0 regenerates the
/// identical features with noiseless labels (the generator always consumes
/// the same draw count), which is the test oracle for the ground truth.
Dataset synth_regression(const SynthSpec& spec, Rng& rng);

}  // namespace privsim
