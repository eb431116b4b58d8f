#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "privsim/federation.hpp"

namespace privsim {

/// One JSON-lines record; stable key order so equal runs produce equal
/// bytes. Wall time is included only when requested (it varies run-to-run).
nlohmann::ordered_json record_to_json(const RoundRecord& rec, bool with_timing);
std::string record_line(const RoundRecord& rec, bool with_timing);

/// Parses a JSON-lines run log; a malformed line raises an error naming
/// the first bad line number.
std::vector<RoundRecord> parse_runlog(std::istream& in, const std::string& origin);
std::vector<RoundRecord> load_runlog(const std::string& path);

struct RunSummary {
    std::size_t rounds = 0;
    double final_metric = 0.0;
    bool has_metric = false;
    std::size_t epochs = 0;
    double eps1 = 0.0, eps2 = 0.0;
    std::optional<std::size_t> rounds_to_target;  // filled by the caller when known
    std::vector<std::pair<std::size_t, std::size_t>> selection_counts;  // id -> times selected
    std::size_t selected_per_round = 0;  // K (0 when the log has no selections)
};

RunSummary summarize(const std::vector<RoundRecord>& records);

/// Human-readable report: final metric, rounds, per-epoch and cumulative
/// privacy guarantee, and the per-participant selection-frequency table.
std::string format_report(const RunSummary& s);

/// Flat (round, metric, value) CSV used for plotting.
std::string metrics_csv(const std::vector<RoundRecord>& records);

}  // namespace privsim
