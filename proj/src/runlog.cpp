#include "privsim/runlog.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "privsim/dp.hpp"

namespace privsim {

nlohmann::ordered_json record_to_json(const RoundRecord& rec, bool with_timing) {
    nlohmann::ordered_json j;
    j["round"] = rec.round;
    if (!rec.uploaders.empty()) {
        j["uploaders"] = rec.uploaders;
        j["scores"] = rec.scores;
        j["selected"] = rec.selected;
    }
    j["digest"] = rec.digest;
    j["metric"] = rec.metric;
    if (rec.special_metric) j["special_metric"] = *rec.special_metric;
    if (rec.score_gap) j["score_gap"] = *rec.score_gap;
    j["epochs"] = rec.epochs;
    j["eps1"] = rec.eps1;
    j["eps2"] = rec.eps2;
    if (with_timing) j["wall_ms"] = rec.wall_ms;
    return j;
}

std::string record_line(const RoundRecord& rec, bool with_timing) {
    return record_to_json(rec, with_timing).dump();
}

std::vector<RoundRecord> parse_runlog(std::istream& in, const std::string& origin) {
    std::vector<RoundRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            RoundRecord rec;
            rec.round = j.at("round").get<std::size_t>();
            if (j.contains("uploaders")) {
                rec.uploaders = j.at("uploaders").get<std::vector<std::size_t>>();
                rec.scores = j.at("scores").get<std::vector<double>>();
                rec.selected = j.at("selected").get<std::vector<std::size_t>>();
            }
            rec.digest = j.at("digest").get<std::string>();
            rec.metric = j.at("metric").get<double>();
            if (j.contains("special_metric"))
                rec.special_metric = j.at("special_metric").get<double>();
            if (j.contains("score_gap")) rec.score_gap = j.at("score_gap").get<double>();
            rec.epochs = j.at("epochs").get<std::size_t>();
            rec.eps1 = j.at("eps1").get<double>();
            rec.eps2 = j.at("eps2").get<double>();
            if (j.contains("wall_ms")) rec.wall_ms = j.at("wall_ms").get<double>();
            records.push_back(std::move(rec));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": bad run-log line: " + e.what());
        }
    }
    return records;
}

std::vector<RoundRecord> load_runlog(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("runlog: cannot open " + path);
    return parse_runlog(in, path);
}

RunSummary summarize(const std::vector<RoundRecord>& records) {
    RunSummary s;
    s.rounds = records.size();
    if (records.empty()) return s;
    s.final_metric = records.back().metric;
    s.has_metric = true;
    s.epochs = records.back().epochs;
    s.eps1 = records.back().eps1;
    s.eps2 = records.back().eps2;
    s.selected_per_round = records.back().selected.size();

    std::map<std::size_t, std::size_t> counts;
    for (const auto& rec : records) {
        if (!rec.selected.empty() && rec.selected.size() != s.selected_per_round)
            s.selected_per_round = rec.selected.size();  // heterogeneous; keep last
        for (std::size_t id : rec.selected) ++counts[id];
        for (std::size_t id : rec.uploaders)
            counts.try_emplace(id, 0);  // show never-selected uploaders too
    }
    s.selection_counts.assign(counts.begin(), counts.end());
    return s;
}

std::string format_report(const RunSummary& s) {
    std::ostringstream out;
    out << "rounds executed: " << s.rounds << "\n";
    if (s.rounds == 0) return out.str();
    out << "final metric: " << s.final_metric << "\n";
    if (s.rounds_to_target) out << "rounds to target: " << *s.rounds_to_target << "\n";
    BudgetLedger ledger;
    ledger.eps1 = s.eps1;
    ledger.eps2 = s.eps2;
    LedgerReport lr = ledger_report(ledger, s.epochs);
    out << "privacy: per-epoch epsilon " << lr.per_epoch << ", epochs " << lr.epochs
        << ", cumulative epsilon " << lr.cumulative << "\n";
    if (!s.selection_counts.empty()) {
        out << "selection frequencies (participant: selected/rounds):\n";
        for (const auto& [id, count] : s.selection_counts)
            out << "  " << id << ": " << count << "/" << s.rounds << "\n";
    }
    return out.str();
}

std::string metrics_csv(const std::vector<RoundRecord>& records) {
    std::ostringstream out;
    out << "round,metric,value\n";
    for (const auto& rec : records) {
        out << rec.round << ",metric," << rec.metric << "\n";
        if (rec.special_metric) out << rec.round << ",special_metric," << *rec.special_metric << "\n";
        if (rec.score_gap) out << rec.round << ",score_gap," << *rec.score_gap << "\n";
    }
    return out.str();
}

}  // namespace privsim
