#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "privsim/config.hpp"
#include "privsim/federation.hpp"
#include "privsim/runlog.hpp"

namespace fs = std::filesystem;
using namespace privsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

RunConfig load_config(const std::string& path) {
    RunConfig cfg = RunConfig::from_file(path);
    cfg.resolve_and_validate();
    return cfg;
}

/// Runs one simulation (or baseline) and writes the four artifacts into
/// out_dir: runlog.jsonl (line-flushed), config.resolved.json, the dataset
/// manifest and the final checkpoint.
int execute(const RunConfig& cfg, const std::string& kind, std::size_t standalone_id) {
    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);

    std::ofstream log(dir / "runlog.jsonl");
    if (!log) {
        std::cerr << "privsim: cannot write " << (dir / "runlog.jsonl") << "\n";
        return kExitRuntime;
    }
    {
        std::ofstream echo(dir / "config.resolved.json");
        echo << cfg.to_json().dump(2) << "\n";
    }

    SimOptions opts;
    opts.on_record = [&](const RoundRecord& rec) {
        log << record_line(rec, cfg.log_timing) << "\n";
        log.flush();
    };
    opts.on_checkpoint = [&](std::size_t round, const Architecture& arch,
                             const ModelParams& params) {
        save_checkpoint((dir / ("checkpoint_round" + std::to_string(round) + ".bin")).string(),
                        arch, params);
    };

    SimulationResult result;
    if (kind == "run") {
        result = run_simulation(cfg, opts);
    } else if (kind == "centralized") {
        result = baseline_centralized(cfg, opts);
    } else {
        result = baseline_standalone(cfg, standalone_id, opts);
    }

    save_checkpoint((dir / "final.ckpt").string(), result.arch, result.final_params);
    {
        std::ofstream manifest(dir / "manifest.json");
        manifest << result.manifest.dump(2) << "\n";
    }

    RunSummary summary = summarize(result.records);
    summary.rounds_to_target = result.rounds_to_target;
    std::cout << format_report(summary);
    return kExitOk;
}

nlohmann::json* find_field(nlohmann::json& root, const std::string& dotted) {
    nlohmann::json* at = &root;
    std::size_t pos = 0;
    while (pos < dotted.size()) {
        std::size_t dot = dotted.find('.', pos);
        std::string key = dotted.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (!at->is_object()) return nullptr;
        at = &(*at)[key];
        pos = dot == std::string::npos ? dotted.size() : dot + 1;
    }
    return at;
}

int cmd_sweep(const std::string& config_path, const std::string& field,
              const std::vector<std::string>& values) {
    nlohmann::json base;
    {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("config: cannot open " + config_path);
        in >> base;
    }
    std::string base_out = base.value("output_dir", std::string("privsim-out"));
    const char* env_out = std::getenv("PRIVSIM_OUT");
    if (env_out && *env_out) base_out = env_out;

    for (const std::string& raw : values) {
        nlohmann::json point = base;
        nlohmann::json* slot = find_field(point, field);
        if (!slot) throw ConfigError("sweep: cannot address field '" + field + "'");
        *slot = nlohmann::json::parse(raw, nullptr, false);
        if (slot->is_discarded()) *slot = raw;  // plain string value

        std::string leaf = field.substr(field.find_last_of('.') + 1);
        point["output_dir"] = (fs::path(base_out) / (leaf + "=" + raw)).string();

        RunConfig cfg = RunConfig::from_json(point);
        // the sweep directory layout overrides any env redirection per point
        std::string out_dir = point["output_dir"].get<std::string>();
        cfg.resolve_and_validate();
        cfg.output_dir = out_dir;
        std::cout << "== " << field << " = " << raw << " -> " << cfg.output_dir << "\n";
        int rc = execute(cfg, "run", 0);
        if (rc != kExitOk) return rc;
    }
    return kExitOk;
}

int cmd_report(const std::string& path, const std::string& csv_out) {
    fs::path p(path);
    if (fs::is_directory(p)) {
        // sweep directory: one subdirectory per point, each with a runlog
        std::vector<fs::path> subs;
        if (fs::exists(p / "runlog.jsonl")) {
            subs.push_back(p);
        } else {
            for (const auto& entry : fs::directory_iterator(p))
                if (entry.is_directory() && fs::exists(entry.path() / "runlog.jsonl"))
                    subs.push_back(entry.path());
            std::sort(subs.begin(), subs.end());
            if (subs.empty()) throw std::runtime_error("report: no runlog.jsonl under " + path);
        }
        for (const auto& sub : subs) {
            if (subs.size() > 1) std::cout << "== " << sub.filename().string() << "\n";
            auto records = load_runlog((sub / "runlog.jsonl").string());
            RunSummary s = summarize(records);
            std::cout << format_report(s);
            if (!csv_out.empty() && subs.size() == 1) {
                std::ofstream csv(csv_out);
                csv << metrics_csv(records);
            }
        }
        return kExitOk;
    }
    auto records = load_runlog(path);
    RunSummary s = summarize(records);
    std::cout << format_report(s);
    if (!csv_out.empty()) {
        std::ofstream csv(csv_out);
        csv << metrics_csv(records);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"privacy-preserving collaborative learning simulator"};
    app.require_subcommand(1);

    std::string config_path, which, report_path, csv_out, sweep_field;
    std::size_t standalone_id = 0;
    std::vector<std::string> sweep_values;
    std::size_t threads = SIZE_MAX;

    CLI::App* run = app.add_subcommand("run", "run the full protocol from a JSON config");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--threads", threads, "worker threads (1 = serial, same output)");

    CLI::App* baseline = app.add_subcommand("baseline", "centralized or stand-alone training");
    baseline->add_option("config", config_path, "config file")->required();
    baseline->add_option("--which", which, "centralized | standalone")->required();
    baseline->add_option("--participant", standalone_id, "stand-alone participant id");
    baseline->add_option("--threads", threads, "worker threads");

    CLI::App* report = app.add_subcommand("report", "summarize a run log or sweep directory");
    report->add_option("runlog", report_path, "runlog.jsonl, run dir, or sweep dir")->required();
    report->add_option("--csv", csv_out, "write a flat (round,metric,value) CSV here");

    CLI::App* sweep = app.add_subcommand("sweep", "run one config across a list of field values");
    sweep->add_option("config", config_path, "config file")->required();
    sweep->add_option("--field", sweep_field, "dotted config field, e.g. training.iterations")
        ->required();
    sweep->add_option("--values", sweep_values, "one value per run")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) {
            RunConfig cfg = load_config(config_path);
            if (threads != SIZE_MAX) cfg.threads = threads;
            return execute(cfg, "run", 0);
        }
        if (baseline->parsed()) {
            if (which != "centralized" && which != "standalone")
                throw ConfigError("baseline: --which must be 'centralized' or 'standalone'");
            RunConfig cfg = load_config(config_path);
            if (threads != SIZE_MAX) cfg.threads = threads;
            return execute(cfg, which, standalone_id);
        }
        if (report->parsed()) return cmd_report(report_path, csv_out);
        if (sweep->parsed()) return cmd_sweep(config_path, sweep_field, sweep_values);
    } catch (const ConfigError& e) {
        std::cerr << "privsim: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "privsim: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
