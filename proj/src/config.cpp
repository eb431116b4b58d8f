#include "privsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "privsim/rng.hpp"

namespace privsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
    throw ConfigError("config: field '" + field + "': " + msg);
}

void expect_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* allowed : keys)
            if (k == allowed) known = true;
        if (!known) fail(path.empty() ? k : path + "." + k, "unknown key");
    }
}

template <typename T>
T get_as(const json& j, const std::string& path) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        fail(path, "wrong type (" + std::string(j.type_name()) + ")");
    }
}

template <typename T>
T field_or(const json& j, const std::string& obj_path, const char* key, T def) {
    if (!j.contains(key)) return def;
    return get_as<T>(j.at(key), obj_path + "." + key);
}

double positive(double v, const std::string& path) {
    if (!(v > 0.0)) fail(path, "must be > 0");
    return v;
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

RunConfig RunConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    expect_keys(j, "", {"seed", "output_dir", "threads", "dataset", "architecture", "participants",
                        "partition", "server", "training", "privacy", "termination",
                        "checkpoint_every", "log_timing"});
    RunConfig c;
    c.seed = field_or<std::uint64_t>(j, "", "seed", 0);
    c.output_dir = field_or<std::string>(j, "", "output_dir", c.output_dir);
    c.threads = field_or<std::size_t>(j, "", "threads", 1);
    c.checkpoint_every = field_or<std::size_t>(j, "", "checkpoint_every", 0);
    c.log_timing = field_or<bool>(j, "", "log_timing", false);

    if (!j.contains("dataset")) fail("dataset", "required");
    {
        const json& d = j.at("dataset");
        expect_keys(d, "dataset", {"synthetic", "csv", "schema", "label_log1p", "y_floor",
                                   "add_bias_column"});
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            expect_keys(s, "dataset.synthetic", {"n", "d", "noise_sd"});
            SynthSpec spec;
            spec.n = field_or<std::size_t>(s, "dataset.synthetic", "n", 1000);
            spec.d = field_or<std::size_t>(s, "dataset.synthetic", "d", 8);
            spec.noise_sd = field_or<double>(s, "dataset.synthetic", "noise_sd", 0.0);
            if (spec.n < 1 || spec.d < 1) fail("dataset.synthetic", "need n >= 1 and d >= 1");
            if (spec.noise_sd < 0) fail("dataset.synthetic.noise_sd", "must be >= 0");
            c.dataset.synthetic = spec;
        }
        c.dataset.csv_path = field_or<std::string>(d, "dataset", "csv", "");
        c.dataset.schema_path = field_or<std::string>(d, "dataset", "schema", "");
        c.dataset.label_log1p = field_or<bool>(d, "dataset", "label_log1p", false);
        c.dataset.y_floor = field_or<double>(d, "dataset", "y_floor", kDefaultYFloor);
        c.dataset.add_bias_column = field_or<bool>(d, "dataset", "add_bias_column", false);
        positive(c.dataset.y_floor, "dataset.y_floor");
        const bool synth = c.dataset.synthetic.has_value();
        const bool csv = !c.dataset.csv_path.empty();
        if (synth == csv) fail("dataset", "exactly one of 'synthetic' or 'csv' required");
        if (csv && c.dataset.schema_path.empty()) fail("dataset.schema", "required with 'csv'");
    }

    if (j.contains("architecture")) {
        const json& a = j.at("architecture");
        expect_keys(a, "architecture", {"task", "hidden", "featurizer"});
        std::string task = field_or<std::string>(a, "architecture", "task", "regression");
        if (task == "regression") c.task = Task::Regression;
        else if (task == "classification") c.task = Task::Classification;
        else fail("architecture.task", "expected 'regression' or 'classification'");
        c.hidden = field_or<std::vector<std::size_t>>(a, "architecture", "hidden", {80});
        if (c.hidden.empty()) fail("architecture.hidden", "at least one hidden layer");
        for (std::size_t h : c.hidden)
            if (h < 1) fail("architecture.hidden", "widths must be >= 1");
        if (a.contains("featurizer")) {
            const json& f = a.at("featurizer");
            expect_keys(f, "architecture.featurizer", {"kind", "width", "seed"});
            std::string kind = field_or<std::string>(f, "architecture.featurizer", "kind",
                                                     "random_projection");
            if (kind == "identity") c.featurizer.kind = FeaturizerSpec::Kind::Identity;
            else if (kind == "random_projection")
                c.featurizer.kind = FeaturizerSpec::Kind::RandomProjection;
            else fail("architecture.featurizer.kind", "expected 'identity' or 'random_projection'");
            c.featurizer.width = field_or<std::size_t>(f, "architecture.featurizer", "width", 128);
            c.featurizer.seed = field_or<std::uint64_t>(f, "architecture.featurizer", "seed", 0);
        } else if (c.task == Task::Classification) {
            c.featurizer.kind = FeaturizerSpec::Kind::RandomProjection;
            c.featurizer.width = 128;
        }
    }

    if (!j.contains("participants")) fail("participants", "required");
    {
        const json& p = j.at("participants");
        expect_keys(p, "participants", {"n", "clean", "unreliable", "malicious", "special",
                                        "corrupt_label_only", "schedule"});
        if (!p.contains("n")) fail("participants.n", "required");
        c.participants = get_as<std::size_t>(p.at("n"), "participants.n");
        if (c.participants < 1) fail("participants.n", "must be >= 1");
        c.profiles.clean = field_or<std::int64_t>(p, "participants", "clean", -1);
        if (p.contains("unreliable")) {
            const json& u = p.at("unreliable");
            expect_keys(u, "participants.unreliable", {"count", "p"});
            c.profiles.unreliable = field_or<std::size_t>(u, "participants.unreliable", "count", 0);
            c.profiles.p = field_or<double>(u, "participants.unreliable", "p", 0.0);
            if (c.profiles.p < 0.0 || c.profiles.p > 1.0)
                fail("participants.unreliable.p", "must be in [0, 1]");
        }
        c.profiles.malicious = field_or<std::size_t>(p, "participants", "malicious", 0);
        c.profiles.special = field_or<std::size_t>(p, "participants", "special", 0);
        c.profiles.corrupt_label_only = field_or<bool>(p, "participants", "corrupt_label_only",
                                                       false);
        if (p.contains("schedule")) {
            std::size_t i = 0;
            for (const json& e : p.at("schedule")) {
                std::string path = "participants.schedule[" + std::to_string(i++) + "]";
                expect_keys(e, path, {"participant", "join_round", "leave_round", "local_target"});
                ScheduleEntry se;
                if (!e.contains("participant")) fail(path + ".participant", "required");
                se.participant = get_as<std::size_t>(e.at("participant"), path + ".participant");
                se.join_round = field_or<std::size_t>(e, path, "join_round", 0);
                if (e.contains("leave_round"))
                    se.leave_round = get_as<std::size_t>(e.at("leave_round"), path + ".leave_round");
                if (e.contains("local_target"))
                    se.local_target = get_as<double>(e.at("local_target"), path + ".local_target");
                c.schedule.push_back(se);
            }
        }
    }

    if (j.contains("partition")) {
        const json& p = j.at("partition");
        expect_keys(p, "partition", {"validation_size", "test_size", "special_rule"});
        c.partition.validation_size = field_or<std::int64_t>(p, "partition", "validation_size", -1);
        c.partition.test_size = field_or<std::int64_t>(p, "partition", "test_size", -1);
        if (p.contains("special_rule")) {
            const json& s = p.at("special_rule");
            expect_keys(s, "partition.special_rule", {"column", "low", "high"});
            SpecialRuleConfig r;
            if (!s.contains("column")) fail("partition.special_rule.column", "required");
            r.column = get_as<std::string>(s.at("column"), "partition.special_rule.column");
            r.low = field_or<double>(s, "partition.special_rule", "low", 0.0);
            r.high = field_or<double>(s, "partition.special_rule", "high", 1.0);
            if (r.low > r.high) fail("partition.special_rule", "low must be <= high");
            c.partition.special_rule = r;
        }
    }

    if (j.contains("server")) {
        const json& s = j.at("server");
        expect_keys(s, "server", {"m", "k", "collect", "classification_semantics"});
        c.server.m = field_or<std::size_t>(s, "server", "m", 0);
        c.server.k = field_or<std::size_t>(s, "server", "k", 0);
        std::string collect = field_or<std::string>(s, "server", "collect", "threshold");
        if (collect == "threshold") c.server.collect = CollectMode::Threshold;
        else if (collect == "preassign") c.server.collect = CollectMode::Preassign;
        else fail("server.collect", "expected 'threshold' or 'preassign'");
        std::string sem = field_or<std::string>(s, "server", "classification_semantics", "argmax");
        if (sem == "argmax") c.server.clf_semantics = ClfSemantics::Argmax;
        else if (sem == "threshold") c.server.clf_semantics = ClfSemantics::PerClassThreshold;
        else fail("server.classification_semantics", "expected 'argmax' or 'threshold'");
    }

    if (j.contains("training")) {
        const json& t = j.at("training");
        expect_keys(t, "training",
                    {"iterations", "batch_size", "learning_rate", "mode", "grad_clamp"});
        c.training.iterations = field_or<std::size_t>(t, "training", "iterations", 100);
        c.training.batch_size = field_or<std::size_t>(t, "training", "batch_size", 128);
        c.training.learning_rate = field_or<double>(t, "training", "learning_rate", 0.01);
        if (c.training.batch_size < 1) fail("training.batch_size", "must be >= 1");
        positive(c.training.learning_rate, "training.learning_rate");
        std::string mode = field_or<std::string>(t, "training", "mode", "full");
        if (mode == "full") c.training.mode = TrainMode::Full;
        else if (mode == "last_layer") c.training.mode = TrainMode::LastLayer;
        else fail("training.mode", "expected 'full' or 'last_layer'");
        c.training.grad_clamp = field_or<double>(t, "training", "grad_clamp", 0.0);
        if (c.training.grad_clamp < 0) fail("training.grad_clamp", "must be >= 0");
    }

    if (j.contains("privacy")) {
        const json& p = j.at("privacy");
        expect_keys(p, "privacy", {"epsilon_sampling", "epsilon_objective"});
        c.privacy.eps1 = field_or<double>(p, "privacy", "epsilon_sampling", 1.0);
        c.privacy.eps2 = field_or<double>(p, "privacy", "epsilon_objective", 1.0);
        positive(c.privacy.eps1, "privacy.epsilon_sampling");
        positive(c.privacy.eps2, "privacy.epsilon_objective");
    }

    if (!j.contains("termination")) fail("termination", "required ('rounds' or 'target_metric')");
    {
        const json& t = j.at("termination");
        expect_keys(t, "termination", {"rounds", "target_metric", "max_rounds"});
        if (t.contains("rounds"))
            c.termination.rounds = get_as<std::size_t>(t.at("rounds"), "termination.rounds");
        if (t.contains("target_metric"))
            c.termination.target_metric =
                get_as<double>(t.at("target_metric"), "termination.target_metric");
        c.termination.max_rounds = field_or<std::size_t>(t, "termination", "max_rounds", 100000);
        if (!c.termination.rounds && !c.termination.target_metric)
            fail("termination", "one of 'rounds' or 'target_metric' required");
    }

    return c;
}

void RunConfig::resolve_and_validate() {
    const std::size_t n = participants;
    if (server.m == 0)
        server.m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.5 * double(n))));
    if (server.k == 0)
        server.k = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(0.5 * double(server.m))));
    if (server.m > n)
        throw ConfigError("config: field 'server.m': M (" + std::to_string(server.m) +
                          ") exceeds participant count N (" + std::to_string(n) + ")");
    if (server.k > server.m)
        throw ConfigError("config: field 'server.k': K (" + std::to_string(server.k) +
                          ") exceeds M (" + std::to_string(server.m) + ")");

    std::size_t assigned = profiles.unreliable + profiles.malicious + profiles.special;
    if (assigned > n)
        throw ConfigError("config: field 'participants': profile counts (" +
                          std::to_string(assigned) + ") exceed n (" + std::to_string(n) + ")");
    if (profiles.clean < 0) profiles.clean = static_cast<std::int64_t>(n - assigned);
    if (static_cast<std::size_t>(profiles.clean) + assigned != n)
        throw ConfigError("config: field 'participants': profile counts must sum to n");
    if (profiles.special > 0 && !partition.special_rule)
        throw ConfigError(
            "config: field 'partition.special_rule': required when special participants > 0");
    if (partition.special_rule && profiles.special == 0)
        throw ConfigError(
            "config: field 'participants.special': required when a special rule is set");

    for (const auto& e : schedule) {
        if (e.participant >= n)
            throw ConfigError("config: field 'participants.schedule': participant " +
                              std::to_string(e.participant) + " out of range");
        if (e.leave_round && *e.leave_round <= e.join_round)
            throw ConfigError("config: field 'participants.schedule': participant " +
                              std::to_string(e.participant) + " leaves before joining");
    }

    if (task == Task::Classification) {
        if (featurizer.kind == FeaturizerSpec::Kind::RandomProjection && featurizer.width < 1)
            throw ConfigError("config: field 'architecture.featurizer.width': must be >= 1");
        if (featurizer.kind == FeaturizerSpec::Kind::RandomProjection && featurizer.seed == 0)
            featurizer.seed = Rng(seed).child(streams::kFeaturizer).seed();
        if (training.mode != TrainMode::LastLayer) training.mode = TrainMode::LastLayer;
        if (dataset.synthetic)
            throw ConfigError(
                "config: field 'dataset': classification needs a csv source with a "
                "categorical label");
    }

    const char* env_out = std::getenv("PRIVSIM_OUT");
    if (env_out && *env_out) output_dir = env_out;
}

std::vector<ReliabilityProfile> RunConfig::profile_by_id() const {
    std::vector<ReliabilityProfile> out;
    out.reserve(participants);
    for (std::size_t i = 0; i < profiles.special; ++i)
        out.push_back(ReliabilityProfile::special());
    for (std::int64_t i = 0; i < profiles.clean; ++i) out.push_back(ReliabilityProfile::clean());
    for (std::size_t i = 0; i < profiles.unreliable; ++i)
        out.push_back(ReliabilityProfile::unreliable(profiles.p));
    for (std::size_t i = 0; i < profiles.malicious; ++i)
        out.push_back(ReliabilityProfile::malicious());
    return out;
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["threads"] = threads;

    nlohmann::ordered_json d;
    if (dataset.synthetic) {
        d["synthetic"] = {{"n", dataset.synthetic->n},
                          {"d", dataset.synthetic->d},
                          {"noise_sd", dataset.synthetic->noise_sd}};
    } else {
        d["csv"] = dataset.csv_path;
        d["schema"] = dataset.schema_path;
    }
    d["label_log1p"] = dataset.label_log1p;
    d["y_floor"] = dataset.y_floor;
    d["add_bias_column"] = dataset.add_bias_column;
    j["dataset"] = std::move(d);

    nlohmann::ordered_json a;
    a["task"] = task == Task::Regression ? "regression" : "classification";
    a["hidden"] = hidden;
    if (task == Task::Classification) {
        a["featurizer"] = {
            {"kind", featurizer.kind == FeaturizerSpec::Kind::Identity ? "identity"
                                                                       : "random_projection"},
            {"width", featurizer.width},
            {"seed", featurizer.seed}};
    }
    j["architecture"] = std::move(a);

    nlohmann::ordered_json p;
    p["n"] = participants;
    p["clean"] = profiles.clean;
    p["unreliable"] = {{"count", profiles.unreliable}, {"p", profiles.p}};
    p["malicious"] = profiles.malicious;
    p["special"] = profiles.special;
    p["corrupt_label_only"] = profiles.corrupt_label_only;
    if (!schedule.empty()) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& e : schedule) {
            nlohmann::ordered_json ej;
            ej["participant"] = e.participant;
            ej["join_round"] = e.join_round;
            if (e.leave_round) ej["leave_round"] = *e.leave_round;
            if (e.local_target) ej["local_target"] = *e.local_target;
            arr.push_back(std::move(ej));
        }
        p["schedule"] = std::move(arr);
    }
    j["participants"] = std::move(p);

    nlohmann::ordered_json pt;
    pt["validation_size"] = partition.validation_size;
    pt["test_size"] = partition.test_size;
    if (partition.special_rule) {
        pt["special_rule"] = {{"column", partition.special_rule->column},
                              {"low", partition.special_rule->low},
                              {"high", partition.special_rule->high}};
    }
    j["partition"] = std::move(pt);

    j["server"] = {{"m", server.m},
                   {"k", server.k},
                   {"collect", server.collect == CollectMode::Threshold ? "threshold" : "preassign"},
                   {"classification_semantics",
                    server.clf_semantics == ClfSemantics::Argmax ? "argmax" : "threshold"}};
    j["training"] = {{"iterations", training.iterations},
                     {"batch_size", training.batch_size},
                     {"learning_rate", training.learning_rate},
                     {"mode", training.mode == TrainMode::Full ? "full" : "last_layer"},
                     {"grad_clamp", training.grad_clamp}};
    j["privacy"] = {{"epsilon_sampling", privacy.eps1}, {"epsilon_objective", privacy.eps2}};
    nlohmann::ordered_json t;
    if (termination.rounds) t["rounds"] = *termination.rounds;
    if (termination.target_metric) t["target_metric"] = *termination.target_metric;
    t["max_rounds"] = termination.max_rounds;
    j["termination"] = std::move(t);
    j["checkpoint_every"] = checkpoint_every;
    j["log_timing"] = log_timing;
    return j;
}

}  // namespace privsim
