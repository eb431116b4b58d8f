#include "privsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace privsim {

namespace {

ColumnKind kind_from_string(const std::string& s) {
    if (s == "numeric") return ColumnKind::Numeric;
    if (s == "categorical") return ColumnKind::Categorical;
    if (s == "binary") return ColumnKind::Binary;
    if (s == "label") return ColumnKind::Label;
    throw std::invalid_argument("schema: unknown column kind '" + s + "'");
}

std::string kind_to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::Numeric: return "numeric";
        case ColumnKind::Categorical: return "categorical";
        case ColumnKind::Binary: return "binary";
        case ColumnKind::Label: return "label";
    }
    return "?";
}

double parse_number(const std::string& s, const std::string& column) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        if (!std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("column '" + column + "': cannot parse numeric value '" + s +
                                    "'");
    }
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
        if (j >= i) j = i - 1;
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace

Schema Schema::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("schema: expected a JSON object");
    Schema s;
    std::size_t labels = 0;
    for (const auto& [name, kind] : j.items()) {
        s.columns.push_back(name);
        s.kinds.push_back(kind_from_string(kind.get<std::string>()));
        if (s.kinds.back() == ColumnKind::Label) ++labels;
    }
    if (labels != 1) throw std::invalid_argument("schema: exactly one 'label' column required");
    return s;
}

Schema Schema::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("schema: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

ColumnKind Schema::kind_of(const std::string& column) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == column) return kinds[i];
    throw std::invalid_argument("schema: column '" + column + "' not declared");
}

RawTable parse_csv(std::istream& in, const std::string& origin) {
    RawTable t;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && !first) continue;
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        cur += '"';
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        fields.push_back(cur);
        if (first) {
            t.header = fields;
            first = false;
        } else {
            if (fields.size() != t.header.size()) {
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": expected " + std::to_string(t.header.size()) +
                                         " fields, got " + std::to_string(fields.size()));
            }
            t.rows.push_back(std::move(fields));
        }
    }
    if (first) throw std::runtime_error(origin + ": missing header row");
    return t;
}

RawTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    return parse_csv(in, path);
}

Encoder Encoder::fit(const RawTable& table, const Schema& schema, const PrepareOptions& opt) {
    Encoder e;
    e.opt_ = opt;
    if (table.rows.empty()) throw std::invalid_argument("prepare: empty table");

    // Map header order onto the schema.
    std::size_t offset = 0;
    for (const auto& name : table.header) {
        Column col;
        col.name = name;
        col.kind = schema.kind_of(name);
        const std::size_t ci = e.columns_.size();

        if (col.kind == ColumnKind::Binary || col.kind == ColumnKind::Categorical ||
            (col.kind == ColumnKind::Label && opt.classification_label)) {
            std::set<std::string> vocab;
            for (const auto& row : table.rows) vocab.insert(row[ci]);
            col.vocab.assign(vocab.begin(), vocab.end());
            if (col.kind == ColumnKind::Binary && col.vocab.size() != 2) {
                throw std::invalid_argument("column '" + name + "': binary column has " +
                                            std::to_string(col.vocab.size()) +
                                            " distinct values, expected 2");
            }
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& row : table.rows) {
                double v = parse_number(row[ci], name);
                if (col.kind == ColumnKind::Label && opt.label_log1p) {
                    if (v < 0) throw std::invalid_argument("column '" + name +
                                                           "': log transform needs values >= 0");
                    v = std::log1p(v);
                }
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            col.min = lo;
            col.max = hi;
            if (lo == hi) {
                col.constant = true;
                e.warnings_.push_back("column '" + name + "' is constant; mapped to 0");
            }
        }

        col.offset = offset;
        if (col.kind == ColumnKind::Numeric || col.kind == ColumnKind::Binary) {
            offset += 1;
        } else if (col.kind == ColumnKind::Categorical) {
            offset += col.vocab.size();
        }
        if (col.kind == ColumnKind::Label && opt.classification_label) {
            e.label_vocab_ = col.vocab;
        }
        e.columns_.push_back(std::move(col));
    }
    if (opt.add_bias_column) ++offset;
    return e;
}

std::size_t Encoder::encoded_dim() const {
    std::size_t d = opt_.add_bias_column ? 1 : 0;
    for (const auto& c : columns_) {
        if (c.kind == ColumnKind::Numeric || c.kind == ColumnKind::Binary) d += 1;
        else if (c.kind == ColumnKind::Categorical) d += c.vocab.size();
    }
    return d;
}

std::size_t Encoder::feature_index(const std::string& column) const {
    for (const auto& c : columns_) {
        if (c.name == column) {
            if (c.kind == ColumnKind::Categorical || c.kind == ColumnKind::Label)
                throw std::invalid_argument("feature_index: column '" + column +
                                            "' is not a single encoded feature");
            return c.offset;
        }
    }
    throw std::invalid_argument("feature_index: unknown column '" + column + "'");
}

Dataset Encoder::transform(const RawTable& table) const {
    const std::size_t n = table.rows.size();
    if (n == 0) throw std::invalid_argument("transform: empty table");
    if (table.header.size() != columns_.size())
        throw std::invalid_argument("transform: header does not match fitted encoder");

    Dataset ds;
    ds.features = Matrix(n, encoded_dim());
    ds.labels.assign(n, 0.0);

    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t ci = 0; ci < columns_.size(); ++ci) {
            const Column& col = columns_[ci];
            const std::string& raw = table.rows[r][ci];
            switch (col.kind) {
                case ColumnKind::Binary:
                case ColumnKind::Categorical: {
                    auto it = std::find(col.vocab.begin(), col.vocab.end(), raw);
                    if (it == col.vocab.end()) {
                        throw std::invalid_argument("column '" + col.name +
                                                    "': unseen category '" + raw + "'");
                    }
                    std::size_t k = static_cast<std::size_t>(it - col.vocab.begin());
                    if (col.kind == ColumnKind::Binary) {
                        ds.features(r, col.offset) = static_cast<double>(k);
                    } else {
                        ds.features(r, col.offset + k) = 1.0;
                    }
                    break;
                }
                case ColumnKind::Numeric: {
                    double v = parse_number(raw, col.name);
                    double scaled = col.constant
                                        ? 0.0
                                        : std::clamp((v - col.min) / (col.max - col.min), 0.0, 1.0);
                    ds.features(r, col.offset) = scaled;
                    break;
                }
                case ColumnKind::Label: {
                    if (opt_.classification_label) {
                        auto it = std::find(col.vocab.begin(), col.vocab.end(), raw);
                        if (it == col.vocab.end()) {
                            throw std::invalid_argument("column '" + col.name +
                                                        "': unseen category '" + raw + "'");
                        }
                        ds.labels[r] = static_cast<double>(it - col.vocab.begin());
                    } else {
                        double v = parse_number(raw, col.name);
                        if (opt_.label_log1p) v = std::log1p(v);
                        double scaled =
                            col.constant ? 0.0
                                         : std::clamp((v - col.min) / (col.max - col.min), 0.0, 1.0);
                        // affine rescale into [y_floor, 1]: keeps every label
                        // at or above the floor and makes prepare idempotent
                        ds.labels[r] = opt_.y_floor + (1.0 - opt_.y_floor) * scaled;
                    }
                    break;
                }
            }
        }
        if (opt_.add_bias_column) ds.features(r, encoded_dim() - 1) = 1.0;
    }
    return ds;
}

nlohmann::ordered_json Encoder::manifest() const {
    nlohmann::ordered_json j;
    j["y_floor"] = opt_.y_floor;
    j["label_log1p"] = opt_.label_log1p;
    j["add_bias_column"] = opt_.add_bias_column;
    j["classification_label"] = opt_.classification_label;
    nlohmann::ordered_json cols = nlohmann::ordered_json::array();
    for (const auto& c : columns_) {
        nlohmann::ordered_json cj;
        cj["name"] = c.name;
        cj["kind"] = kind_to_string(c.kind);
        cj["offset"] = c.offset;
        if (!c.vocab.empty()) cj["vocab"] = c.vocab;
        if (c.kind == ColumnKind::Numeric || (c.kind == ColumnKind::Label && !opt_.classification_label)) {
            cj["min"] = c.min;
            cj["max"] = c.max;
            cj["constant"] = c.constant;
        }
        cols.push_back(std::move(cj));
    }
    j["columns"] = std::move(cols);
    if (!warnings_.empty()) j["warnings"] = warnings_;
    return j;
}

Encoder Encoder::from_manifest(const nlohmann::json& m) {
    Encoder e;
    e.opt_.y_floor = m.at("y_floor").get<double>();
    e.opt_.label_log1p = m.at("label_log1p").get<bool>();
    e.opt_.add_bias_column = m.at("add_bias_column").get<bool>();
    e.opt_.classification_label = m.at("classification_label").get<bool>();
    for (const auto& cj : m.at("columns")) {
        Column c;
        c.name = cj.at("name").get<std::string>();
        c.kind = kind_from_string(cj.at("kind").get<std::string>());
        c.offset = cj.at("offset").get<std::size_t>();
        if (cj.contains("vocab")) c.vocab = cj.at("vocab").get<std::vector<std::string>>();
        if (cj.contains("min")) {
            c.min = cj.at("min").get<double>();
            c.max = cj.at("max").get<double>();
            c.constant = cj.at("constant").get<bool>();
        }
        if (c.kind == ColumnKind::Label && e.opt_.classification_label) e.label_vocab_ = c.vocab;
        e.columns_.push_back(std::move(c));
    }
    return e;
}

Dataset prepare(const RawTable& table, const Schema& schema, const PrepareOptions& opt,
                Encoder* fitted) {
    Encoder e = Encoder::fit(table, schema, opt);
    Dataset ds = e.transform(table);
    if (fitted) *fitted = std::move(e);
    return ds;
}

PartitionPlan partition(const Dataset& ds, const PartitionSpec& spec, Rng& rng) {
    if (spec.participants < 1) throw std::invalid_argument("partition: need at least 1 participant");
    const std::size_t n = ds.n();

    std::vector<std::size_t> general, held_out;
    general.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (spec.special) {
            double v = ds.features(i, spec.special->feature_index);
            if (v < spec.special->low || v > spec.special->high) {
                held_out.push_back(i);
                continue;
            }
        }
        general.push_back(i);
    }

    if (spec.validation_size + spec.test_size > general.size()) {
        throw std::invalid_argument("partition: validation+test (" +
                                    std::to_string(spec.validation_size + spec.test_size) +
                                    ") exceed available rows (" +
                                    std::to_string(general.size()) + ")");
    }
    const std::size_t n_special = spec.special ? spec.special_participants : 0;
    if (n_special > spec.participants)
        throw std::invalid_argument("partition: more special participants than participants");
    if (spec.special && n_special == 0 && !held_out.empty())
        throw std::invalid_argument("partition: special rule given but no special participants");

    shuffle_indices(general, rng);
    shuffle_indices(held_out, rng);

    PartitionPlan plan;
    auto cut = general.begin();
    plan.validation.assign(cut, cut + spec.validation_size);
    cut += spec.validation_size;
    plan.test.assign(cut, cut + spec.test_size);
    cut += spec.test_size;
    std::vector<std::size_t> pool(cut, general.end());

    // Held-out rows: half to the special test set, the rest split among the
    // special participants.
    std::vector<std::size_t> special_pool;
    if (!held_out.empty()) {
        std::size_t t = held_out.size() / 2;
        plan.special_test.assign(held_out.begin(), held_out.begin() + t);
        special_pool.assign(held_out.begin() + t, held_out.end());
    }

    plan.shards.resize(spec.participants);
    // special participants come first
    for (std::size_t p = 0; p < n_special; ++p) {
        std::size_t lo = special_pool.size() * p / n_special;
        std::size_t hi = special_pool.size() * (p + 1) / n_special;
        plan.shards[p].assign(special_pool.begin() + lo, special_pool.begin() + hi);
    }
    const std::size_t n_general = spec.participants - n_special;
    if (n_general == 0 && !pool.empty())
        throw std::invalid_argument("partition: no general participants left for general rows");
    for (std::size_t p = 0; p < n_general; ++p) {
        std::size_t lo = pool.size() * p / n_general;
        std::size_t hi = pool.size() * (p + 1) / n_general;
        plan.shards[n_special + p].assign(pool.begin() + lo, pool.begin() + hi);
    }
    return plan;
}

Dataset take(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.features = Matrix(idx.size(), ds.dim());
    out.labels.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t c = 0; c < ds.dim(); ++c) out.features(r, c) = ds.features(idx[r], c);
        out.labels[r] = ds.labels[idx[r]];
    }
    return out;
}

Dataset corrupt(const Dataset& shard, const ReliabilityProfile& profile, Rng& rng,
                bool label_only) {
    if (profile.kind != ReliabilityProfile::Kind::Unreliable)
        throw std::invalid_argument("corrupt: profile must be unreliable");
    if (profile.p < 0.0 || profile.p > 1.0)
        throw std::invalid_argument("corrupt: p must be in [0,1]");

    Dataset out = shard;
    const std::size_t n = shard.n();
    const std::size_t k = static_cast<std::size_t>(std::floor(profile.p * static_cast<double>(n)));
    if (k == 0) return out;

    // partial Fisher-Yates: first k entries are the chosen rows
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.uniform01() *
                                                     static_cast<double>(n - i));
        if (j >= n) j = n - 1;
        std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t r = idx[i];
        if (!label_only)
            for (std::size_t c = 0; c < out.dim(); ++c) out.features(r, c) = rng.uniform01();
        out.labels[r] = rng.uniform01();
    }
    return out;
}

Dataset synth_regression(const SynthSpec& spec, Rng& rng) {
    if (spec.n < 1 || spec.d < 1) throw std::invalid_argument("synth_regression: need n,d >= 1");

    // generator coefficients
    const std::size_t d = spec.d;
    std::vector<double> lin(d);
    Matrix quad(d, d);
    double bias = sample_gaussian(rng) * 0.5;
    for (std::size_t i = 0; i < d; ++i) lin[i] = sample_gaussian(rng) * 2.0 / std::sqrt(double(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) quad(i, j) = sample_gaussian(rng) * 1.0 / double(d);

    Dataset ds;
    ds.features = Matrix(spec.n, d);
    ds.labels.resize(spec.n);
    for (std::size_t r = 0; r < spec.n; ++r) {
        for (std::size_t c = 0; c < d; ++c) ds.features(r, c) = rng.uniform01();
        double z = bias;
        for (std::size_t i = 0; i < d; ++i) {
            double xi = ds.features(r, i);
            z += lin[i] * xi;
            for (std::size_t j = 0; j < d; ++j) z += quad(i, j) * xi * ds.features(r, j);
        }
        double y = 1.0 / (1.0 + std::exp(-z));
        // always consume the gaussian so noise_sd=0 reuses the same stream
        double noise = sample_gaussian(rng) * spec.noise_sd;
        ds.labels[r] = std::clamp(y + noise, spec.y_floor, 1.0);
    }
    return ds;
}

}  // namespace privsim
