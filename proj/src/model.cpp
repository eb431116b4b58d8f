#include "privsim/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace privsim {

namespace {

constexpr char kMagic[8] = {'P', 'V', 'S', 'M', 'C', 'K', 'P', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t double_bits(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    return v;
}

double bits_double(std::uint64_t v) {
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace

std::size_t Architecture::last_hidden_width() const {
    if (task == Task::Classification) {
        return featurizer.kind == FeaturizerSpec::Kind::Identity ? input_dim : featurizer.width;
    }
    if (hidden.empty()) throw std::invalid_argument("architecture: at least one hidden layer");
    return hidden.back();
}

std::size_t Architecture::trained_input_width() const {
    if (task == Task::Classification) return last_hidden_width();
    return input_dim;
}

std::vector<std::pair<std::size_t, std::size_t>> Architecture::layer_shapes() const {
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    if (task == Task::Classification) {
        shapes.emplace_back(last_hidden_width(), output_dim);
        return shapes;
    }
    if (hidden.empty()) throw std::invalid_argument("architecture: at least one hidden layer");
    std::size_t prev = input_dim;
    for (std::size_t h : hidden) {
        if (h < 1) throw std::invalid_argument("architecture: hidden widths must be >= 1");
        shapes.emplace_back(prev, h);
        prev = h;
    }
    shapes.emplace_back(prev, output_dim);
    return shapes;
}

nlohmann::ordered_json Architecture::to_json() const {
    nlohmann::ordered_json j;
    j["input_dim"] = input_dim;
    j["hidden"] = hidden;
    j["output_dim"] = output_dim;
    j["task"] = task == Task::Regression ? "regression" : "classification";
    nlohmann::ordered_json f;
    f["kind"] = featurizer.kind == FeaturizerSpec::Kind::Identity ? "identity" : "random_projection";
    f["width"] = featurizer.width;
    f["seed"] = featurizer.seed;
    j["featurizer"] = std::move(f);
    return j;
}

Architecture Architecture::from_json(const nlohmann::json& j) {
    Architecture a;
    a.input_dim = j.at("input_dim").get<std::size_t>();
    a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    a.output_dim = j.at("output_dim").get<std::size_t>();
    std::string task = j.at("task").get<std::string>();
    if (task == "regression") a.task = Task::Regression;
    else if (task == "classification") a.task = Task::Classification;
    else throw std::invalid_argument("architecture: unknown task '" + task + "'");
    if (j.contains("featurizer")) {
        const auto& f = j.at("featurizer");
        std::string kind = f.at("kind").get<std::string>();
        if (kind == "identity") a.featurizer.kind = FeaturizerSpec::Kind::Identity;
        else if (kind == "random_projection")
            a.featurizer.kind = FeaturizerSpec::Kind::RandomProjection;
        else throw std::invalid_argument("architecture: unknown featurizer '" + kind + "'");
        a.featurizer.width = f.at("width").get<std::size_t>();
        a.featurizer.seed = f.at("seed").get<std::uint64_t>();
    }
    return a;
}

bool ModelParams::same_shapes(const ModelParams& o) const {
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (!layers[i].same_shape(o.layers[i])) return false;
    return true;
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
    Rng rng(seed);
    ModelParams p;
    for (auto [r, c] : arch.layer_shapes()) {
        Matrix w(r, c);
        for (double& v : w.data()) v = sample_gaussian(rng);
        p.layers.push_back(std::move(w));
    }
    return p;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Matrix forward_hidden(const Matrix& X, const Matrix& W) {
    Matrix h = matmul(X, W);
    for (double& v : h.data()) v = std::clamp(v, 0.0, 1.0);
    return h;
}

Matrix forward_output(const Matrix& H, const Matrix& W) {
    Matrix z = matmul(H, W);
    // binary64 sigmoid saturates to exactly 0/1 for |z| > ~37; nudge back
    // inside the open interval the callers rely on
    static const double lo = std::nextafter(0.0, 1.0);
    static const double hi = std::nextafter(1.0, 0.0);
    for (double& v : z.data()) v = std::clamp(sigmoid(v), lo, hi);
    return z;
}

Matrix featurize(const FeaturizerSpec& spec, const Matrix& X) {
    if (spec.kind == FeaturizerSpec::Kind::Identity) return X;
    Rng rng(spec.seed);
    Matrix proj(X.cols(), spec.width);
    const double scale = 1.0 / std::sqrt(static_cast<double>(X.cols()));
    for (double& v : proj.data()) v = sample_gaussian(rng) * scale;
    return forward_hidden(X, proj);
}

Matrix hidden_activations(const Architecture& arch, const ModelParams& params, const Matrix& X) {
    if (arch.task == Task::Classification) return featurize(arch.featurizer, X);
    Matrix h = X;
    for (std::size_t l = 0; l + 1 < params.layers.size(); ++l)
        h = forward_hidden(h, params.layers[l]);
    return h;
}

Matrix forward(const Architecture& arch, const ModelParams& params, const Matrix& X) {
    Matrix h = hidden_activations(arch, params, X);
    return forward_output(h, params.layers.back());
}

void save_checkpoint(const std::string& path, const Architecture& arch,
                     const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, 8);
    put_u64(out, 1);  // version
    put_u64(out, params.layers.size());
    for (const auto& w : params.layers) {
        put_u64(out, w.rows());
        put_u64(out, w.cols());
    }
    for (const auto& w : params.layers)
        for (double v : w.data()) put_u64(out, double_bits(v));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);

    std::ofstream side(path + ".json");
    if (!side) throw std::runtime_error("checkpoint: cannot write " + path + ".json");
    side << arch.to_json().dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint64_t version = get_u64(in);
    if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
    std::uint64_t n_layers = get_u64(in);
    std::vector<std::pair<std::size_t, std::size_t>> shapes;
    for (std::uint64_t i = 0; i < n_layers; ++i) {
        std::uint64_t r = get_u64(in);
        std::uint64_t c = get_u64(in);
        shapes.emplace_back(r, c);
    }
    Checkpoint ck;
    for (auto [r, c] : shapes) {
        Matrix w(r, c);
        for (double& v : w.data()) v = bits_double(get_u64(in));
        if (!all_finite(w)) throw std::runtime_error("checkpoint: non-finite weights in " + path);
        ck.params.layers.push_back(std::move(w));
    }
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path);

    std::ifstream side(path + ".json");
    if (!side) throw std::runtime_error("checkpoint: missing sidecar " + path + ".json");
    nlohmann::json j;
    side >> j;
    ck.arch = Architecture::from_json(j);
    return ck;
}

std::string params_digest(const ModelParams& params) {
    std::uint64_t h = 1469598103934665603ULL;
    auto eat = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& w : params.layers) {
        eat(w.rows());
        eat(w.cols());
        for (double v : w.data()) eat(double_bits(v));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace privsim
