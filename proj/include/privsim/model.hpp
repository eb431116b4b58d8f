#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "privsim/matrix.hpp"
#include "privsim/rng.hpp"

namespace privsim {

enum class Task { Regression, Classification };

/// Fixed input transform for the classification path. Never trained and
/// shared by every participant; a seeded random projection followed by the
/// clipped ReLU keeps outputs in [0, 1].
struct FeaturizerSpec {
    enum class Kind { Identity, RandomProjection };
    Kind kind = Kind::Identity;
    std::size_t width = 0;       // projection output width
    std::uint64_t seed = 0;
};

struct Architecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;  // trained hidden widths (regression path)
    std::size_t output_dim = 1;
    Task task = Task::Regression;
    FeaturizerSpec featurizer;

    /// Width of the layer feeding the output layer (the perturbed layer's
    /// input width): last hidden width for regression, featurizer output
    /// width for classification.
    std::size_t last_hidden_width() const;
    /// Input width of the first trained matrix.
    std::size_t trained_input_width() const;
    /// Shapes of the trained matrices, in order.
    std::vector<std::pair<std::size_t, std::size_t>> layer_shapes() const;

    nlohmann::ordered_json to_json() const;
    static Architecture from_json(const nlohmann::json& j);
};

/// The trained weight matrices, exchanged by value between participants
/// and the server. Regression: [W1 (d x b), ..., Wout (b x o)];
/// classification: [Wout (b x M)] behind the fixed featurizer.
struct ModelParams {
    std::vector<Matrix> layers;

    bool same_shapes(const ModelParams& o) const;
};

/// Standard-normal initialization; a shared seed gives every participant
/// bit-identical starting weights.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

double sigmoid(double z);

/// clip(max(0, X*W), 0, 1) row-wise.
Matrix forward_hidden(const Matrix& X, const Matrix& W);

/// sigmoid(H*W) elementwise; outputs in (0, 1).
Matrix forward_output(const Matrix& H, const Matrix& W);

/// Classification input transform (identity or seeded projection).
Matrix featurize(const FeaturizerSpec& spec, const Matrix& X);

/// Activations feeding the output layer: the clipped-ReLU stack for
/// regression, the featurizer output for classification.
Matrix hidden_activations(const Architecture& arch, const ModelParams& params, const Matrix& X);

/// Full forward pass; n x output_dim predictions in (0, 1).
Matrix forward(const Architecture& arch, const ModelParams& params, const Matrix& X);

/// Binary checkpoint: magic, version, layer shapes, row-major IEEE-754
/// doubles, all little-endian; bit-exact across platforms. A JSON sidecar
/// (<path>.json) carries the architecture.
void save_checkpoint(const std::string& path, const Architecture& arch,
                     const ModelParams& params);
struct Checkpoint {
    Architecture arch;
    ModelParams params;
};
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over the little-endian weight bytes; stable run-log digest.
std::string params_digest(const ModelParams& params);

}  // namespace privsim
