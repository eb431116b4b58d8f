#pragma once

#include <cstdint>

namespace privsim {

/// Deterministic counter-based random stream (splitmix64).
///
/// Every consumer of randomness takes an explicit Rng; there is no global
/// state. A stream is identified by its seed: identical seeds produce
/// bit-identical draw sequences across runs and platforms.
///
/// Child streams are derived from the parent's *seed* (not its position),
/// so the fan-out master -> dataset / init / server / participant[i] ->
/// per-round streams is stable: adding a participant or reordering calls
/// never perturbs anybody else's draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed), draws_(0) {}

    /// Next raw 64-bit value (advances the stream).
    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Independent stream keyed by (seed, stream_id). Pure: does not
    /// advance this stream.
    Rng child(std::uint64_t stream_id) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draws() const { return draws_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    std::uint64_t draws_;
};

// Stream-id layout used by the simulator fan-out. A master seed is split
// once per concern; participants get one stream each, indexed by id.
namespace streams {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kInit = 2;
inline constexpr std::uint64_t kServer = 3;
inline constexpr std::uint64_t kFeaturizer = 4;
inline constexpr std::uint64_t kParticipantBase = 1000;
// within a participant stream
inline constexpr std::uint64_t kShuffle = 0;
inline constexpr std::uint64_t kNoiseBase = 1;
// within the per-round server stream
inline constexpr std::uint64_t kArrival = 0;
inline constexpr std::uint64_t kSelection = 1;
}  // namespace streams

/// Laplace(0, scale) quantile function evaluated at u in [0, 1).
/// u = 0.5 maps to exactly 0; the half of the distribution is chosen by
/// the side of 0.5 the draw falls on.
double laplace_icdf(double u, double scale);

/// One Laplace(0, scale) draw via inverse CDF (one uniform consumed).
/// Throws std::invalid_argument for scale <= 0.
double sample_laplace(Rng& rng, double scale);

/// One uniform draw in [lo, hi). Throws std::invalid_argument if lo >= hi.
double sample_uniform(Rng& rng, double lo, double hi);

/// One standard normal draw (Box-Muller; consumes exactly two uniforms).
double sample_gaussian(Rng& rng);

}  // namespace privsim
