#include "privsim/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace privsim {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

}  // namespace

std::uint64_t Rng::next_u64() {
    state_ += kGamma;
    ++draws_;
    return mix64(state_);
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

Rng Rng::child(std::uint64_t stream_id) const {
    // Two mixing rounds keep sibling and parent streams decorrelated even
    // for adjacent stream ids.
    return Rng(mix64(seed_ ^ mix64((stream_id + 1) * kGamma)));
}

double laplace_icdf(double u, double scale) {
    double t = u - 0.5;
    if (t == 0.0) return 0.0;
    double q = 1.0 - 2.0 * std::abs(t);
    if (q <= 0.0) q = std::numeric_limits<double>::min();
    double sign = t > 0.0 ? 1.0 : -1.0;
    return -scale * sign * std::log(q);
}

double sample_laplace(Rng& rng, double scale) {
    if (scale <= 0.0) throw std::invalid_argument("sample_laplace: scale must be > 0");
    return laplace_icdf(rng.uniform01(), scale);
}

double sample_uniform(Rng& rng, double lo, double hi) {
    if (lo >= hi) throw std::invalid_argument("sample_uniform: require lo < hi");
    return lo + (hi - lo) * rng.uniform01();
}

double sample_gaussian(Rng& rng) {
    double u1 = 1.0 - rng.uniform01();  // (0, 1]
    double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace privsim
