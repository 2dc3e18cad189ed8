// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace augal {

/// What a random stream is consumed for. Streams with different purposes are
/// independent even when every other key field matches.
enum class StreamPurpose : std::uint32_t {
    CutoutScore = 1,
    CutmixScore = 2,
    CutoutTrain = 3,
    CutmixTrain = 4,
    CutmixTrainPerm = 5,
    PadCropFlip = 6,
    ModelInit = 7,
    PoolSubset = 8,
    InitLabeled = 9,
    EpochShuffle = 10,
    RandomScore = 11,
    SynthData = 12,
};

namespace detail {
// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Mix two seeds into one (used to combine a config-level init seed with a
/// scenario seed).
constexpr std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b) {
    return detail::mix64(detail::mix64(a) ^ b);
}

/// Counter-based splittable random stream. The output sequence is a pure
/// function of (seed, purpose, cycle, sample): any two streams differing in
/// any field are independent, and replaying a stream from its fields
/// reproduces the sequence bit-exactly regardless of what ran in between.
class RngStream {
  public:
    RngStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t cycle,
              std::uint64_t sample)
        : key_(detail::mix64(
              detail::mix64(detail::mix64(detail::mix64(seed) ^
                                          static_cast<std::uint64_t>(purpose)) ^
                            cycle) ^
              sample)) {}

    std::uint64_t next_u64() { return detail::mix64(key_ + ++draw_ * kGamma); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t next_below(std::uint64_t n) {
        // Lemire's multiply-shift; bias is negligible for desk-scale n and
        // the mapping is a fixed pure function, which is what determinism
        // needs.
        const unsigned __int128 m =
            static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller; consumes two draws per value.
    double next_normal() {
        const double u1 = 1.0 - next_uniform();  // (0, 1]
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t draws_taken() const { return draw_; }

  private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    std::uint64_t key_;
    std::uint64_t draw_ = 0;
};

/// Key helper for per-epoch re-sampling of training-time augmentation: the
/// epoch is folded into the stream's sample field so the five-field key stays
/// a pure function. Dataset indices stay below 2^40 at desk scale.
constexpr std::uint64_t epoch_sample_key(std::uint64_t epoch,
                                         std::uint64_t dataset_index) {
    return (epoch << 40) | dataset_index;
}

}  // namespace augal
