#pragma once

#include <cstdint>

#include "qcollide/types.hpp"

namespace qcollide {

// Counter-based splittable PRNG. Every draw is a pure function of
// (seed, stream_id, draw counter), so a stream's sample sequence does not
// depend on which worker runs it or on how many other streams exist.
// Per stream this is exactly the SplitMix64 sequence whose initial state is
// a hash of (seed, stream_id); distinct stream ids give decorrelated keys.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_(derive_key(seed, stream_id)), seed_(seed), stream_id_(stream_id) {}

    std::uint64_t next_u64() { return mix64(key_ + ++counter_ * kGolden); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform phase on [0, 2*pi).
    double phase() { return kTwoPi * uniform01(); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    // Number of draws made so far.
    std::uint64_t draws() const { return counter_; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    // SplitMix64 finalizer.
    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        return mix64(mix64(seed + kGolden) ^ mix64(stream + 0x6A09E667F3BCC909ull));
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::uint64_t seed_;
    std::uint64_t stream_id_;
};

}  // namespace qcollide
