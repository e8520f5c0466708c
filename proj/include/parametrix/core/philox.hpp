#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace parametrix {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A stream is identified by a 64-bit key; draws are addressed by a 128-bit
/// counter, so any (key, counter) pair can be evaluated independently.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t key)
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

    [[nodiscard]] Block operator()(Block counter) const {
        std::array<std::uint32_t, 2> k = key_;
        for (int round = 0; round < 10; ++round) {
            counter = single_round(counter, k);
            k[0] += kWeyl0;
            k[1] += kWeyl1;
        }
        return counter;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    std::array<std::uint32_t, 2> key_;
};

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Standard normal draws for one (seed, stream) pair. Draw k of the stream is
/// a pure function of (seed, stream, k); the object only tracks a cursor.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream)
        : rng_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull))), stream_(stream) {}

    double next() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        if (pos_ == 2) refill();
        const double u1 = to_unit(buffer_[2 * pos_]);
        const double u2 = to_unit(buffer_[2 * pos_ + 1]);
        ++pos_;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(phi);
        have_cached_ = true;
        return r * std::cos(phi);
    }

private:
    // (0, 1] from 32 random bits.
    static double to_unit(std::uint32_t bits) { return (static_cast<double>(bits) + 1.0) * 0x1p-32; }

    void refill() {
        const Philox4x32::Block ctr{static_cast<std::uint32_t>(counter_),
                                    static_cast<std::uint32_t>(counter_ >> 32),
                                    static_cast<std::uint32_t>(stream_),
                                    static_cast<std::uint32_t>(stream_ >> 32)};
        buffer_ = rng_(ctr);
        ++counter_;
        pos_ = 0;
    }

    Philox4x32 rng_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Philox4x32::Block buffer_{};
    int pos_ = 2;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace parametrix
