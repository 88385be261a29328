#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mixscope {

/// Philox4x32-10 block function (Salmon et al., SC'11): a keyed bijection on
/// 128-bit counters. Equal (counter, key) always give equal output, which lets
/// every (sender, round) pair own an independent random stream that can be
/// generated in any order or on any thread.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter block(Counter ctr, Key key) noexcept {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            ctr = round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Counter round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// What a stream is used for; keeps input and output draws of the same
/// (sender, round) independent of each other.
enum class StreamPurpose : std::uint32_t { Input = 1, Output = 2, Sampling = 3 };

/// Uniform random bit generator over one Philox stream.
///
/// Counter layout: word 0 = block index within the stream, word 1 = entity
/// (usually the sender index), word 2 = low 32 bits of the round index,
/// word 3 = purpose in the top 8 bits and bits 32..55 of the round index.
/// Key = the 64-bit seed. Streams with distinct (entity, round, purpose) never
/// share a counter, so draws are reproducible regardless of generation order.
class CounterStream {
public:
    using result_type = std::uint32_t;

    CounterStream(std::uint64_t seed, std::uint32_t entity, std::uint64_t round, StreamPurpose purpose) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          base_{0, entity, static_cast<std::uint32_t>(round),
                (static_cast<std::uint32_t>(purpose) << 24) | static_cast<std::uint32_t>((round >> 32) & 0xFFFFFFu)} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (used_ == 4) {
            auto ctr = base_;
            ctr[0] = next_block_++;
            buffer_ = Philox4x32::block(ctr, key_);
            used_ = 0;
        }
        return buffer_[used_++];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept {
        const std::uint64_t hi = (*this)() >> 5;  // 27 bits
        const std::uint64_t lo = (*this)() >> 6;  // 26 bits
        return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
    }

private:
    Philox4x32::Key key_;
    Philox4x32::Counter base_;
    Philox4x32::Counter buffer_{};
    std::uint32_t next_block_ = 0;
    int used_ = 4;
};

}  // namespace mixscope
