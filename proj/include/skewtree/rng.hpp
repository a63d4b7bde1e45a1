#pragma once

#include <cstdint>
#include <random>

namespace skewtree {

/// Seedable random stream. Every sampling routine takes one of these
/// explicitly; independent streams are derived from (seed, stream index)
/// so that ensembles are reproducible for any worker count.
class Rng {
public:
    using engine_type = std::mt19937_64;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), engine_(derive(seed, stream)) {}

    /// Substream `index` of this generator's seed.
    Rng substream(std::uint64_t index) const { return Rng(seed_, derive(stream_, index)); }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    std::uint64_t bits() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double normal() { return normal_(engine_); }

    engine_type& engine() noexcept { return engine_; }

    static std::uint64_t splitmix64(std::uint64_t x) noexcept {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept {
        return splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    engine_type engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Fair coin flips drawn 64 at a time from an Rng.
class CoinFlips {
public:
    explicit CoinFlips(Rng& rng) : rng_(&rng) {}

    bool flip() {
        if (left_ == 0) {
            buffer_ = rng_->bits();
            left_ = 64;
        }
        const bool heads = (buffer_ & 1U) != 0;
        buffer_ >>= 1;
        --left_;
        return heads;
    }

    Rng& rng() noexcept { return *rng_; }

private:
    Rng* rng_;
    std::uint64_t buffer_ = 0;
    int left_ = 0;
};

} // namespace skewtree
