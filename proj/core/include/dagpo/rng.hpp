#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dagpo {

// splitmix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a over the bytes of a stream name.
std::uint64_t hash_name(std::string_view name);

// Deterministic random stream. Every stochastic routine in the library pulls
// from an explicit RngStream; independent pipeline stages derive named
// substreams from the run seed so no stage perturbs another's draws.
class RngStream {
public:
    RngStream() : RngStream(0) {}
    explicit RngStream(std::uint64_t seed) : eng_(mix64(seed)) {}

    // Derives an independent stream from (seed, name, index).
    static RngStream substream(std::uint64_t seed, std::string_view name,
                               std::uint64_t index = 0);

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform();

    // Uniform integer, both bounds inclusive. Rejection sampling, unbiased.
    int uniform_int(int lo, int hi);

    // Index drawn proportionally to an unnormalised weight vector.
    // Throws DegenerateDistribution on non-finite, negative, or all-zero weights.
    int categorical(std::span<const double> weights);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<int>(i - 1)));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values from {0, ..., n-1}, in draw order.
    std::vector<int> sample_without_replacement(int n, int k);

    // Engine state as text; stable across processes and platforms.
    std::string save_state() const;
    void restore_state(const std::string& text);

    bool operator==(const RngStream& other) const { return eng_ == other.eng_; }

private:
    std::mt19937_64 eng_;
};

} // namespace dagpo
