#include "dagpo/rng.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dagpo/errors.hpp"

namespace dagpo {

std::uint64_t mix64(std::uint64_t x) {
    std::uint64_t z = x + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

RngStream RngStream::substream(std::uint64_t seed, std::string_view name,
                               std::uint64_t index) {
    return RngStream(mix64(seed ^ hash_name(name)) + index);
}

double RngStream::uniform() {
    // Top 53 bits scaled by 2^-53; never returns 1.0.
    return std::ldexp(static_cast<double>(next_u64() >> 11), -53);
}

int RngStream::uniform_int(int lo, int hi) {
    if (lo > hi) throw RangeError("uniform_int: lo > hi");
    auto range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<int>(static_cast<std::int64_t>(lo) +
                            static_cast<std::int64_t>(x % range));
}

int RngStream::categorical(std::span<const double> weights) {
    if (weights.empty()) throw DegenerateDistribution("categorical: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0)
            throw DegenerateDistribution("categorical: weight not finite and non-negative");
        total += w;
    }
    if (total <= 0.0) throw DegenerateDistribution("categorical: weights sum to zero");
    double u = uniform() * total;
    double acc = 0.0;
    int last_nonzero = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] > 0.0) last_nonzero = static_cast<int>(i);
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    // Rounding pushed u past the accumulated total.
    return last_nonzero;
}

std::vector<int> RngStream::sample_without_replacement(int n, int k) {
    if (k < 0 || n < 0 || k > n)
        throw RangeError("sample_without_replacement: need 0 <= k <= n");
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        int j = uniform_int(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

std::string RngStream::save_state() const {
    std::ostringstream oss;
    oss << eng_;
    return oss.str();
}

void RngStream::restore_state(const std::string& text) {
    std::istringstream iss(text);
    iss >> eng_;
    if (iss.fail()) throw ParseError("rng state text is malformed");
}

} // namespace dagpo
