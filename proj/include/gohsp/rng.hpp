#ifndef GOHSP_RNG_HPP_
#define GOHSP_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gohsp {

// Deterministic RNG. Normal sampling and shuffling are implemented by hand
// because std::normal_distribution / std::shuffle are not pinned by the
// standard; this keeps runs bit-identical for a given seed and binary.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Derive an independent stream, e.g. per epoch or per component.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        // splitmix64 over the pair
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (spare discarded for statelessness).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(gen_() % n);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace gohsp

#endif // GOHSP_RNG_HPP_
