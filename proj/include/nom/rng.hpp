#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace nom {

/// Seeded pseudo-random source. Bit-reproducible across platforms: only the
/// raw mt19937_64 stream is used, never the implementation-defined
/// standard distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix(seed)) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n).
    std::uint64_t index(std::uint64_t n)
    {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r = engine_();
        while (r >= limit) r = engine_();
        return r % n;
    }

    template <class T>
    void shuffle(std::span<T> items)
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

    /// Independent seed for sub-stream `stream` of a run seeded with `seed`.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream)
    {
        return splitmix(seed ^ splitmix(stream + 0x9e3779b97f4a7c15ULL));
    }

private:
    static std::uint64_t splitmix(std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

} // namespace nom
