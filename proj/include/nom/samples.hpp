#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nom {

/// Row-major table of fixed-width vectors (one sample per row).
struct Samples {
    std::size_t dim = 0;
    std::vector<double> values;

    Samples() = default;
    explicit Samples(std::size_t d) : dim(d) {}
    Samples(std::size_t d, std::size_t rows) : dim(d), values(d * rows, 0.0) {}

    std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
    bool empty() const { return size() == 0; }

    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
    std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }

    void push_back(std::span<const double> r) { values.insert(values.end(), r.begin(), r.end()); }
};

} // namespace nom
