#include "nom/kernels.hpp"

#include "nom/error.hpp"
#include "nom/surrogate.hpp"

#include <omp.h>

#include <cstdint>

namespace nom::kernels {

namespace {

// i is dominated by j (<= everywhere, < somewhere), or j is an identical
// vector that appears earlier.
bool beaten_by(const Samples& f, std::size_t i, std::size_t j)
{
    const auto a = f.row(i);
    const auto b = f.row(j);
    bool strict = false;
    for (std::size_t k = 0; k < f.dim; ++k) {
        if (b[k] > a[k]) return false;
        if (b[k] < a[k]) strict = true;
    }
    return strict || j < i;
}

void check(std::size_t rows, std::size_t out)
{
    if (rows != out) throw Error("kernel: output size does not match number of points");
}

} // namespace

namespace serial {

void eval_surrogate(const SurrogateModel& m, const Samples& points, std::span<double> out)
{
    check(points.size(), out.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = m.value(points.row(i));
}

void eval_field(const ScalarField& f, const Samples& points, std::span<double> out)
{
    check(points.size(), out.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = f.value(points.row(i));
}

void dominated_mask(const Samples& objectives, std::span<std::uint8_t> out)
{
    const std::size_t n = objectives.size();
    check(n, out.size());
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && beaten_by(objectives, i, j)) {
                out[i] = 1;
                break;
            }
        }
    }
}

} // namespace serial

namespace parallel {

void eval_surrogate(const SurrogateModel& m, const Samples& points, std::span<double> out)
{
    check(points.size(), out.size());
    const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = m.value(points.row(static_cast<std::size_t>(i)));
    }
}

void eval_field(const ScalarField& f, const Samples& points, std::span<double> out)
{
    check(points.size(), out.size());
    const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = f.value(points.row(static_cast<std::size_t>(i)));
    }
}

void dominated_mask(const Samples& objectives, std::span<std::uint8_t> out)
{
    check(objectives.size(), out.size());
    const auto n = static_cast<std::int64_t>(objectives.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        std::uint8_t hit = 0;
        for (std::size_t j = 0; j < objectives.size(); ++j) {
            if (j != i && beaten_by(objectives, i, j)) {
                hit = 1;
                break;
            }
        }
        out[i] = hit;
    }
}

} // namespace parallel

std::vector<double> eval_surrogate(const SurrogateModel& m, const Samples& points)
{
    std::vector<double> out(points.size());
    parallel::eval_surrogate(m, points, out);
    return out;
}

std::vector<double> eval_field(const ScalarField& f, const Samples& points)
{
    std::vector<double> out(points.size());
    parallel::eval_field(f, points, out);
    return out;
}

int thread_count() { return omp_get_max_threads(); }

} // namespace nom::kernels
