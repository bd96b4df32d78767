#pragma once

#include "nom/field.hpp"
#include "nom/samples.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nom {
struct SurrogateModel;
}

/// Data-parallel batch kernels. Each has a serial reference implementation
/// (kept for testing and benchmarking) and an OpenMP one; both write every
/// output slot independently, so results are identical.
namespace nom::kernels {

namespace serial {
void eval_surrogate(const SurrogateModel& m, const Samples& points, std::span<double> out);
void eval_field(const ScalarField& f, const Samples& points, std::span<double> out);
/// out[i] = 1 iff row i is dominated by, or an exact duplicate of an
/// earlier, row. O(n^2).
void dominated_mask(const Samples& objectives, std::span<std::uint8_t> out);
} // namespace serial

namespace parallel {
void eval_surrogate(const SurrogateModel& m, const Samples& points, std::span<double> out);
void eval_field(const ScalarField& f, const Samples& points, std::span<double> out);
void dominated_mask(const Samples& objectives, std::span<std::uint8_t> out);
} // namespace parallel

/// Convenience wrappers over the parallel kernels.
std::vector<double> eval_surrogate(const SurrogateModel& m, const Samples& points);
std::vector<double> eval_field(const ScalarField& f, const Samples& points);

/// Number of OpenMP threads the parallel kernels will use.
int thread_count();

} // namespace nom::kernels
