#pragma once

#include <cstdint>

#include "mlmc/model.hpp"

namespace mlmc {

// Standard normal CDF, Hart's double-precision rational approximation
// (coefficients as tabulated by West, "Better approximations to cumulative
// normal functions"). Absolute error below 1e-15 for |x| < 37.
double normal_cdf(double x);

// Inverse standard normal CDF, Wichura's algorithm AS 241 (PPND16).
// Absolute error below 1e-9 on (0,1); in practice close to machine accuracy.
double inverse_normal_cdf(double p);

// Counter-based random stream: the k-th output is a pure function of
// (seed, stream_id, k) via Philox-4x32-10 keyed by the seed halves, with the
// 128-bit counter block assembled from (stream_id, k >> 1). Streams are plain
// values, cheap to copy, and carry no shared state, so batches may derive one
// stream per task and produce results independent of the worker count.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t counter = 0;

  // Raw 64-bit output at the current counter; advances the counter by one.
  std::uint64_t next_u64();

  // Uniform draw strictly inside (0,1); one counter tick.
  double next_uniform();

  // Standard normal via the inversion method; one counter tick.
  double next_normal();

 private:
  // Memo of the most recent Philox block (two 64-bit words per block). Purely
  // a cache of the (seed, stream_id, counter) -> output function.
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  std::uint64_t cached_out_[2] = {0, 0};
};

RngStream seed_stream(std::uint64_t seed, std::uint64_t stream_id);

// Fixed substream allocation table. Every phase of an experiment derives its
// streams from the run seed through this function, so any phase can be
// replayed in isolation and parallel workers never share a stream:
//
//   stream_id = phase << 56 | level << 48 | index,   index < 2^48
//
//   WeightInit  per level, index 0
//   TrainData   per (level, step, sample): index = step * batch + sample
//   Pilot       per (level, sample)
//   Evaluation  per test point
//   Study       per (repetition, purpose-specific index)
enum class StreamPhase : std::uint64_t {
  WeightInit = 1,
  TrainData = 2,
  Pilot = 3,
  Evaluation = 4,
  Study = 5,
};

std::uint64_t substream_id(StreamPhase phase, unsigned level, std::uint64_t index);

// One point uniform on the box; coordinates drawn in field order (mu, sigma,
// s0, maturity, strike). Always consumes exactly kParamDim ticks; degenerate
// intervals map every draw to their single point.
ParamVector sample_uniform_box(RngStream& stream, const TrainingBox& box);

}  // namespace mlmc
