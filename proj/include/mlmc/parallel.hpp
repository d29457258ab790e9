#pragma once

#include <functional>

namespace mlmc {

// Number of reduction lanes used by every batch-parallel loop. Work item i
// belongs to lane i % kLanes; a lane's items are processed in index order and
// lane partials are combined by a pairwise tree. Both assignments are fixed,
// so results do not depend on how many threads execute the lanes.
inline constexpr int kLanes = 64;

// Runs fn(lane) for lane = 0..n_lanes-1 on at most n_threads workers.
void run_lanes(int n_lanes, int n_threads, const std::function<void(int)>& fn);

// Pairwise tree combine over lane slots: calls merge(dst, src) with
// dst < src, folding everything into slot 0.
template <typename Merge>
void tree_combine(int n_lanes, Merge&& merge) {
  for (int stride = 1; stride < n_lanes; stride *= 2)
    for (int i = 0; i + stride < n_lanes; i += 2 * stride) merge(i, i + stride);
}

}  // namespace mlmc
