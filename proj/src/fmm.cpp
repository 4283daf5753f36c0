// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <queue>

#include "deid/inpaint.hpp"

namespace deid::inpaint {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool usable(const DistanceMap& dm, int x, int y) {
  return dm.in_bounds(x, y) && dm.at(x, y) != PixelState::Inside &&
         std::isfinite(dm.dist(x, y));
}

// One quadrant: horizontal neighbor value a, vertical neighbor value b
// (either may be absent). Unit spacing, unit speed.
double quadrant_solve(bool has_a, double a, bool has_b, double b) {
  if (has_a && has_b) {
    double diff = a - b;
    if (std::abs(diff) >= 1.0) return 1.0 + std::min(a, b);
    return (a + b + std::sqrt(2.0 - diff * diff)) * 0.5;
  }
  if (has_a) return 1.0 + a;
  if (has_b) return 1.0 + b;
  return kInf;
}

}  // namespace

double eikonal_update(const DistanceMap& dm, int x, int y) {
  double best = kInf;
  for (int hx : {x - 1, x + 1}) {
    bool has_a = usable(dm, hx, y);
    double a = has_a ? dm.dist(hx, y) : 0.0;
    for (int vy : {y - 1, y + 1}) {
      bool has_b = usable(dm, x, vy);
      double b = has_b ? dm.dist(x, vy) : 0.0;
      best = std::min(best, quadrant_solve(has_a, a, has_b, b));
    }
  }
  return best;
}

DistanceMap fast_march(const Mask& mask) {
  DistanceMap dm;
  dm.width = mask.width;
  dm.height = mask.height;
  size_t n = size_t(mask.width) * mask.height;
  dm.d.assign(n, 0.0);
  dm.state.assign(n, PixelState::Known);

  size_t inside_count = 0;
  for (size_t i = 0; i < n; ++i) {
    if (mask.on[i]) {
      dm.state[i] = PixelState::Inside;
      dm.d[i] = kInf;
      ++inside_count;
    }
  }
  if (inside_count == 0) return dm;
  dm.order.reserve(inside_count);

  using Entry = std::pair<double, int>;  // (distance, row-major index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  // Seed the band: masked pixels with at least one outside neighbor.
  for (int y = 0; y < dm.height; ++y) {
    for (int x = 0; x < dm.width; ++x) {
      if (!mask.at(x, y)) continue;
      bool boundary = false;
      if (x > 0 && !mask.at(x - 1, y)) boundary = true;
      if (!boundary && x + 1 < dm.width && !mask.at(x + 1, y)) boundary = true;
      if (!boundary && y > 0 && !mask.at(x, y - 1)) boundary = true;
      if (!boundary && y + 1 < dm.height && !mask.at(x, y + 1)) boundary = true;
      if (!boundary) continue;
      double cand = eikonal_update(dm, x, y);
      size_t idx = size_t(y) * dm.width + x;
      dm.d[idx] = cand;
      dm.state[idx] = PixelState::Band;
      heap.emplace(cand, int(idx));
    }
  }

  while (!heap.empty()) {
    auto [dist, idx] = heap.top();
    heap.pop();
    if (dm.state[size_t(idx)] == PixelState::Known) continue;  // stale entry
    if (dist > dm.d[size_t(idx)]) continue;
    dm.state[size_t(idx)] = PixelState::Known;
    dm.order.push_back(idx);

    int x = idx % dm.width;
    int y = idx / dm.width;
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int q = 0; q < 4; ++q) {
      if (!dm.in_bounds(nx[q], ny[q])) continue;
      size_t nidx = size_t(ny[q]) * dm.width + nx[q];
      if (dm.state[nidx] == PixelState::Known) continue;
      double cand = eikonal_update(dm, nx[q], ny[q]);
      if (cand < dm.d[nidx]) {
        dm.d[nidx] = cand;
        dm.state[nidx] = PixelState::Band;
        heap.emplace(cand, int(nidx));
      }
    }
  }
  return dm;
}

std::array<double, 2> boundary_normal(const DistanceMap& dm, int x, int y) {
  auto value_at = [&](int px, int py, bool& ok) {
    ok = dm.in_bounds(px, py) && dm.at(px, py) != PixelState::Inside &&
         std::isfinite(dm.dist(px, py));
    return ok ? dm.dist(px, py) : 0.0;
  };
  double here = dm.dist(x, y);
  double grad[2] = {0.0, 0.0};
  for (int axis = 0; axis < 2; ++axis) {
    int dx = axis == 0 ? 1 : 0;
    int dy = axis == 0 ? 0 : 1;
    bool ok_p = false, ok_m = false;
    double vp = value_at(x + dx, y + dy, ok_p);
    double vm = value_at(x - dx, y - dy, ok_m);
    if (ok_p && ok_m) grad[axis] = (vp - vm) * 0.5;
    else if (ok_p) grad[axis] = vp - here;
    else if (ok_m) grad[axis] = here - vm;
  }
  double norm = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1]);
  if (norm < 1e-12) return {0.0, 0.0};
  return {grad[0] / norm, grad[1] / norm};
}

}  // namespace deid::inpaint
