#pragma once

// Test-only reference computations. Nothing here calls into the dynamic
// programs under test.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "s2st/nhsmm.hpp"

namespace oracle {

using s2st::Matrix;
using s2st::SegmentEntry;

struct Path {
  std::vector<SegmentEntry> segments;
  double log_joint = 0.0;
};

// Every segmentation (states and durations) of `seq` that respects the span
// constraints, with its joint log-probability scored from the model pieces.
inline std::vector<Path> enumerate_paths(const s2st::HsmmParams& p, const s2st::TokenSeq& seq,
                                         const s2st::ProtectedSpans& spans = {}) {
  const int S = static_cast<int>(seq.size());
  const int K = p.dims.K, D = p.dims.D;
  std::vector<char> cut_ok(S + 1, 1);
  for (const auto& s : spans) {
    if (s.end - s.begin > D) continue;  // demoted
    for (int c = s.begin + 1; c < s.end; ++c) cut_ok[c] = 0;
  }
  const Matrix A = s2st::transition_matrix(p);
  const s2st::Vector init = s2st::initial_distribution(p);
  std::vector<Path> out;
  std::vector<SegmentEntry> cur;
  std::function<void(int, int, double)> rec = [&](int pos, int prev, double lp) {
    if (pos == S) {
      out.push_back({cur, lp});
      return;
    }
    for (int d = 1; d <= std::min(D, S - pos); ++d) {
      if (!cut_ok[pos + d]) continue;
      std::span<const int> seg(seq.data() + pos, static_cast<std::size_t>(d));
      for (int z = 0; z < K; ++z) {
        if (z == prev) continue;
        const double entry = prev < 0 ? std::log(init(z)) : std::log(A(prev, z));
        const double e = s2st::emission_segment_logprob(p, z, seg);
        cur.push_back({z, d});
        rec(pos + d, z, lp + entry + std::log(1.0 / D) + e);
        cur.pop_back();
      }
    }
  };
  rec(0, -1, 0.0);
  return out;
}

inline double log_sum(const std::vector<Path>& paths) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : paths) m = std::max(m, p.log_joint);
  double s = 0.0;
  for (const auto& p : paths) s += std::exp(p.log_joint - m);
  return m + std::log(s);
}

// Argmax with the documented tie-break: lexicographic on
// (longer first duration, smaller first state, longer second duration, ...).
inline Path best_path(const std::vector<Path>& paths, double tol = 1e-9) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : paths) m = std::max(m, p.log_joint);
  const double t = tol * std::max(1.0, std::abs(m));
  const Path* best = nullptr;
  auto before = [](const Path& a, const Path& b) {
    const std::size_t n = std::min(a.segments.size(), b.segments.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (a.segments[i].duration != b.segments[i].duration)
        return a.segments[i].duration > b.segments[i].duration;
      if (a.segments[i].state != b.segments[i].state)
        return a.segments[i].state < b.segments[i].state;
    }
    return false;
  };
  for (const auto& p : paths) {
    if (p.log_joint < m - t) continue;
    if (!best || before(p, *best)) best = &p;
  }
  return *best;
}

// Central-difference gradient check over randomly chosen finite coordinates.
// Returns the worst relative error; denominators are floored at 1e-6.
// `fixed(name, index)` marks coordinates held constant by design.
struct GradCheck {
  double worst = 0.0;
  int checked = 0;
  std::string worst_name;
};

using FixedCoord = std::function<bool(const std::string&, Eigen::Index)>;

template <class Params, class Loss>
GradCheck check_gradient(Params& params, Params& grad, Loss&& loss, int n_coords,
                         std::uint64_t seed, double step = 1e-4, const FixedCoord& fixed = {}) {
  struct Coord {
    s2st::Matrix* p;
    s2st::Matrix* g;
    std::string name;
  };
  std::vector<Coord> mats;
  std::vector<s2st::Matrix*> grads;
  grad.visit_trainable([&](const std::string&, s2st::Matrix& m) { grads.push_back(&m); });
  std::size_t i = 0;
  params.visit_trainable([&](const std::string& name, s2st::Matrix& m) {
    mats.push_back({&m, grads[i++], name});
  });
  std::mt19937_64 rng(seed);
  GradCheck r;
  int attempts = 0;
  while (r.checked < n_coords && attempts < n_coords * 100) {
    ++attempts;
    const auto& c = mats[std::uniform_int_distribution<std::size_t>(0, mats.size() - 1)(rng)];
    if (c.p->size() == 0) continue;
    const Eigen::Index k =
        std::uniform_int_distribution<Eigen::Index>(0, c.p->size() - 1)(rng);
    double& x = c.p->data()[k];
    if (!std::isfinite(x) || (fixed && fixed(c.name, k))) continue;
    const double orig = x;
    x = orig + step;
    const double up = loss();
    x = orig - step;
    const double down = loss();
    x = orig;
    const double fd = (up - down) / (2 * step);
    const double an = c.g->data()[k];
    const double den = std::max({1e-6, std::abs(fd), std::abs(an)});
    const double rel = std::abs(fd - an) / den;
    if (rel > r.worst) {
      r.worst = rel;
      r.worst_name = c.name + "[" + std::to_string(k) + "]";
    }
    ++r.checked;
  }
  return r;
}

}  // namespace oracle
