#pragma once

#include "s2st/log.hpp"
#include "s2st/nhsmm.hpp"

namespace fixture {

// State 0 emits token 0, state 1 emits token 1, both with probability ~1.
inline s2st::HsmmParams two_emitter_model() {
  using s2st::Matrix;
  s2st::HsmmParams p = s2st::HsmmParams::zeros({2, 2, 2, 2, 2, 2});
  p.state_embeddings = Matrix::Identity(2, 2);
  p.emission_cell.wn.block(0, 0, 2, 2) = 5.0 * Matrix::Identity(2, 2);
  p.gates.setOnes();
  p.out_weight << 40, -40, -40, 40;
  return p;
}

// Silences NDJSON logging for the lifetime of the object.
struct QuietLogs {
  QuietLogs() : prev(s2st::set_log_sink([](const nlohmann::json&) {})) {}
  ~QuietLogs() { s2st::set_log_sink(std::move(prev)); }
  s2st::LogSink prev;
};

// Pearson statistic of observed counts against expected probabilities.
template <class Counts, class Probs>
double chi_square(const Counts& observed, const Probs& probs, double n) {
  double stat = 0.0;
  for (std::size_t i = 0; i < std::size(observed); ++i) {
    const double e = n * probs[i];
    stat += (observed[i] - e) * (observed[i] - e) / e;
  }
  return stat;
}

}  // namespace fixture
