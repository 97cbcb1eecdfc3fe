#include "s2st/synth.hpp"

#include <algorithm>

#include "s2st/error.hpp"

namespace s2st {

HsmmParams synth_ground_truth(const SynthOptions& o, Rng& rng) {
  if (o.words < o.K) throw InvalidConfig("synth needs at least one word per state");
  const int V = o.words + kNumReserved;
  HsmmParams p = HsmmParams::zeros({o.K, o.D, V, o.K, o.K, 2});
  p.state_embeddings = Matrix::Identity(o.K, o.K);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(2.0, 5.0);
  for (int i = 0; i < o.K; ++i) {
    for (int j = 0; j < o.K; ++j) {
      if (i != j) p.transition_bias(i, j) = u(rng);
    }
    p.init_logits(i, 0) = u(rng);
  }
  p.emission_cell.bz.setConstant(-20.0);  // h' = n
  p.emission_cell.wn.block(0, 0, o.K, o.K) = 3.0 * Matrix::Identity(o.K, o.K);
  p.gates.setOnes();
  p.out_weight.setConstant(-3.0);
  p.out_weight.topRows(kNumReserved).setConstant(-12.0);
  const int per = o.words / o.K;
  for (int z = 0; z < o.K; ++z) {
    const int lo = z * per;
    const int hi = z == o.K - 1 ? o.words : lo + per;
    for (int v = lo; v < hi; ++v) p.out_weight(kNumReserved + v, z) = w(rng);
  }
  return p;
}

SynthSentence sample_sentence(const HsmmParams& truth, const SynthOptions& o, Rng& rng) {
  const int S = std::uniform_int_distribution<int>(o.min_len, o.max_len)(rng);
  const Matrix A = transition_matrix(truth);
  const Vector init = initial_distribution(truth);
  std::uniform_int_distribution<int> dur(1, truth.dims.D);
  auto draw = [&](auto&& probs) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double r = unif(rng);
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
      r -= probs(k);
      if (r < 0) return static_cast<int>(k);
    }
    return static_cast<int>(probs.size() - 1);
  };
  SynthSentence s;
  for (;;) {
    s.segments.clear();
    int total = 0;
    int z = draw(init);
    while (total < S) {
      const int d = dur(rng);
      s.segments.push_back({z, d});
      total += d;
      Vector row = A.row(z).transpose();
      z = draw(row);
    }
    if (total == S) break;
  }
  for (const auto& seg : s.segments) {
    TokenSeq local;
    for (int j = 0; j < seg.duration; ++j) {
      Vector dist = emission_next_distribution(truth, seg.state, local);
      local.push_back(draw(dist));
    }
    s.tokens.insert(s.tokens.end(), local.begin(), local.end());
  }
  if (o.span_rate > 0) {
    std::bernoulli_distribution keep(o.span_rate);
    int pos = 0;
    for (const auto& seg : s.segments) {
      if (seg.duration >= 2 && keep(rng)) s.spans.push_back({pos, pos + seg.duration});
      pos += seg.duration;
    }
  }
  return s;
}

std::vector<std::string> synth_words(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("w" + std::to_string(i));
  return out;
}

Vocab synth_vocab(int n) { return Vocab::from_tokens(synth_words(n)); }

std::vector<int> boundaries(const std::vector<SegmentEntry>& segments) {
  std::vector<int> out;
  int pos = 0;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    pos += segments[i].duration;
    out.push_back(pos);
  }
  return out;
}

void BoundaryCounts::add(const std::vector<int>& predicted, const std::vector<int>& truth) {
  for (int b : predicted) {
    if (std::find(truth.begin(), truth.end(), b) != truth.end()) {
      ++tp;
    } else {
      ++fp;
    }
  }
  for (int b : truth) {
    if (std::find(predicted.begin(), predicted.end(), b) == predicted.end()) ++fn;
  }
}

double BoundaryCounts::f1() const {
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / denom;
}

std::vector<SegmentEntry> random_segmentation(int length, int max_duration, Rng& rng) {
  std::uniform_int_distribution<int> dur(1, max_duration);
  std::vector<SegmentEntry> out;
  int pos = 0;
  while (pos < length) {
    const int d = std::min(dur(rng), length - pos);
    out.push_back({0, d});
    pos += d;
  }
  return out;
}

}  // namespace s2st
