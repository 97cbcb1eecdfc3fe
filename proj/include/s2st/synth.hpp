#pragma once

#include <vector>

#include "s2st/corpus.hpp"
#include "s2st/nhsmm.hpp"

namespace s2st {

struct SynthOptions {
  int K = 3;
  int D = 3;
  int words = 16;  // non-reserved tokens; V = words + kNumReserved
  int min_len = 4;
  int max_len = 12;
  double span_rate = 0.0;  // chance of protecting a true segment of length >= 2
};

// Ground-truth model in NHSMM form. Every state emits from its own block of
// words (update gate shut, so emissions depend on the state only); reserved
// ids get negligible mass. Transitions and the initial distribution are
// random but fixed by the seed.
HsmmParams synth_ground_truth(const SynthOptions& opts, Rng& rng);

struct SynthSentence {
  TokenSeq tokens;
  std::vector<SegmentEntry> segments;
  ProtectedSpans spans;
};

// Draws a length uniformly, then a segmentation with exactly that total
// length (by rejection) and its emissions.
SynthSentence sample_sentence(const HsmmParams& truth, const SynthOptions& opts, Rng& rng);

std::vector<std::string> synth_words(int n);  // "w0", "w1", ...
Vocab synth_vocab(int n);

// Internal boundary positions of a segmentation (cumulative ends before S).
std::vector<int> boundaries(const std::vector<SegmentEntry>& segments);

struct BoundaryCounts {
  long tp = 0, fp = 0, fn = 0;
  void add(const std::vector<int>& predicted, const std::vector<int>& truth);
  double f1() const;
};

// Segmentation with durations uniform on {1..D}, the last one truncated.
std::vector<SegmentEntry> random_segmentation(int length, int max_duration, Rng& rng);

}  // namespace s2st
