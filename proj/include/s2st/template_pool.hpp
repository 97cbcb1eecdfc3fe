#pragma once

#include <filesystem>
#include <vector>

#include "s2st/corpus.hpp"
#include "s2st/nhsmm.hpp"

namespace s2st {

// A latent template: states with durations. Adjacent states differ.
struct Template {
  std::vector<SegmentEntry> entries;

  int total_len() const;
  friend bool operator==(const Template&, const Template&) = default;
};

// Throws InvalidConfig when a template breaks the duration / adjacency rules.
void check_template(const Template& tpl, int max_duration);

using StateChain = std::vector<int>;

// Multiset of duration-free state chains, kept in first-occurrence order.
class TemplatePool {
 public:
  void add(const StateChain& chain, long count = 1);

  const std::vector<StateChain>& chains() const { return chains_; }
  const std::vector<long>& counts() const { return counts_; }
  long occurrences() const { return total_; }
  bool empty() const { return total_ == 0; }
  long count(const StateChain& chain) const;

  // Index of a chain drawn uniformly over occurrences.
  std::size_t sample_index(Rng& rng) const;

  friend bool operator==(const TemplatePool&, const TemplatePool&) = default;

 private:
  std::vector<StateChain> chains_;
  std::vector<long> counts_;
  long total_ = 0;
};

// One chain per sentence from its Viterbi segmentation. Sentences whose
// constraints are infeasible are skipped with a warning.
TemplatePool build_pool(const HsmmParams& hsmm, const std::vector<UnpairedExample>& corpus,
                        const ConstraintOptions& opts = {});

// Chain uniform over occurrences, each duration uniform on {1..D}.
Template sample_template(const TemplatePool& pool, const HsmmParams& hsmm, Rng& rng);

Template infer_template(const HsmmParams& hsmm, const TokenSeq& response,
                        const ProtectedSpans& spans = {}, const ConstraintOptions& opts = {});

// JSONL: {"chain":[...],"count":n} per line.
void save_pool(const TemplatePool& pool, const std::filesystem::path& path);
TemplatePool load_pool(const std::filesystem::path& path);

}  // namespace s2st
