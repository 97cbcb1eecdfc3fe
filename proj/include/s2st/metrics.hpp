#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace s2st {

using Words = std::vector<std::string>;

class WordVectors {
 public:
  explicit WordVectors(int dim = 0) : dim_(dim) {}
  // One token per line followed by `dim` floats; an optional "count dim"
  // first line is skipped.
  static WordVectors load(const std::filesystem::path& path);

  void add(const std::string& token, const Eigen::VectorXd& v);
  bool contains(const std::string& token) const { return table_.count(token) > 0; }
  // The zero vector for unknown tokens.
  Eigen::VectorXd lookup(const std::string& token) const;
  int dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }

 private:
  int dim_;
  std::unordered_map<std::string, Eigen::VectorXd> table_;
};

double bleu1(const Words& hypothesis, const std::vector<Words>& references);
double rouge_l(const Words& hypothesis, const Words& reference);

struct EmbeddingScores {
  double average = 0.0;
  double extrema = 0.0;
  double greedy = 0.0;
};
// Unknown tokens are skipped. Throws MetricUndefined when a side has none left.
EmbeddingScores embedding_scores(const Words& hypothesis, const Words& reference, const WordVectors& vectors);

struct EvalReport {
  double bleu1 = 0.0;
  double rouge_l = 0.0;
  double average = 0.0;
  double extrema = 0.0;
  double greedy = 0.0;
  std::size_t n_examples = 0;
  std::size_t n_embedding = 0;  // pairs where embedding scores were defined

  nlohmann::json to_json() const;
};

// Corpus scores: arithmetic means of sentence scores. Embedding means are
// over the pairs where they are defined. Without vectors those fields stay 0.
EvalReport evaluate(const std::vector<Words>& hypotheses, const std::vector<Words>& references,
                    const WordVectors* vectors);

}  // namespace s2st
