#include "s2st/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "s2st/error.hpp"

namespace s2st {
namespace {

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

std::vector<Eigen::VectorXd> known_vectors(const Words& s, const WordVectors& wv) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& w : s) {
    if (wv.contains(w)) out.push_back(wv.lookup(w));
  }
  return out;
}

Eigen::VectorXd extrema_vector(const std::vector<Eigen::VectorXd>& vs) {
  Eigen::VectorXd mx = vs.front(), mn = vs.front();
  for (const auto& v : vs) {
    mx = mx.cwiseMax(v);
    mn = mn.cwiseMin(v);
  }
  Eigen::VectorXd out(mx.size());
  for (Eigen::Index i = 0; i < mx.size(); ++i) out(i) = mx(i) >= -mn(i) ? mx(i) : mn(i);
  return out;
}

double greedy_direction(const std::vector<Eigen::VectorXd>& from, const std::vector<Eigen::VectorXd>& to) {
  double total = 0.0;
  for (const auto& a : from) {
    double best = -1.0;
    for (const auto& b : to) best = std::max(best, cosine(a, b));
    total += best;
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

WordVectors WordVectors::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  int lineno = 0;
  WordVectors wv;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> vals;
    std::string field;
    while (ss >> field) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
      }
    }
    if (lineno == 1 && vals.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos) {
      continue;  // "count dim" header
    }
    if (vals.empty()) throw ParseError(path.string() + ":" + std::to_string(lineno) + ": no vector");
    if (wv.dim_ == 0) wv.dim_ = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != wv.dim_) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(wv.dim_) +
                       " values");
    }
    wv.table_[token] = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }
  return wv;
}

void WordVectors::add(const std::string& token, const Eigen::VectorXd& v) {
  if (dim_ == 0) dim_ = static_cast<int>(v.size());
  if (v.size() != dim_) throw InvalidConfig("word vector dimension mismatch");
  table_[token] = v;
}

Eigen::VectorXd WordVectors::lookup(const std::string& token) const {
  auto it = table_.find(token);
  return it == table_.end() ? Eigen::VectorXd::Zero(dim_) : it->second;
}

double bleu1(const Words& hyp, const std::vector<Words>& refs) {
  if (refs.empty()) throw InvalidConfig("bleu1 needs at least one reference");
  if (hyp.empty()) return 0.0;
  std::map<std::string, long> hyp_counts, max_ref;
  for (const auto& w : hyp) ++hyp_counts[w];
  for (const auto& r : refs) {
    std::map<std::string, long> c;
    for (const auto& w : r) ++c[w];
    for (const auto& [w, n] : c) max_ref[w] = std::max(max_ref[w], n);
  }
  long clipped = 0;
  for (const auto& [w, n] : hyp_counts) {
    auto it = max_ref.find(w);
    if (it != max_ref.end()) clipped += std::min(n, it->second);
  }
  const double c = static_cast<double>(hyp.size());
  // Closest reference length; ties go to the shorter one.
  double r = static_cast<double>(refs.front().size());
  for (const auto& ref : refs) {
    const double len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * static_cast<double>(clipped) / c;
}

double rouge_l(const Words& hyp, const Words& ref) {
  if (hyp.empty() || ref.empty()) return 0.0;
  std::vector<int> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      cur[j] = hyp[i - 1] == ref[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[ref.size()];
  if (lcs == 0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size()), r = lcs / static_cast<double>(ref.size());
  return 2 * p * r / (p + r);
}

EmbeddingScores embedding_scores(const Words& hyp, const Words& ref, const WordVectors& wv) {
  auto h = known_vectors(hyp, wv), r = known_vectors(ref, wv);
  if (h.empty() || r.empty()) throw MetricUndefined("no in-vocabulary tokens on one side");
  Eigen::VectorXd hs = Eigen::VectorXd::Zero(wv.dim()), rs = Eigen::VectorXd::Zero(wv.dim());
  for (const auto& v : h) hs += v;
  for (const auto& v : r) rs += v;
  EmbeddingScores s;
  s.average = cosine(hs / static_cast<double>(h.size()), rs / static_cast<double>(r.size()));
  s.extrema = cosine(extrema_vector(h), extrema_vector(r));
  s.greedy = 0.5 * (greedy_direction(h, r) + greedy_direction(r, h));
  return s;
}

nlohmann::json EvalReport::to_json() const {
  return {{"bleu1", bleu1},     {"rouge_l", rouge_l}, {"average", average},
          {"extrema", extrema}, {"greedy", greedy},   {"n_examples", n_examples},
          {"n_embedding", n_embedding}};
}

EvalReport evaluate(const std::vector<Words>& hyps, const std::vector<Words>& refs, const WordVectors* wv) {
  if (hyps.size() != refs.size()) throw InvalidConfig("hypothesis and reference counts differ");
  if (hyps.empty()) throw EmptyCorpus("nothing to evaluate");
  EvalReport rep;
  rep.n_examples = hyps.size();
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    rep.bleu1 += bleu1(hyps[i], {refs[i]});
    rep.rouge_l += rouge_l(hyps[i], refs[i]);
    if (!wv) continue;
    try {
      EmbeddingScores e = embedding_scores(hyps[i], refs[i], *wv);
      rep.average += e.average;
      rep.extrema += e.extrema;
      rep.greedy += e.greedy;
      ++rep.n_embedding;
    } catch (const MetricUndefined&) {
    }
  }
  const double n = static_cast<double>(rep.n_examples);
  rep.bleu1 /= n;
  rep.rouge_l /= n;
  if (rep.n_embedding) {
    const double m = static_cast<double>(rep.n_embedding);
    rep.average /= m;
    rep.extrema /= m;
    rep.greedy /= m;
  }
  return rep;
}

}  // namespace s2st
