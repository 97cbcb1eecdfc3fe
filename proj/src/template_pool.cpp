#include "s2st/template_pool.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "s2st/error.hpp"
#include "s2st/log.hpp"

namespace s2st {

int Template::total_len() const {
  int n = 0;
  for (const auto& e : entries) n += e.duration;
  return n;
}

void check_template(const Template& tpl, int max_duration) {
  if (tpl.entries.empty()) throw InvalidConfig("template has no segments");
  for (std::size_t i = 0; i < tpl.entries.size(); ++i) {
    const auto& e = tpl.entries[i];
    if (e.duration < 1 || e.duration > max_duration) {
      throw InvalidConfig("template duration " + std::to_string(e.duration) + " outside 1.." +
                          std::to_string(max_duration));
    }
    if (i > 0 && tpl.entries[i - 1].state == e.state) {
      throw InvalidConfig("template repeats state " + std::to_string(e.state));
    }
  }
}

void TemplatePool::add(const StateChain& chain, long count) {
  if (chain.empty() || count < 1) throw InvalidConfig("pool chain must be non-empty");
  for (std::size_t i = 1; i < chain.size(); ++i) {
    if (chain[i] == chain[i - 1]) throw InvalidConfig("pool chain repeats a state");
  }
  for (std::size_t i = 0; i < chains_.size(); ++i) {
    if (chains_[i] == chain) {
      counts_[i] += count;
      total_ += count;
      return;
    }
  }
  chains_.push_back(chain);
  counts_.push_back(count);
  total_ += count;
}

long TemplatePool::count(const StateChain& chain) const {
  for (std::size_t i = 0; i < chains_.size(); ++i) {
    if (chains_[i] == chain) return counts_[i];
  }
  return 0;
}

std::size_t TemplatePool::sample_index(Rng& rng) const {
  if (empty()) throw EmptyPool("template pool is empty");
  long r = std::uniform_int_distribution<long>(0, total_ - 1)(rng);
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (r < counts_[i]) return i;
    r -= counts_[i];
  }
  return counts_.size() - 1;
}

TemplatePool build_pool(const HsmmParams& hsmm, const std::vector<UnpairedExample>& corpus,
                        const ConstraintOptions& opts) {
  if (corpus.empty()) throw EmptyCorpus("build_pool: empty corpus");
  TemplatePool pool;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    try {
      Segmentation seg = viterbi_segment(hsmm, corpus[i].text, corpus[i].spans, opts);
      StateChain chain;
      for (const auto& e : seg.segments) chain.push_back(e.state);
      pool.add(chain);
    } catch (const InfeasibleConstraints& e) {
      ++skipped;
      log_event({{"level", "warn"}, {"msg", "sentence skipped"}, {"index", i}, {"reason", e.what()}});
    }
  }
  if (pool.empty()) throw EmptyPool("every sentence was infeasible");
  log_event({{"phase", "pool"},
             {"sentences", corpus.size()},
             {"skipped", skipped},
             {"distinct_chains", pool.chains().size()}});
  return pool;
}

Template sample_template(const TemplatePool& pool, const HsmmParams& hsmm, Rng& rng) {
  const StateChain& chain = pool.chains()[pool.sample_index(rng)];
  std::uniform_int_distribution<int> dur(1, hsmm.dims.D);
  Template t;
  for (int z : chain) t.entries.push_back({z, dur(rng)});
  return t;
}

Template infer_template(const HsmmParams& hsmm, const TokenSeq& response,
                        const ProtectedSpans& spans, const ConstraintOptions& opts) {
  if (response.empty()) throw EmptySentence("infer_template: empty response");
  return Template{viterbi_segment(hsmm, response, spans, opts).segments};
}

void save_pool(const TemplatePool& pool, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < pool.chains().size(); ++i) {
    nlohmann::json j{{"chain", pool.chains()[i]}, {"count", pool.counts()[i]}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TemplatePool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  TemplatePool pool;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      pool.add(j.at("chain").get<StateChain>(), j.value("count", 1L));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const InvalidConfig& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (pool.empty()) throw EmptyPool("no chains in " + path.string());
  return pool;
}

}  // namespace s2st
