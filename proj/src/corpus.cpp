#include "s2st/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "s2st/error.hpp"

namespace s2st {
namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> r{"<pad>", "<unk>", "<bos>", "<seg>"};
  return r;
}

ProtectedSpans parse_spans(const nlohmann::json& j, std::size_t line) {
  ProtectedSpans spans;
  if (!j.is_array()) {
    throw ParseError("line " + std::to_string(line) + ": spans must be an array");
  }
  for (const auto& s : j) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() ||
        !s[1].is_number_integer()) {
      throw ParseError("line " + std::to_string(line) +
                       ": each span must be [int, int]");
    }
    spans.push_back({s[0].get<int>(), s[1].get<int>()});
  }
  return spans;
}

nlohmann::json spans_json(const ProtectedSpans& spans) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Span& s : spans) arr.push_back({s.begin, s.end});
  return arr;
}

std::string required_string(const nlohmann::json& obj, const char* key,
                            std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError("line " + std::to_string(line) + ": missing string field \"" +
                     key + "\"");
  }
  std::string v = it->get<std::string>();
  if (split_tokens(v).empty()) {
    throw ParseError("line " + std::to_string(line) + ": field \"" + key +
                     "\" is empty");
  }
  return v;
}

template <class Row, class F>
std::vector<Row> read_jsonl(const std::filesystem::path& path, F&& parse_row) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected a JSON object");
    }
    rows.push_back(parse_row(obj, lineno));
  }
  return rows;
}

void write_lines(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& objs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& o : objs) out << o.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

Vocab::Vocab() : tokens_(reserved_tokens()) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    lookup_.emplace(tokens_[i], static_cast<TokenId>(i));
  }
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  for (const std::string& t : tokens) {
    if (v.lookup_.count(t)) throw ParseError("duplicate vocabulary token: " + t);
    v.lookup_.emplace(t, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(t);
  }
  return v;
}

TokenId Vocab::id(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  return it == lookup_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const { return tokens_.at(id); }

bool Vocab::contains(std::string_view token) const {
  return lookup_.count(std::string(token)) > 0;
}

std::vector<std::string> Vocab::non_reserved() const {
  return {tokens_.begin() + kNumReserved, tokens_.end()};
}

std::vector<std::string> split_tokens(std::string_view sentence) {
  std::vector<std::string> out;
  std::istringstream in{std::string(sentence)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

Vocab build_vocab(const std::vector<std::string>& texts, int max_size) {
  if (texts.empty()) throw EmptyCorpus("build_vocab: no sentences");
  if (max_size < 1) throw InvalidConfig("build_vocab: max_size must be >= 1");
  struct Entry {
    std::string token;
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::unordered_map<std::string, std::size_t> index;
  std::vector<Entry> entries;
  for (const std::string& text : texts) {
    for (std::string& tok : split_tokens(text)) {
      auto [it, inserted] = index.emplace(tok, entries.size());
      if (inserted) entries.push_back({std::move(tok), 0, entries.size()});
      ++entries[it->second].count;
    }
  }
  if (entries.empty()) throw EmptyCorpus("build_vocab: corpus has no tokens");
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.count > b.count;
  });
  if (entries.size() > static_cast<std::size_t>(max_size)) entries.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(entries.size());
  for (auto& e : entries) tokens.push_back(std::move(e.token));
  return Vocab::from_tokens(tokens);
}

TokenSeq encode(std::string_view sentence, const Vocab& vocab) {
  auto toks = split_tokens(sentence);
  if (toks.empty()) throw EmptySentence("encode: empty sentence");
  TokenSeq ids;
  ids.reserve(toks.size());
  for (const auto& t : toks) ids.push_back(vocab.id(t));
  return ids;
}

std::string decode(const TokenSeq& ids, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

void validate_spans(const ProtectedSpans& spans, int length) {
  int prev_end = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Span& s = spans[i];
    if (s.begin < 0 || s.end > length || s.end - s.begin < 1) {
      throw ParseError("span [" + std::to_string(s.begin) + "," +
                       std::to_string(s.end) + ") out of bounds for length " +
                       std::to_string(length));
    }
    if (i > 0 && s.begin < prev_end) {
      throw ParseError("spans overlap or are unsorted at index " + std::to_string(i));
    }
    prev_end = s.end;
  }
}

std::vector<RawPaired> read_paired(const std::filesystem::path& path) {
  return read_jsonl<RawPaired>(path, [](const nlohmann::json& obj, std::size_t line) {
    RawPaired row;
    row.message = required_string(obj, "message", line);
    row.response = required_string(obj, "response", line);
    if (auto it = obj.find("response_spans"); it != obj.end()) {
      row.response_spans = parse_spans(*it, line);
    }
    try {
      validate_spans(row.response_spans,
                     static_cast<int>(split_tokens(row.response).size()));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line) + ": " + e.what());
    }
    return row;
  });
}

std::vector<RawUnpaired> read_unpaired(const std::filesystem::path& path) {
  return read_jsonl<RawUnpaired>(path, [](const nlohmann::json& obj, std::size_t line) {
    RawUnpaired row;
    row.text = required_string(obj, "text", line);
    if (auto it = obj.find("spans"); it != obj.end()) row.spans = parse_spans(*it, line);
    try {
      validate_spans(row.spans, static_cast<int>(split_tokens(row.text).size()));
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line) + ": " + e.what());
    }
    return row;
  });
}

void write_paired(const std::filesystem::path& path, const std::vector<RawPaired>& rows) {
  std::vector<nlohmann::json> objs;
  for (const auto& r : rows) {
    nlohmann::json o{{"message", r.message}, {"response", r.response}};
    if (!r.response_spans.empty()) o["response_spans"] = spans_json(r.response_spans);
    objs.push_back(std::move(o));
  }
  write_lines(path, objs);
}

void write_unpaired(const std::filesystem::path& path,
                    const std::vector<RawUnpaired>& rows) {
  std::vector<nlohmann::json> objs;
  for (const auto& r : rows) {
    nlohmann::json o{{"text", r.text}};
    if (!r.spans.empty()) o["spans"] = spans_json(r.spans);
    objs.push_back(std::move(o));
  }
  write_lines(path, objs);
}

std::vector<PairedExample> encode_paired(const std::vector<RawPaired>& rows,
                                         const Vocab& vocab) {
  std::vector<PairedExample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({encode(r.message, vocab), encode(r.response, vocab), r.response_spans});
  }
  return out;
}

std::vector<UnpairedExample> encode_unpaired(const std::vector<RawUnpaired>& rows,
                                             const Vocab& vocab) {
  std::vector<UnpairedExample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back({encode(r.text, vocab), r.spans});
  return out;
}

std::vector<PairedExample> load_paired(const std::filesystem::path& path,
                                       const Vocab& vocab) {
  return encode_paired(read_paired(path), vocab);
}

std::vector<UnpairedExample> load_unpaired(const std::filesystem::path& path,
                                           const Vocab& vocab) {
  return encode_unpaired(read_unpaired(path), vocab);
}

void save_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : vocab.non_reserved()) out << t << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return Vocab::from_tokens(tokens);
}

}  // namespace s2st
