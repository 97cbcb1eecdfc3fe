#include "s2st/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "s2st/error.hpp"
#include "s2st/log.hpp"
#include "s2st/metrics.hpp"
#include "s2st/pipeline.hpp"
#include "s2st/synth.hpp"

namespace s2st {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string ckpt;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool config, bool ckpt, bool out) {
  sub->add_option("--seed", c.seed, "random seed (overrides the config)");
  if (config) sub->add_option("--config", c.config, "run config (JSON)")->required();
  if (ckpt) sub->add_option("--ckpt", c.ckpt, "input checkpoint")->required();
  if (out) sub->add_option("--out", c.out, "output path")->required();
}

RunConfig run_config(const Common& c) {
  RunConfig r = RunConfig::load(c.config);
  if (c.seed) r.train.seed = *c.seed;
  return r;
}

// Later stages train with the run config, which must describe the same model.
void adopt_config(ModelBundle& b, const RunConfig& run) {
  const TrainConfig& a = b.config;
  const TrainConfig& n = run.train;
  if (a.K != n.K || a.D != n.D || a.d1 != n.d1 || a.d2 != n.d2 || a.d3 != n.d3) {
    throw InvalidConfig("config model dimensions differ from the checkpoint's");
  }
  b.config = n;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string render_segments(const TokenSeq& tokens, const std::vector<SegmentEntry>& segs, const Vocab& vocab) {
  std::string s;
  std::size_t pos = 0;
  for (const auto& seg : segs) {
    if (!s.empty()) s += ' ';
    s += '[';
    for (int k = 0; k < seg.duration; ++k, ++pos) {
      if (k) s += ' ';
      s += vocab.token(tokens[pos]);
    }
    s += "]_" + std::to_string(seg.state);
  }
  return s;
}

int cmd_synth(const Common& c, const SynthOptions& so, int n_unpaired, int n_pairs, std::ostream& out) {
  Rng rng(c.seed.value_or(1));
  const HsmmParams truth = synth_ground_truth(so, rng);
  const Vocab vocab = synth_vocab(so.words);
  const fs::path dir = c.out;
  fs::create_directories(dir);

  std::vector<RawUnpaired> unpaired;
  std::ofstream seg_out(dir / "truth_segments.txt");
  for (int i = 0; i < n_unpaired; ++i) {
    SynthSentence s = sample_sentence(truth, so, rng);
    unpaired.push_back({decode(s.tokens, vocab), s.spans});
    seg_out << render_segments(s.tokens, s.segments, vocab) << '\n';
  }
  // Copy task: the response repeats the message.
  std::vector<RawPaired> paired;
  for (int i = 0; i < n_pairs; ++i) {
    SynthSentence s = sample_sentence(truth, so, rng);
    const std::string text = decode(s.tokens, vocab);
    paired.push_back({text, text, s.spans});
  }
  write_unpaired(dir / "unpaired.jsonl", unpaired);
  write_paired(dir / "paired.jsonl", paired);

  ModelBundle b;
  b.config.seed = c.seed.value_or(1);
  b.config.K = so.K;
  b.config.D = so.D;
  b.config.d1 = b.config.d2 = so.K;
  b.config.d3 = 2;
  b.vocab = vocab;
  b.hsmm = truth;
  save_bundle(b, dir / "truth.ckpt");

  RunConfig run;
  run.train.seed = b.config.seed;
  run.unpaired = "unpaired.jsonl";
  run.paired = "paired.jsonl";
  std::ofstream(dir / "run.json") << run.to_json().dump(2) << '\n';
  out << "wrote " << n_unpaired << " sentences and " << n_pairs << " pairs to " << dir.string() << '\n';
  return 0;
}

// Data paths in a run config are relative to the config file.
RunConfig resolve_paths(RunConfig r, const std::string& config_path) {
  const fs::path base = fs::path(config_path).parent_path();
  if (!r.unpaired.empty() && r.unpaired.is_relative()) r.unpaired = base / r.unpaired;
  if (!r.paired.empty() && r.paired.is_relative()) r.paired = base / r.paired;
  return r;
}

int cmd_train_hsmm(const Common& c, std::ostream& out) {
  const RunConfig run = resolve_paths(run_config(c), c.config);
  const PipelineData data = load_data(run);
  save_bundle(stage_hsmm(run, data), c.out);
  out << "wrote " << c.out << '\n';
  return 0;
}

int cmd_segment(const Common& c, const std::string& input, std::ostream& out) {
  const ModelBundle b = load_bundle(c.ckpt);
  if (!b.hsmm) throw InvalidConfig("checkpoint has no template model");
  const ConstraintOptions opts{b.config.demote_long_spans};
  std::vector<RawUnpaired> rows;
  if (fs::path(input).extension() == ".jsonl") {
    rows = read_unpaired(input);
  } else {
    for (auto& line : read_lines(input)) rows.push_back({line, {}});
  }
  for (const auto& row : rows) {
    const TokenSeq tokens = encode(row.text, b.vocab);
    if (tokens.empty()) {
      out << '\n';
      continue;
    }
    const Segmentation seg = viterbi_segment(*b.hsmm, tokens, row.spans, opts);
    out << render_segments(tokens, seg.segments, b.vocab) << '\n';
  }
  return 0;
}

int cmd_build_pool(const Common& c, std::ostream& out) {
  const RunConfig run = resolve_paths(run_config(c), c.config);
  ModelBundle b = load_bundle(c.ckpt);
  adopt_config(b, run);
  stage_pool(b, load_data(run, b.vocab));
  save_bundle(b, c.out);
  out << "wrote " << c.out << " (" << b.pool->chains().size() << " chains)\n";
  return 0;
}

int cmd_pretrain(const Common& c, std::ostream& out) {
  const RunConfig run = resolve_paths(run_config(c), c.config);
  ModelBundle b = load_bundle(c.ckpt);
  adopt_config(b, run);
  stage_pretrain(b, load_data(run, b.vocab));
  save_bundle(b, c.out);
  out << "wrote " << c.out << '\n';
  return 0;
}

int cmd_adv_train(const Common& c, std::ostream& out) {
  const RunConfig run = resolve_paths(run_config(c), c.config);
  ModelBundle b = load_bundle(c.ckpt);
  adopt_config(b, run);
  const std::string base = c.out;
  stage_adversarial(b, load_data(run, b.vocab), [&](int epoch, const ModelBundle& snap) {
    save_bundle(snap, base + ".epoch" + std::to_string(epoch));
  });
  save_bundle(b, c.out);
  out << "wrote " << c.out << '\n';
  return 0;
}

int cmd_generate(const Common& c, const std::vector<std::string>& messages, const std::string& file,
                 std::ostream& out) {
  const ModelBundle b = load_bundle(c.ckpt);
  std::vector<std::string> all = messages;
  if (!file.empty()) {
    for (auto& line : read_lines(file)) all.push_back(line);
  }
  if (all.empty()) throw InvalidConfig("generate needs --message or --messages");
  Rng rng(c.seed.value_or(b.config.seed));
  for (const auto& m : all) out << decode(generate_response(b, encode(m, b.vocab), rng), b.vocab) << '\n';
  return 0;
}

int cmd_evaluate(const std::string& hyp, const std::string& ref, const std::string& vectors, std::ostream& out) {
  std::vector<Words> hyps, refs;
  for (auto& l : read_lines(hyp)) hyps.push_back(split_tokens(l));
  for (auto& l : read_lines(ref)) refs.push_back(split_tokens(l));
  std::optional<WordVectors> wv;
  if (!vectors.empty()) wv = WordVectors::load(vectors);
  out << evaluate(hyps, refs, wv ? &*wv : nullptr).to_json().dump() << '\n';
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"template-prior response generation"};
  app.name("s2st");
  app.require_subcommand(1);
  Common c;

  SynthOptions so;
  int n_unpaired = 2000, n_pairs = 500;
  auto* synth = app.add_subcommand("synth", "emit a synthetic corpus from a random ground-truth model");
  add_common(synth, c, false, false, true);
  synth->add_option("--sentences", n_unpaired, "unpaired sentences");
  synth->add_option("--pairs", n_pairs, "copy-task pairs");
  synth->add_option("--states", so.K);
  synth->add_option("--max-duration", so.D);
  synth->add_option("--words", so.words);
  synth->add_option("--min-len", so.min_len);
  synth->add_option("--max-len", so.max_len);
  synth->add_option("--span-rate", so.span_rate);

  auto* train_hsmm = app.add_subcommand("train-hsmm", "train the template model");
  add_common(train_hsmm, c, true, false, true);

  std::string input;
  auto* segment = app.add_subcommand("segment", "print Viterbi segmentations");
  add_common(segment, c, false, true, false);
  segment->add_option("--input", input, "sentences, one per line, or unpaired JSONL")->required();

  auto* build_pool_cmd = app.add_subcommand("build-pool", "collect the template pool");
  add_common(build_pool_cmd, c, true, true, true);
  auto* pretrain = app.add_subcommand("pretrain", "MLE-pretrain the generator and discriminator");
  add_common(pretrain, c, true, true, true);
  auto* adv = app.add_subcommand("adv-train", "adversarial training");
  add_common(adv, c, true, true, true);

  std::vector<std::string> messages;
  std::string messages_file;
  auto* generate = app.add_subcommand("generate", "generate responses");
  add_common(generate, c, false, true, false);
  generate->add_option("--message", messages, "message text (repeatable)");
  generate->add_option("--messages", messages_file, "file of messages, one per line");

  std::string hyp, ref, vectors;
  auto* eval = app.add_subcommand("evaluate", "score hypotheses against references");
  eval->add_option("--hyp", hyp)->required();
  eval->add_option("--ref", ref)->required();
  eval->add_option("--vectors", vectors, "word vectors for the embedding metrics");
  eval->add_option("--seed", c.seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(c, so, n_unpaired, n_pairs, out);
    if (*train_hsmm) return cmd_train_hsmm(c, out);
    if (*segment) return cmd_segment(c, input, out);
    if (*build_pool_cmd) return cmd_build_pool(c, out);
    if (*pretrain) return cmd_pretrain(c, out);
    if (*adv) return cmd_adv_train(c, out);
    if (*generate) return cmd_generate(c, messages, messages_file, out);
    if (*eval) return cmd_evaluate(hyp, ref, vectors, out);
  } catch (const InvalidConfig& e) {
    err << "config error: " << e.what() << '\n';
    log_event({{"phase", "error"}, {"kind", "config"}, {"message", e.what()}});
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    log_event({{"phase", "error"}, {"kind", "runtime"}, {"message", e.what()}});
    return 1;
  }
  return 2;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace s2st
