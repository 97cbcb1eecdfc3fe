// Acceptance harness: one PASS/FAIL line per criterion. Pass criterion
// numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <unistd.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "s2st/config.hpp"
#include "s2st/discriminator.hpp"
#include "s2st/error.hpp"
#include "s2st/generator.hpp"
#include "s2st/metrics.hpp"
#include "s2st/nhsmm.hpp"
#include "s2st/persistence.hpp"
#include "s2st/pipeline.hpp"
#include "s2st/synth.hpp"
#include "s2st/template_pool.hpp"
#include "s2st/trainer.hpp"

using namespace s2st;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

TokenSeq random_seq(int S, int V, std::mt19937_64& rng) {
  TokenSeq s(S);
  for (auto& t : s) t = std::uniform_int_distribution<int>(0, V - 1)(rng);
  return s;
}

HsmmParams random_hsmm(int K, int D, int V, std::mt19937_64& rng, double scale = 1.0) {
  Rng r(rng());
  HsmmParams p = HsmmParams::random({K, D, V, 3, 4, 3}, r, scale);
  fill_uniform(p.init_logits, r, scale);
  return p;
}

// Non-overlapping spans of length >= 2, some possibly longer than D.
ProtectedSpans random_spans(int S, std::mt19937_64& rng) {
  ProtectedSpans spans;
  int pos = 0;
  while (pos < S - 1) {
    if (std::bernoulli_distribution(0.5)(rng)) {
      const int len = std::uniform_int_distribution<int>(2, std::min(4, S - pos))(rng);
      spans.push_back({pos, pos + len});
      pos += len;
    } else {
      ++pos;
    }
  }
  return spans;
}

// 1. Marginal and Viterbi against brute-force enumeration.
void dp_oracle(Outcome& o) {
  std::mt19937_64 rng(101);
  int matched = 0, viterbi_ok = 0;
  double worst = 0.0;
  const int draws = 200;
  for (int i = 0; i < draws; ++i) {
    // K = 1 is not a valid model: self-transitions are disabled.
    const int K = std::uniform_int_distribution<int>(2, 3)(rng);
    const int D = std::uniform_int_distribution<int>(1, 3)(rng);
    const int V = std::uniform_int_distribution<int>(1, 3)(rng);
    const int S = std::uniform_int_distribution<int>(1, 6)(rng);
    const HsmmParams p = random_hsmm(K, D, V, rng);
    const TokenSeq seq = random_seq(S, V, rng);
    const auto paths = oracle::enumerate_paths(p, seq);
    const double dp = backward_marginal_loglik(p, seq);
    const double err = std::abs(dp - oracle::log_sum(paths));
    worst = std::max(worst, err);
    if (err < 1e-8) ++matched;
    if (viterbi_segment(p, seq).segments == oracle::best_path(paths).segments) ++viterbi_ok;
  }
  o.detail << draws << " draws, marginal matches " << matched
           << ", worst |log err| " << worst << ", Viterbi matches " << viterbi_ok << ". ";
  o.require(matched == draws, "marginal within 1e-8 on every draw");
  o.require(viterbi_ok == draws, "Viterbi equals the enumerated argmax on every draw");
}

// 2. Spans are never cut; the uniform K=2, D=2, V=2 constants.
void constraints(Outcome& o) {
  std::mt19937_64 rng(202);
  int cut_inside = 0, dp_mismatch = 0, viterbi_bad = 0, checked_paths = 0;
  const int draws = 200;
  for (int i = 0; i < draws; ++i) {
    const int K = std::uniform_int_distribution<int>(2, 3)(rng);
    const int D = std::uniform_int_distribution<int>(1, 3)(rng);
    const int V = std::uniform_int_distribution<int>(1, 3)(rng);
    const int S = std::uniform_int_distribution<int>(2, 6)(rng);
    const HsmmParams p = random_hsmm(K, D, V, rng);
    const TokenSeq seq = random_seq(S, V, rng);
    const ProtectedSpans spans = random_spans(S, rng);
    fixture::QuietLogs quiet;  // demotion warnings
    auto inside = [&](const std::vector<SegmentEntry>& segs) {
      int pos = 0;
      for (const auto& s : segs) {
        pos += s.duration;
        for (const auto& sp : spans) {
          if (sp.end - sp.begin <= D && sp.begin < pos && pos < sp.end) return true;
        }
      }
      return false;
    };
    const auto paths = oracle::enumerate_paths(p, seq, spans);
    for (const auto& path : paths) {
      ++checked_paths;
      if (std::isfinite(path.log_joint) && inside(path.segments)) ++cut_inside;
    }
    const double dp = backward_marginal_loglik(p, seq, spans);
    if (paths.empty()) {
      if (!(std::isinf(dp) && dp < 0)) ++dp_mismatch;
      continue;
    }
    if (std::abs(dp - oracle::log_sum(paths)) >= 1e-8) ++dp_mismatch;
    const Segmentation v = viterbi_segment(p, seq, spans);
    if (inside(v.segments) || v.segments != oracle::best_path(paths).segments) ++viterbi_bad;
  }
  o.detail << draws << " draws, " << checked_paths << " paths: " << cut_inside << " cut inside a span, "
           << dp_mismatch << " marginal mismatches, " << viterbi_bad << " bad Viterbi paths. ";
  o.require(cut_inside == 0, "no nonzero-mass path cuts a span");
  o.require(dp_mismatch == 0, "constrained marginal equals constrained enumeration");
  o.require(viterbi_bad == 0, "constrained Viterbi");

  const HsmmParams u = HsmmParams::zeros({2, 2, 2, 3, 3, 3});
  const double a = std::exp(backward_marginal_loglik(u, {0}));
  const double b = std::exp(backward_marginal_loglik(u, {0, 1}));
  const double c = std::exp(backward_marginal_loglik(u, {0, 1}, {{0, 2}}));
  o.detail << std::setprecision(17) << "constants " << a << " / " << b << " / " << c << ". " << std::setprecision(6);
  o.require(std::abs(a - 0.25) < 1e-12, "P(S=1) = 0.25");
  o.require(std::abs(b - 0.1875) < 1e-12, "P(S=2) = 0.1875");
  o.require(std::abs(c - 0.125) < 1e-12, "P(S=2, protected) = 0.125");
}

// 3. Finite-difference gradient suites.
void gradients(Outcome& o) {
  const int coords = 60;
  std::mt19937_64 rng(303);
  {
    HsmmParams p = random_hsmm(3, 3, 5, rng, 0.5);
    const std::vector<UnpairedExample> batch{{{1, 4, 2, 0, 3}, {{1, 3}}}, {{2, 2, 1}, {}}, {{0, 3, 3, 4}, {}}};
    NllGradient g = nll_gradient(p, batch);
    auto r = oracle::check_gradient(p, g.grad, [&] { return nll_gradient(p, batch).loss; }, coords, 1);
    o.detail << "nhsmm " << r.checked << " coords worst " << r.worst << "; ";
    o.require(r.checked >= 50 && r.worst < 1e-4, "NHSMM NLL gradient (" + r.worst_name + ")");
  }
  {
    Rng r0(rng());
    const HsmmParams h = HsmmParams::random({3, 3, 7, 4, 5, 4}, r0, 0.5);
    GeneratorParams p = GeneratorParams::from_hsmm(h, r0, 0.5);
    const Template tpl{{{2, 2}, {0, 1}, {1, 2}}};
    const std::vector<WeightedSequence> batch{{{1, 5, 2}, tpl, {4, 4, 6, 2, 5}, {1, 1, 1, 1, 1}},
                                              {{3, 3}, Template{{{1, 1}, {2, 2}}}, {6, 0, 1}, {1, 1, 1}}};
    GeneratorGradient g = weighted_logprob_gradient(p, batch);
    auto loss = [&] {
      double s = 0.0;
      for (const auto& b : batch) s += sequence_logprob(p, b.message, b.tpl, b.response);
      return s;
    };
    auto r = oracle::check_gradient(p, g.grad, loss, coords, 2);
    o.detail << "generator " << r.checked << " coords worst " << r.worst << "; ";
    o.require(r.checked >= 50 && r.worst < 1e-4, "generator sequence_logprob gradient (" + r.worst_name + ")");
  }
  {
    Rng r0(rng());
    DiscriminatorParams d = DiscriminatorParams::random({9, 4, {1, 2, 3}, 3, 5}, r0, 0.5);
    const std::vector<DiscTriple> batch{{{4, 5, 6}, {7, 8}, {5, 5, 5, 4}}, {{8}, {6, 7, 8, 4}, {1}}};
    DiscGradient g = disc_loss_gradient(d, batch);
    // The PAD row is held at zero.
    auto pad = [&](const std::string& name, Eigen::Index k) {
      return name == "embeddings" && k % d.embeddings.rows() == kPad;
    };
    auto r = oracle::check_gradient(d, g.grad, [&] { return disc_loss(d, batch); }, coords, 3, 1e-4, pad);
    o.detail << "discriminator " << r.checked << " coords worst " << r.worst << ". ";
    o.require(r.checked >= 50 && r.worst < 1e-4, "discriminator loss gradient (" + r.worst_name + ")");
  }
}

// 4. Recovering a known HSMM from its samples.
void recovery(Outcome& o) {
  fixture::QuietLogs quiet;
  SynthOptions so;  // K = 3, D = 3, 16 words, V = 20
  Rng rng(404);
  const HsmmParams truth = synth_ground_truth(so, rng);
  auto draw = [&](int n, std::vector<SynthSentence>* keep) {
    std::vector<UnpairedExample> out;
    for (int i = 0; i < n; ++i) {
      SynthSentence s = sample_sentence(truth, so, rng);
      out.push_back({s.tokens, s.spans});
      if (keep) keep->push_back(std::move(s));
    }
    return out;
  };
  const auto train = draw(2000, nullptr);
  std::vector<SynthSentence> held_truth;
  const auto held = draw(500, &held_truth);

  TrainConfig cfg;
  cfg.seed = 4;
  cfg.K = so.K;
  cfg.D = so.D;
  cfg.d1 = cfg.d2 = cfg.d3 = 16;
  cfg.hsmm_lr = 1e-2;  // 1e-3 stalls at this data size
  cfg.hsmm_max_epochs = 30;
  cfg.patience = 3;
  cfg.rel_tol = 1e-4;
  const HsmmParams learned = train_nhsmm(train, cfg, truth.dims.V);

  const double nll_truth = corpus_likelihood(truth, held).mean_nll();
  const double nll_model = corpus_likelihood(learned, held).mean_nll();
  const double rel = (nll_model - nll_truth) / nll_truth;

  BoundaryCounts model_bc, random_bc;
  Rng seg_rng(405);
  for (std::size_t i = 0; i < held.size(); ++i) {
    const auto gold = boundaries(held_truth[i].segments);
    model_bc.add(boundaries(viterbi_segment(learned, held[i].text, held[i].spans).segments), gold);
    random_bc.add(boundaries(random_segmentation(static_cast<int>(held[i].text.size()), so.D, seg_rng)), gold);
  }
  o.detail << "held-out mean NLL " << nll_model << " vs truth " << nll_truth << " (" << 100 * rel
           << "%), boundary F1 " << model_bc.f1() << " vs random " << random_bc.f1() << ". ";
  o.require(std::abs(rel) <= 0.05, "NLL within 5% of the generating model");
  o.require(model_bc.f1() > random_bc.f1(), "boundary F1 above the random baseline");
}

// Checks every step distribution and attention vector of beam decoding.
struct Normalization {
  double worst_dist = 0.0, worst_att = 0.0;
  long steps = 0;
  void check(const GeneratorParams& g, const TokenSeq& msg, const Template& tpl, const TokenSeq& resp) {
    const Matrix H = encode_message(g, msg);
    Vector s = initial_decoder_state(H), o = Vector::Zero(g.dims.d2);
    for (int t = 0; t < static_cast<int>(resp.size()); ++t) {
      const StepOutput out = decode_step(g, s, template_position(tpl, t), tpl, t ? resp[t - 1] : -1, o, H);
      const Attention a = attention_context(g, out.s, H);
      worst_dist = std::max(worst_dist, std::abs(out.distribution.sum() - 1.0));
      worst_att = std::max(worst_att, std::abs(a.weights.sum() - 1.0));
      if (out.distribution.minCoeff() < 0 || a.weights.minCoeff() < 0) worst_dist = 1.0;
      s = out.s;
      o = out.o;
      ++steps;
    }
  }
};

struct Frozen {
  Matrix state, word, bos;
  explicit Frozen(const GeneratorParams& g) : state(g.state_embeddings), word(g.word_embeddings), bos(g.bos_embedding) {}
  bool same(const GeneratorParams& g) const {
    return same_bits(state, g.state_embeddings) && same_bits(word, g.word_embeddings) && same_bits(bos, g.bos_embedding);
  }
};

// 5. Desk-scale pipeline smoke test.
void smoke(Outcome& o) {
  fixture::QuietLogs quiet;
  SynthOptions so;
  Rng rng(505);
  const HsmmParams truth = synth_ground_truth(so, rng);
  PipelineData data;
  data.vocab = synth_vocab(so.words);
  for (int i = 0; i < 2000; ++i) {
    SynthSentence s = sample_sentence(truth, so, rng);
    data.unpaired.push_back({s.tokens, s.spans});
  }
  for (int i = 0; i < 500; ++i) {
    SynthSentence s = sample_sentence(truth, so, rng);
    data.paired.push_back({s.tokens, s.tokens, s.spans});
  }
  RunConfig run;
  // Desk-scale defaults (K = 10, D = 4, dims 64) except where noted.
  TrainConfig& cfg = run.train;
  cfg.seed = 5;
  cfg.gen_lr = 1e-3;  // 1e-5 barely moves in a desk-sized epoch budget
  cfg.top_k = 20;     // must not exceed V

  auto t0 = std::chrono::steady_clock::now();
  ModelBundle b = stage_hsmm(run, data);
  const double t_hsmm = seconds_since(t0);
  stage_pool(b, data);
  // Generator at initialization, as stage_pretrain builds it.
  stage_pretrain(b, data);
  const double t_pre = seconds_since(t0);
  const auto& rep = b.extras["pretrain"];
  const double best = rep["best_val_ppl"].get<double>(), uni = rep["unigram_val_ppl"].get<double>();
  o.detail << "val ppl " << rep["initial_val_ppl"].get<double>() << " -> " << best << " (unigram " << uni << "); ";
  o.require(best < uni, "pretrained perplexity below unigram");

  Rng init = stage_rng(cfg.seed, 31);
  const Frozen frozen(GeneratorParams::from_hsmm(*b.hsmm, init, cfg.init_scale));
  bool frozen_ok = frozen.same(*b.generator);
  const HsmmParams hsmm_before = *b.hsmm;
  int epochs = 0;
  stage_adversarial(b, data, [&](int, const ModelBundle& snap) {
    ++epochs;
    frozen_ok = frozen_ok && frozen.same(*snap.generator);
  });
  frozen_ok = frozen_ok && frozen.same(*b.generator);
  bool hsmm_same = true;
  {
    std::vector<const Matrix*> x, y;
    HsmmParams a = hsmm_before, c = *b.hsmm;
    a.visit([&](const std::string&, Matrix& m) { x.push_back(&m); });
    c.visit([&](const std::string&, Matrix& m) { y.push_back(&m); });
    for (std::size_t i = 0; i < x.size(); ++i) hsmm_same = hsmm_same && same_bits(*x[i], *y[i]);
  }
  o.detail << epochs << " adversarial epochs; ";
  o.require(epochs == 5, "5 adversarial epochs");
  o.require(frozen_ok && hsmm_same, "frozen embeddings bit-identical");

  // Held-out messages from the same source.
  Normalization norm;
  double human = 0.0, generated = 0.0;
  const int n_eval = 100;
  Rng gen_rng(506);
  for (int i = 0; i < n_eval; ++i) {
    SynthSentence s = sample_sentence(truth, so, rng);
    const Template tpl = sample_template(*b.pool, *b.hsmm, gen_rng);
    const TokenSeq y = generate_beam(*b.generator, s.tokens, tpl, cfg.beam_width).tokens;
    norm.check(*b.generator, s.tokens, tpl, y);
    norm.check(*b.generator, s.tokens, infer_template(*b.hsmm, s.tokens, s.spans), s.tokens);
    human += score(*b.discriminator, s.tokens, s.tokens);
    generated += score(*b.discriminator, s.tokens, y);
  }
  human /= n_eval;
  generated /= n_eval;
  o.detail << norm.steps << " decode steps, worst |sum-1| dist " << norm.worst_dist << " att " << norm.worst_att
           << "; mean D human " << human << " generated " << generated << "; stage times hsmm " << t_hsmm
           << " s, to end of pretraining " << t_pre << " s. ";
  o.require(norm.worst_dist <= 1e-6 && norm.worst_att <= 1e-6, "normalized distributions and attention");
  o.require(human > generated, "mean D(human) > mean D(generated)");
}

// 6. REINFORCE identities.
void reinforce(Outcome& o) {
  Rng r0(606);
  const HsmmParams h = HsmmParams::random({3, 3, 8, 4, 6, 4}, r0, 0.5);
  GeneratorParams gen = GeneratorParams::from_hsmm(h, r0, 0.5);
  const Template tpl{{{2, 2}, {0, 1}, {1, 2}}};
  const TokenSeq msg{4, 6, 5, 7};
  const TokenSeq resp = generate_beam(gen, msg, tpl, 3).tokens;

  GeneratorGradient zero = reward_weighted_gradient(gen, msg, tpl, resp, std::vector<double>(resp.size(), 0.0));
  bool all_zero = true;
  zero.grad.visit([&](const std::string&, Matrix& m) { all_zero = all_zero && m.isZero(0); });
  o.require(all_zero, "zero reward gives exactly zero gradient");

  GeneratorGradient unit = reward_weighted_gradient(gen, msg, tpl, resp, std::vector<double>(resp.size(), 1.0));
  const WeightedSequence ws{msg, tpl, resp, std::vector<double>(resp.size(), 1.0)};
  GeneratorGradient tf = weighted_logprob_gradient(gen, std::span(&ws, 1));
  std::vector<const Matrix*> a, b;
  unit.grad.visit_trainable([&](const std::string&, Matrix& m) { a.push_back(&m); });
  tf.grad.visit_trainable([&](const std::string&, Matrix& m) { b.push_back(&m); });
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, (*a[i] - *b[i]).cwiseAbs().maxCoeff());
    norm = std::max(norm, b[i]->cwiseAbs().maxCoeff());
  }
  o.detail << "zero-reward gradient all zero: " << (all_zero ? "yes" : "no") << "; unit reward vs teacher forcing max diff "
           << diff << " (gradient max " << norm << "). ";
  o.require(diff <= 1e-9, "unit reward equals the teacher-forced gradient");
}

// 7. Metric golden values.
void metric_values(Outcome& o) {
  auto w = [](const char* s) { return split_tokens(s); };
  const double id = bleu1(w("a b c"), {w("a b c")});
  const double b = bleu1(w("a b c"), {w("a b d")});
  const double r = rouge_l(w("a b c"), w("a c"));
  WordVectors vec(3);
  vec.add("x", Eigen::Vector3d(1, 0, 0));
  vec.add("y", Eigen::Vector3d(0, 1, 0));
  vec.add("z", Eigen::Vector3d(0.3, -2, 5));
  const EmbeddingScores same = embedding_scores(w("x y z"), w("x y z"), vec);
  const EmbeddingScores orth = embedding_scores(w("x"), w("y"), vec);
  o.detail << "bleu1 " << id << ", " << b << "; rouge-L " << r << "; embedding identity " << same.average << "/"
           << same.extrema << "/" << same.greedy << ", orthogonal " << orth.average << "/" << orth.extrema << "/"
           << orth.greedy << ". ";
  o.require(std::abs(id - 1.0) < 1e-12, "BLEU-1 identity");
  o.require(std::abs(b - 0.6667) <= 1e-4, "BLEU-1 = 0.6667");
  o.require(std::abs(r - 0.8) <= 1e-6, "ROUGE-L = 0.8");
  for (double v : {same.average, same.extrema, same.greedy}) o.require(std::abs(v - 1.0) < 1e-12, "embedding identity");
  for (double v : {orth.average, orth.extrema, orth.greedy}) o.require(std::abs(v) < 1e-12, "orthogonal tokens");
}

// 8. Full-scale configuration round trip.
void config_fidelity(Outcome& o) {
  const TrainConfig c = TrainConfig::paper_scale();
  const TrainConfig back = TrainConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  o.require(back == c, "JSON round trip");
  o.require(c.K == 50 && c.D == 4, "K = 50, D = 4");
  o.require(c.d1 == 600 && c.d2 == 300 && c.d3 == 300, "d1 = 600, d2 = d3 = 300");
  o.require(c.disc_windows == std::vector<int>{1, 2, 3} && c.disc_filters == 128, "filters {1,2,3} x 128");
  o.require(c.rollouts == 5, "N = 5");
  o.require(c.top_k == 50, "top-k 50");
  o.require(c.hsmm_lr == 1e-3 && c.gen_lr == 1e-5 && c.disc_lr == 1e-3, "learning rates 1e-3/1e-5/1e-3");
  o.require(c.vocab_size == 20000, "vocab 20000");
  c.validate();
  o.detail << c.to_json().dump() << ". ";
}

// 9. Determinism and persistence.
void determinism(Outcome& o) {
  fixture::QuietLogs quiet;
  SynthOptions so;
  Rng rng(909);
  const HsmmParams truth = synth_ground_truth(so, rng);
  PipelineData data;
  data.vocab = synth_vocab(so.words);
  for (int i = 0; i < 120; ++i) {
    SynthSentence s = sample_sentence(truth, so, rng);
    data.unpaired.push_back({s.tokens, s.spans});
    if (i < 40) data.paired.push_back({s.tokens, s.tokens, s.spans});
  }
  RunConfig run;
  TrainConfig& cfg = run.train;
  cfg.seed = 9;
  cfg.K = 4;
  cfg.D = 3;
  cfg.d1 = cfg.d2 = cfg.d3 = 8;
  cfg.hsmm_max_epochs = 2;
  cfg.gen_max_epochs = 2;
  cfg.gen_lr = 1e-3;
  cfg.disc_filters = cfg.disc_hidden = 4;
  cfg.adv_epochs = 2;
  cfg.adv_iters_per_epoch = 2;
  cfg.d_steps = 1;
  cfg.rollouts = 2;
  cfg.top_k = 5;
  cfg.beam_width = 2;

  const auto dir = std::filesystem::temp_directory_path() / ("s2st_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  save_bundle(run_pipeline(run, data), dir / "a.ckpt");
  save_bundle(run_pipeline(run, data), dir / "b.ckpt");
  const bool same_ckpt = bytes(dir / "a.ckpt") == bytes(dir / "b.ckpt");

  const ModelBundle a = load_bundle(dir / "a.ckpt");
  save_bundle(a, dir / "c.ckpt");
  const bool resave = bytes(dir / "a.ckpt") == bytes(dir / "c.ckpt");
  const ModelBundle fresh = run_pipeline(run, data);
  int same_gen = 0;
  const int n = 20;
  Rng g1(1), g2(1);
  for (int i = 0; i < n; ++i) {
    const TokenSeq& msg = data.paired[static_cast<std::size_t>(i)].message;
    same_gen += generate_response(fresh, msg, g1) == generate_response(a, msg, g2);
  }
  const std::size_t size = bytes(dir / "a.ckpt").size();
  std::filesystem::remove_all(dir);
  o.detail << "checkpoint bytes " << size << "; two runs identical: " << (same_ckpt ? "yes" : "no")
           << ", load+save identical: " << (resave ? "yes" : "no") << ", generations identical " << same_gen << "/" << n
           << ". ";
  o.require(same_ckpt, "two pipeline runs give identical checkpoints");
  o.require(resave, "checkpoint round trip");
  o.require(same_gen == n, "round-tripped bundle generates identically");
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 = no runtime bound
  std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "DP-oracle equivalence", 60, dp_oracle},
      {2, "constraint correctness", 0, constraints},
      {3, "gradient suites", 120, gradients},
      {4, "synthetic recovery", 600, recovery},
      {5, "pipeline smoke test", 900, smoke},
      {6, "REINFORCE identities", 0, reinforce},
      {7, "metric golden values", 0, metric_values},
      {8, "configuration fidelity", 0, config_fidelity},
      {9, "determinism and persistence", 0, determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  bool ok = true;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "] ";
    }
    const double t = seconds_since(t0);
    if (c.limit_s > 0 && t >= c.limit_s) {
      o.pass = false;
      o.detail << "[failed: runtime over " << c.limit_s << " s] ";
    }
    ok = ok && o.pass;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " in " << std::fixed
              << std::setprecision(1) << t << " s. " << std::defaultfloat << std::setprecision(6) << o.detail.str()
              << std::endl;
  }
  return ok ? 0 : 1;
}
