#include <doctest.h>

#include <filesystem>
#include <map>

#include "fixtures.hpp"
#include "s2st/error.hpp"
#include "s2st/template_pool.hpp"

using namespace s2st;

TEST_CASE("build_pool keeps one chain per sentence with multiplicity") {
  fixture::QuietLogs quiet;
  HsmmParams p = fixture::two_emitter_model();
  std::vector<UnpairedExample> corpus{{{0, 0, 1, 1}, {}}, {{1, 0}, {}}, {{0, 0, 1, 1}, {}}};
  TemplatePool pool = build_pool(p, corpus);
  CHECK(pool.occurrences() == 3);
  CHECK(pool.count({0, 1}) == 2);
  CHECK(pool.count({1, 0}) == 1);
  CHECK(pool.chains().front() == StateChain{0, 1});
  for (const auto& ex : corpus) {
    StateChain chain;
    for (const auto& e : viterbi_segment(p, ex.text).segments) chain.push_back(e.state);
    CHECK(pool.count(chain) > 0);
  }
}

TEST_CASE("build_pool skips infeasible sentences and fails when none remain") {
  fixture::QuietLogs quiet;
  HsmmParams p = fixture::two_emitter_model();
  const ConstraintOptions strict{false};
  std::vector<UnpairedExample> bad{{{0, 0, 1}, {{0, 3}}}};
  CHECK_THROWS_AS(build_pool(p, bad, strict), EmptyPool);
  bad.push_back({{0, 1}, {}});
  CHECK(build_pool(p, bad, strict).occurrences() == 1);
  CHECK_THROWS_AS(build_pool(p, {}), EmptyCorpus);
}

TEST_CASE("sample_template") {
  HsmmParams p = HsmmParams::zeros({8, 2, 3, 2, 2, 2});
  SUBCASE("single-chain pool forces the states") {
    TemplatePool pool;
    pool.add({4, 7});
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      Template t = sample_template(pool, p, rng);
      REQUIRE(t.entries.size() == 2);
      CHECK(t.entries[0].state == 4);
      CHECK(t.entries[1].state == 7);
      for (const auto& e : t.entries) CHECK((e.duration == 1 || e.duration == 2));
      CHECK_NOTHROW(check_template(t, 2));
    }
  }
  SUBCASE("fixed seed is deterministic") {
    TemplatePool pool;
    pool.add({1, 2, 3});
    pool.add({3, 1});
    Rng a(11), b(11);
    for (int i = 0; i < 50; ++i) CHECK(sample_template(pool, p, a) == sample_template(pool, p, b));
  }
  SUBCASE("occurrence frequencies follow multiplicities") {
    TemplatePool pool;
    const std::vector<StateChain> chains{{0, 1}, {1, 0}, {2, 3, 2}, {5}};
    const long mult[] = {1, 2, 3, 4};
    for (int i = 0; i < 4; ++i) pool.add(chains[i], mult[i]);
    Rng rng(2024);
    double observed[4] = {0, 0, 0, 0};
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      Template t = sample_template(pool, p, rng);
      StateChain c;
      for (const auto& e : t.entries) c.push_back(e.state);
      for (int k = 0; k < 4; ++k) {
        if (c == chains[k]) observed[k] += 1;
      }
    }
    const double probs[] = {0.1, 0.2, 0.3, 0.4};
    CHECK(observed[0] + observed[1] + observed[2] + observed[3] == n);
    CHECK(fixture::chi_square(observed, probs, n) < 11.345);  // df = 3, alpha = 0.01
  }
  SUBCASE("empty pool") {
    TemplatePool pool;
    Rng rng(1);
    CHECK_THROWS_AS(sample_template(pool, p, rng), EmptyPool);
  }
}

TEST_CASE("infer_template") {
  HsmmParams p = fixture::two_emitter_model();
  Template t = infer_template(p, {0, 0, 1, 1});
  const std::vector<SegmentEntry> expected{{0, 2}, {1, 2}};
  CHECK(t.entries == expected);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    TokenSeq seq(static_cast<std::size_t>(1 + i % 7));
    for (auto& x : seq) x = static_cast<int>(rng() % 2);
    Template u = infer_template(p, seq);
    CHECK(u.total_len() == static_cast<int>(seq.size()));
    CHECK(u.entries == viterbi_segment(p, seq).segments);
  }
  CHECK_THROWS_AS(infer_template(p, {0, 1, 0}, {{0, 3}}, {false}), InfeasibleConstraints);
}

TEST_CASE("pool round-trips through JSONL") {
  TemplatePool pool;
  pool.add({3, 1, 4});
  pool.add({1, 5}, 3);
  auto path = std::filesystem::temp_directory_path() / "s2st_pool_test.jsonl";
  save_pool(pool, path);
  CHECK(load_pool(path) == pool);
  std::filesystem::remove(path);
}
