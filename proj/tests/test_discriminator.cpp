#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "s2st/discriminator.hpp"
#include "s2st/error.hpp"

using namespace s2st;

namespace {

DiscDims small_dims(std::vector<int> windows = {1, 2, 3}) { return {12, 5, std::move(windows), 6, 7}; }

// Marker token 4 appears in every human response and never in generated ones.
std::vector<DiscTriple> toy_task(int n, Rng& rng) {
  std::uniform_int_distribution<int> tok(5, 11), len(2, 6);
  std::vector<DiscTriple> out;
  for (int i = 0; i < n; ++i) {
    DiscTriple tr;
    for (int j = len(rng); j > 0; --j) tr.message.push_back(tok(rng));
    for (int j = len(rng); j > 0; --j) tr.human.push_back(tok(rng));
    tr.human[std::uniform_int_distribution<std::size_t>(0, tr.human.size() - 1)(rng)] = 4;
    for (int j = len(rng); j > 0; --j) tr.generated.push_back(tok(rng));
    out.push_back(std::move(tr));
  }
  return out;
}

double accuracy(const DiscriminatorParams& p, const std::vector<DiscTriple>& data) {
  int right = 0;
  for (const auto& tr : data) {
    right += score(p, tr.message, tr.human) > 0.5;
    right += score(p, tr.message, tr.generated) < 0.5;
  }
  return right / (2.0 * static_cast<double>(data.size()));
}

}  // namespace

TEST_CASE("score") {
  Rng rng(1);
  DiscriminatorParams p = DiscriminatorParams::random(small_dims(), rng, 0.5);
  SUBCASE("zero output layer gives exactly one half") {
    DiscriminatorParams q = p;
    q.out_weight.setZero();
    q.out_bias.setZero();
    CHECK(score(q, {5, 6}, {7}) == 0.5);
  }
  SUBCASE("random parameters stay inside (0, 1)") {
    for (int i = 0; i < 20; ++i) {
      DiscriminatorParams q = DiscriminatorParams::random(small_dims(), rng, 2.0);
      const double d = score(q, {5, 6, 7, 8}, {9, 1});
      CHECK(std::isfinite(d));
      CHECK(d > 0.0);
      CHECK(d < 1.0);
    }
  }
  SUBCASE("padding up to length three is explicit zero padding") {
    CHECK(score(p, {5}, {6, 7}) == score(p, {5, kPad, kPad}, {6, 7, kPad}));
  }
  SUBCASE("window-one filters are blind to word order") {
    DiscriminatorParams q = DiscriminatorParams::random(small_dims({1}), rng, 0.5);
    CHECK(score(q, {5, 6, 7, 8}, {9, 10, 11}) ==
          doctest::Approx(score(q, {8, 5, 7, 6}, {11, 9, 10})).epsilon(1e-14));
    CHECK(score(p, {5, 6, 7, 8}, {9, 10, 11}) != doctest::Approx(score(p, {8, 5, 7, 6}, {11, 9, 10})));
  }
  CHECK_THROWS_AS(score(p, {}, {1}), EmptySentence);
}

TEST_CASE("disc_loss") {
  Rng rng(2);
  DiscriminatorParams p = DiscriminatorParams::random(small_dims(), rng, 0.5);
  std::vector<DiscTriple> batch = toy_task(3, rng);
  SUBCASE("constant one half") {
    DiscriminatorParams q = p;
    q.out_weight.setZero();
    q.out_bias.setZero();
    CHECK(disc_loss(q, batch) == doctest::Approx(3 * -2 * std::log(0.5)).epsilon(1e-12));
    CHECK(disc_loss(q, std::span(batch).first(1)) == doctest::Approx(1.3862943611).epsilon(1e-9));
  }
  SUBCASE("strictly positive") {
    for (int i = 0; i < 10; ++i) {
      CHECK(disc_loss(DiscriminatorParams::random(small_dims(), rng, 1.5), batch) > 0.0);
    }
  }
  SUBCASE("gradient matches finite differences") {
    DiscGradient g = disc_loss_gradient(p, batch);
    CHECK(g.loss == doctest::Approx(disc_loss(p, batch)).epsilon(1e-12));
    auto loss = [&] { return disc_loss(p, batch); };
    auto pad = [&](const std::string& name, Eigen::Index k) {
      return name == "embeddings" && k % p.embeddings.rows() == kPad;
    };
    auto r = oracle::check_gradient(p, g.grad, loss, 150, 3, 1e-6, pad);
    INFO("worst coordinate: " << r.worst_name);
    CHECK(r.worst < 1e-4);
    CHECK(g.grad.embeddings.row(kPad).isZero(0));
  }
  CHECK_THROWS_AS(disc_loss(p, {}), EmptyCorpus);
}

TEST_CASE("separable toy task") {
  Rng rng(3);
  std::vector<DiscTriple> train = toy_task(200, rng), test = toy_task(100, rng);
  DiscriminatorParams p = DiscriminatorParams::random(small_dims(), rng, 0.3);

  SUBCASE("loss falls over the first small steps") {
    DiscriminatorParams q = p;
    Adam adam(1e-4);
    std::span<const DiscTriple> batch = std::span(train).first(32);
    double prev = disc_loss(q, batch);
    for (int step = 0; step < 5; ++step) {
      DiscGradient g = disc_loss_gradient(q, batch);
      adam.step(param_pointers(q), grad_pointers(g.grad));
      const double cur = disc_loss(q, batch);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  SUBCASE("training separates the classes") {
    Adam adam(1e-2);
    for (int epoch = 0; epoch < 15; ++epoch) {
      for (std::size_t b = 0; b < train.size(); b += 20) {
        DiscGradient g = disc_loss_gradient(p, std::span(train).subspan(b, 20));
        adam.step(param_pointers(p), grad_pointers(g.grad));
      }
    }
    CHECK(accuracy(p, test) > 0.9);
    CHECK(p.embeddings.row(kPad).isZero(0));
  }
}
