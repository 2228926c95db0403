#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"
#include "tmd/errors.hpp"
#include "tmd/fusion/fusion.hpp"
#include "tmd/nn/ops.hpp"

using namespace tmd;
using fusion::FusionMode;

namespace {

const nn::Shape kImage{1, 48, 48};

std::vector<nn::Tensor> random_inputs(std::size_t n, oracle::Rng& rng, const nn::Shape& shape = kImage) {
  std::vector<nn::Tensor> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(nn::Tensor::from(shape, oracle::uniform_f(nn::shape_size(shape), rng)));
  return out;
}

fusion::FusionInputs inputs_for(std::size_t n, std::uint64_t seed, const nn::Shape& shape = kImage) {
  return fusion::make_inputs(std::vector<nn::Shape>(n, shape), seed);
}

std::vector<float> values(const nn::Tensor& t) { return {t.data().begin(), t.data().end()}; }

bool bitwise_equal(const nn::Tensor& a, const nn::Tensor& b) {
  return a.size() == b.size() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

double prob_sum(const nn::Tensor& log_probs) {
  double s = 0.0;
  for (float v : log_probs.data()) {
    CHECK(std::exp(v) >= 0.0f);
    s += std::exp(static_cast<double>(v));
  }
  return s;
}

// Swaps the values of s0.* and s1.* parameters (identically shaped branches).
void swap_branches(nn::ModelGraph& g) {
  auto& store = g.parameters();
  for (auto& p : store.all()) {
    if (!p.name.starts_with("s0.")) continue;
    auto& q = store.get("s1." + p.name.substr(3));
    auto a = p.tensor.mutable_data(), b = q.tensor.mutable_data();
    std::swap_ranges(a.begin(), a.end(), b.begin());
  }
}

template <class G>
G& as(nn::ModelGraph& g) {
  auto* p = dynamic_cast<G*>(&g);
  REQUIRE(p != nullptr);
  return *p;
}

}  // namespace

TEST_CASE("mode names round trip") {
  CHECK(fusion::all_fusion_modes().size() == 13);
  for (auto m : fusion::all_fusion_modes()) CHECK(fusion::parse_mode(fusion::mode_name(m)) == m);
  CHECK(fusion::mode_name(FusionMode::kWeightedScore) == "WeightedScore");
  CHECK_THROWS_AS(fusion::parse_mode("weightedscore"), ConfigError);
}

TEST_CASE("single-sensor degeneracy: eleven modes reduce to the baseline bitwise") {
  oracle::Rng rng(11);
  const auto x = random_inputs(1, rng);
  for (std::uint64_t seed : {1ULL, 77ULL}) {
    model::BaselineGraph base(model::config_for_input(kImage), seed);
    const auto want = base.forward(x);
    for (auto mode : fusion::all_fusion_modes()) {
      const auto g = fusion::build_fusion(mode, inputs_for(1, seed));
      CAPTURE(fusion::mode_name(mode));
      if (mode == FusionMode::kBottleneckFilters || mode == FusionMode::kAttention) {
        CHECK(g->parameter_count() > base.parameter_count());
        CHECK(g->topology() != base.topology());
        continue;
      }
      CHECK(g->topology() == base.topology());
      CHECK(g->parameter_count() == base.parameter_count());
      CHECK(bitwise_equal(g->forward(x), want));
    }
  }
}

TEST_CASE("early fusion stacks the inputs along the chosen axis") {
  auto in = inputs_for(2, 3);
  const auto t = fusion::build_early(FusionMode::kTimeConcat, in);
  // The stacked [1,96,48] image pools down to a [128,12,6] feature map.
  CHECK(t->parameters().get("fc1.weight").tensor.shape() == nn::Shape{128, 128 * 12 * 6});
  auto in3 = inputs_for(3, 3);
  const auto d = fusion::build_early(FusionMode::kDepthConcat, in3);
  CHECK(d->parameters().get("conv1.weight").tensor.shape() == nn::Shape{32, 3, 3, 3});
  const auto f = fusion::build_early(FusionMode::kFreqConcat, in);
  oracle::Rng rng(5);
  const auto x = random_inputs(2, rng);
  CHECK(prob_sum(f->forward(x)) == doctest::Approx(1.0).epsilon(1e-6));

  fusion::FusionInputs mixed = fusion::make_inputs({{1, 48, 48}, {1, 6000}}, 1);
  CHECK_THROWS_AS(fusion::build_early(FusionMode::kTimeConcat, mixed), ConfigError);
  CHECK_THROWS_AS(fusion::build_bottleneck(mixed), ConfigError);
  CHECK_THROWS_AS(fusion::build_early(FusionMode::kProbAverage, in), ConfigError);
  const std::vector<nn::Tensor> one{x[0]};
  CHECK_THROWS_AS(t->forward(one), ConfigError);
}

TEST_CASE("bottleneck: 1x1 squeeze in front of the baseline") {
  const auto g = fusion::build_bottleneck(inputs_for(3, 4), 1);
  CHECK(g->parameters().get("bottleneck.weight").tensor.shape() == nn::Shape{1, 3, 1, 1});
  // The first baseline conv sees a single channel after the squeeze.
  CHECK(g->parameters().get("conv1.weight").tensor.shape() == nn::Shape{32, 1, 3, 3});
  CHECK_THROWS_AS(fusion::build_bottleneck(inputs_for(2, 4), 0), ConfigError);

  // Equal squeeze weights w with zero bias and identical inputs x: the
  // squeezed image is 3wx, so the output equals the baseline on 3wx.
  auto& store = g->parameters();
  for (auto& v : store.get("bottleneck.weight").tensor.mutable_data()) v = 0.25f;
  for (auto& v : store.get("bottleneck.bias").tensor.mutable_data()) v = 0.0f;
  oracle::Rng rng(6);
  const auto x = random_inputs(1, rng)[0];
  model::BaselineGraph base(model::config_for_input(kImage), 1);
  for (auto& p : base.parameters().all()) {
    auto src = store.get(p.name).tensor.data();
    std::copy(src.begin(), src.end(), p.tensor.mutable_data().begin());
  }
  std::vector<float> scaled = values(x);
  for (auto& v : scaled) v *= 0.75f;
  const std::vector<nn::Tensor> three{x, x, x};
  const std::vector<nn::Tensor> one{nn::Tensor::from(kImage, scaled)};
  const auto a = g->forward(three), b = base.forward(one);
  for (std::size_t c = 0; c < 8; ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-5));
}

TEST_CASE("feature concatenation: disjoint stacks, doubled head input") {
  const auto one = fusion::build_feature_concat(inputs_for(1, 2));
  const auto two = fusion::build_feature_concat(inputs_for(2, 2));
  CHECK(one->parameters().get("fc1.weight").tensor.shape() == nn::Shape{128, 128 * 36});
  CHECK(two->parameters().get("fc1.weight").tensor.shape() == nn::Shape{128, 2 * 128 * 36});
  CHECK(two->parameters().contains("s0.conv1.weight"));
  CHECK(two->parameters().contains("s1.conv1.weight"));
  CHECK(values(two->parameters().get("s0.conv1.weight").tensor) != values(two->parameters().get("s1.conv1.weight").tensor));
}

TEST_CASE("late averaging algebra") {
  // Two one-hot distributions on classes 0 and 1, combined with equal weights.
  const float ninf = -std::numeric_limits<float>::infinity();
  std::vector<float> a(8, ninf), b(8, ninf);
  a[0] = 0.0f;
  b[1] = 0.0f;
  const std::vector<nn::Tensor> lp{nn::Tensor::from({8}, a), nn::Tensor::from({8}, b)};
  const auto mix = nn::log_mixture(lp, nn::Tensor::full({2}, std::log(0.5f)));
  CHECK(std::exp(mix[0]) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(std::exp(mix[1]) == doctest::Approx(0.5).epsilon(1e-7));
  for (std::size_t c = 2; c < 8; ++c) CHECK(std::exp(mix[c]) == 0.0f);

  // Identical branches and inputs: ScoreAverage is the single softmax exactly.
  auto g = fusion::build_late_average(FusionMode::kScoreAverage, inputs_for(2, 9));
  auto& store = g->parameters();
  for (auto& p : store.all()) {
    if (!p.name.starts_with("s0.")) continue;
    auto src = p.tensor.data();
    auto& q = store.get("s1." + p.name.substr(3));
    std::copy(src.begin(), src.end(), q.tensor.mutable_data().begin());
  }
  oracle::Rng rng(12);
  const auto x = random_inputs(1, rng)[0];
  const std::vector<nn::Tensor> same{x, x};
  const auto& mb = as<fusion::MultiBranchGraph>(*g);
  const auto s = mb.branch_logits(same)[0];
  CHECK(bitwise_equal(g->forward(same), nn::log_softmax(s)));

  // ProbAverage is the mean of the branch distributions.
  auto pa = fusion::build_late_average(FusionMode::kProbAverage, inputs_for(2, 10));
  const auto xs = random_inputs(2, rng);
  const auto bl = as<fusion::MultiBranchGraph>(*pa).branch_logits(xs);
  const auto out = pa->forward(xs);
  for (std::size_t c = 0; c < 8; ++c) {
    const double want = 0.5 * (std::exp(oracle::log_softmax(oracle::to_double(bl[0].data()))[c]) +
                               std::exp(oracle::log_softmax(oracle::to_double(bl[1].data()))[c]));
    CHECK(std::exp(static_cast<double>(out[c])) == doctest::Approx(want).epsilon(1e-5));
  }
}

TEST_CASE("weighted fusion: one-hot weights select a sensor exactly") {
  oracle::Rng rng(13);
  const auto x = random_inputs(3, rng);
  {
    auto g = fusion::build_weighted(FusionMode::kWeightedScore, inputs_for(3, 14));
    auto& w = as<fusion::WeightedGraph>(*g);
    CHECK(w.effective_weights() == std::vector<float>(3, 1.0f / 3.0f));
    const auto logits = w.branch_logits(x);
    for (std::size_t k = 0; k < 3; ++k) {
      auto raw = w.parameters().get("sensor_weights").tensor.mutable_data();
      std::fill(raw.begin(), raw.end(), 0.0f);
      raw[k] = 1.0f;
      CHECK(bitwise_equal(g->forward(x), nn::log_softmax(logits[k])));
    }
  }
  {
    auto g = fusion::build_weighted(FusionMode::kWeightedProb, inputs_for(3, 15));
    auto& w = as<fusion::WeightedGraph>(*g);
    const auto logits = w.branch_logits(x);
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<float> onehot(3, 0.0f);
      onehot[k] = 1.0f;
      w.force_mixture(onehot);
      CHECK(bitwise_equal(g->forward(x), nn::log_softmax(logits[k])));
    }
    CHECK_THROWS_AS(w.force_mixture(std::vector<float>{0.5f, 0.6f, 0.0f}), ConfigError);
    w.force_mixture(std::nullopt);
    // softmax of uniform raw weights is the plain probability average.
    const auto avg = fusion::build_late_average(FusionMode::kProbAverage, inputs_for(3, 15));
    const auto a = g->forward(x), b = avg->forward(x);
    for (std::size_t c = 0; c < 8; ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-6));
  }
  auto ws = fusion::build_weighted(FusionMode::kWeightedScore, inputs_for(2, 16));
  CHECK_THROWS_AS(as<fusion::WeightedGraph>(*ws).force_mixture(std::vector<float>{1.0f, 0.0f}), ConfigError);
}

TEST_CASE("weighted fusion: sensor-weight gradients match finite differences") {
  oracle::Rng rng(17);
  for (auto mode : {FusionMode::kWeightedScore, FusionMode::kWeightedProb}) {
    auto g = fusion::build_weighted(mode, inputs_for(3, 18));
    auto& w = as<fusion::WeightedGraph>(*g);
    auto raw = w.parameters().get("sensor_weights").tensor.mutable_data();
    raw[0] = 0.7f;
    raw[1] = -0.4f;
    raw[2] = 0.2f;
    const auto x = random_inputs(3, rng);
    const std::size_t label = 5;
    g->parameters().zero_grad();
    nn::nll_loss(g->forward(x), label).backward();
    std::vector<std::vector<double>> s;
    for (const auto& l : w.branch_logits(x)) s.push_back(oracle::to_double(l.data()));
    // Double-precision combiner over the (weight-independent) branch scores.
    auto loss = [&](const std::vector<std::vector<double>>& v) {
      const auto& wt = v[0];
      std::vector<double> out(8, 0.0);
      if (mode == FusionMode::kWeightedScore) {
        for (std::size_t k = 0; k < 3; ++k)
          for (std::size_t c = 0; c < 8; ++c) out[c] += wt[k] * s[k][c];
        return -oracle::log_softmax(out)[label];
      }
      const auto mix = oracle::log_softmax(wt);
      double p = 0.0;
      for (std::size_t k = 0; k < 3; ++k) p += std::exp(mix[k] + oracle::log_softmax(s[k])[label]);
      return -std::log(p);
    };
    const auto r = oracle::check_gradients({w.sensor_weights()}, loss, 3, rng, 1e-4);
    CHECK(r.checked == 3);
    CHECK(r.max_rel_error < 1e-2);
  }
}

TEST_CASE("probability-emitting fusions sum to one on random inputs") {
  oracle::Rng rng(19);
  for (auto mode : fusion::all_fusion_modes()) {
    CAPTURE(fusion::mode_name(mode));
    const auto g = fusion::build_fusion(mode, inputs_for(2, 20));
    for (int t = 0; t < 5; ++t) {
      const auto x = random_inputs(2, rng);
      const auto lp = g->forward(x);
      REQUIRE(lp.shape() == nn::Shape{8});
      CHECK(std::abs(prob_sum(lp) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("permutation consistency for symmetric modes") {
  oracle::Rng rng(21);
  for (auto mode : {FusionMode::kProbAverage, FusionMode::kScoreAverage}) {
    auto g = fusion::build_late_average(mode, inputs_for(2, 22));
    const auto x = random_inputs(2, rng);
    const auto a = g->probabilities(x);
    swap_branches(*g);
    const std::vector<nn::Tensor> swapped{x[1], x[0]};
    const auto b = g->probabilities(swapped);
    for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(a[c] - b[c]) <= 1e-6);
  }
  // DepthConcat: permuting the input channels of the first kernels.
  auto g = fusion::build_early(FusionMode::kDepthConcat, inputs_for(2, 23));
  const auto x = random_inputs(2, rng);
  const auto a = g->probabilities(x);
  auto w = g->parameters().get("conv1.weight").tensor.mutable_data();
  for (std::size_t f = 0; f < 32; ++f) std::swap_ranges(w.begin() + f * 18, w.begin() + f * 18 + 9, w.begin() + f * 18 + 9);
  const std::vector<nn::Tensor> swapped{x[1], x[0]};
  const auto b = g->probabilities(swapped);
  for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(a[c] - b[c]) <= 1e-6);
}

TEST_CASE("attention: weights sum to one, equal scores average the features") {
  oracle::Rng rng(24);
  auto g = fusion::build_attention(inputs_for(3, 25));
  auto& att = as<fusion::AttentionGraph>(*g);
  for (int t = 0; t < 10; ++t) {
    const auto x = random_inputs(3, rng);
    const auto w = att.attention_weights(x);
    REQUIRE(w.size() == 3);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    for (float v : w) CHECK(v >= 0.0f);
  }
  const auto x = random_inputs(3, rng);
  att.force_scores(std::vector<float>{2.0f, 2.0f, 2.0f});
  const auto feats = att.features(x);
  const auto want = nn::log_softmax(att.head().forward(nn::mean(feats)));
  const auto got = g->forward(x);
  for (std::size_t c = 0; c < 8; ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-5));
  CHECK_THROWS_AS(att.force_scores(std::vector<float>{1.0f}), ConfigError);
  CHECK_THROWS_AS(fusion::build_attention(fusion::make_inputs({{1, 48, 48}, {1, 6000}}, 1)), ConfigError);
}

TEST_CASE("selective fusion: gate range and forced gates") {
  oracle::Rng rng(26);
  auto g = fusion::build_selective_fusion(inputs_for(2, 27));
  auto& sel = as<fusion::SelectiveFusionGraph>(*g);
  const auto x = random_inputs(2, rng);
  for (const auto& gate : sel.gate_values(x)) {
    CHECK(gate.size() == 128);
    for (float v : gate) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
  // Open gates: the same network as feature concatenation with this seed.
  sel.force_gates(std::vector<std::vector<float>>(2, std::vector<float>(128, 1.0f)));
  const auto concat = fusion::build_feature_concat(inputs_for(2, 27));
  CHECK(bitwise_equal(g->forward(x), concat->forward(x)));

  // A closed gate removes the sensor's influence.
  std::vector<std::vector<float>> closed{std::vector<float>(128, 0.5f), std::vector<float>(128, 0.0f)};
  sel.force_gates(closed);
  const auto other = random_inputs(1, rng)[0];
  const std::vector<nn::Tensor> changed{x[0], other};
  CHECK(bitwise_equal(g->forward(x), g->forward(changed)));
  CHECK_THROWS_AS(sel.force_gates(std::vector<std::vector<float>>(2, std::vector<float>(3, 1.0f))), ConfigError);
}

TEST_CASE("learn-to-combine: valid mixture, forced gate ignores a sensor") {
  oracle::Rng rng(28);
  auto g = fusion::build_learn_to_combine(inputs_for(2, 29));
  auto& l2c = as<fusion::LearnToCombineGraph>(*g);
  for (int t = 0; t < 10; ++t) {
    const auto x = random_inputs(2, rng);
    const auto w = l2c.mixture_weights(x);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(prob_sum(g->forward(x)) - 1.0) < 1e-6);
  }
  const auto x = random_inputs(2, rng);
  l2c.force_mixture(std::vector<float>{1.0f, 0.0f});
  CHECK(bitwise_equal(g->forward(x), nn::log_softmax(l2c.branch_logits(x)[0])));
  CHECK_THROWS_AS(l2c.force_mixture(std::vector<float>{-0.5f, 1.5f}), ConfigError);
}

TEST_CASE("gradient blend: weight formula") {
  // dG = (0.2, 0.1), dO = (0.1, 0.1): ratios 20 and 10, normalized (2/3, 1/3).
  const std::vector<std::vector<float>> train{{1.0f, 0.7f}, {1.0f, 0.8f}};
  const std::vector<std::vector<float>> held{{1.2f, 1.0f}, {1.2f, 1.1f}};
  const auto r = fusion::gradient_blend_ratios(train, held);
  CHECK(r[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-5));
  CHECK(r[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
  const auto w = fusion::gradient_blend_weights(train, held);
  CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-5));

  // Identical curves: equal weights.
  const auto eq = fusion::gradient_blend_weights({train[0], train[0]}, {held[0], held[0]});
  CHECK(eq[0] == doctest::Approx(0.5));
  CHECK(eq[1] == doctest::Approx(0.5));

  // Held-out loss rising: clamped to the floor, the rest shares 1 - floor.
  const auto of = fusion::gradient_blend_weights({{1.0f, 0.5f}, {1.0f, 0.7f}}, {{1.1f, 1.3f}, {1.2f, 1.0f}});
  CHECK(of[0] == doctest::Approx(1e-3));
  CHECK(of[1] == doctest::Approx(1.0 - 1e-3));
  CHECK(of[0] + of[1] == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(fusion::gradient_blend_weights({{1.0f}}, {{1.0f}}), ConfigError);
  CHECK_THROWS_AS(fusion::gradient_blend_weights({{1.0f, 0.5f}}, {{1.0f, 0.5f, 0.2f}}), ConfigError);
}

TEST_CASE("gradient blend: all weight on the fused term trains like ScoreAverage") {
  oracle::Rng rng(30);
  const auto in = inputs_for(2, 31);
  auto gb = fusion::build_gradient_blend(in);
  auto sa = fusion::build_late_average(FusionMode::kScoreAverage, in);
  auto& blend = as<fusion::GradientBlendGraph>(*gb);
  CHECK(blend.term_count() == 3);
  blend.set_blend_weights({0.0f, 0.0f, 1.0f});
  const auto x = random_inputs(2, rng);
  CHECK(bitwise_equal(gb->forward(x), sa->forward(x)));
  gb->parameters().zero_grad();
  sa->parameters().zero_grad();
  const auto terms = gb->loss(x, 2);
  CHECK(terms.components.size() == 3);
  terms.total.backward();
  sa->loss(x, 2).total.backward();
  for (std::size_t i = 0; i < gb->parameters().size(); ++i) {
    const auto& p = gb->parameters().all()[i];
    const auto& q = sa->parameters().get(p.name);
    const auto gp = p.tensor.grad(), gq = q.tensor.grad();
    for (std::size_t j = 0; j < gp.size(); j += 97) CHECK(gp[j] == doctest::Approx(gq[j]).epsilon(1e-6).scale(1e-9));
  }
  CHECK_THROWS_AS(blend.set_blend_weights({1.0f, 0.0f}), ConfigError);
  CHECK_THROWS_AS(blend.set_blend_weights({1.0f, -0.1f, 0.1f}), ConfigError);
}
