#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "neuroloop/classify/classify.hpp"
#include "neuroloop/classify/cohort.hpp"
#include "neuroloop/errors.hpp"
#include "neuroloop/sim/generator.hpp"
#include "oracles.hpp"

using namespace neuroloop;
using namespace neuroloop::classify;

namespace {

FeatureVector row(std::string id, Label l, Features x, std::size_t i = 0) { return {std::move(id), i, x, l}; }

// Spherical Gaussian classes; participant p owns rows [p*per, (p+1)*per).
std::vector<FeatureVector> gaussian_rows(std::size_t participants, std::size_t per_class, double distance,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<FeatureVector> out;
  for (std::size_t p = 0; p < participants; ++p) {
    for (std::size_t e = 0; e < per_class; ++e) {
      for (Label l : {Label::Internal, Label::External}) {
        Features x;
        for (double& v : x) v = 10.0 + g(rng);
        if (l == Label::External) x[2] += distance;  // mean offset along alpha
        out.push_back(row("S" + std::to_string(p), l, x, out.size()));
      }
    }
  }
  return out;
}

// Weights from the textbook formula, solved with the Gauss-Jordan oracle.
std::vector<double> oracle_weights(const std::vector<FeatureVector>& rows, double shrinkage) {
  const std::size_t d = kFeatures;
  std::vector<double> mi(d, 0.0), me(d, 0.0);
  double ni = 0, ne = 0;
  for (const auto& r : rows) {
    auto& m = *r.label == Label::External ? me : mi;
    (*r.label == Label::External ? ne : ni) += 1;
    for (std::size_t k = 0; k < d; ++k) m[k] += r.x[k];
  }
  for (std::size_t k = 0; k < d; ++k) {
    mi[k] /= ni;
    me[k] /= ne;
  }
  std::vector<std::vector<double>> s(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows) {
    const auto& m = *r.label == Label::External ? me : mi;
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) s[a][b] += (r.x[a] - m[a]) * (r.x[b] - m[b]);
  }
  double tr = 0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) s[a][b] /= (ni + ne - 2);
    tr += s[a][a];
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) s[a][b] *= (1 - shrinkage);
    s[a][a] += shrinkage * tr / d;
  }
  std::vector<double> dm(d);
  for (std::size_t k = 0; k < d; ++k) dm[k] = me[k] - mi[k];
  return oracle::solve(s, dm);
}

}  // namespace

TEST_CASE("fixed bands") {
  const FixedBands f;
  CHECK(f.delta.low == 0.5);
  CHECK(f.delta.high == 4.0);
  CHECK(f.beta.low == 13.0);
  CHECK(f.beta.high == 30.0);
  CHECK(f.gamma.low == 30.0);
  CHECK(f.gamma.high == 45.0);
}

TEST_CASE("extract_features") {
  const auto bands = iaf::IndividualBands::canonical();
  const auto labels = dsp::ChannelSet::frontal_posterior_union().labels;
  SUBCASE("pure 10 Hz posterior sinusoid") {
    dsp::EegChunk e(0.0, 500.0, labels, 10000);
    for (const auto& l : dsp::ChannelSet::alpha_posterior().labels) {
      const auto s = oracle::sine(10000, 10.0, 500.0);
      auto ch = e.channel(e.index_of(l));
      std::copy(s.begin(), s.end(), ch.begin());
    }
    const auto f = extract_features(e, bands);
    CHECK(f[2] == doctest::Approx(0.5).epsilon(0.05));
    for (std::size_t k : {0u, 3u, 4u}) CHECK(f[k] < 1e-3);
  }
  SUBCASE("zero epoch") {
    const auto f = extract_features(dsp::EegChunk(0.0, 500.0, labels, 10000), bands);
    for (double v : f) CHECK(v == 0.0);
  }
  SUBCASE("wrong duration") {
    CHECK_THROWS_AS(extract_features(dsp::EegChunk(0.0, 500.0, labels, 9000), bands), InvalidParameter);
  }
  SUBCASE("missing channels") {
    CHECK_THROWS_AS(extract_features(dsp::EegChunk(0.0, 500.0, {"Pz"}, 10000), bands), ConfigurationError);
  }
}

TEST_CASE("normalize_to_rest") {
  RestingBaselines rest;
  rest.add("A", {1, 2, 3, 4, 5});
  rest.add("A", {3, 2, 1, 4, 5});
  CHECK(rest.mean("A") == Features{2, 2, 2, 4, 5});
  auto fv = normalize_to_rest("A", 3, {2, 2, 2, 4, 5}, Label::Internal, rest);
  for (double v : fv.x) CHECK(v == 1.0);
  fv = normalize_to_rest("A", 3, {4, 4, 4, 8, 10}, Label::Internal, rest);
  for (double v : fv.x) CHECK(v == 2.0);
  CHECK_THROWS_AS(normalize_to_rest("B", 0, {1, 1, 1, 1, 1}, std::nullopt, rest), BaselineMissing);
  rest.add("Z", {0, 1, 1, 1, 1});
  CHECK_THROWS_AS(normalize_to_rest("Z", 0, {1, 1, 1, 1, 1}, std::nullopt, rest), DegenerateBaseline);
}

TEST_CASE("split_participants") {
  std::vector<std::string> ids;
  for (int i = 0; i < 22; ++i) ids.push_back("P" + std::to_string(i));
  const auto p = split_participants(ids, {12, 5, 5}, 7);
  CHECK(p.train_ids.size() == 12);
  CHECK(p.val_ids.size() == 5);
  CHECK(p.test_ids.size() == 5);
  const auto again = split_participants(ids, {12, 5, 5}, 7);
  CHECK(again.train_ids == p.train_ids);
  CHECK(again.test_ids == p.test_ids);

  std::vector<std::string> ten(ids.begin(), ids.begin() + 10);
  const auto q = split_participants(ten, {12, 5, 5}, 1);
  CHECK(q.train_ids.size() == 6);
  CHECK(q.val_ids.size() == 2);
  CHECK(q.test_ids.size() == 2);

  const auto three = split_participants({"a", "b", "c"}, {12, 5, 5}, 0);
  CHECK(three.train_ids.size() == 1);
  CHECK(three.val_ids.size() == 1);
  CHECK(three.test_ids.size() == 1);

  CHECK_THROWS_AS(split_participants({"a", "b"}), InsufficientData);
  CHECK_THROWS_AS(split_participants({"a", "a", "b"}), InvalidParameter);
}

TEST_CASE("split hygiene over 100 seeds") {
  for (std::size_t n : {3u, 10u, 22u, 37u}) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto p = split_participants(ids, {12, 5, 5}, seed);
      std::set<std::string> seen;
      for (const auto* b : {&p.train_ids, &p.val_ids, &p.test_ids}) {
        CHECK_FALSE(b->empty());
        for (const auto& id : *b) REQUIRE(seen.insert(id).second);
      }
      CHECK(seen.size() == n);
    }
  }
}

TEST_CASE("train_lda: hand-computed 2-point-per-class instance") {
  // Internal (0,..), (2,0,..); External (0,2,..), (2,2,..).
  // pooled = diag(2,0,0,0,0), trace/5 = 0.4, shrinkage 0.1:
  // sigma = diag(1.84, .04, .04, .04, .04); dmu = (0,2,0,0,0); w = (0,50,0,0,0); b = -50.
  const std::vector<FeatureVector> rows = {
      row("a", Label::Internal, {0, 0, 0, 0, 0}), row("a", Label::Internal, {2, 0, 0, 0, 0}),
      row("b", Label::External, {0, 2, 0, 0, 0}), row("b", Label::External, {2, 2, 0, 0, 0})};
  TrainOptions o;
  o.min_rows_per_class = 2;
  const auto m = train_lda(rows, o);
  const Features expected = {0, 50, 0, 0, 0};
  for (std::size_t k = 0; k < kFeatures; ++k) CHECK(std::abs(m.weights[k] - expected[k]) <= 1e-9);
  CHECK(std::abs(m.bias + 50.0) <= 1e-9);
}

TEST_CASE("train_lda matches the closed form on random small instances") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FeatureVector> rows;
    for (int i = 0; i < 4; ++i) {
      Features x;
      for (double& v : x) v = g(rng);
      rows.push_back(row("p", i % 2 ? Label::External : Label::Internal, x));
    }
    TrainOptions o;
    o.min_rows_per_class = 2;
    for (double shrink : {0.1, 0.5, 1.0}) {
      o.shrinkage = shrink;
      const auto m = train_lda(rows, o);
      const auto w = oracle_weights(rows, shrink);
      for (std::size_t k = 0; k < kFeatures; ++k) {
        CHECK(m.weights[k] == doctest::Approx(w[k]).epsilon(1e-9).scale(1.0));
      }
    }
  }
}

TEST_CASE("train_lda preconditions") {
  auto rows = gaussian_rows(2, 6, 3.0, 1);
  TrainOptions o;
  std::vector<FeatureVector> internal_only;
  for (const auto& r : rows) if (*r.label == Label::Internal) internal_only.push_back(r);
  CHECK_THROWS_AS(train_lda(internal_only), InvalidParameter);
  CHECK_THROWS_AS(train_lda(gaussian_rows(1, 3, 3.0, 1)), InsufficientData);
  o.shrinkage = 1.5;
  CHECK_THROWS_AS(train_lda(rows, o), InvalidParameter);
  // rank-deficient: one feature constant
  for (auto& r : rows) r.x[4] = 1.0;
  o.shrinkage = 0.0;
  CHECK_THROWS_AS(train_lda(rows, o), NumericalError);
  o.shrinkage = 0.1;
  CHECK_NOTHROW(train_lda(rows, o));
}

TEST_CASE("shrinkage 1 reduces to nearest class mean") {
  auto rows = gaussian_rows(4, 10, 1.0, 9);
  TrainOptions o;
  o.shrinkage = 1.0;
  o.equal_priors = true;
  const auto m = train_lda(rows, o);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(10.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    Features x;
    for (double& v : x) v = g(rng);
    double de = 0, di = 0;
    for (std::size_t k = 0; k < kFeatures; ++k) {
      de += (x[k] - m.mean_external[k]) * (x[k] - m.mean_external[k]);
      di += (x[k] - m.mean_internal[k]) * (x[k] - m.mean_internal[k]);
    }
    if (std::abs(de - di) < 1e-9) continue;
    CHECK((predict(m, x).label == Label::External) == (de < di));
  }
}

TEST_CASE("predict") {
  LdaModel m;
  m.weights = {1, -2, 0.5, 0, 3};
  m.bias = -1.5;
  SUBCASE("on the hyperplane is External") {
    const Features x = {1.5, 0, 0, 0, 0};
    CHECK(predict(m, x).score == 0.0);
    CHECK(predict(m, x).label == Label::External);
  }
  SUBCASE("sign flip flips labels") {
    LdaModel f = m;
    for (double& w : f.weights) w = -w;
    f.bias = -f.bias;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int i = 0; i < 200; ++i) {
      Features x;
      for (double& v : x) v = g(rng);
      if (m.score(x) == 0.0) continue;
      CHECK(predict(m, x).label != predict(f, x).label);
    }
  }
  SUBCASE("affine in x") {
    const Features x = {0.3, 1.1, -2, 4, 0.5};
    Features ax = x;
    for (double& v : ax) v *= 2.5;
    CHECK(m.score(ax) == doctest::Approx(2.5 * (m.score(x) - m.bias) + m.bias).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch") {
    const std::vector<double> x = {1, 2, 3};
    CHECK_THROWS_AS(predict(m, x), InvalidParameter);
  }
  SUBCASE("class mean of External is External under equal priors") {
    auto rows = gaussian_rows(3, 8, 2.0, 3);
    TrainOptions o;
    o.equal_priors = true;
    const auto t = train_lda(rows, o);
    CHECK(predict(t, t.mean_external).label == Label::External);
    CHECK(predict(t, t.mean_internal).label == Label::Internal);
  }
}

TEST_CASE("evaluate") {
  const auto c = metrics_from_confusion(4, 1, 1, 4);
  CHECK(c.accuracy == doctest::Approx(0.8));
  CHECK(c.f1_external == doctest::Approx(0.8));
  CHECK(metrics_from_confusion(5, 0, 0, 5).f1_external == 1.0);
  CHECK(metrics_from_confusion(0, 0, 0, 5).f1_external == 1.0);
  CHECK_THROWS_AS(metrics_from_confusion(0, 0, 0, 0), InsufficientData);

  LdaModel always_external;  // zero weights, bias 0 -> score 0 -> External
  const auto rows = gaussian_rows(2, 5, 1.0, 1);
  const auto m = evaluate(always_external, rows);
  CHECK(m.accuracy == 0.5);
  CHECK_THROWS_AS(evaluate(always_external, std::vector<FeatureVector>{}), InsufficientData);
}

TEST_CASE("separable Gaussian classes: held-out accuracy >= 0.99") {
  // 6 sigma between means, participant-wise split
  const auto rows = gaussian_rows(22, 20, 6.0, 11);
  std::vector<std::string> ids;
  for (int i = 0; i < 22; ++i) ids.push_back("S" + std::to_string(i));
  const auto plan = split_participants(ids, {12, 5, 5}, 3);
  const auto model = train_lda(rows_for(rows, plan.train_ids));
  CHECK(evaluate(model, rows_for(rows, plan.test_ids)).accuracy >= 0.99);
  CHECK(evaluate(model, rows_for(rows, plan.val_ids)).accuracy >= 0.99);
}

TEST_CASE("identical class distributions: accuracy 0.5 +- 0.1 over 20 seeds") {
  std::vector<std::string> ids;
  for (int i = 0; i < 22; ++i) ids.push_back("S" + std::to_string(i));
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rows = gaussian_rows(22, 20, 0.0, 100 + seed);
    const auto plan = split_participants(ids, {12, 5, 5}, seed);
    sum += evaluate(train_lda(rows_for(rows, plan.train_ids)), rows_for(rows, plan.test_ids)).accuracy;
  }
  CHECK(std::abs(sum / 20 - 0.5) <= 0.1);
}

TEST_CASE("simulated cohort") {
  CohortOptions o;
  o.participants = 6;
  o.epochs_per_class = 4;
  o.seed = 5;
  const auto rows = synthesize_cohort(o);
  CHECK(rows.size() == 6 * 8);
  for (const auto& r : rows) {
    for (double v : r.x) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
    }
  }
  const auto m = train_lda(rows);
  CHECK(evaluate(m, rows).accuracy >= 0.95);
  // alpha and theta carry the state difference; internal is higher in both
  CHECK(m.mean_internal[2] > m.mean_external[2]);
  CHECK(m.mean_internal[1] > m.mean_external[1]);
  CHECK(synthesize_cohort(o)[7].x == rows[7].x);
}

TEST_CASE("feature CSV round trip and parse errors") {
  std::vector<FeatureVector> rows = gaussian_rows(2, 2, 1.0, 1);
  rows[1].label.reset();
  std::stringstream ss;
  write_features(ss, rows);
  const auto back = read_features(ss);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].participant_id == rows[i].participant_id);
    CHECK(back[i].epoch_index == rows[i].epoch_index);
    CHECK(back[i].label == rows[i].label);
    CHECK(back[i].x == rows[i].x);
  }
  auto parse_line = [](const std::string& text) {
    std::istringstream is(text);
    try {
      read_features(is);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  const std::string h = "participant_id,epoch_index,label,delta,theta,alpha,beta,gamma\n";
  CHECK(parse_line("a,b\n") == 1);
  CHECK(parse_line(h + "p,0,Internal,1,1,1,1,1\np,1,Internal,1,1,1,1\n") == 3);
  CHECK(parse_line(h + "p,x,Internal,1,1,1,1,1\n") == 2);
  CHECK(parse_line(h + "p,0,Sleepy,1,1,1,1,1\n") == 2);
  CHECK(parse_line(h + "p,0,Internal,1,1,nan,1,1\n") == 2);
  CHECK(parse_line(h + "p,0,Internal,1,1,1e,1,1\n") == 2);
}

TEST_CASE("model JSON round trip") {
  const auto m = train_lda(gaussian_rows(3, 8, 2.0, 5));
  const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.prior_external == m.prior_external);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::object()), ConfigurationError);
}
