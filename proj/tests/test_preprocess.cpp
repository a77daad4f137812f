#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

using namespace nrn;

TEST(MinMax, Examples) {
  const std::vector<double> a{0, 5, 10};
  EXPECT_EQ(minmax_scale(a).values, (std::vector<double>{0, 0.5, 1}));
  const std::vector<double> c{7, 7, 7};
  EXPECT_EQ(minmax_scale(c).values, (std::vector<double>{0.5, 0.5, 0.5}));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-100, 100);
  std::vector<double> v(50);
  for (auto& x : v) x = u(rng);
  const auto s = minmax_scale(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(s.scaler.inverse(s.values[i]), v[i], 1e-12);
    EXPECT_GE(s.values[i], 0.0);
    EXPECT_LE(s.values[i], 1.0);
  }
}

namespace {

Dataset step_dataset(std::size_t n, double cut, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Dataset d;
  d.feature_names = {"f0", "f1", "f2"};
  d.features = Matrix(n, 3);
  d.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < 3; ++c) d.features(r, c) = u(rng);
    d.labels[r] = d.features(r, 0) <= cut ? 1 : 0;
  }
  return d;
}

}  // namespace

TEST(Fbft, RecoversStepThreshold) {
  const auto d = step_dataset(400, 0.5, 3);
  FbftParams p;
  p.feature_fraction = 1.0;
  const auto plan = fbft_fit(d.features, d.labels, p, 7);
  ASSERT_FALSE(plan.thresholds[0].empty());
  double closest = 1e9;
  for (double t : plan.thresholds[0]) closest = std::min(closest, std::abs(t - 0.5));
  EXPECT_LT(closest, 0.01);
}

TEST(Fbft, CartOracleWithinOneGap) {
  const auto d = step_dataset(300, 0.3, 5);
  FbftParams p;
  p.feature_fraction = 1.0;
  p.thresh_round = 6;
  const auto plan = fbft_fit(d.features, d.labels, p, 2);
  // Largest gap between consecutive sorted f0 values around 0.3.
  auto col = d.features.column(0);
  std::vector<double> v(col.begin(), col.end());
  std::sort(v.begin(), v.end());
  double below = -1, above = 2;
  for (double x : v) {
    if (x <= 0.3) below = std::max(below, x);
    else above = std::min(above, x);
  }
  const double gap = above - below;
  double closest = 1e9;
  for (double t : plan.thresholds[0]) closest = std::min(closest, std::abs(t - 0.3));
  EXPECT_LE(closest, gap + 1e-6);
}

TEST(Fbft, PureLabelsGiveEmptyPlan) {
  auto d = step_dataset(50, 0.5, 1);
  std::fill(d.labels.begin(), d.labels.end(), 1);
  const auto plan = fbft_fit(d.features, d.labels, {}, 1);
  EXPECT_TRUE(plan.degenerate);
  EXPECT_EQ(plan.predicate_count(), 0u);
}

TEST(Fbft, RoundingSortedUnique) {
  const auto d = nrn_test::rule_dataset(600, 4);
  FbftParams p;
  p.thresh_round = 2;
  const auto plan = fbft_fit(d.features, d.labels, p, 9);
  EXPECT_GT(plan.predicate_count(), 0u);
  for (const auto& th : plan.thresholds) {
    for (std::size_t i = 0; i < th.size(); ++i) {
      EXPECT_NEAR(th[i] * 100, std::round(th[i] * 100), 1e-9);
      if (i) {
        EXPECT_LT(th[i - 1], th[i]);
      }
    }
  }
}

TEST(Fbft, DeterministicAndBootstrapSwitch) {
  const auto d = nrn_test::rule_dataset(500, 8);
  const auto a = fbft_fit(d.features, d.labels, {}, 3);
  const auto b = fbft_fit(d.features, d.labels, {}, 3);
  EXPECT_EQ(a, b);
  FbftParams nb;
  nb.bootstrap = false;
  nb.feature_fraction = 1.0;
  nb.tree_num = 3;
  // Without resampling or feature subsets every tree is the same tree.
  FbftParams one = nb;
  one.tree_num = 1;
  EXPECT_EQ(fbft_fit(d.features, d.labels, nb, 1), fbft_fit(d.features, d.labels, one, 2));
}

TEST(Transform, BinarizedColumnsAndBoundary) {
  BinarizationPlan plan;
  plan.thresholds = {{0.5}, {}};
  Matrix raw(3, 2);
  raw(0, 0) = 0.4;
  raw(1, 0) = 0.5;
  raw(2, 0) = 0.6;
  raw(0, 1) = 10;
  raw(1, 1) = 20;
  raw(2, 1) = 30;
  const auto r = fbft_transform(plan, {"a", "b"}, raw);
  ASSERT_EQ(r.predicates.size(), 2u);
  EXPECT_EQ(r.values(0, 0), 1.0);
  EXPECT_EQ(r.values(1, 0), 1.0);
  EXPECT_EQ(r.values(2, 0), 0.0);
  EXPECT_EQ(r.values(1, 1), 0.5);
  EXPECT_EQ(r.predicates[0].name, "a <= 0.5");
  EXPECT_TRUE(r.predicates[0].binarized());
  EXPECT_FALSE(r.predicates[1].binarized());
}

TEST(Transform, ConditionReproducesColumnAndRanges) {
  const auto d = nrn_test::rule_dataset(400, 6);
  const auto pipe = PredicatePipeline::fit(d, BinarizeMode::Replace, {}, 1);
  const auto x = pipe.transform(d.features);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t k = 0; k < x.cols; ++k) {
      const auto& p = pipe.predicates[k];
      if (p.condition) {
        ASSERT_TRUE(x(r, k) == 0.0 || x(r, k) == 1.0);
        ASSERT_EQ(x(r, k), p.condition->holds_for(d.features.row(r)) ? 1.0 : 0.0);
      } else {
        ASSERT_GE(x(r, k), 0.0);
        ASSERT_LE(x(r, k), 1.0);
      }
    }
  Matrix wrong(1, 5);
  EXPECT_THROW(pipe.transform(wrong), std::invalid_argument);
}

TEST(Transform, NoneModePassesThroughScaled) {
  const auto d = nrn_test::rule_dataset(100, 6);
  const auto pipe = PredicatePipeline::fit(d, BinarizeMode::None, {}, 1);
  EXPECT_EQ(pipe.predicates.size(), 6u);
  Matrix outside(1, 6, 5.0);
  const auto x = pipe.transform(outside);
  for (double v : x.data) EXPECT_EQ(v, 1.0);
}

TEST(Association, Examples) {
  std::vector<int> y;
  std::vector<double> col;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    y.push_back(i % 3 == 0);
    col.push_back(y.back());
  }
  EXPECT_NEAR(association_score(col, y), 1.0, 1e-12);

  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> noise(10000);
  std::vector<int> yn(10000);
  for (std::size_t i = 0; i < noise.size(); ++i) {
    noise[i] = u(rng);
    yn[i] = u(rng) < 0.5;
  }
  EXPECT_LT(association_score(noise, yn), 0.05);

  std::vector<double> scaled;
  for (double v : noise) scaled.push_back(3.0 * v - 7.0);
  EXPECT_EQ(association_score(noise, yn), association_score(scaled, yn));
}

TEST(Association, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng() % 200;
    std::vector<double> col(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = std::floor(u(rng) * 7);
      y[i] = (col[i] + u(rng) * 4) > 5;
    }
    const double s = association_score(col, y);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pc(n);
    std::vector<int> py(n);
    for (std::size_t i = 0; i < n; ++i) {
      pc[i] = col[perm[i]];
      py[i] = y[perm[i]];
    }
    ASSERT_NEAR(association_score(pc, py), s, 1e-12);
  }
}

TEST(Association, PluggableScorer) {
  Matrix x(4, 2);
  std::vector<int> y{0, 1, 0, 1};
  AssociationScorer constant = [](std::span<const double>, std::span<const int>) { return 0.25; };
  EXPECT_EQ(association_scores(x, y, constant), (std::vector<double>{0.25, 0.25}));
}

TEST(Split, Examples) {
  auto s = split_dataset(20634, 1);
  EXPECT_EQ(s.train.size(), 10000u);
  EXPECT_EQ(s.val.size(), 4127u);
  EXPECT_EQ(s.test.size(), 4127u);
  s = split_dataset(100, 1);
  EXPECT_EQ(s.train.size(), 60u);
  EXPECT_EQ(s.val.size(), 20u);
  EXPECT_EQ(s.test.size(), 20u);
  const auto a = split_dataset(500, 9), b = split_dataset(500, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_THROW(split_dataset(9, 1), std::invalid_argument);
}

TEST(Split, DisjointPartition) {
  for (std::size_t n : {10u, 11u, 57u, 1000u, 30001u}) {
    const auto s = split_dataset(n, n);
    std::set<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test})
      for (auto i : *part) {
        ASSERT_LT(i, n);
        ASSERT_TRUE(all.insert(i).second);
      }
    if (n <= 16666) {
      EXPECT_EQ(all.size(), n);
    }
  }
}

TEST(CvFolds, Rule) {
  EXPECT_EQ(cv_folds(7000), 1);
  EXPECT_EQ(cv_folds(5000), 2);
  EXPECT_EQ(cv_folds(3000), 2);
  EXPECT_EQ(cv_folds(6000), 2);
  EXPECT_EQ(cv_folds(2999), 3);
  EXPECT_EQ(cv_folds(1000), 3);
  EXPECT_EQ(cv_folds(500), 5);
}

TEST(Csv, ParseAndErrors) {
  std::istringstream ok("a,b,label\n1,2,0\n3.5,-1e3,1\n");
  const auto t = parse_csv(ok);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b", "label"}));
  EXPECT_EQ(t.values(1, 1), -1000.0);
  const auto d = to_dataset(t, "label");
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(d.labels, (std::vector<int>{0, 1}));
  EXPECT_THROW(to_dataset(t, "y"), std::runtime_error);

  std::istringstream missing("a,label\n,1\n");
  EXPECT_THROW(parse_csv(missing), std::runtime_error);
  std::istringstream nonbinary("a,label\n1,2\n");
  EXPECT_THROW(to_dataset(parse_csv(nonbinary), "label"), std::runtime_error);
  std::istringstream header_only("a,label\n");
  EXPECT_EQ(parse_csv(header_only).values.rows, 0u);
}

TEST(Csv, BindColumnsByName) {
  std::istringstream in("b,label,a\n2,1,1\n");
  const auto t = parse_csv(in);
  const auto m = bind_columns(t, {"a", "b"}, "label");
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 1), 2.0);
  try {
    bind_columns(t, {"a", "c"}, "label");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("missing: c"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("extra: b"), std::string::npos);
  }
}
