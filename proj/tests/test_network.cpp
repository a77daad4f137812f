#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

using namespace nrn;

namespace {

std::vector<Predicate> plain_predicates(std::size_t n, std::vector<std::string>& names) {
  std::vector<Predicate> p;
  for (std::size_t i = 0; i < n; ++i) {
    names.push_back("f" + std::to_string(i));
    p.push_back({i, names.back(), std::nullopt, MinMaxScaler{0.0, 1.0}});
  }
  return p;
}

}  // namespace

TEST(InitNetwork, MinimalNet) {
  std::vector<std::string> names;
  auto preds = plain_predicates(2, names);
  ArchitectureConfig cfg;
  cfg.n_layers = 1;
  cfg.layer_sizes = {1};
  cfg.n_selected_features_input = 2;
  const auto net = init_network(names, preds, cfg, 3);
  ASSERT_EQ(net.blocks.size(), 1u);
  EXPECT_EQ(net.root().kind, LogicKind::Conjunction);
  EXPECT_EQ(net.root().shape.out_size, 1u);
  EXPECT_LE(net.root().shape.in_size, 2u);
}

TEST(InitNetwork, DeterministicPerSeed) {
  std::vector<std::string> names;
  auto preds = plain_predicates(12, names);
  const auto a = init_network(names, preds, {}, 42);
  const auto b = init_network(names, preds, {}, 42);
  const auto c = init_network(names, preds, {}, 43);
  EXPECT_TRUE(a.blocks == b.blocks);
  EXPECT_FALSE(a.blocks == c.blocks);
}

TEST(InitNetwork, StructuralAudit) {
  std::vector<std::string> names;
  auto preds = plain_predicates(7, names);
  ArchitectureConfig cfg;
  cfg.layer_sizes = {4, 2};
  cfg.n_selected_features_input = 3;
  cfg.n_selected_features_internal = 2;
  cfg.n_selected_features_output = 2;
  const auto net = init_network(names, preds, cfg, 5);
  ASSERT_EQ(net.blocks.size(), 3u);
  EXPECT_EQ(net.blocks[0].kind, LogicKind::Conjunction);
  EXPECT_EQ(net.blocks[1].kind, LogicKind::Disjunction);
  EXPECT_EQ(net.blocks[2].kind, LogicKind::Conjunction);
  for (std::size_t o = 0; o < 4; ++o) {
    auto in = net.blocks[0].inputs_of(0, o);
    std::set<std::size_t> distinct(in.begin(), in.end());
    EXPECT_EQ(distinct.size(), 3u);
    for (auto i : in) EXPECT_LT(i, 7u);
  }
  for (const auto& b : net.blocks)
    for (double w : b.weights.data()) {
      EXPECT_GE(std::abs(w), 0.01 * 0.2);
      EXPECT_LE(std::abs(w), 0.2);
    }
  EXPECT_EQ(parameter_count(net), 4u * 3 + 2 * 2 + 1 * 2);
}

TEST(InitNetwork, CnfStartsWithDisjunction) {
  std::vector<std::string> names;
  auto preds = plain_predicates(10, names);
  ArchitectureConfig cfg;
  cfg.normal_form = NormalForm::Cnf;
  const auto net = init_network(names, preds, cfg, 1);
  EXPECT_EQ(net.blocks[0].kind, LogicKind::Disjunction);
  EXPECT_EQ(net.root().kind, LogicKind::Disjunction);  // three blocks: Or, And, Or
}

TEST(InitNetwork, NegationsOnlyWhenEnabled) {
  std::vector<std::string> names;
  auto preds = plain_predicates(10, names);
  ArchitectureConfig cfg;
  cfg.add_negations = false;
  const auto net = init_network(names, preds, cfg, 9);
  for (const auto& b : net.blocks)
    for (double w : b.weights.data()) EXPECT_GT(w, 0.0);
  cfg.add_negations = true;
  const auto neg = init_network(names, preds, cfg, 9);
  std::size_t negatives = 0, total = 0;
  for (const auto& b : neg.blocks)
    for (double w : b.weights.data()) {
      negatives += w < 0;
      ++total;
    }
  EXPECT_GT(negatives, total / 5);
  EXPECT_LT(negatives, total * 4 / 5);
}

TEST(InitNetwork, SelectionClampedToAvailableInputs) {
  std::vector<std::string> names;
  auto preds = plain_predicates(5, names);
  ArchitectureConfig cfg;
  cfg.n_selected_features_input = 6;
  cfg.layer_sizes = {16, 3};
  auto net = init_network(names, preds, cfg, 1);
  EXPECT_EQ(net.blocks[0].shape.in_size, 5u);
  EXPECT_EQ(net.blocks[1].shape.in_size, 4u);
  EXPECT_EQ(net.blocks[2].shape.in_size, 3u);
  EXPECT_NO_THROW(net.validate());
  cfg.n_selected_features_input = 0;
  EXPECT_THROW(init_network(names, preds, cfg, 1), std::invalid_argument);
}

TEST(Predict, EmptyBatchAndWidthMismatch) {
  std::vector<std::string> names;
  auto preds = plain_predicates(9, names);
  const auto net = init_network(names, preds, {}, 2);
  EXPECT_TRUE(predict(net, Matrix(0, 9)).empty());
  EXPECT_THROW(predict(net, Matrix(2, 8)), std::invalid_argument);
}

TEST(Predict, BatchInvarianceAndRange) {
  std::vector<std::string> names;
  auto preds = plain_predicates(9, names);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1), w(-3, 3);
  auto net = init_network(names, preds, {}, 2);
  for (auto& b : net.blocks)
    for (auto& v : b.weights.data()) v = w(rng);
  Matrix x(20, 9);
  for (auto& v : x.data) v = u(rng);
  const auto all = predict(net, x);
  for (std::size_t r = 0; r < x.rows; ++r) {
    Matrix one(1, 9);
    for (std::size_t c = 0; c < 9; ++c) one(0, c) = x(r, c);
    const auto s = predict(net, one);
    EXPECT_NEAR(s[0], all[r], 1e-12);
    EXPECT_GE(all[r], 0.0);
    EXPECT_LE(all[r], 1.0);
  }
}

TEST(Predict, UnitWeightsMatchBooleanOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 7;
    const auto net = nrn_test::random_unit_network(rng, n, 1 + rng() % 3);
    Matrix x(std::size_t(1) << n, n);
    for (std::size_t m = 0; m < x.rows; ++m)
      for (std::size_t j = 0; j < n; ++j) x(m, j) = (m >> j) & 1u;
    const auto s = predict(net, x);
    for (std::size_t m = 0; m < x.rows; ++m) {
      std::vector<bool> a(n);
      for (std::size_t j = 0; j < n; ++j) a[j] = (m >> j) & 1u;
      ASSERT_EQ(s[m], nrn_test::boolean_network(net, a) ? 1.0 : 0.0);
    }
  }
}

TEST(Network, ValidateCatchesBrokenStructure) {
  std::vector<std::string> names;
  auto preds = plain_predicates(9, names);
  auto net = init_network(names, preds, {}, 2);
  EXPECT_NO_THROW(net.validate());
  auto dup = net;
  dup.blocks[0].inputs_of(0, 0)[1] = dup.blocks[0].inputs_of(0, 0)[0];
  EXPECT_THROW(dup.validate(), std::logic_error);
  auto same_kind = net;
  same_kind.blocks[1].kind = same_kind.blocks[0].kind;
  EXPECT_THROW(same_kind.validate(), std::logic_error);
  auto oob = net;
  oob.blocks[1].inputs_of(0, 0)[0] = 999;
  EXPECT_THROW(oob.validate(), std::logic_error);
}

TEST(ParameterCount, SingleNode) {
  std::vector<std::string> names;
  auto preds = plain_predicates(5, names);
  ArchitectureConfig cfg;
  cfg.n_layers = 1;
  cfg.layer_sizes = {1};
  cfg.n_selected_features_input = 5;
  EXPECT_EQ(parameter_count(init_network(names, preds, cfg, 1)), 5u);
}
