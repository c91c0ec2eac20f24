#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>

#include "slaterank/context.hpp"
#include "slaterank/random.hpp"

using namespace slaterank;

namespace {

InteractionMatrix labelled(const Matrix& counts) {
  InteractionMatrix m;
  for (std::size_t i = 0; i < counts.rows(); ++i) m.user_ids.push_back("u" + std::to_string(i));
  for (std::size_t j = 0; j < counts.cols(); ++j) m.widget_ids.push_back("w" + std::to_string(j));
  m.counts = counts;
  return m;
}

Matrix product_of(const InteractionMatrix& m, const SvdFactors& f) {
  Matrix out(m.user_ids.size(), m.widget_ids.size());
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j)
      out(i, j) = dot(f.user.at(m.user_ids[i]), f.widget.at(m.widget_ids[j]));
  return out;
}

ContextLayout small_layout() { return {2, 2, 1, 1}; }

}  // namespace

TEST(Factorize, IdentityRankOne) {
  const auto m = labelled(Matrix::identity(3));
  const auto f = factorize_interactions(m, 1);
  EXPECT_NEAR(f.user.at("u0")[0] * f.widget.at("w0")[0], 1.0, 1e-9);
}

TEST(Factorize, RankOneExact) {
  Matrix c(4, 3);
  const Vec u{1, 2, 0.5, 3}, v{2, 1, 4};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) c(i, j) = 2.5 * u[i] * v[j];
  const auto m = labelled(c);
  EXPECT_LE(frobenius_norm(subtract(product_of(m, factorize_interactions(m, 1)), c)), 1e-8);
}

TEST(Factorize, BestRankFiveError) {
  Rng rng(17);
  Matrix c(20, 10);
  for (double& v : c.data()) v = std::poisson_distribution<int>(2.0)(rng);
  const auto m = labelled(c);
  const double err = frobenius_norm(subtract(product_of(m, factorize_interactions(m, 5)), c));

  Eigen::MatrixXd e(20, 10);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 10; ++j) e(long(i), long(j)) = c(i, j);
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues();
  const double best = std::sqrt(s.tail(5).squaredNorm());
  EXPECT_NEAR(err, best, 1e-7);
}

TEST(Factorize, SymmetricScaling) {
  const auto m = labelled(Matrix{{4, 0}, {0, 1}});
  const auto f = factorize_interactions(m, 2);
  EXPECT_NEAR(std::abs(f.user.at("u0")[0]), 2.0, 1e-12);
  EXPECT_NEAR(std::abs(f.widget.at("w0")[0]), 2.0, 1e-12);
}

TEST(Factorize, RankTooLarge) {
  EXPECT_THROW(factorize_interactions(labelled(Matrix(3, 2)), 3), RankTooLarge);
}

TEST(Temporal, ZeroPhase) {
  const Vec v = encode_temporal({0, 0, 1});
  ASSERT_EQ(v.size(), kTemporalDim);
  for (std::size_t i = 0; i < 6; i += 2) {
    EXPECT_EQ(v[i], 0.0);
    EXPECT_EQ(v[i + 1], 1.0);
  }
}

TEST(Temporal, HourQuarterAndHalf) {
  const Vec six = encode_temporal({6, 0, 1});
  EXPECT_NEAR(six[0], 1.0, 1e-12);
  EXPECT_NEAR(six[1], 0.0, 1e-12);
  const Vec noon = encode_temporal({12, 0, 1});
  EXPECT_NEAR(noon[0], 0.0, 1e-12);
  EXPECT_NEAR(noon[1], -1.0, 1e-12);
}

TEST(Temporal, AllComponentsBounded) {
  for (int h = 0; h < 24; ++h)
    for (int d = 0; d < 7; ++d)
      for (int y : {1, 100, 365, 366})
        for (double v : encode_temporal({h, d, y})) {
          EXPECT_GE(v, -1.0);
          EXPECT_LE(v, 1.0);
        }
}

TEST(Temporal, OutOfRange) {
  EXPECT_THROW(encode_temporal({24, 0, 1}), OutOfRange);
  EXPECT_THROW(encode_temporal({0, 7, 1}), OutOfRange);
  EXPECT_THROW(encode_temporal({0, 0, 0}), OutOfRange);
  EXPECT_THROW(encode_temporal({0, 0, 367}), OutOfRange);
  EXPECT_THROW(encode_temporal({-1, 0, 1}), OutOfRange);
}

TEST(Temporal, MinuteClock) {
  const auto t = temporal_at_minute(60 * 24 * 8 + 61, 1);
  EXPECT_EQ(t.hour_of_day, 1);
  EXPECT_EQ(t.day_of_week, 1);
  EXPECT_EQ(t.day_of_year, 9);
}

TEST(BuildContext, Dimension) {
  EXPECT_EQ(small_layout().z(), 13u);
}

TEST(BuildContext, ZeroComponents) {
  const auto lay = small_layout();
  SvdFactors svd;
  svd.k = 1;
  svd.user["u"] = {0.0};
  svd.widget["w"] = {0.0};
  const UserProfile u{"u", {0, 0}, {0}};
  const WidgetMeta w{"w", {0, 0}, true};
  // Temporal phase is not zero, so only the non-temporal part vanishes.
  const auto cv = build_context(lay, u, w, svd, {0, 0, 1});
  ASSERT_EQ(cv.x.size(), 13u);
  for (std::size_t i = 0; i < lay.temporal_offset(); ++i) EXPECT_EQ(cv.x[i], 0.0);
}

TEST(BuildContext, OrderAndColdStart) {
  const auto lay = small_layout();
  SvdFactors svd;
  svd.k = 1;
  svd.user["u"] = {7.0};
  svd.widget["known"] = {9.0};
  const UserProfile u{"u", {1, 2}, {5}};
  const auto known = build_context(lay, u, {"known", {3, 4}, true}, svd, {6, 0, 1}, 42);
  EXPECT_EQ(known.x[0], 1.0);
  EXPECT_EQ(known.x[1], 2.0);
  EXPECT_EQ(known.x[2], 3.0);
  EXPECT_EQ(known.x[3], 4.0);
  EXPECT_EQ(known.x[4], 7.0);
  EXPECT_EQ(known.x[5], 9.0);
  EXPECT_EQ(known.x[6], 5.0);
  EXPECT_NEAR(known.x[7], 1.0, 1e-12);
  EXPECT_EQ(known.timestamp, 42);
  EXPECT_EQ(known.widget_id, "known");

  const auto cold = build_context(lay, u, {"fresh", {3, 4}, true}, svd, {6, 0, 1});
  EXPECT_EQ(cold.x[lay.widget_svd_offset()], 0.0);
  for (std::size_t i = 0; i < cold.x.size(); ++i) {
    if (i != lay.widget_svd_offset()) {
      EXPECT_EQ(cold.x[i], known.x[i]) << i;
    }
  }
}

TEST(BuildContext, DeterministicAndFixedDimension) {
  const auto lay = small_layout();
  SvdFactors svd;
  svd.k = 1;
  const UserProfile u{"u", {0.1, 0.2}, {0.3}};
  const WidgetMeta w{"w", {0.4, 0.5}, true};
  const auto a = build_context(lay, u, w, svd, {3, 4, 5});
  const auto b = build_context(lay, u, w, svd, {3, 4, 5});
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.x.size(), lay.z());
}

TEST(BuildContext, DimensionMismatch) {
  const auto lay = small_layout();
  SvdFactors svd;
  svd.k = 1;
  EXPECT_THROW(build_context(lay, {"u", {1}, {0}}, {"w", {1, 2}, true}, svd, {}), DimensionMismatch);
  EXPECT_THROW(build_context(lay, {"u", {1, 2}, {0}}, {"w", {1}, true}, svd, {}), DimensionMismatch);
  EXPECT_THROW(build_context(lay, {"u", {1, 2}, {}}, {"w", {1, 2}, true}, svd, {}), DimensionMismatch);
  svd.k = 2;
  EXPECT_THROW(build_context(lay, {"u", {1, 2}, {0}}, {"w", {1, 2}, true}, svd, {}), DimensionMismatch);
}

TEST(Ingest, Embeddings) {
  std::istringstream in(R"({"id": "a", "vector": [1, 2.5]}

{"id": "b", "vector": [-1, 0]}
)");
  const auto recs = read_embeddings(in);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].id, "b");
  EXPECT_EQ(recs[0].vector, (Vec{1, 2.5}));
}

TEST(Ingest, EmbeddingErrorsCarryLine) {
  std::istringstream bad_len(R"({"id": "a", "vector": [1, 2]}
{"id": "b", "vector": [1]})");
  try {
    read_embeddings(bad_len);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream not_json("{\"id\": \"a\", \"vector\": [1]}\n{oops");
  try {
    read_embeddings(not_json);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream no_id(R"({"vector": [1]})");
  EXPECT_THROW(read_embeddings(no_id), SchemaError);
}

TEST(Ingest, InteractionsAccumulateAndSort) {
  std::istringstream in(R"({"user": "u2", "widget": "wb", "count": 2}
{"user": "u1", "widget": "wa", "count": 1}
{"user": "u2", "widget": "wb", "count": 3})");
  const auto m = read_interactions(in);
  EXPECT_EQ(m.user_ids, (std::vector<std::string>{"u1", "u2"}));
  EXPECT_EQ(m.widget_ids, (std::vector<std::string>{"wa", "wb"}));
  EXPECT_EQ(m.counts(1, 1), 5.0);
  EXPECT_EQ(m.counts(0, 0), 1.0);
  EXPECT_EQ(m.counts(0, 1), 0.0);
}

TEST(Ingest, InteractionCountMustBePositive) {
  std::istringstream in(R"({"user": "u", "widget": "w", "count": 0})");
  EXPECT_THROW(read_interactions(in), SchemaError);
  std::istringstream frac(R"({"user": "u", "widget": "w", "count": 1.5})");
  EXPECT_THROW(read_interactions(frac), SchemaError);
}
