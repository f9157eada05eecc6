#include <catch2/catch_amalgamated.hpp>

#include "draftfe/feols.hpp"
#include "helpers.hpp"

using namespace draftfe;

namespace {

Design make_design(std::vector<double> y, std::vector<std::vector<double>> cols,
                   std::vector<std::string> names) {
  Design d;
  d.y = Eigen::Map<Eigen::VectorXd>(y.data(), Eigen::Index(y.size()));
  d.X.resize(Eigen::Index(y.size()), Eigen::Index(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j)
    for (size_t i = 0; i < y.size(); ++i) d.X(Eigen::Index(i), Eigen::Index(j)) = cols[j][i];
  d.names = std::move(names);
  return d;
}

}  // namespace

TEST_CASE("single-dimension demeaning subtracts level means exactly") {
  auto d = make_design({1, 2, 3, 4}, {}, {});
  d.X.resize(4, 0);
  auto fe = make_fe("unit", {1, 1, 2, 2});
  auto info = demean(d, {fe});
  CHECK(info.converged);
  CHECK(d.y[0] == Catch::Approx(-0.5));
  CHECK(d.y[1] == Catch::Approx(0.5));
  CHECK(d.y[2] == Catch::Approx(-0.5));
  CHECK(d.y[3] == Catch::Approx(0.5));
}

TEST_CASE("columns constant within levels vanish under demeaning") {
  auto d = make_design({5, 5, 9, 9}, {{3, 3, 7, 7}}, {"x"});
  auto fe = make_fe("unit", {1, 1, 2, 2});
  demean(d, {fe});
  CHECK(d.y.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d.X.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("demeaning is idempotent and scale equivariant") {
  testutil::Rng rng(11);
  auto inst = testutil::random_instance(rng, 120, 10, 6, 2);
  Design d{{"a", "b"}, inst.X, inst.y};
  demean(d, inst.fes);
  Design again = d;
  demean(again, inst.fes);
  CHECK((again.y - d.y).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((again.X - d.X).cwiseAbs().maxCoeff() < 1e-9);

  Design scaled{{"a", "b"}, inst.X * 1000.0, inst.y * 1000.0};
  demean(scaled, inst.fes);
  CHECK((scaled.y - d.y * 1000.0).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("alternating projections shrink the column norm monotonically") {
  testutil::Rng rng(12);
  auto inst = testutil::random_instance(rng, 200, 20, 15, 1);
  double prev = inst.y.squaredNorm();
  // projections only ever remove norm, sweep by sweep
  Eigen::VectorXd col = inst.y;
  for (int sweep = 0; sweep < 20; ++sweep) {
    for (const auto& fe : inst.fes) {
      std::vector<double> sum(fe.n_levels, 0.0);
      std::vector<int> cnt(fe.n_levels, 0);
      for (Eigen::Index i = 0; i < col.size(); ++i) {
        sum[fe.level[i]] += col[i];
        cnt[fe.level[i]]++;
      }
      for (int g = 0; g < fe.n_levels; ++g)
        if (cnt[g]) sum[g] /= cnt[g];
      for (Eigen::Index i = 0; i < col.size(); ++i) col[i] -= sum[fe.level[i]];
      double cur = col.squaredNorm();
      CHECK(cur <= prev + 1e-9);
      prev = cur;
    }
  }
}

TEST_CASE("known two-by-two crossed design recovers the unit slope") {
  // y = unit_fx + group_fx + 1.0 * x
  std::vector<long long> unit = {1, 1, 2, 2, 1, 2};
  std::vector<long long> grp = {1, 2, 1, 2, 2, 1};
  std::vector<double> x = {0, 1, 2, 3, 4, 5};
  std::vector<double> ufx = {3, 3, -1, -1, 3, -1};
  std::vector<double> gfx = {2, -2, 2, -2, -2, 2};
  std::vector<double> y(6);
  for (int i = 0; i < 6; ++i) y[i] = ufx[i] + gfx[i] + 1.0 * x[i];
  auto d = make_design(y, {x}, {"x"});
  auto res = fit(d, {make_fe("unit", unit), make_fe("group", grp)});
  REQUIRE(res.coef.size() == 1);
  CHECK(res.coef[0] == Catch::Approx(1.0).epsilon(1e-9));
  CHECK(res.ssr < 1e-16);
  CHECK(res.rmse < 1e-8);
  CHECK(res.fe_params == 3);  // 2 + 2 - 1 connected component
  CHECK(res.n_components == 1);
  CHECK(res.k_effective == 4.0);
}

TEST_CASE("fit matches the dense dummy-variable oracle on random instances") {
  testutil::Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 80 + int(rng.uniform_int(120));
    int units = 5 + int(rng.uniform_int(12));
    int groups = 3 + int(rng.uniform_int(8));
    int k = 1 + int(rng.uniform_int(3));
    auto inst = testutil::random_instance(rng, n, units, groups, k);
    std::vector<std::string> names;
    for (int j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
    Design d{names, inst.X, inst.y};
    auto mine = fit(d, inst.fes);
    auto oracle = testutil::dense_fwl_oracle(inst.X, inst.y, inst.fes);
    REQUIRE(mine.coef.size() == oracle.coef.size());
    for (Eigen::Index j = 0; j < mine.coef.size(); ++j) {
      double denom = std::max(1.0, std::fabs(oracle.coef[j]));
      CHECK(std::fabs(mine.coef[j] - oracle.coef[j]) / denom < 1e-8);
    }
    CHECK(std::fabs(mine.ssr - oracle.ssr) / std::max(1.0, oracle.ssr) < 1e-8);
  }
}

TEST_CASE("collinear columns are dropped and named") {
  testutil::Rng rng(7);
  auto inst = testutil::random_instance(rng, 100, 8, 5, 2);
  Eigen::MatrixXd X(100, 3);
  X.leftCols(2) = inst.X;
  X.col(2) = 2.0 * inst.X.col(0) - inst.X.col(1);
  Design d{{"x0", "x1", "dup"}, X, inst.y};
  auto res = fit(d, inst.fes);
  CHECK(res.rank == 2);
  REQUIRE(res.dropped_columns.size() == 1);
  bool flagged = false;
  for (const auto& f : res.flags)
    if (f.find("dropped_collinear") != std::string::npos) flagged = true;
  CHECK(flagged);
}

TEST_CASE("singleton FE rows are counted and flagged") {
  auto d = make_design({1, 2, 3, 4, 5}, {{1, 0, 2, 1, 3}}, {"x"});
  auto res = fit(d, {make_fe("unit", {1, 1, 2, 2, 3})});
  CHECK(res.n_singleton_rows == 1);
  bool flagged = false;
  for (const auto& f : res.flags)
    if (f.rfind("singleton_fe_rows", 0) == 0) flagged = true;
  CHECK(flagged);
}

TEST_CASE("fit statistics on a hand-checked instance") {
  // one FE dimension, all in one level: demeaning is plain centering
  std::vector<double> x = {-3, -1, 1, 3};
  std::vector<double> y = {-6, -2, 2, 6};  // y = 2x, centered
  auto d = make_design(y, {x}, {"x"});
  auto res = fit(d, {make_fe("unit", {1, 1, 1, 1})});
  CHECK(res.coef[0] == Catch::Approx(2.0));
  CHECK(res.ssr < 1e-20);
  CHECK(res.within_r2 == Catch::Approx(1.0));
  CHECK(res.adj_r2 == Catch::Approx(1.0));
  CHECK(res.fe_params == 1);
  CHECK(res.k_effective == 2.0);
}

TEST_CASE("fit_stats conventions") {
  auto s = fit_stats(8.0, 10, 4.0, 50.0, 20.0);
  CHECK(s.rmse == Catch::Approx(std::sqrt(0.8)));
  CHECK(s.adj_r2 == Catch::Approx(1.0 - (8.0 / 6.0) / (50.0 / 9.0)));
  CHECK(s.within_r2 == Catch::Approx(1.0 - 8.0 / 20.0));
  auto z = fit_stats(0.0, 10, 4.0, 50.0, 0.0);
  CHECK(z.zero_within_variance);
}

TEST_CASE("three FE dimensions against the dense oracle") {
  testutil::Rng rng(77);
  const int n = 150;
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  std::vector<long long> a(n), b(n), c(n);
  for (int i = 0; i < n; ++i) {
    a[i] = rng.uniform_int(8);
    b[i] = rng.uniform_int(6);
    c[i] = rng.uniform_int(4);
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    y[i] = 0.5 * a[i] - 0.7 * b[i] + 1.1 * c[i] + 2.0 * X(i, 0) - 1.0 * X(i, 1) +
           rng.normal(0, 0.3);
  }
  std::vector<FixedEffectDim> fes = {make_fe("a", a), make_fe("b", b), make_fe("c", c)};
  Design d{{"x0", "x1"}, X, y};
  auto mine = fit(d, fes);
  auto oracle = testutil::dense_fwl_oracle(X, y, fes);
  for (Eigen::Index j = 0; j < 2; ++j)
    CHECK(mine.coef[j] == Catch::Approx(oracle.coef[j]).epsilon(1e-7));
}

TEST_CASE("demean input validation") {
  auto d = make_design({1, 2}, {}, {});
  d.X.resize(2, 0);
  CHECK_THROWS_AS(demean(d, {}), numeric_error);
  auto fe = make_fe("unit", {1});
  CHECK_THROWS_AS(demean(d, {fe}), numeric_error);
  auto fe2 = make_fe("unit", {1, 2});
  CHECK_THROWS_AS(demean(d, {fe2}, -1.0), numeric_error);
}
