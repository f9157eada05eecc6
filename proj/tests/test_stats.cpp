#include <catch2/catch_amalgamated.hpp>

#include "draftfe/common.hpp"

using namespace draftfe;

TEST_CASE("student t cdf matches closed forms and tables") {
  // dof = 1 is a Cauchy: F(t) = 1/2 + atan(t)/pi
  CHECK(student_t_cdf(1.0, 1.0) == Catch::Approx(0.75).epsilon(1e-10));
  CHECK(student_t_cdf(0.0, 5.0) == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(student_t_cdf(2.228138851986273, 10.0) == Catch::Approx(0.975).epsilon(1e-9));
  CHECK(student_t_cdf(-2.228138851986273, 10.0) == Catch::Approx(0.025).epsilon(1e-7));
}

TEST_CASE("student t quantiles reproduce standard table values") {
  struct Row {
    double dof, q975;
  };
  const Row rows[] = {{1, 12.70620474}, {2, 4.30265273},  {5, 2.57058184},
                      {10, 2.22813885}, {30, 2.04227246}, {120, 1.97993041}};
  for (const auto& r : rows)
    CHECK(student_t_quantile(0.975, r.dof) == Catch::Approx(r.q975).epsilon(1e-6));
  // approaches the normal quantile for large dof
  CHECK(student_t_quantile(0.975, 1e6) == Catch::Approx(1.95996).epsilon(1e-4));
}

TEST_CASE("two-sided p-values") {
  CHECK(student_t_pvalue(0.0, 10) == Catch::Approx(1.0));
  CHECK(student_t_pvalue(2.228138851986273, 10) == Catch::Approx(0.05).epsilon(1e-7));
  CHECK(student_t_pvalue(-2.228138851986273, 10) == Catch::Approx(0.05).epsilon(1e-7));
  CHECK(student_t_pvalue(100.0, 10) < 1e-10);
}

TEST_CASE("rng streams are deterministic and independent per stream id") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng c = Rng::derived(7, 0), d = Rng::derived(7, 1);
  CHECK(c.uniform() != d.uniform());
}

TEST_CASE("rng normal moments are sane") {
  Rng rng(123);
  double sum = 0, sumsq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal();
    sum += v;
    sumsq += v * v;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(sumsq / n == Catch::Approx(1.0).margin(0.02));
}
