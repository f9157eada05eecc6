#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace draftfe {

// Error taxonomy mirrored by the CLI exit codes.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// mt19937_64 with hand-rolled transforms so that streams are bit-identical
// across standard library implementations (std distributions are not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  static Rng derived(uint64_t seed, uint64_t stream) {
    return Rng(splitmix64(seed ^ splitmix64(stream + 1)));
  }

  // uniform on [0, 1)
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0, n)
  int64_t uniform_int(int64_t n) {
    int64_t v = int64_t(uniform() * double(n));
    return v >= n ? n - 1 : v;
  }

  // Box-Muller; the spare deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mu, double sd) { return mu + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the regularized incomplete beta (Lentz).
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double lnb = std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0))
    return lnb * betacf(a, b, x) / a;
  return 1.0 - lnb * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// P(T <= t) for Student-t with dof degrees of freedom.
inline double student_t_cdf(double t, double dof) {
  if (dof <= 0.0) throw numeric_error("student_t_cdf: dof must be positive");
  double x = dof / (dof + t * t);
  double p = 0.5 * detail::inc_beta(0.5 * dof, 0.5, x);
  return t >= 0.0 ? 1.0 - p : p;
}

// two-sided p-value for a t statistic
inline double student_t_pvalue(double t, double dof) {
  double p = 2.0 * (1.0 - student_t_cdf(std::fabs(t), dof));
  return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

// upper quantile, bisection on the CDF
inline double student_t_quantile(double p, double dof) {
  if (p <= 0.0 || p >= 1.0) throw numeric_error("student_t_quantile: p in (0,1) required");
  double lo = -1e3, hi = 1e3;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, dof) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace draftfe
