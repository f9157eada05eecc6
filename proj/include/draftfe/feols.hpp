#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "draftfe/common.hpp"

namespace draftfe {

struct FixedEffectDim {
  std::string name;
  std::vector<int> level;  // level id per row, 0-based dense
  int n_levels = 0;
};

inline FixedEffectDim make_fe(std::string name, const std::vector<long long>& raw) {
  FixedEffectDim fe;
  fe.name = std::move(name);
  std::map<long long, int> ids;
  fe.level.reserve(raw.size());
  for (long long v : raw) {
    auto [it, inserted] = ids.emplace(v, int(ids.size()));
    fe.level.push_back(it->second);
  }
  fe.n_levels = int(ids.size());
  return fe;
}

struct Design {
  std::vector<std::string> names;
  Eigen::MatrixXd X;  // n x k
  Eigen::VectorXd y;
};

struct DemeanInfo {
  int sweeps = 0;
  bool converged = false;
  double max_delta = 0.0;
};

// Alternating projections: subtract level means per FE dimension until the
// largest per-sweep column change falls below tol (relative to the column's
// initial max magnitude). Exact after one sweep for a single dimension.
inline DemeanInfo demean(Design& design, const std::vector<FixedEffectDim>& fes,
                         double tol = 1e-10, int max_iter = 10000) {
  if (fes.empty()) throw numeric_error("demean: at least one FE dimension required");
  if (tol <= 0) throw numeric_error("demean: tol must be positive");
  const Eigen::Index n = design.y.size();
  const Eigen::Index k = design.X.cols();
  for (const auto& fe : fes)
    if (Eigen::Index(fe.level.size()) != n)
      throw numeric_error("demean: FE dimension '" + fe.name + "' length mismatch");

  std::vector<double> scale(k + 1, 1.0);
  scale[0] = std::max(1.0, design.y.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < k; ++j)
    scale[j + 1] = std::max(1.0, design.X.col(j).cwiseAbs().maxCoeff());

  auto sweep_column = [&](Eigen::Ref<Eigen::VectorXd> col) {
    double delta = 0.0;
    for (const auto& fe : fes) {
      std::vector<double> sum(fe.n_levels, 0.0);
      std::vector<int> cnt(fe.n_levels, 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sum[fe.level[i]] += col[i];
        cnt[fe.level[i]]++;
      }
      for (int g = 0; g < fe.n_levels; ++g)
        if (cnt[g] > 0) sum[g] /= cnt[g];
      for (Eigen::Index i = 0; i < n; ++i) {
        double m = sum[fe.level[i]];
        col[i] -= m;
        delta = std::max(delta, std::fabs(m));
      }
    }
    return delta;
  };

  DemeanInfo info;
  for (int it = 0; it < max_iter; ++it) {
    double delta = 0.0;
    delta = std::max(delta, sweep_column(design.y) / scale[0]);
    for (Eigen::Index j = 0; j < k; ++j)
      delta = std::max(delta, sweep_column(design.X.col(j)) / scale[j + 1]);
    info.sweeps = it + 1;
    info.max_delta = delta;
    if (delta < tol) {
      info.converged = true;
      break;
    }
  }
  if (!info.converged)
    throw numeric_error("demean: no convergence after " + std::to_string(max_iter) +
                        " sweeps (residual " + std::to_string(info.max_delta) + ")");
  return info;
}

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Identifiable FE parameter count including the overall intercept:
// L0 for one dimension; L0 + L1 - components for two (bipartite graph of
// the first two dimensions); each further dimension adds Ld - 1.
inline int fe_param_count(const std::vector<FixedEffectDim>& fes, int* n_components) {
  if (fes.empty()) return 0;
  if (fes.size() == 1) {
    if (n_components) *n_components = fes[0].n_levels;
    return fes[0].n_levels;
  }
  const auto& a = fes[0];
  const auto& b = fes[1];
  UnionFind uf(a.n_levels + b.n_levels);
  for (size_t i = 0; i < a.level.size(); ++i) uf.unite(a.level[i], a.n_levels + b.level[i]);
  std::vector<char> seen(a.n_levels + b.n_levels, 0);
  int comps = 0;
  for (int v = 0; v < a.n_levels + b.n_levels; ++v) {
    int r = uf.find(v);
    if (!seen[r]) {
      seen[r] = 1;
      comps++;
    }
  }
  if (n_components) *n_components = comps;
  int count = a.n_levels + b.n_levels - comps;
  for (size_t d = 2; d < fes.size(); ++d) count += fes[d].n_levels - 1;
  return count;
}

}  // namespace detail

struct FitResult {
  std::vector<std::string> names;   // retained regressors
  Eigen::VectorXd coef;
  Eigen::MatrixXd vcov;             // classical sigma^2 (X'X)^-1 placeholder
  Eigen::MatrixXd xtx_inv;          // bread for sandwich estimators
  Eigen::MatrixXd demeaned_X;       // retained columns after FE absorption
  Eigen::VectorXd residuals;
  long long n_obs = 0;
  int rank = 0;
  int fe_params = 0;                // absorbed FE dof incl. intercept
  int n_components = 0;
  double k_effective = 0;           // rank + fe_params
  std::vector<std::string> dropped_columns;
  double ssr = 0, sst = 0, ssr_fe = 0;
  double rmse = 0, adj_r2 = 0, within_r2 = 0;
  std::map<std::string, int> fe_level_counts;
  int n_singleton_rows = 0;
  std::vector<std::string> flags;
  DemeanInfo demean_info;
};

struct FitStats {
  double rmse = 0, adj_r2 = 0, within_r2 = 0;
  bool zero_within_variance = false;
};

inline FitStats fit_stats(double ssr, long long n, double k_effective, double sst,
                          double ssr_fe_only) {
  FitStats s;
  s.rmse = std::sqrt(ssr / double(n));
  double dof = double(n) - k_effective;
  if (dof <= 0 || sst <= 0) {
    s.adj_r2 = kNaN;
  } else {
    s.adj_r2 = 1.0 - (ssr / dof) / (sst / double(n - 1));
  }
  if (ssr_fe_only <= 1e-300) {
    s.zero_within_variance = true;
    s.within_r2 = 0.0;
  } else {
    s.within_r2 = 1.0 - ssr / ssr_fe_only;
    s.within_r2 = std::clamp(s.within_r2, 0.0, 1.0);
  }
  return s;
}

inline FitResult fit(const Design& design, const std::vector<FixedEffectDim>& fes,
                     double tol = 1e-10, int max_iter = 10000) {
  const Eigen::Index n = design.y.size();
  const Eigen::Index k = design.X.cols();
  if (n <= k) throw numeric_error("fit: more regressors than observations");

  FitResult out;
  out.n_obs = n;
  double ymean = design.y.mean();
  out.sst = (design.y.array() - ymean).square().sum();

  Design dm = design;
  out.demean_info = demean(dm, fes, tol, max_iter);
  out.ssr_fe = dm.y.squaredNorm();

  // rank-revealing column-pivoted QR; columns beyond the numerical rank
  // are reported as dropped
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dm.X);
  qr.setThreshold(1e-10);
  int rank = int(qr.rank());
  if (rank == 0 && k > 0)
    throw numeric_error("fit: all regressor columns dropped as collinear");
  out.rank = rank;

  const auto& perm = qr.colsPermutation().indices();
  std::vector<int> kept(perm.data(), perm.data() + rank);
  std::sort(kept.begin(), kept.end());
  std::vector<char> is_kept(k, 0);
  for (int j : kept) is_kept[j] = 1;
  for (Eigen::Index j = 0; j < k; ++j)
    if (!is_kept[j]) out.dropped_columns.push_back(design.names[j]);

  Eigen::MatrixXd Xk(n, rank);
  for (int j = 0; j < rank; ++j) {
    Xk.col(j) = dm.X.col(kept[j]);
    out.names.push_back(design.names[kept[j]]);
  }

  if (rank > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> sqr(Xk);
    out.coef = sqr.solve(dm.y);
    Eigen::MatrixXd R = sqr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
    Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(rank, rank));
    out.xtx_inv = Rinv * Rinv.transpose();
    out.residuals = dm.y - Xk * out.coef;
  } else {
    out.coef.resize(0);
    out.xtx_inv.resize(0, 0);
    out.residuals = dm.y;
  }
  out.demeaned_X = std::move(Xk);

  out.fe_params = detail::fe_param_count(fes, &out.n_components);
  out.k_effective = double(out.rank + out.fe_params);
  for (const auto& fe : fes) out.fe_level_counts[fe.name] = fe.n_levels;

  // rows alone in a level of some dimension carry no within information
  for (const auto& fe : fes) {
    std::vector<int> cnt(fe.n_levels, 0);
    for (int g : fe.level) cnt[g]++;
    int singletons = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (cnt[fe.level[i]] == 1) singletons++;
    out.n_singleton_rows = std::max(out.n_singleton_rows, singletons);
  }
  if (out.n_singleton_rows > 0)
    out.flags.push_back("singleton_fe_rows:" + std::to_string(out.n_singleton_rows));
  if (!out.dropped_columns.empty()) {
    std::string msg = "dropped_collinear:";
    for (const auto& d : out.dropped_columns) msg += " " + d;
    out.flags.push_back(msg);
  }

  out.ssr = out.residuals.squaredNorm();
  FitStats stats = fit_stats(out.ssr, n, out.k_effective, out.sst, out.ssr_fe);
  out.rmse = stats.rmse;
  out.adj_r2 = stats.adj_r2;
  out.within_r2 = stats.within_r2;
  if (stats.zero_within_variance) out.flags.push_back("zero_within_variance");

  if (rank > 0) {
    double dof = std::max(1.0, double(n) - out.k_effective);
    out.vcov = (out.ssr / dof) * out.xtx_inv;
  } else {
    out.vcov.resize(0, 0);
  }
  return out;
}

}  // namespace draftfe
