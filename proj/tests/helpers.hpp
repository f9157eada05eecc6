#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <vector>

#include "draftfe/common.hpp"
#include "draftfe/feols.hpp"
#include "draftfe/grouping.hpp"

namespace testutil {

using draftfe::Rng;

// --- clustering oracles -----------------------------------------------------

using Partition = std::set<std::vector<long long>>;  // sorted member ids per group

inline Partition to_partition(const std::vector<draftfe::SwimGroup>& groups) {
  Partition p;
  for (const auto& g : groups) {
    auto m = g.member_result_ids;
    std::sort(m.begin(), m.end());
    p.insert(m);
  }
  return p;
}

// single linkage in 1-D: sort, split where the adjacent gap exceeds the threshold
inline Partition gap_split_oracle(std::vector<std::pair<long long, double>> times,
                                  double threshold) {
  std::sort(times.begin(), times.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  Partition p;
  std::vector<long long> cur;
  for (size_t i = 0; i < times.size(); ++i) {
    if (i > 0 && times[i].second - times[i - 1].second > threshold) {
      std::sort(cur.begin(), cur.end());
      p.insert(cur);
      cur.clear();
    }
    cur.push_back(times[i].first);
  }
  if (!cur.empty()) {
    std::sort(cur.begin(), cur.end());
    p.insert(cur);
  }
  return p;
}

// brute-force agglomerative reference recomputing all pairwise linkage
// distances each step; ties resolve to the pair ordered by each cluster's
// smallest (time, id) member
inline Partition brute_agglomerative_oracle(
    const std::vector<std::pair<long long, double>>& times, draftfe::Linkage linkage,
    double threshold) {
  struct Cluster {
    std::vector<size_t> members;
  };
  std::vector<Cluster> clusters;
  for (size_t i = 0; i < times.size(); ++i) clusters.push_back({{i}});

  auto key = [&](const Cluster& c) {
    double t = 1e300;
    long long id = 0;
    for (size_t m : c.members) {
      if (times[m].second < t ||
          (times[m].second == t && times[m].first < id)) {
        t = times[m].second;
        id = times[m].first;
      }
    }
    return std::make_pair(t, id);
  };
  auto dist = [&](const Cluster& a, const Cluster& b) {
    double best = linkage == draftfe::Linkage::Single ? 1e300 : -1e300;
    for (size_t i : a.members)
      for (size_t j : b.members) {
        double d = std::fabs(times[i].second - times[j].second);
        best = linkage == draftfe::Linkage::Single ? std::min(best, d) : std::max(best, d);
      }
    return best;
  };

  while (clusters.size() > 1) {
    double best_d = 1e300;
    size_t bi = 0, bj = 0;
    std::pair<double, long long> best_key1, best_key2;
    bool have = false;
    for (size_t i = 0; i < clusters.size(); ++i)
      for (size_t j = i + 1; j < clusters.size(); ++j) {
        double d = dist(clusters[i], clusters[j]);
        auto k1 = key(clusters[i]), k2 = key(clusters[j]);
        if (k2 < k1) std::swap(k1, k2);
        bool better = !have || d < best_d ||
                      (d == best_d && std::make_pair(k1, k2) <
                                          std::make_pair(best_key1, best_key2));
        if (better) {
          best_d = d;
          bi = i;
          bj = j;
          best_key1 = k1;
          best_key2 = k2;
          have = true;
        }
      }
    if (best_d > threshold) break;
    for (size_t m : clusters[bj].members) clusters[bi].members.push_back(m);
    clusters.erase(clusters.begin() + bj);
  }

  Partition p;
  for (const auto& c : clusters) {
    std::vector<long long> ids;
    for (size_t m : c.members) ids.push_back(times[m].first);
    std::sort(ids.begin(), ids.end());
    p.insert(ids);
  }
  return p;
}

// --- dense dummy-variable OLS oracle ---------------------------------------

// Residualize X and y on the column span of the full FE dummy matrix (plus
// intercept) via a dense orthogonal basis, then run plain OLS. Independent of
// the alternating-projection implementation path.
struct DenseOracle {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  double ssr = 0;
};

inline DenseOracle dense_fwl_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const std::vector<draftfe::FixedEffectDim>& fes) {
  const Eigen::Index n = y.size();
  Eigen::Index total = 1;
  for (const auto& fe : fes) total += fe.n_levels;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, total);
  D.col(0).setOnes();
  Eigen::Index off = 1;
  for (const auto& fe : fes) {
    for (Eigen::Index i = 0; i < n; ++i) D(i, off + fe.level[i]) = 1.0;
    off += fe.n_levels;
  }
  // orthonormal basis of the dummy span
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> dqr(D);
  dqr.setThreshold(1e-12);
  Eigen::Index r = dqr.rank();
  Eigen::MatrixXd Q = Eigen::MatrixXd(dqr.householderQ()).leftCols(r);

  Eigen::MatrixXd Xr = X - Q * (Q.transpose() * X);
  Eigen::VectorXd yr = y - Q * (Q.transpose() * y);

  DenseOracle out;
  out.coef = Xr.colPivHouseholderQr().solve(yr);
  out.residuals = yr - Xr * out.coef;
  out.ssr = out.residuals.squaredNorm();
  return out;
}

// random panel-shaped regression instance
struct RandomInstance {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<draftfe::FixedEffectDim> fes;
  std::vector<long long> dim1, dim2;
};

inline RandomInstance random_instance(Rng& rng, int n, int n_units, int n_groups, int k) {
  RandomInstance inst;
  inst.X.resize(n, k);
  inst.y.resize(n);
  std::vector<long long> a(n), b(n);
  std::vector<double> unit_fx(n_units), group_fx(n_groups);
  for (auto& v : unit_fx) v = rng.normal(0, 2);
  for (auto& v : group_fx) v = rng.normal(0, 2);
  Eigen::VectorXd beta(k);
  for (int j = 0; j < k; ++j) beta[j] = rng.normal(0, 1);
  for (int i = 0; i < n; ++i) {
    a[i] = rng.uniform_int(n_units);
    b[i] = rng.uniform_int(n_groups);
    for (int j = 0; j < k; ++j) inst.X(i, j) = rng.normal(0, 1);
    inst.y[i] = unit_fx[a[i]] + group_fx[b[i]] + inst.X.row(i).dot(beta) + rng.normal(0, 0.5);
  }
  inst.dim1 = a;
  inst.dim2 = b;
  inst.fes.push_back(draftfe::make_fe("unit", a));
  inst.fes.push_back(draftfe::make_fe("group", b));
  return inst;
}

}  // namespace testutil
