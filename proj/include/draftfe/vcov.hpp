#pragma once

#include <Eigen/Dense>
#include <bit>
#include <map>
#include <string>
#include <vector>

#include "draftfe/feols.hpp"

namespace draftfe {

enum class VcovKind { HC1, ClusterOneWay, ClusterMultiway, TwoWayFE };

struct VcovSpec {
  VcovKind kind = VcovKind::HC1;
  std::vector<std::string> dims;  // clustering dimension names
  bool small_sample = true;
};

struct VcovResult {
  Eigen::MatrixXd V;
  std::vector<std::string> flags;
  // smallest cluster count across dimensions; 0 for HC1 (p-values then use n-k)
  long long min_clusters = 0;
};

namespace detail {

inline void check_fit(const FitResult& fit) {
  if (fit.rank == 0) throw numeric_error("vcov: fit has no retained regressors");
  if (fit.residuals.size() != fit.demeaned_X.rows())
    throw numeric_error("vcov: residual/design size mismatch");
}

inline Eigen::MatrixXd sandwich(const FitResult& fit, const Eigen::MatrixXd& meat) {
  return fit.xtx_inv * meat * fit.xtx_inv;
}

// score sums per cluster, meat = sum_g s_g s_g'. Accumulation follows the
// sorted cluster keys so the same partition yields bit-identical meat no
// matter how its labels are spelled.
template <typename Key>
Eigen::MatrixXd cluster_meat(const FitResult& fit, const std::vector<Key>& cluster_ids,
                             long long* n_clusters) {
  const Eigen::Index n = fit.demeaned_X.rows();
  const Eigen::Index k = fit.demeaned_X.cols();
  std::map<Key, Eigen::VectorXd> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, inserted] = scores.try_emplace(cluster_ids[i], Eigen::VectorXd::Zero(k));
    it->second += fit.demeaned_X.row(i).transpose() * fit.residuals[i];
  }
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [id, s] : scores) meat += s * s.transpose();
  *n_clusters = (long long)scores.size();
  return meat;
}

inline double cr1_factor(long long G, long long n, double k_eff, bool small_sample) {
  if (!small_sample) return 1.0;
  double dof = std::max(1.0, double(n) - k_eff);
  return (double(G) / double(G - 1)) * (double(n - 1) / dof);
}

}  // namespace detail

inline VcovResult hc1(const FitResult& fit) {
  detail::check_fit(fit);
  const Eigen::Index n = fit.demeaned_X.rows();
  const Eigen::Index k = fit.demeaned_X.cols();
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd x = fit.demeaned_X.row(i).transpose();
    meat += (fit.residuals[i] * fit.residuals[i]) * (x * x.transpose());
  }
  double dof = std::max(1.0, double(n) - fit.k_effective);
  VcovResult out;
  out.V = detail::sandwich(fit, meat) * (double(n) / dof);
  out.V = 0.5 * (out.V + out.V.transpose()).eval();
  return out;
}

inline VcovResult cluster_oneway(const FitResult& fit,
                                 const std::vector<long long>& cluster_ids,
                                 bool small_sample = true) {
  detail::check_fit(fit);
  const Eigen::Index n = fit.demeaned_X.rows();
  if (Eigen::Index(cluster_ids.size()) != n)
    throw numeric_error("cluster_oneway: cluster id vector length mismatch");
  long long G = 0;
  Eigen::MatrixXd meat = detail::cluster_meat(fit, cluster_ids, &G);
  if (G < 2) throw numeric_error("cluster_oneway: fewer than two clusters");
  VcovResult out;
  out.V = detail::sandwich(fit, meat) *
          detail::cr1_factor(G, n, fit.k_effective, small_sample);
  out.V = 0.5 * (out.V + out.V.transpose()).eval();
  out.min_clusters = G;
  return out;
}

// Cameron-Gelbach-Miller inclusion-exclusion over nonempty subsets of the
// clustering dimensions. Each subset term carries its own CR1 correction.
// Negative eigenvalues of the combined matrix are floored at zero.
inline VcovResult cluster_multiway(const FitResult& fit,
                                   const std::vector<std::vector<long long>>& dims,
                                   bool small_sample = true) {
  detail::check_fit(fit);
  if (dims.size() < 2)
    throw numeric_error("cluster_multiway: at least two clustering dimensions required");
  const Eigen::Index n = fit.demeaned_X.rows();
  const Eigen::Index k = fit.demeaned_X.cols();
  for (const auto& d : dims) {
    if (Eigen::Index(d.size()) != n)
      throw numeric_error("cluster_multiway: dimension length mismatch");
    std::map<long long, int> uniq;
    for (long long v : d) uniq.emplace(v, 0);
    if (uniq.size() < 2)
      throw numeric_error("cluster_multiway: a dimension has a single cluster");
  }

  VcovResult out;
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(k, k);
  long long min_G = -1;
  const unsigned D = unsigned(dims.size());
  for (unsigned mask = 1; mask < (1u << D); ++mask) {
    // intersection cluster keys for this subset
    std::vector<std::vector<long long>> combined(n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (unsigned d = 0; d < D; ++d)
        if (mask & (1u << d)) combined[i].push_back(dims[d][i]);
    long long G = 0;
    Eigen::MatrixXd meat = detail::cluster_meat(fit, combined, &G);
    double sign = (std::popcount(mask) % 2 == 1) ? 1.0 : -1.0;
    V += sign * detail::sandwich(fit, meat) *
         detail::cr1_factor(std::max<long long>(G, 2), n, fit.k_effective, small_sample);
    if (std::popcount(mask) == 1) min_G = (min_G < 0) ? G : std::min(min_G, G);
  }

  V = 0.5 * (V + V.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
  // fix up only genuinely negative eigenvalues, not sign noise at machine
  // precision, so degenerate inputs (e.g. identical dimensions) reproduce the
  // one-way result bit for bit
  double floor_tol = -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < floor_tol) {
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    V = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    out.flags.push_back("negative_eigenvalues_floored");
  }
  out.V = V;
  out.min_clusters = min_G;
  return out;
}

// "TWFE" variance: two-way clustering over athlete and event ids on the
// FE-demeaned scores.
inline VcovResult twfe_vcov(const FitResult& fit, const std::vector<long long>& athlete_ids,
                            const std::vector<long long>& event_ids,
                            bool small_sample = true) {
  std::map<long long, int> ev;
  for (long long e : event_ids) ev.emplace(e, 0);
  if (ev.size() == 1) {
    VcovResult out = cluster_oneway(fit, athlete_ids, small_sample);
    out.flags.push_back("single_event_reduced_to_oneway_athlete");
    return out;
  }
  return cluster_multiway(fit, {athlete_ids, event_ids}, small_sample);
}

}  // namespace draftfe
