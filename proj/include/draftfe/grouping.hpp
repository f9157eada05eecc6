#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "draftfe/common.hpp"

namespace draftfe {

enum class Linkage { Single, Complete };

struct ClusterSpec {
  Linkage linkage = Linkage::Single;
  double threshold_s = 5.0;
  int min_group_size = 1;
};

struct SwimGroup {
  long long event_id = 0;
  int cluster_index = 0;  // 1-based within event, ordered by fastest member
  std::vector<long long> member_result_ids;  // ascending swim_out_s
  std::vector<double> member_times;
  long long leader_result_id = 0;
  bool below_min_size = false;
};

struct Role {
  long long event_id = 0;
  int cluster_index = 0;
  int group_size = 0;
  int member_rank = 0;  // 0 = leader, 1.. = drafters by time
  bool encoded = true;  // false when the group is below min_group_size
  int leader = 0;
  int drafter = 0;
  int drafter_position = 0;  // 1-based among drafters, 0 for leaders
  int first_drafter = 0, second_drafter = 0, third_drafter = 0;
  int fourth_drafter = 0, fifth_drafter = 0;
  int last_drafter = 0;
};

using RoleEncoding = std::unordered_map<long long, Role>;  // by result_id

// 1-D agglomerative clustering on swim-out times. Clusters are contiguous
// intervals of the sorted sequence; for both linkages the minimal
// inter-cluster distance is always attained by an adjacent pair, so only
// adjacent merges are considered. Ties resolve to the leftmost pair, which
// under the (time, result_id) sort realizes the smallest-time /
// smallest-result_id tie-break.
inline std::vector<SwimGroup> cluster_event(
    std::vector<std::pair<long long, double>> times, const ClusterSpec& spec) {
  if (times.empty()) throw data_error("cluster_event: empty input");
  if (spec.threshold_s <= 0) throw data_error("cluster_event: non-positive threshold");

  std::sort(times.begin(), times.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });

  // cluster i covers sorted indices [bounds[i], bounds[i+1])
  std::vector<size_t> bounds;
  for (size_t i = 0; i <= times.size(); ++i) bounds.push_back(i);

  auto pair_dist = [&](size_t i) {
    // distance between clusters i and i+1
    if (spec.linkage == Linkage::Single)
      return times[bounds[i + 1]].second - times[bounds[i + 1] - 1].second;
    return times[bounds[i + 2] - 1].second - times[bounds[i]].second;
  };

  while (bounds.size() > 2) {
    size_t best = 0;
    double best_d = pair_dist(0);
    for (size_t i = 1; i + 2 < bounds.size(); ++i) {
      double d = pair_dist(i);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best_d > spec.threshold_s) break;
    bounds.erase(bounds.begin() + best + 1);
  }

  std::vector<SwimGroup> groups;
  for (size_t i = 0; i + 1 < bounds.size(); ++i) {
    SwimGroup g;
    g.cluster_index = int(i) + 1;
    for (size_t k = bounds[i]; k < bounds[i + 1]; ++k) {
      g.member_result_ids.push_back(times[k].first);
      g.member_times.push_back(times[k].second);
    }
    g.leader_result_id = g.member_result_ids.front();
    g.below_min_size = int(g.member_result_ids.size()) < spec.min_group_size;
    groups.push_back(std::move(g));
  }
  return groups;
}

inline RoleEncoding encode_roles(const std::vector<SwimGroup>& groups) {
  RoleEncoding roles;
  for (const auto& g : groups) {
    int m = int(g.member_result_ids.size());
    for (int k = 0; k < m; ++k) {
      Role r;
      r.event_id = g.event_id;
      r.cluster_index = g.cluster_index;
      r.group_size = m;
      r.member_rank = k;
      if (g.below_min_size) {
        r.encoded = false;
        roles[g.member_result_ids[k]] = r;
        continue;
      }
      if (k == 0) {
        r.leader = 1;
      } else {
        r.drafter = 1;
        r.drafter_position = k;
        switch (k) {
          case 1: r.first_drafter = 1; break;
          case 2: r.second_drafter = 1; break;
          case 3: r.third_drafter = 1; break;
          case 4: r.fourth_drafter = 1; break;
          case 5: r.fifth_drafter = 1; break;
          default: break;
        }
        if (k == m - 1) r.last_drafter = 1;
      }
      roles[g.member_result_ids[k]] = r;
    }
  }
  return roles;
}

struct GroupingStats {
  std::map<int, int> size_histogram;
  int n_groups = 0;
  int n_singletons = 0;
  int max_cluster_index = 0;
  long long n_results = 0;
  long long n_encoded = 0;
  double leader_share = 0, drafter_share = 0;
  double first_share = 0, second_share = 0, third_share = 0;
  double fourth_share = 0, fifth_share = 0, last_share = 0;
};

inline GroupingStats grouping_report(const std::vector<SwimGroup>& groups,
                                     const RoleEncoding& roles) {
  GroupingStats s;
  for (const auto& g : groups) {
    int m = int(g.member_result_ids.size());
    s.size_histogram[m]++;
    s.n_groups++;
    if (m == 1) s.n_singletons++;
    s.max_cluster_index = std::max(s.max_cluster_index, g.cluster_index);
    s.n_results += m;
  }
  long long lead = 0, draft = 0, d1 = 0, d2 = 0, d3 = 0, d4 = 0, d5 = 0, dl = 0;
  for (const auto& [id, r] : roles) {
    if (!r.encoded) continue;
    s.n_encoded++;
    lead += r.leader;
    draft += r.drafter;
    d1 += r.first_drafter;
    d2 += r.second_drafter;
    d3 += r.third_drafter;
    d4 += r.fourth_drafter;
    d5 += r.fifth_drafter;
    dl += r.last_drafter;
  }
  if (s.n_encoded > 0) {
    double n = double(s.n_encoded);
    s.leader_share = lead / n;
    s.drafter_share = draft / n;
    s.first_share = d1 / n;
    s.second_share = d2 / n;
    s.third_share = d3 / n;
    s.fourth_share = d4 / n;
    s.fifth_share = d5 / n;
    s.last_share = dl / n;
  }
  return s;
}

}  // namespace draftfe
