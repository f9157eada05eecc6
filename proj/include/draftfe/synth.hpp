#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "draftfe/analysis.hpp"
#include "draftfe/data.hpp"

namespace draftfe {

struct SynthConfig {
  int year_min = 2016;
  int year_max = 2024;
  int n_events_per_year = 4;
  int athletes_per_event = 60;
  int max_group_size = 4;
  double base_time_s = 1500.0;
  double event_sd_s = 30.0;
  double noise_sd_s = 0.3;
  // seconds added per role: index 0 = leader, 1.. = drafter positions
  std::vector<double> position_effects = {0.0, 10.0, 5.0, 2.0};
  double threshold_s = 5.0;  // recoverability target for single linkage at 5 s
  double spacing_min_s = 0.2;
  double spacing_max_s = 4.0;  // 0.8 * threshold
  double gap_margin_s = 2.0;   // inter-group gap = threshold + 6*noise + margin
  std::set<int> staggered_years;
  double dissolve_prob = 1.0;  // per-group dissolution probability in staggered years
  double stagger_gap_min_s = 2.0;
  double stagger_gap_max_s = 20.0;
  double reuse_window_s = 0.25;  // ability matching tolerance when reusing athletes
  double dnf_prob = 0.0;
  double dns_prob = 0.0;
  double missing_prob = 0.0;
  uint64_t seed = 1;

  void validate() const {
    if (noise_sd_s < 0 || event_sd_s < 0) throw data_error("synth: negative SD");
    if (dissolve_prob < 0 || dissolve_prob > 1 || dnf_prob < 0 || dnf_prob > 1 ||
        dns_prob < 0 || dns_prob > 1 || missing_prob < 0 || missing_prob > 1)
      throw data_error("synth: probability out of [0,1]");
    if (threshold_s <= 0) throw data_error("synth: non-positive threshold");
    if (spacing_min_s <= 0 || spacing_min_s > spacing_max_s)
      throw data_error("synth: bad spacing range");
    if (spacing_max_s > threshold_s)
      throw data_error("synth: infeasible config, within-group spacing exceeds threshold");
    if (year_max < year_min || n_events_per_year < 1 || athletes_per_event < 1 ||
        max_group_size < 1)
      throw data_error("synth: bad size parameter");
    if (position_effects.empty()) throw data_error("synth: empty position effect vector");
  }
};

struct TruthRow {
  long long result_id = 0;
  double athlete_effect = 0;
  double event_effect = 0;
  double position_effect = 0;
  bool staggered = false;   // group dissolved by the start regime
  long long group_id = 0;   // global id of the generated group
  int position = 0;         // 0 = leader
};

struct SynthTruth {
  std::vector<TruthRow> rows;  // in result_id order
  // generated partition per event: member result_ids per group
  std::map<long long, std::vector<std::vector<long long>>> groups_by_event;
};

struct SynthOutput {
  RelationalBundle bundle;
  SynthTruth truth;
};

// Swim-out times follow y = athlete + event + position effect + noise
// exactly. Group schedules (start offsets and within-group gaps) are built
// first; each schedule slot is filled by an athlete whose persistent ability
// equals the slot target minus event and position effects, reusing an
// existing athlete when one lies within reuse_window_s. Times therefore land
// on the schedule (up to matching error and noise) and the generated
// partition is recoverable by threshold clustering, while the injected
// position effects are carried by the ability channel and identified through
// athlete fixed effects.
inline SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  SynthOutput out;
  struct PoolAthlete {
    double ability;
    long long id;
  };
  // sorted by ability for nearest-match lookup
  std::map<double, long long> pool;
  std::unordered_map<long long, double> ability_of;
  long long next_athlete = 1, next_event = 1, next_result = 1, next_group = 1;

  const double gap = cfg.threshold_s + 6.0 * cfg.noise_sd_s + cfg.gap_margin_s;
  const EventCategory cats[4] = {EventCategory::Sprint, EventCategory::Short,
                                 EventCategory::Middle, EventCategory::Long};

  struct PendingResult {
    long long result_id, athlete_id, event_id;
    double swim, total;
    int status;  // 0 OK, 1 DNF, 2 DNS, 3 missing rank
  };
  std::vector<PendingResult> pending;

  for (int year = cfg.year_min; year <= cfg.year_max; ++year) {
    bool staggered_year = cfg.staggered_years.count(year) > 0;
    for (int ev = 0; ev < cfg.n_events_per_year; ++ev) {
      Event e;
      e.event_id = next_event++;
      e.date = Date{year, 1 + (ev % 9), 1 + (ev * 3) % 28};
      e.category = cats[ev % 4];
      out.bundle.events.push_back(e);

      double event_effect = rng.normal(0.0, cfg.event_sd_s);
      std::set<long long> used_this_event;
      double cursor = cfg.base_time_s;
      int remaining = cfg.athletes_per_event;
      std::vector<PendingResult> event_results;

      while (remaining > 0) {
        int gsize = 1 + int(rng.uniform_int(cfg.max_group_size));
        gsize = std::min(gsize, remaining);
        remaining -= gsize;
        bool dissolved = staggered_year && rng.uniform() < cfg.dissolve_prob;

        std::vector<long long> group_members;
        long long group_id = next_group++;
        double t = cursor;
        for (int k = 0; k < gsize; ++k) {
          if (k > 0) {
            double s = dissolved
                           ? rng.uniform(cfg.stagger_gap_min_s, cfg.stagger_gap_max_s)
                           : rng.uniform(cfg.spacing_min_s, cfg.spacing_max_s);
            t += s;
          }
          double tau = 0.0;
          if (!dissolved)
            tau = cfg.position_effects[std::min<size_t>(k, cfg.position_effects.size() - 1)];

          double target_ability = t - event_effect - tau;
          long long athlete_id = -1;
          auto it = pool.lower_bound(target_ability);
          double best = 1e300;
          long long best_id = -1;
          double best_ab = 0;
          for (auto probe = it; probe != pool.end(); ++probe) {
            if (probe->first - target_ability > cfg.reuse_window_s) break;
            if (used_this_event.count(probe->second)) continue;
            if (probe->first - target_ability < best) {
              best = probe->first - target_ability;
              best_id = probe->second;
              best_ab = probe->first;
            }
            break;
          }
          if (it != pool.begin()) {
            for (auto probe = std::prev(it);; --probe) {
              if (target_ability - probe->first > cfg.reuse_window_s) break;
              if (!used_this_event.count(probe->second)) {
                if (target_ability - probe->first < best) {
                  best_id = probe->second;
                  best_ab = probe->first;
                }
                break;
              }
              if (probe == pool.begin()) break;
            }
          }
          double ability;
          if (best_id >= 0) {
            athlete_id = best_id;
            ability = best_ab;
          } else {
            athlete_id = next_athlete++;
            ability = target_ability;
            pool.emplace(ability, athlete_id);
            ability_of[athlete_id] = ability;
          }
          used_this_event.insert(athlete_id);

          double noise = rng.normal(0.0, cfg.noise_sd_s);
          double swim = ability + event_effect + tau + noise;
          double total = swim * 3.5 + 500.0 + std::fabs(rng.normal(0.0, 200.0));

          PendingResult pr;
          pr.result_id = next_result++;
          pr.athlete_id = athlete_id;
          pr.event_id = e.event_id;
          pr.swim = swim;
          pr.total = total;
          pr.status = 0;
          double u = rng.uniform();
          if (u < cfg.dns_prob)
            pr.status = 2;
          else if (u < cfg.dns_prob + cfg.dnf_prob)
            pr.status = 1;
          else if (u < cfg.dns_prob + cfg.dnf_prob + cfg.missing_prob)
            pr.status = 3;
          event_results.push_back(pr);
          group_members.push_back(pr.result_id);

          TruthRow tr;
          tr.result_id = pr.result_id;
          tr.athlete_effect = ability;
          tr.event_effect = event_effect;
          tr.position_effect = tau;
          tr.staggered = dissolved;
          tr.group_id = group_id;
          tr.position = k;
          out.truth.rows.push_back(tr);
        }
        // only OK rows survive the panel; the recoverable partition is over those
        std::vector<long long> ok_members;
        for (size_t k = 0; k < group_members.size(); ++k) {
          size_t idx = event_results.size() - group_members.size() + k;
          if (event_results[idx].status == 0) ok_members.push_back(group_members[k]);
        }
        if (!ok_members.empty())
          out.truth.groups_by_event[e.event_id].push_back(std::move(ok_members));
        cursor = t + gap + rng.uniform(0.0, cfg.gap_margin_s);
      }

      // race rank by total time
      std::vector<size_t> order(event_results.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return event_results[a].total < event_results[b].total;
      });
      std::vector<long long> rank(event_results.size());
      for (size_t i = 0; i < order.size(); ++i) rank[order[i]] = (long long)i + 1;

      for (size_t i = 0; i < event_results.size(); ++i) {
        const auto& pr = event_results[i];
        ResultRecord r;
        r.result_id = pr.result_id;
        r.athlete_id = pr.athlete_id;
        r.event_id = pr.event_id;
        r.status = pr.status == 1 ? ResultStatus::DNF
                   : pr.status == 2 ? ResultStatus::DNS
                                    : ResultStatus::OK;
        if (pr.status != 2) {
          r.swim_out_s = pr.swim;
          if (pr.status != 1) r.total_s = pr.total;
        }
        if (pr.status == 0) r.race_rank = rank[i];
        out.bundle.results.push_back(r);
      }
    }
  }

  for (const auto& [id, ability] : ability_of) {
    Athlete a;
    a.athlete_id = id;
    a.birth_year = 1970 + int(ability_of.at(id)) % 30;
    if (*a.birth_year < 1950) a.birth_year = 1970;
    a.male = (id % 5) != 0;
    out.bundle.athletes.push_back(a);
  }
  std::sort(out.bundle.athletes.begin(), out.bundle.athletes.end(),
            [](const Athlete& a, const Athlete& b) { return a.athlete_id < b.athlete_id; });
  return out;
}

// fraction of generated groups recovered exactly by the clustering
inline double group_recovery_rate(const SynthTruth& truth,
                                  const std::vector<SwimGroup>& groups) {
  std::set<std::vector<long long>> found;
  for (const auto& g : groups) {
    auto members = g.member_result_ids;
    std::sort(members.begin(), members.end());
    found.insert(members);
  }
  long long total = 0, hit = 0;
  for (const auto& [event_id, gs] : truth.groups_by_event) {
    for (auto members : gs) {
      std::sort(members.begin(), members.end());
      total++;
      if (found.count(members)) hit++;
    }
  }
  return total == 0 ? 1.0 : double(hit) / double(total);
}

namespace detail {

inline void write_line(std::ofstream& f, const std::string& s) { f << s << "\n"; }

inline std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace detail

inline void write_csvs(const SynthOutput& out, const std::string& dir) {
  {
    std::ofstream f(dir + "/athletes.csv");
    if (!f) throw data_error("cannot write " + dir + "/athletes.csv");
    f << "athlete_id,birth_year,male\n";
    for (const auto& a : out.bundle.athletes)
      f << a.athlete_id << "," << (a.birth_year ? std::to_string(*a.birth_year) : "") << ","
        << (a.male ? 1 : 0) << "\n";
  }
  {
    std::ofstream f(dir + "/events.csv");
    if (!f) throw data_error("cannot write " + dir + "/events.csv");
    f << "event_id,date,category\n";
    char buf[32];
    for (const auto& e : out.bundle.events) {
      std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", e.date.year, e.date.month,
                    e.date.day);
      f << e.event_id << "," << buf << "," << to_string(e.category) << "\n";
    }
  }
  {
    std::ofstream f(dir + "/results.csv");
    if (!f) throw data_error("cannot write " + dir + "/results.csv");
    f << "result_id,athlete_id,event_id,swim_out_s,total_s,race_rank,status\n";
    for (const auto& r : out.bundle.results) {
      f << r.result_id << "," << r.athlete_id << "," << r.event_id << ","
        << (r.swim_out_s ? detail::fmt(*r.swim_out_s) : "") << ","
        << (r.total_s ? detail::fmt(*r.total_s) : "") << ","
        << (r.race_rank ? std::to_string(*r.race_rank) : "") << ","
        << (r.status == ResultStatus::OK    ? "OK"
            : r.status == ResultStatus::DNF ? "DNF"
                                            : "DNS")
        << "\n";
    }
  }
  {
    std::ofstream f(dir + "/truth.csv");
    if (!f) throw data_error("cannot write " + dir + "/truth.csv");
    f << "row_id,athlete_effect,event_effect,position_effect,regime\n";
    for (const auto& t : out.truth.rows)
      f << t.result_id << "," << detail::fmt(t.athlete_effect, 6) << ","
        << detail::fmt(t.event_effect, 6) << "," << detail::fmt(t.position_effect, 6) << ","
        << (t.staggered ? "staggered" : "normal") << "\n";
  }
}

struct TermCoverage {
  std::string term;
  double truth = kNaN;  // mean per-rep estimand
  double mean_estimate = kNaN;
  double bias = kNaN;
  double rmse = kNaN;
  double coverage = kNaN;  // share of 95% CIs covering truth
  int n_reps = 0;
};

struct CoverageReport {
  std::vector<TermCoverage> terms;
  int reps_requested = 0;
  int reps_ok = 0;
  std::vector<std::string> failures;
};

namespace detail {

// exact estimand for role-dummy terms: mean injected effect among rows with
// the dummy set minus the leader-row mean
inline std::optional<double> term_truth(const std::string& term,
                                        const std::vector<PanelRow>& panel,
                                        const RoleEncoding& roles, const SynthTruth& truth) {
  static const std::set<std::string> dummy_terms = {
      "leader",        "drafter",        "first_drafter", "second_drafter",
      "third_drafter", "fourth_drafter", "fifth_drafter", "last_drafter"};
  if (!dummy_terms.count(term)) return std::nullopt;
  std::unordered_map<long long, const TruthRow*> by_id;
  for (const auto& t : truth.rows) by_id[t.result_id] = &t;
  double sum_term = 0, sum_leader = 0;
  long long n_term = 0, n_leader = 0;
  for (const auto& p : panel) {
    auto rit = roles.find(p.result_id);
    if (rit == roles.end() || !rit->second.encoded) continue;
    auto tit = by_id.find(p.result_id);
    if (tit == by_id.end()) continue;
    double tau = tit->second->position_effect;
    if (role_column(rit->second, term) == 1.0) {
      sum_term += tau;
      n_term++;
    }
    if (rit->second.leader) {
      sum_leader += tau;
      n_leader++;
    }
  }
  if (n_term == 0 || n_leader == 0) return std::nullopt;
  return sum_term / double(n_term) - sum_leader / double(n_leader);
}

}  // namespace detail

inline CoverageReport mc_recovery(const SynthConfig& cfg, const ModelSpec& spec,
                                  const ClusterSpec& cluster, int reps) {
  if (reps < 1) throw usage_error("mc_recovery: reps must be >= 1");
  CoverageReport rep;
  rep.reps_requested = reps;

  struct Acc {
    double truth_sum = 0, est_sum = 0, sqerr_sum = 0;
    int covered = 0, n = 0;
  };
  std::map<std::string, Acc> acc;

  for (int r = 0; r < reps; ++r) {
    SynthConfig c = cfg;
    c.seed = splitmix64(cfg.seed ^ splitmix64(uint64_t(r) + 1));
    try {
      SynthOutput gen = generate(c);
      auto panel = build_panel(gen.bundle);
      auto groups = cluster_panel(panel, cluster);
      auto roles = encode_roles(groups);
      auto report = run_spec(panel, roles, spec);
      for (const auto& coef : report.coefficients) {
        auto truth = detail::term_truth(coef.term, panel, roles, gen.truth);
        if (!truth) continue;
        auto& a = acc[coef.term];
        a.truth_sum += *truth;
        a.est_sum += coef.estimate;
        a.sqerr_sum += (coef.estimate - *truth) * (coef.estimate - *truth);
        if (coef.ci_lo <= *truth && *truth <= coef.ci_hi) a.covered++;
        a.n++;
      }
      rep.reps_ok++;
    } catch (const std::exception& ex) {
      rep.failures.push_back("rep " + std::to_string(r) + ": " + ex.what());
    }
  }

  for (const auto& [term, a] : acc) {
    TermCoverage tc;
    tc.term = term;
    tc.n_reps = a.n;
    if (a.n > 0) {
      tc.truth = a.truth_sum / a.n;
      tc.mean_estimate = a.est_sum / a.n;
      tc.bias = tc.mean_estimate - tc.truth;
      tc.rmse = std::sqrt(a.sqerr_sum / a.n);
      if (reps > 1) tc.coverage = double(a.covered) / a.n;
    }
    rep.terms.push_back(tc);
  }
  return rep;
}

}  // namespace draftfe
