#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "draftfe/data.hpp"
#include "draftfe/feols.hpp"
#include "draftfe/grouping.hpp"
#include "draftfe/vcov.hpp"

namespace draftfe {

// Cluster every event of a panel. Panel rows are sorted by event, so events
// are contiguous.
inline std::vector<SwimGroup> cluster_panel(const std::vector<PanelRow>& panel,
                                            const ClusterSpec& spec) {
  std::vector<SwimGroup> all;
  size_t i = 0;
  while (i < panel.size()) {
    size_t j = i;
    std::vector<std::pair<long long, double>> times;
    while (j < panel.size() && panel[j].event_id == panel[i].event_id) {
      times.emplace_back(panel[j].result_id, panel[j].swim_out_s);
      ++j;
    }
    auto groups = cluster_event(std::move(times), spec);
    for (auto& g : groups) {
      g.event_id = panel[i].event_id;
      all.push_back(std::move(g));
    }
    i = j;
  }
  return all;
}

struct Term {
  std::vector<std::string> factors;  // product of panel columns

  std::string name() const {
    std::string s;
    for (const auto& f : factors) s += (s.empty() ? "" : ":") + f;
    return s;
  }
};

struct SampleFilter {
  std::optional<int> year_min, year_max;
  int min_group_size = 1;
  bool athletes_all_periods = false;
};

struct ModelSpec {
  std::string preset;  // informational
  std::string response = "swim_out_s";
  std::vector<Term> terms;
  std::vector<std::string> fe_dims = {"athlete", "event"};  // of athlete/event/swim_group
  VcovSpec vcov;
  SampleFilter filter;
};

// Named presets mirroring the published model specifications.
inline ModelSpec make_preset(const std::string& name) {
  ModelSpec m;
  m.preset = name;
  auto t = [](std::vector<std::string> f) { return Term{std::move(f)}; };

  std::string base = name, variant;
  if (auto pos = name.find(':'); pos != std::string::npos) {
    base = name.substr(0, pos);
    variant = name.substr(pos + 1);
  }

  if (base == "base") {
    int model = variant.empty() ? 1 : std::stoi(variant);
    m.vcov.kind = VcovKind::HC1;
    switch (model) {
      case 1:
        m.terms = {t({"leader"}), t({"first_drafter"}), t({"second_drafter"}),
                   t({"third_drafter"}), t({"fourth_drafter"}), t({"fifth_drafter"})};
        break;
      case 2: m.terms = {t({"leader"}), t({"first_drafter"})}; break;
      case 3: m.terms = {t({"leader"}), t({"second_drafter"})}; break;
      case 4: m.terms = {t({"leader"}), t({"third_drafter"})}; break;
      case 5: m.terms = {t({"leader"}), t({"fourth_drafter"})}; break;
      case 6:
        m.terms = {t({"leader"}), t({"leader", "cluster_index"}), t({"cluster_index"}),
                   t({"race_rank"}), t({"first_drafter"}), t({"second_drafter"}),
                   t({"third_drafter"}), t({"fourth_drafter"}), t({"fifth_drafter"})};
        break;
      default: throw usage_error("unknown base model variant '" + variant + "'");
    }
    return m;
  }
  if (base == "positions") {
    // drafter-position dummies with the leader as base category
    m.terms = {t({"first_drafter"}), t({"second_drafter"}), t({"third_drafter"}),
               t({"fourth_drafter"}), t({"fifth_drafter"})};
    m.vcov.kind = VcovKind::HC1;
    return m;
  }
  if (base == "interaction_pre_covid") {
    m.terms = {t({"drafter"}), t({"pre_period", "drafter"}), t({"covid_year", "drafter"})};
    m.fe_dims = {"athlete", "event", "swim_group"};
    m.vcov.kind = VcovKind::HC1;
    return m;
  }
  if (base == "interaction_pre_post") {
    m.terms = {t({"pre_period", "drafter"}), t({"post_period", "drafter"})};
    m.vcov.kind = VcovKind::ClusterOneWay;
    m.vcov.dims = {"athlete"};
    if (variant == "controls") {
      m.terms.push_back(t({"drafter_position"}));
      m.terms.push_back(t({"cluster_index"}));
    } else if (variant == "twfe") {
      m.terms.push_back(t({"drafter_position"}));
      m.terms.push_back(t({"cluster_index"}));
      m.terms.push_back(t({"race_rank"}));
      m.vcov.kind = VcovKind::TwoWayFE;
      m.vcov.dims = {"athlete", "event"};
    } else if (variant == "groupfe") {
      m.terms.push_back(t({"drafter_position"}));
      m.fe_dims = {"athlete", "event", "swim_group"};
      m.vcov.kind = VcovKind::HC1;
      m.vcov.dims.clear();
    } else if (!variant.empty()) {
      throw usage_error("unknown interaction_pre_post variant '" + variant + "'");
    }
    return m;
  }
  if (base == "drafter_only") {
    m.terms = {t({"drafter"})};
    m.vcov.kind = VcovKind::ClusterOneWay;
    m.vcov.dims = {"event"};
    if (variant == "all_periods") {
      m.filter.athletes_all_periods = true;
    } else if (variant == "min3") {
      m.filter.min_group_size = 3;
    } else if (!variant.empty()) {
      throw usage_error("unknown drafter_only variant '" + variant + "'");
    }
    return m;
  }
  throw usage_error("unknown preset '" + name + "'");
}

struct CoefficientRow {
  std::string term;
  double estimate = 0, se = 0, t = 0, p = 0, ci_lo = 0, ci_hi = 0;
};

struct AnalysisReport {
  ModelSpec spec;
  FitResult fit;
  std::vector<CoefficientRow> coefficients;
  double dof = 0;  // min(G-1) under clustering, n - k otherwise
  long long n_dropped_missing = 0;
  long long n_dropped_filter = 0;
  std::vector<std::string> flags;
};

namespace detail {

inline double role_column(const Role& r, const std::string& name) {
  if (name == "leader") return r.leader;
  if (name == "drafter") return r.drafter;
  if (name == "drafter_position") return r.drafter_position;
  if (name == "first_drafter") return r.first_drafter;
  if (name == "second_drafter") return r.second_drafter;
  if (name == "third_drafter") return r.third_drafter;
  if (name == "fourth_drafter") return r.fourth_drafter;
  if (name == "fifth_drafter") return r.fifth_drafter;
  if (name == "last_drafter") return r.last_drafter;
  if (name == "cluster_index") return r.cluster_index;
  if (name == "group_size") return r.group_size;
  return kNaN;
}

inline double panel_column(const PanelRow& p, const std::string& name) {
  if (name == "swim_out_s") return p.swim_out_s;
  if (name == "total_s") return p.total_s;
  if (name == "race_rank") return double(p.race_rank);
  if (name == "age") return p.age ? double(*p.age) : kNaN;
  if (name == "age_sq") return p.age_sq ? double(*p.age_sq) : kNaN;
  if (name == "male") return p.male ? 1.0 : 0.0;
  if (name == "week_running") return double(p.week_running);
  if (name == "event_year") return double(p.event_year);
  if (name == "pre_period") return p.period == Period::Pre ? 1.0 : 0.0;
  if (name == "covid_year") return p.covid_year_flag ? 1.0 : 0.0;
  if (name == "post_period") return p.period == Period::Post ? 1.0 : 0.0;
  return kNaN;
}

inline double column_value(const PanelRow& p, const Role& r, const std::string& name) {
  double v = role_column(r, name);
  if (std::isnan(v)) v = panel_column(p, name);
  return v;
}

inline bool known_column(const std::string& name) {
  static const std::set<std::string> cols = {
      "swim_out_s", "total_s", "race_rank", "age", "age_sq", "male", "week_running",
      "event_year", "pre_period", "covid_year", "post_period", "leader", "drafter",
      "drafter_position", "first_drafter", "second_drafter", "third_drafter",
      "fourth_drafter", "fifth_drafter", "last_drafter", "cluster_index", "group_size"};
  return cols.count(name) > 0;
}

}  // namespace detail

inline AnalysisReport run_spec(const std::vector<PanelRow>& panel, const RoleEncoding& roles,
                               const ModelSpec& spec) {
  for (const auto& term : spec.terms) {
    if (term.factors.empty()) throw usage_error("run_spec: empty term");
    for (const auto& f : term.factors)
      if (!detail::known_column(f)) throw usage_error("run_spec: unknown column '" + f + "'");
  }
  if (!detail::known_column(spec.response))
    throw usage_error("run_spec: unknown response '" + spec.response + "'");

  // athletes present in all three periods (computed on the unfiltered panel)
  std::unordered_map<long long, unsigned> athlete_periods;
  if (spec.filter.athletes_all_periods)
    for (const auto& p : panel) athlete_periods[p.athlete_id] |= 1u << int(p.period);

  AnalysisReport rep;
  rep.spec = spec;

  std::vector<const PanelRow*> rows;
  std::vector<const Role*> row_roles;
  for (const auto& p : panel) {
    auto it = roles.find(p.result_id);
    if (it == roles.end() || !it->second.encoded) {
      rep.n_dropped_filter++;
      continue;
    }
    const Role& r = it->second;
    if ((spec.filter.year_min && p.event_year < *spec.filter.year_min) ||
        (spec.filter.year_max && p.event_year > *spec.filter.year_max) ||
        r.group_size < spec.filter.min_group_size ||
        (spec.filter.athletes_all_periods && athlete_periods[p.athlete_id] != 0b111u)) {
      rep.n_dropped_filter++;
      continue;
    }
    bool missing = std::isnan(detail::column_value(p, r, spec.response));
    for (const auto& term : spec.terms)
      for (const auto& f : term.factors)
        missing = missing || std::isnan(detail::column_value(p, r, f));
    if (missing) {
      rep.n_dropped_missing++;
      continue;
    }
    rows.push_back(&p);
    row_roles.push_back(&r);
  }
  if (rows.empty()) throw data_error("run_spec: sample filter left no observations");

  const Eigen::Index n = Eigen::Index(rows.size());
  Design design;
  design.y.resize(n);
  design.X.resize(n, Eigen::Index(spec.terms.size()));
  for (const auto& term : spec.terms) design.names.push_back(term.name());
  for (Eigen::Index i = 0; i < n; ++i) {
    design.y[i] = detail::column_value(*rows[i], *row_roles[i], spec.response);
    for (size_t j = 0; j < spec.terms.size(); ++j) {
      double v = 1.0;
      for (const auto& f : spec.terms[j].factors)
        v *= detail::column_value(*rows[i], *row_roles[i], f);
      design.X(i, Eigen::Index(j)) = v;
    }
  }

  auto id_vector = [&](const std::string& dim) {
    std::vector<long long> ids(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      if (dim == "athlete")
        ids[i] = rows[i]->athlete_id;
      else if (dim == "event")
        ids[i] = rows[i]->event_id;
      else if (dim == "swim_group")
        ids[i] = row_roles[i]->cluster_index;
      else
        throw usage_error("unknown FE/cluster dimension '" + dim + "'");
    }
    return ids;
  };

  std::vector<FixedEffectDim> fes;
  for (const auto& dim : spec.fe_dims) fes.push_back(make_fe(dim, id_vector(dim)));
  if (std::find(spec.fe_dims.begin(), spec.fe_dims.end(), std::string("swim_group")) !=
      spec.fe_dims.end())
    rep.flags.push_back("swim_group_fe_levels_shared_across_events");

  rep.fit = fit(design, fes);

  VcovResult vr;
  switch (spec.vcov.kind) {
    case VcovKind::HC1:
      vr = hc1(rep.fit);
      break;
    case VcovKind::ClusterOneWay:
      if (spec.vcov.dims.size() != 1)
        throw usage_error("one-way clustering needs exactly one dimension");
      vr = cluster_oneway(rep.fit, id_vector(spec.vcov.dims[0]), spec.vcov.small_sample);
      break;
    case VcovKind::ClusterMultiway: {
      std::vector<std::vector<long long>> dims;
      for (const auto& d : spec.vcov.dims) dims.push_back(id_vector(d));
      vr = cluster_multiway(rep.fit, dims, spec.vcov.small_sample);
      break;
    }
    case VcovKind::TwoWayFE:
      vr = twfe_vcov(rep.fit, id_vector("athlete"), id_vector("event"),
                     spec.vcov.small_sample);
      break;
  }
  rep.fit.vcov = vr.V;
  for (const auto& f : vr.flags) rep.flags.push_back(f);
  for (const auto& f : rep.fit.flags) rep.flags.push_back(f);

  rep.dof = vr.min_clusters > 0 ? double(vr.min_clusters - 1)
                                : double(rep.fit.n_obs) - rep.fit.k_effective;
  rep.dof = std::max(1.0, rep.dof);
  double tcrit = student_t_quantile(0.975, rep.dof);
  for (size_t j = 0; j < rep.fit.names.size(); ++j) {
    CoefficientRow row;
    row.term = rep.fit.names[j];
    row.estimate = rep.fit.coef[Eigen::Index(j)];
    row.se = std::sqrt(std::max(0.0, rep.fit.vcov(Eigen::Index(j), Eigen::Index(j))));
    row.t = row.se > 0 ? row.estimate / row.se : 0.0;
    row.p = row.se > 0 ? student_t_pvalue(row.t, rep.dof) : 1.0;
    row.ci_lo = row.estimate - tcrit * row.se;
    row.ci_hi = row.estimate + tcrit * row.se;
    rep.coefficients.push_back(row);
  }
  if (rep.n_dropped_missing > 0)
    rep.flags.push_back("dropped_missing_rows:" + std::to_string(rep.n_dropped_missing));
  return rep;
}

struct YearlyEntry {
  int year = 0;
  std::optional<AnalysisReport> report;
  std::string skip_reason;
};

inline std::vector<YearlyEntry> run_yearly(const std::vector<PanelRow>& panel,
                                           const RoleEncoding& roles, ModelSpec spec) {
  std::set<int> years;
  for (const auto& p : panel) years.insert(p.event_year);
  if (years.size() < 2)
    throw data_error("run_yearly: at least two distinct event years required");

  std::vector<YearlyEntry> out;
  for (int year : years) {
    YearlyEntry e;
    e.year = year;
    ModelSpec ys = spec;
    ys.filter.year_min = year;
    ys.filter.year_max = year;
    try {
      e.report = run_spec(panel, roles, ys);
    } catch (const std::exception& ex) {
      e.skip_reason = ex.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

struct PlotPoint {
  std::string term;
  int year = 0;
  double estimate = 0, ci_lo = 0, ci_hi = 0;
};

inline std::vector<PlotPoint> coefficient_plot(const std::vector<YearlyEntry>& yearly,
                                               const std::vector<std::string>& terms) {
  std::vector<PlotPoint> pts;
  for (const auto& e : yearly) {
    if (!e.report) continue;
    for (const auto& c : e.report->coefficients) {
      if (std::find(terms.begin(), terms.end(), c.term) == terms.end()) continue;
      pts.push_back({c.term, e.year, c.estimate, c.ci_lo, c.ci_hi});
    }
  }
  return pts;
}

struct BalanceCell {
  double mean = kNaN, sd = kNaN;
  long long n = 0;
};

struct PeriodProfile {
  double mean_swim_out = kNaN, mean_total = kNaN, mean_rank = kNaN;
  double mean_age = kNaN, male_share = kNaN;
  long long n = 0;
};

struct BalanceReport {
  // swim-out time by category x period
  std::map<std::pair<EventCategory, Period>, BalanceCell> cells;
  std::map<Period, PeriodProfile> by_period;
};

inline BalanceReport balance_tables(const std::vector<PanelRow>& panel) {
  BalanceReport rep;
  struct Acc {
    double sum = 0, sumsq = 0;
    long long n = 0;
  };
  std::map<std::pair<EventCategory, Period>, Acc> acc;
  struct PAcc {
    double swim = 0, total = 0, rank = 0, age = 0, male = 0;
    long long n = 0, n_age = 0;
  };
  std::map<Period, PAcc> pacc;
  for (const auto& p : panel) {
    auto& a = acc[{p.category, p.period}];
    a.sum += p.swim_out_s;
    a.sumsq += p.swim_out_s * p.swim_out_s;
    a.n++;
    auto& b = pacc[p.period];
    b.swim += p.swim_out_s;
    b.total += p.total_s;
    b.rank += double(p.race_rank);
    if (p.age) {
      b.age += double(*p.age);
      b.n_age++;
    }
    b.male += p.male ? 1.0 : 0.0;
    b.n++;
  }
  for (const auto& [key, a] : acc) {
    BalanceCell c;
    c.n = a.n;
    c.mean = a.sum / double(a.n);
    if (a.n > 1) {
      double var = (a.sumsq - a.sum * a.sum / double(a.n)) / double(a.n - 1);
      c.sd = std::sqrt(std::max(0.0, var));
    }
    rep.cells[key] = c;
  }
  for (const auto& [period, b] : pacc) {
    PeriodProfile pr;
    pr.n = b.n;
    pr.mean_swim_out = b.swim / double(b.n);
    pr.mean_total = b.total / double(b.n);
    pr.mean_rank = b.rank / double(b.n);
    if (b.n_age > 0) pr.mean_age = b.age / double(b.n_age);
    pr.male_share = b.male / double(b.n);
    rep.by_period[period] = pr;
  }
  return rep;
}

// type-7 quantile: linear interpolation between order statistics
inline double quantile_interpolated(std::vector<double> v, double p) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  double h = (double(v.size()) - 1.0) * p;
  size_t lo = size_t(std::floor(h));
  size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - double(lo)) * (v[hi] - v[lo]);
}

struct SummaryRow {
  std::string variable;
  double min = kNaN, q1 = kNaN, median = kNaN, mean = kNaN, q3 = kNaN, max = kNaN;
  long long n = 0;
};

inline std::vector<SummaryRow> summary_stats(const std::vector<PanelRow>& panel,
                                             const RoleEncoding& roles) {
  static const std::vector<std::string> variables = {
      "total_s", "swim_out_s", "race_rank", "male", "covid_year", "post_period",
      "week_running", "age", "age_sq", "event_year", "cluster_index", "leader",
      "drafter", "drafter_position", "first_drafter", "second_drafter", "third_drafter",
      "fourth_drafter", "fifth_drafter", "last_drafter"};
  static const std::set<std::string> drafters_only = {"drafter_position"};

  std::vector<SummaryRow> out;
  for (const auto& var : variables) {
    std::vector<double> values;
    for (const auto& p : panel) {
      auto it = roles.find(p.result_id);
      if (it == roles.end() || !it->second.encoded) continue;
      if (drafters_only.count(var) && !it->second.drafter) continue;
      double v = detail::column_value(p, it->second, var);
      if (!std::isnan(v)) values.push_back(v);
    }
    SummaryRow row;
    row.variable = var;
    row.n = (long long)values.size();
    if (!values.empty()) {
      row.min = *std::min_element(values.begin(), values.end());
      row.max = *std::max_element(values.begin(), values.end());
      row.q1 = quantile_interpolated(values, 0.25);
      row.median = quantile_interpolated(values, 0.5);
      row.q3 = quantile_interpolated(values, 0.75);
      double sum = 0;
      for (double v : values) sum += v;
      row.mean = sum / double(values.size());
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace draftfe
