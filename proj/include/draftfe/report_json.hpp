#pragma once

#include <string>

#include "draftfe/analysis.hpp"
#include "draftfe/synth.hpp"
#include "json.hpp"  // vendored nlohmann/json

namespace draftfe {

using json = nlohmann::json;

inline std::string vcov_name(const VcovSpec& v) {
  switch (v.kind) {
    case VcovKind::HC1: return "hc1";
    case VcovKind::ClusterOneWay: return "cluster:" + v.dims.at(0);
    case VcovKind::ClusterMultiway: {
      std::string s = "cluster:";
      for (size_t i = 0; i < v.dims.size(); ++i) s += (i ? "," : "") + v.dims[i];
      return s;
    }
    case VcovKind::TwoWayFE: return "twfe";
  }
  return "?";
}

inline json spec_to_json(const ModelSpec& m) {
  json j;
  j["preset"] = m.preset;
  j["response"] = m.response;
  json terms = json::array();
  for (const auto& t : m.terms) terms.push_back(t.name());
  j["terms"] = terms;
  j["fe_dims"] = m.fe_dims;
  j["vcov"] = vcov_name(m.vcov);
  json f;
  if (m.filter.year_min) f["year_min"] = *m.filter.year_min;
  if (m.filter.year_max) f["year_max"] = *m.filter.year_max;
  f["min_group_size"] = m.filter.min_group_size;
  f["athletes_all_periods"] = m.filter.athletes_all_periods;
  j["filter"] = f;
  return j;
}

inline json report_to_json(const AnalysisReport& rep) {
  json j;
  j["spec"] = spec_to_json(rep.spec);
  j["n_obs"] = rep.fit.n_obs;
  j["fe_levels"] = rep.fit.fe_level_counts;
  json coefs = json::array();
  for (const auto& c : rep.coefficients) {
    json row;
    row["term"] = c.term;
    row["estimate"] = c.estimate;
    row["se"] = c.se;
    row["t"] = c.t;
    row["p"] = c.p;
    row["ci_lo"] = c.ci_lo;
    row["ci_hi"] = c.ci_hi;
    coefs.push_back(row);
  }
  j["coefficients"] = coefs;
  j["rmse"] = rep.fit.rmse;
  j["adj_r2"] = rep.fit.adj_r2;
  j["within_r2"] = rep.fit.within_r2;
  j["dof"] = rep.dof;
  j["dropped_columns"] = rep.fit.dropped_columns;
  j["flags"] = rep.flags;
  return j;
}

inline json coverage_to_json(const CoverageReport& rep) {
  json j;
  j["reps_requested"] = rep.reps_requested;
  j["reps_ok"] = rep.reps_ok;
  json terms = json::array();
  for (const auto& t : rep.terms) {
    json row;
    row["term"] = t.term;
    row["truth"] = t.truth;
    row["mean_estimate"] = t.mean_estimate;
    row["bias"] = t.bias;
    row["rmse"] = t.rmse;
    if (!std::isnan(t.coverage)) row["coverage"] = t.coverage;
    row["n_reps"] = t.n_reps;
    terms.push_back(row);
  }
  j["terms"] = terms;
  j["failures"] = rep.failures;
  return j;
}

inline SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("year_min", c.year_min);
  get("year_max", c.year_max);
  get("n_events_per_year", c.n_events_per_year);
  get("athletes_per_event", c.athletes_per_event);
  get("max_group_size", c.max_group_size);
  get("base_time_s", c.base_time_s);
  get("event_sd_s", c.event_sd_s);
  get("noise_sd_s", c.noise_sd_s);
  get("position_effects", c.position_effects);
  get("threshold_s", c.threshold_s);
  get("spacing_min_s", c.spacing_min_s);
  get("spacing_max_s", c.spacing_max_s);
  get("gap_margin_s", c.gap_margin_s);
  get("dissolve_prob", c.dissolve_prob);
  get("stagger_gap_min_s", c.stagger_gap_min_s);
  get("stagger_gap_max_s", c.stagger_gap_max_s);
  get("reuse_window_s", c.reuse_window_s);
  get("dnf_prob", c.dnf_prob);
  get("dns_prob", c.dns_prob);
  get("missing_prob", c.missing_prob);
  get("seed", c.seed);
  if (j.contains("staggered_years"))
    for (const auto& y : j.at("staggered_years")) c.staggered_years.insert(y.get<int>());
  return c;
}

}  // namespace draftfe
