// draftfe: swim-group construction and drafting-effect estimation pipeline.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "draftfe/report_json.hpp"

namespace fs = std::filesystem;
using namespace draftfe;

namespace {

struct DataOpts {
  std::string athletes, events, results;
  std::string period_config;
};

struct GroupOpts {
  std::string linkage = "single";
  double threshold_s = 5.0;
  int min_group_size = 1;
  std::string groups_file;  // reuse a previously written groups CSV
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--athletes", d.athletes, "athletes.csv path")->required();
  cmd->add_option("--events", d.events, "events.csv path")->required();
  cmd->add_option("--results", d.results, "results.csv path")->required();
  cmd->add_option("--period-config", d.period_config,
                  "JSON file {\"pre_max\":2019,\"covid_max\":2022}");
}

void add_group_opts(CLI::App* cmd, GroupOpts& g, bool with_reuse) {
  cmd->add_option("--linkage", g.linkage, "single|complete")
      ->check(CLI::IsMember({"single", "complete"}));
  cmd->add_option("--threshold-s", g.threshold_s, "clustering threshold in seconds");
  cmd->add_option("--min-group-size", g.min_group_size, "groups below this size are flagged");
  if (with_reuse)
    cmd->add_option("--groups", g.groups_file, "reuse groups CSV instead of re-clustering");
}

PeriodConfig load_period_config(const std::string& path) {
  PeriodConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw data_error("cannot open period config '" + path + "'");
  json j = json::parse(in);
  if (j.contains("pre_max")) cfg.pre_max = j["pre_max"].get<int>();
  if (j.contains("covid_max")) cfg.covid_max = j["covid_max"].get<int>();
  return cfg;
}

ClusterSpec to_cluster_spec(const GroupOpts& g) {
  ClusterSpec spec;
  spec.linkage = g.linkage == "complete" ? Linkage::Complete : Linkage::Single;
  spec.threshold_s = g.threshold_s;
  spec.min_group_size = g.min_group_size;
  return spec;
}

VcovSpec parse_vcov(const std::string& s) {
  VcovSpec v;
  if (s == "hc1") {
    v.kind = VcovKind::HC1;
  } else if (s == "twfe") {
    v.kind = VcovKind::TwoWayFE;
    v.dims = {"athlete", "event"};
  } else if (s.rfind("cluster:", 0) == 0) {
    std::string dims = s.substr(8);
    std::stringstream ss(dims);
    std::string d;
    while (std::getline(ss, d, ',')) v.dims.push_back(d);
    if (v.dims.empty()) throw usage_error("bad --vcov '" + s + "'");
    v.kind = v.dims.size() == 1 ? VcovKind::ClusterOneWay : VcovKind::ClusterMultiway;
  } else {
    throw usage_error("bad --vcov '" + s + "' (hc1 | cluster:<dims> | twfe)");
  }
  return v;
}

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

void write_panel_csv(const std::vector<PanelRow>& panel, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw data_error("cannot write '" + path + "'");
  f << "result_id,athlete_id,event_id,swim_out_s,total_s,race_rank,event_year,category,"
       "period,covid_year,age,age_sq,week_running,male\n";
  for (const auto& p : panel) {
    f << p.result_id << "," << p.athlete_id << "," << p.event_id << ","
      << fmt(p.swim_out_s, 3) << "," << fmt(p.total_s, 3) << "," << p.race_rank << ","
      << p.event_year << "," << to_string(p.category) << "," << to_string(p.period) << ","
      << (p.covid_year_flag ? 1 : 0) << "," << (p.age ? std::to_string(*p.age) : "") << ","
      << (p.age_sq ? std::to_string(*p.age_sq) : "") << "," << p.week_running << ","
      << (p.male ? 1 : 0) << "\n";
  }
}

void write_groups_csv(const std::vector<SwimGroup>& groups, const RoleEncoding& roles,
                      const std::string& path) {
  std::ofstream f(path);
  if (!f) throw data_error("cannot write '" + path + "'");
  f << "event_id,cluster_index,result_id,member_rank,leader,drafter,drafter_position,"
       "last_drafter\n";
  for (const auto& g : groups) {
    for (size_t k = 0; k < g.member_result_ids.size(); ++k) {
      const Role& r = roles.at(g.member_result_ids[k]);
      f << g.event_id << "," << g.cluster_index << "," << g.member_result_ids[k] << ","
        << k << "," << r.leader << "," << r.drafter << "," << r.drafter_position << ","
        << r.last_drafter << "\n";
    }
  }
}

RoleEncoding read_groups_csv(const std::string& path) {
  auto t = csv::read_file(path, {"event_id", "cluster_index", "result_id", "member_rank",
                                 "leader", "drafter", "drafter_position", "last_drafter"});
  RoleEncoding roles;
  std::map<std::pair<long long, int>, int> group_sizes;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    size_t lineno = i + 2;
    Role r;
    r.event_id = *csv::parse_int(row[0], "event_id", lineno);
    r.cluster_index = int(*csv::parse_int(row[1], "cluster_index", lineno));
    long long result_id = *csv::parse_int(row[2], "result_id", lineno);
    r.member_rank = int(*csv::parse_int(row[3], "member_rank", lineno));
    r.leader = int(*csv::parse_int(row[4], "leader", lineno));
    r.drafter = int(*csv::parse_int(row[5], "drafter", lineno));
    r.drafter_position = int(*csv::parse_int(row[6], "drafter_position", lineno));
    r.last_drafter = int(*csv::parse_int(row[7], "last_drafter", lineno));
    r.encoded = (r.leader + r.drafter) > 0;
    switch (r.drafter_position) {
      case 1: r.first_drafter = 1; break;
      case 2: r.second_drafter = 1; break;
      case 3: r.third_drafter = 1; break;
      case 4: r.fourth_drafter = 1; break;
      case 5: r.fifth_drafter = 1; break;
      default: break;
    }
    group_sizes[{r.event_id, r.cluster_index}]++;
    roles[result_id] = r;
  }
  for (auto& [id, r] : roles) r.group_size = group_sizes[{r.event_id, r.cluster_index}];
  return roles;
}

json manifest_json(const DataOpts& d, const GroupOpts& g, const std::string& preset,
                   const std::string& vcov, uint64_t seed) {
  json j;
  j["inputs"] = {{"athletes", d.athletes}, {"events", d.events}, {"results", d.results}};
  j["period_config"] = d.period_config;
  j["cluster"] = {{"linkage", g.linkage},
                  {"threshold_s", g.threshold_s},
                  {"min_group_size", g.min_group_size},
                  {"groups_file", g.groups_file}};
  if (!preset.empty()) j["preset"] = preset;
  if (!vcov.empty()) j["vcov"] = vcov;
  j["seed"] = seed;
  return j;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw data_error("cannot write '" + path + "'");
  f << content;
}

// minimal static rendering of the yearly coefficient plot
std::string coefplot_svg(const std::vector<PlotPoint>& pts) {
  if (pts.empty()) return "<svg xmlns='http://www.w3.org/2000/svg'/>";
  int ymin = pts.front().year, ymax = pts.front().year;
  double lo = 0, hi = 0;
  for (const auto& p : pts) {
    ymin = std::min(ymin, p.year);
    ymax = std::max(ymax, p.year);
    lo = std::min({lo, p.ci_lo});
    hi = std::max({hi, p.ci_hi});
  }
  double pad = 0.05 * (hi - lo + 1e-9);
  lo -= pad;
  hi += pad;
  const double W = 640, H = 400, ml = 60, mr = 20, mt = 20, mb = 40;
  auto xpos = [&](int year) {
    return ymax == ymin ? ml + (W - ml - mr) / 2
                        : ml + (W - ml - mr) * double(year - ymin) / double(ymax - ymin);
  };
  auto ypos = [&](double v) { return mt + (H - mt - mb) * (hi - v) / (hi - lo); };
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  s << "<line x1='" << ml << "' y1='" << fmt(ypos(0), 1) << "' x2='" << W - mr << "' y2='"
    << fmt(ypos(0), 1) << "' stroke='black' stroke-width='0.5'/>\n";
  for (const auto& p : pts) {
    double x = xpos(p.year);
    s << "<line x1='" << fmt(x, 1) << "' y1='" << fmt(ypos(p.ci_lo), 1) << "' x2='"
      << fmt(x, 1) << "' y2='" << fmt(ypos(p.ci_hi), 1) << "' stroke='steelblue'/>\n";
    s << "<circle cx='" << fmt(x, 1) << "' cy='" << fmt(ypos(p.estimate), 1)
      << "' r='3' fill='steelblue'/>\n";
    s << "<text x='" << fmt(x, 1) << "' y='" << H - 10
      << "' font-size='10' text-anchor='middle'>" << p.year << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

struct PanelWithRoles {
  std::vector<PanelRow> panel;
  std::vector<SwimGroup> groups;
  RoleEncoding roles;
  bool groups_reused = false;
};

PanelWithRoles load_pipeline(const DataOpts& d, const GroupOpts& g) {
  PanelWithRoles out;
  auto bundle = load_tables(d.athletes, d.events, d.results);
  out.panel = build_panel(bundle, load_period_config(d.period_config));
  if (!g.groups_file.empty()) {
    out.roles = read_groups_csv(g.groups_file);
    out.groups_reused = true;
  } else {
    out.groups = cluster_panel(out.panel, to_cluster_spec(g));
    out.roles = encode_roles(out.groups);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swim-group drafting effect estimation"};
  app.require_subcommand(1);

  DataOpts data;
  GroupOpts group;
  std::string out_dir = ".";
  std::string preset = "interaction_pre_covid";
  std::string vcov_str;
  std::vector<std::string> plot_terms = {"drafter"};
  bool emit_svg = false;
  std::string sim_config;
  int sim_reps = 200;
  uint64_t seed = 1;

  auto* ingest = app.add_subcommand("ingest", "parse and join the input tables");
  add_data_opts(ingest, data);
  ingest->add_option("--out", out_dir, "output directory");

  auto* grp = app.add_subcommand("group", "cluster swim-out times into groups");
  add_data_opts(grp, data);
  add_group_opts(grp, group, false);
  grp->add_option("--out", out_dir, "output directory");

  auto* fit_cmd = app.add_subcommand("fit", "estimate a model preset");
  add_data_opts(fit_cmd, data);
  add_group_opts(fit_cmd, group, true);
  fit_cmd->add_option("--preset", preset,
                      "base[:1-6] | interaction_pre_covid | "
                      "interaction_pre_post[:controls|:twfe|:groupfe] | "
                      "drafter_only[:all_periods|:min3]");
  fit_cmd->add_option("--vcov", vcov_str, "hc1 | cluster:<dim[,dim]> | twfe");
  fit_cmd->add_option("--out", out_dir, "output directory");

  auto* yearly = app.add_subcommand("yearly", "per-year subsample fits");
  add_data_opts(yearly, data);
  add_group_opts(yearly, group, true);
  yearly->add_option("--preset", preset, "model preset");
  yearly->add_option("--vcov", vcov_str, "variance estimator override");
  yearly->add_option("--term", plot_terms, "terms for the coefficient plot");
  yearly->add_flag("--svg", emit_svg, "also render a static SVG");
  yearly->add_option("--out", out_dir, "output directory");

  auto* balance = app.add_subcommand("balance", "balance tables");
  add_data_opts(balance, data);
  balance->add_option("--out", out_dir, "output directory");

  auto* summary = app.add_subcommand("summary", "summary statistics");
  add_data_opts(summary, data);
  add_group_opts(summary, group, true);
  summary->add_option("--out", out_dir, "output directory");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo recovery harness");
  simulate->add_option("--config", sim_config, "SynthConfig JSON file")->required();
  simulate->add_option("--reps", sim_reps, "number of replications");
  simulate->add_option("--preset", preset, "model preset to estimate per rep");
  simulate->add_option("--seed", seed, "override config seed");
  simulate->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    fs::create_directories(out_dir);

    if (*ingest) {
      auto bundle = load_tables(data.athletes, data.events, data.results);
      auto panel = build_panel(bundle, load_period_config(data.period_config));
      write_panel_csv(panel, out_dir + "/panel.csv");
      write_text(out_dir + "/manifest.json",
                 manifest_json(data, group, "", "", seed).dump(2) + "\n");
      std::cout << "athletes=" << bundle.athletes.size() << " events=" << bundle.events.size()
                << " results=" << bundle.results.size() << " panel=" << panel.size() << "\n";
      return 0;
    }

    if (*grp) {
      auto pr = load_pipeline(data, group);
      write_groups_csv(pr.groups, pr.roles, out_dir + "/groups.csv");
      write_text(out_dir + "/manifest.json",
                 manifest_json(data, group, "", "", seed).dump(2) + "\n");
      auto stats = grouping_report(pr.groups, pr.roles);
      std::cout << "groups=" << stats.n_groups << " singletons=" << stats.n_singletons
                << " leader_share=" << fmt(stats.leader_share, 4)
                << " drafter_share=" << fmt(stats.drafter_share, 4) << "\n";
      return 0;
    }

    if (*fit_cmd || *yearly) {
      auto pr = load_pipeline(data, group);
      ModelSpec spec = make_preset(preset);
      if (!vcov_str.empty()) spec.vcov = parse_vcov(vcov_str);

      write_panel_csv(pr.panel, out_dir + "/panel.csv");
      if (!pr.groups_reused) write_groups_csv(pr.groups, pr.roles, out_dir + "/groups.csv");
      write_text(out_dir + "/manifest.json",
                 manifest_json(data, group, preset, vcov_name(spec.vcov), seed).dump(2) + "\n");

      if (*fit_cmd) {
        auto report = run_spec(pr.panel, pr.roles, spec);
        write_text(out_dir + "/report.json", report_to_json(report).dump(2) + "\n");
        for (const auto& c : report.coefficients)
          std::cout << c.term << " " << fmt(c.estimate, 4) << " (SE " << fmt(c.se, 4)
                    << ", p " << fmt(c.p, 4) << ")\n";
        return 0;
      }

      auto entries = run_yearly(pr.panel, pr.roles, spec);
      json jyears = json::array();
      for (const auto& e : entries) {
        json jy;
        jy["year"] = e.year;
        if (e.report)
          jy["report"] = report_to_json(*e.report);
        else
          jy["skipped"] = e.skip_reason;
        jyears.push_back(jy);
      }
      write_text(out_dir + "/yearly.json", jyears.dump(2) + "\n");
      auto pts = coefficient_plot(entries, plot_terms);
      std::ostringstream csv_out;
      csv_out << "term,year,estimate,ci_lo,ci_hi\n";
      for (const auto& p : pts)
        csv_out << p.term << "," << p.year << "," << fmt(p.estimate) << "," << fmt(p.ci_lo)
                << "," << fmt(p.ci_hi) << "\n";
      write_text(out_dir + "/coefplot.csv", csv_out.str());
      if (emit_svg) write_text(out_dir + "/coefplot.svg", coefplot_svg(pts));
      std::cout << "years=" << entries.size() << " plotted=" << pts.size() << "\n";
      return 0;
    }

    if (*balance) {
      auto bundle = load_tables(data.athletes, data.events, data.results);
      auto panel = build_panel(bundle, load_period_config(data.period_config));
      auto rep = balance_tables(panel);
      json j;
      json cells = json::array();
      for (const auto& [key, c] : rep.cells) {
        json row;
        row["category"] = to_string(key.first);
        row["period"] = to_string(key.second);
        row["mean"] = c.mean;
        if (!std::isnan(c.sd)) row["sd"] = c.sd;
        row["n"] = c.n;
        cells.push_back(row);
      }
      j["swim_out_by_category_period"] = cells;
      json periods = json::array();
      for (const auto& [p, prof] : rep.by_period) {
        json row;
        row["period"] = to_string(p);
        row["mean_swim_out"] = prof.mean_swim_out;
        row["mean_total"] = prof.mean_total;
        row["mean_rank"] = prof.mean_rank;
        if (!std::isnan(prof.mean_age)) row["mean_age"] = prof.mean_age;
        row["male_share"] = prof.male_share;
        row["n"] = prof.n;
        periods.push_back(row);
      }
      j["by_period"] = periods;
      write_text(out_dir + "/balance.json", j.dump(2) + "\n");
      std::cout << "cells=" << rep.cells.size() << "\n";
      return 0;
    }

    if (*summary) {
      auto pr = load_pipeline(data, group);
      auto rows = summary_stats(pr.panel, pr.roles);
      std::ostringstream csv_out;
      csv_out << "variable,min,q1,median,mean,q3,max,n\n";
      for (const auto& r : rows)
        csv_out << r.variable << "," << fmt(r.min, 4) << "," << fmt(r.q1, 4) << ","
                << fmt(r.median, 4) << "," << fmt(r.mean, 4) << "," << fmt(r.q3, 4) << ","
                << fmt(r.max, 4) << "," << r.n << "\n";
      write_text(out_dir + "/summary.csv", csv_out.str());
      std::cout << "variables=" << rows.size() << "\n";
      return 0;
    }

    if (*simulate) {
      if (sim_reps < 1) throw usage_error("--reps must be >= 1");
      std::ifstream in(sim_config);
      if (!in) throw data_error("cannot open synth config '" + sim_config + "'");
      SynthConfig cfg = synth_config_from_json(json::parse(in));
      if (simulate->count("--seed")) cfg.seed = seed;
      ModelSpec spec = make_preset(preset);
      ClusterSpec cspec;
      cspec.threshold_s = cfg.threshold_s;
      auto rep = mc_recovery(cfg, spec, cspec, sim_reps);
      write_text(out_dir + "/coverage.json", coverage_to_json(rep).dump(2) + "\n");
      for (const auto& t : rep.terms) {
        std::cout << t.term << " truth=" << fmt(t.truth, 3) << " est=" << fmt(t.mean_estimate, 3)
                  << " bias=" << fmt(t.bias, 3);
        if (!std::isnan(t.coverage)) std::cout << " coverage=" << fmt(t.coverage, 3);
        std::cout << "\n";
      }
      return 0;
    }
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
