#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "draftfe/csv.hpp"

namespace draftfe {

enum class EventCategory { Sprint, Short, Middle, Long };
enum class ResultStatus { OK, DNF, DNS, MISSING };
enum class Period { Pre, Covid, Post };

inline const char* to_string(EventCategory c) {
  switch (c) {
    case EventCategory::Sprint: return "Sprint";
    case EventCategory::Short: return "Short";
    case EventCategory::Middle: return "Middle";
    case EventCategory::Long: return "Long";
  }
  return "?";
}

inline const char* to_string(Period p) {
  switch (p) {
    case Period::Pre: return "Pre";
    case Period::Covid: return "Covid";
    case Period::Post: return "Post";
  }
  return "?";
}

struct Athlete {
  long long athlete_id = 0;
  std::optional<int> birth_year;
  bool male = false;
};

struct Date {
  int year = 0, month = 1, day = 1;

  // days since 1970-01-01 (civil calendar)
  long long serial() const {
    int y = year - (month <= 2);
    int era = (y >= 0 ? y : y - 399) / 400;
    unsigned yoe = unsigned(y - era * 400);
    unsigned doy = (153u * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097LL + doe - 719468LL;
  }
};

struct Event {
  long long event_id = 0;
  Date date;
  EventCategory category = EventCategory::Sprint;
};

struct ResultRecord {
  long long result_id = 0;
  long long athlete_id = 0;
  long long event_id = 0;
  std::optional<double> swim_out_s;
  std::optional<double> total_s;
  std::optional<long long> race_rank;
  ResultStatus status = ResultStatus::OK;
};

struct RelationalBundle {
  std::vector<Athlete> athletes;
  std::vector<Event> events;
  std::vector<ResultRecord> results;
};

struct PeriodConfig {
  int pre_max = 2019;    // Pre: year <= pre_max
  int covid_max = 2022;  // Covid: pre_max < year <= covid_max; Post beyond
};

struct PanelRow {
  long long result_id = 0;
  long long athlete_id = 0;
  long long event_id = 0;
  double swim_out_s = 0.0;
  double total_s = 0.0;
  long long race_rank = 0;
  int event_year = 0;
  EventCategory category = EventCategory::Sprint;
  Period period = Period::Pre;
  bool covid_year_flag = false;  // event_year == 2020
  std::optional<int> age;        // absent when birth_year missing
  std::optional<int> age_sq;
  long long week_running = 0;
  bool male = false;
};

inline Period assign_period(int event_year, const PeriodConfig& cfg) {
  if (event_year <= cfg.pre_max) return Period::Pre;
  if (event_year <= cfg.covid_max) return Period::Covid;
  return Period::Post;
}

namespace detail {

inline Date parse_date(const std::string& cell, size_t row) {
  Date d;
  if (cell.size() != 10 || cell[4] != '-' || cell[7] != '-')
    throw data_error("csv: row " + std::to_string(row) + ": bad ISO date '" + cell + "'");
  d.year = std::stoi(cell.substr(0, 4));
  d.month = std::stoi(cell.substr(5, 2));
  d.day = std::stoi(cell.substr(8, 2));
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
    throw data_error("csv: row " + std::to_string(row) + ": bad ISO date '" + cell + "'");
  return d;
}

inline EventCategory parse_category(const std::string& cell, size_t row) {
  if (cell == "Sprint") return EventCategory::Sprint;
  if (cell == "Short") return EventCategory::Short;
  if (cell == "Middle") return EventCategory::Middle;
  if (cell == "Long") return EventCategory::Long;
  throw data_error("csv: row " + std::to_string(row) + ": unknown category '" + cell + "'");
}

inline ResultStatus parse_status(const std::string& cell, size_t row) {
  if (cell == "OK") return ResultStatus::OK;
  if (cell == "DNF") return ResultStatus::DNF;
  if (cell == "DNS") return ResultStatus::DNS;
  if (cell.empty()) return ResultStatus::MISSING;
  throw data_error("csv: row " + std::to_string(row) + ": unknown status '" + cell + "'");
}

template <typename T, typename Key>
void check_unique(std::unordered_set<Key>& seen, Key k, const char* table, size_t row) {
  if (!seen.insert(k).second)
    throw data_error(std::string(table) + ": duplicate primary key " + std::to_string(k) +
                     " at row " + std::to_string(row));
}

}  // namespace detail

inline RelationalBundle load_tables(const std::string& athletes_path,
                                    const std::string& events_path,
                                    const std::string& results_path) {
  RelationalBundle b;

  auto at = csv::read_file(athletes_path, {"athlete_id", "birth_year", "male"});
  std::unordered_set<long long> athlete_ids;
  for (size_t i = 0; i < at.rows.size(); ++i) {
    const auto& r = at.rows[i];
    size_t row = i + 2;  // header is line 1
    Athlete a;
    auto id = csv::parse_int(r[0], "athlete_id", row);
    if (!id) throw data_error("athletes: row " + std::to_string(row) + ": missing athlete_id");
    a.athlete_id = *id;
    detail::check_unique<Athlete>(athlete_ids, a.athlete_id, "athletes", row);
    if (auto by = csv::parse_int(r[1], "birth_year", row)) {
      if (*by < 1900 || *by > 2100)
        throw data_error("athletes: row " + std::to_string(row) + ": birth_year " +
                         std::to_string(*by) + " out of range");
      a.birth_year = int(*by);
    }
    auto m = csv::parse_int(r[2], "male", row);
    if (!m || (*m != 0 && *m != 1))
      throw data_error("athletes: row " + std::to_string(row) + ": male must be 0 or 1");
    a.male = (*m == 1);
    b.athletes.push_back(a);
  }

  auto ev = csv::read_file(events_path, {"event_id", "date", "category"});
  std::unordered_set<long long> event_ids;
  for (size_t i = 0; i < ev.rows.size(); ++i) {
    const auto& r = ev.rows[i];
    size_t row = i + 2;
    Event e;
    auto id = csv::parse_int(r[0], "event_id", row);
    if (!id) throw data_error("events: row " + std::to_string(row) + ": missing event_id");
    e.event_id = *id;
    detail::check_unique<Event>(event_ids, e.event_id, "events", row);
    e.date = detail::parse_date(r[1], row);
    e.category = detail::parse_category(r[2], row);
    b.events.push_back(e);
  }

  auto res = csv::read_file(results_path,
                            {"result_id", "athlete_id", "event_id", "swim_out_s", "total_s",
                             "race_rank", "status"});
  std::unordered_set<long long> result_ids;
  for (size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    size_t row = i + 2;
    ResultRecord rec;
    auto id = csv::parse_int(r[0], "result_id", row);
    if (!id) throw data_error("results: row " + std::to_string(row) + ": missing result_id");
    rec.result_id = *id;
    detail::check_unique<ResultRecord>(result_ids, rec.result_id, "results", row);
    auto aid = csv::parse_int(r[1], "athlete_id", row);
    auto eid = csv::parse_int(r[2], "event_id", row);
    if (!aid || !eid)
      throw data_error("results: row " + std::to_string(row) + ": missing foreign key");
    rec.athlete_id = *aid;
    rec.event_id = *eid;
    rec.swim_out_s = csv::parse_double(r[3], "swim_out_s", row);
    rec.total_s = csv::parse_double(r[4], "total_s", row);
    rec.race_rank = csv::parse_int(r[5], "race_rank", row);
    rec.status = detail::parse_status(r[6], row);
    if (rec.status == ResultStatus::OK && rec.swim_out_s && rec.total_s) {
      if (*rec.swim_out_s <= 0 || *rec.total_s <= 0)
        throw data_error("results: row " + std::to_string(row) + ": non-positive time");
      if (*rec.swim_out_s > *rec.total_s)
        throw data_error("results: row " + std::to_string(row) +
                         ": swim_out_s exceeds total_s");
    }
    b.results.push_back(rec);
  }

  return b;
}

// Join, drop DNF/DNS/missing rows, derive period and covariates.
// Output sorted by (event_id, swim_out_s).
inline std::vector<PanelRow> build_panel(const RelationalBundle& bundle,
                                         const PeriodConfig& cfg = {}) {
  std::unordered_map<long long, const Athlete*> athletes;
  for (const auto& a : bundle.athletes) athletes[a.athlete_id] = &a;
  std::unordered_map<long long, const Event*> events;
  for (const auto& e : bundle.events) events[e.event_id] = &e;

  long long min_serial = 0;
  bool have_event = false;
  for (const auto& e : bundle.events) {
    long long s = e.date.serial();
    if (!have_event || s < min_serial) min_serial = s;
    have_event = true;
  }

  std::vector<PanelRow> panel;
  for (size_t i = 0; i < bundle.results.size(); ++i) {
    const auto& r = bundle.results[i];
    auto ai = athletes.find(r.athlete_id);
    if (ai == athletes.end())
      throw data_error("join: results row " + std::to_string(i + 2) +
                       " references unknown athlete_id " + std::to_string(r.athlete_id));
    auto ei = events.find(r.event_id);
    if (ei == events.end())
      throw data_error("join: results row " + std::to_string(i + 2) +
                       " references unknown event_id " + std::to_string(r.event_id));
    if (r.status != ResultStatus::OK) continue;
    if (!r.swim_out_s || !r.total_s || !r.race_rank) continue;  // missing data

    const Athlete& a = *ai->second;
    const Event& e = *ei->second;
    PanelRow p;
    p.result_id = r.result_id;
    p.athlete_id = r.athlete_id;
    p.event_id = r.event_id;
    p.swim_out_s = *r.swim_out_s;
    p.total_s = *r.total_s;
    p.race_rank = *r.race_rank;
    p.event_year = e.date.year;
    p.category = e.category;
    p.period = assign_period(p.event_year, cfg);
    p.covid_year_flag = (p.event_year == 2020);
    if (a.birth_year) {
      p.age = p.event_year - *a.birth_year;
      p.age_sq = *p.age * *p.age;
    }
    p.week_running = (e.date.serial() - min_serial) / 7;
    p.male = a.male;
    panel.push_back(p);
  }

  if (panel.empty()) throw data_error("build_panel: empty panel after filtering");

  std::sort(panel.begin(), panel.end(), [](const PanelRow& x, const PanelRow& y) {
    if (x.event_id != y.event_id) return x.event_id < y.event_id;
    if (x.swim_out_s != y.swim_out_s) return x.swim_out_s < y.swim_out_s;
    return x.result_id < y.result_id;
  });
  return panel;
}

}  // namespace draftfe
