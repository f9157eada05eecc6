#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>

#include "draftfe/data.hpp"

using namespace draftfe;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("draftfe_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    auto p = path / name;
    std::ofstream f(p);
    f << content;
    return p.string();
  }
  static inline int counter = 0;
};

const char* kAthletes =
    "athlete_id,birth_year,male\n"
    "1,1977,1\n"
    "2,1990,0\n"
    "3,,1\n";

const char* kEvents =
    "event_id,date,category\n"
    "10,2015-06-01,Sprint\n"
    "11,2021-07-15,Short\n";

const char* kResults =
    "result_id,athlete_id,event_id,swim_out_s,total_s,race_rank,status\n"
    "100,1,10,800,3000,5,OK\n"
    "101,2,10,812,3100,6,OK\n"
    "102,3,10,790,2900,4,OK\n"
    "103,1,11,805,,,DNF\n"
    "104,2,11,,,,DNS\n";

}  // namespace

TEST_CASE("load_tables parses well-formed files with expected counts") {
  TempDir d;
  auto b = load_tables(d.file("a.csv", kAthletes), d.file("e.csv", kEvents),
                       d.file("r.csv", kResults));
  CHECK(b.athletes.size() == 3);
  CHECK(b.events.size() == 2);
  CHECK(b.results.size() == 5);
  CHECK(b.athletes[2].birth_year == std::nullopt);
  CHECK(b.events[1].category == EventCategory::Short);
  CHECK(b.results[3].status == ResultStatus::DNF);
}

TEST_CASE("load_tables rejects malformed input with row diagnostics") {
  TempDir d;
  SECTION("duplicate event_id") {
    auto events = d.file("e.csv",
                         "event_id,date,category\n10,2015-06-01,Sprint\n10,2016-06-01,Long\n");
    CHECK_THROWS_WITH(load_tables(d.file("a.csv", kAthletes), events, d.file("r.csv", kResults)),
                      Catch::Matchers::ContainsSubstring("duplicate primary key 10"));
  }
  SECTION("schema mismatch") {
    auto athletes = d.file("a.csv", "athlete_id,male\n1,1\n");
    CHECK_THROWS_AS(load_tables(athletes, d.file("e.csv", kEvents), d.file("r.csv", kResults)),
                    data_error);
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(load_tables(d.path.string() + "/nope.csv", d.file("e.csv", kEvents),
                                d.file("r.csv", kResults)),
                    data_error);
  }
  SECTION("bad category") {
    auto events = d.file("e.csv", "event_id,date,category\n10,2015-06-01,Olympic\n");
    CHECK_THROWS_WITH(load_tables(d.file("a.csv", kAthletes), events, d.file("r.csv", kResults)),
                      Catch::Matchers::ContainsSubstring("row 2"));
  }
  SECTION("swim time exceeding total") {
    auto results = d.file("r.csv",
                          "result_id,athlete_id,event_id,swim_out_s,total_s,race_rank,status\n"
                          "100,1,10,3000,800,5,OK\n");
    CHECK_THROWS_AS(load_tables(d.file("a.csv", kAthletes), d.file("e.csv", kEvents), results),
                    data_error);
  }
}

TEST_CASE("build_panel joins, filters, and derives covariates") {
  TempDir d;
  auto b = load_tables(d.file("a.csv", kAthletes), d.file("e.csv", kEvents),
                       d.file("r.csv", kResults));
  auto panel = build_panel(b);

  // DNF/DNS rows dropped
  CHECK(panel.size() == 3);
  for (const auto& p : panel) CHECK(p.event_id == 10);

  // sorted by (event_id, swim_out_s)
  CHECK(panel[0].result_id == 102);
  CHECK(panel[1].result_id == 100);
  CHECK(panel[2].result_id == 101);

  // athlete born 1977 in a 2015 event
  CHECK(panel[1].age == 38);
  CHECK(panel[1].age_sq == 1444);
  // missing birth_year retained with absent age
  CHECK(panel[0].age == std::nullopt);

  CHECK(panel[0].week_running == 0);  // earliest event anchors at zero
  CHECK(panel[0].period == Period::Pre);
  CHECK_FALSE(panel[0].covid_year_flag);
}

TEST_CASE("unknown foreign key is a join-time error naming the row") {
  TempDir d;
  auto results = d.file("r.csv",
                        "result_id,athlete_id,event_id,swim_out_s,total_s,race_rank,status\n"
                        "100,99,10,800,3000,5,OK\n");
  auto b = load_tables(d.file("a.csv", kAthletes), d.file("e.csv", kEvents), results);
  CHECK_THROWS_WITH(build_panel(b),
                    Catch::Matchers::ContainsSubstring("unknown athlete_id 99"));
}

TEST_CASE("assign_period boundaries") {
  PeriodConfig cfg;
  CHECK(assign_period(2019, cfg) == Period::Pre);
  CHECK(assign_period(2020, cfg) == Period::Covid);
  CHECK(assign_period(2021, cfg) == Period::Covid);
  CHECK(assign_period(2022, cfg) == Period::Covid);
  CHECK(assign_period(2023, cfg) == Period::Post);
  // boundaries are configuration
  PeriodConfig wide{2020, 2023};
  CHECK(assign_period(2020, wide) == Period::Pre);
  CHECK(assign_period(2023, wide) == Period::Covid);
}

TEST_CASE("panel rebuild is deterministic") {
  TempDir d;
  auto b = load_tables(d.file("a.csv", kAthletes), d.file("e.csv", kEvents),
                       d.file("r.csv", kResults));
  auto p1 = build_panel(b);
  auto p2 = build_panel(b);
  REQUIRE(p1.size() == p2.size());
  for (size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].result_id == p2[i].result_id);
    CHECK(p1[i].swim_out_s == p2[i].swim_out_s);
    CHECK(p1[i].week_running == p2[i].week_running);
  }
}

TEST_CASE("empty panel after filtering is an error") {
  TempDir d;
  auto results = d.file("r.csv",
                        "result_id,athlete_id,event_id,swim_out_s,total_s,race_rank,status\n"
                        "100,1,10,800,,,DNF\n");
  auto b = load_tables(d.file("a.csv", kAthletes), d.file("e.csv", kEvents), results);
  CHECK_THROWS_AS(build_panel(b), data_error);
}

TEST_CASE("date serial numbers anchor week_running") {
  CHECK(Date{1970, 1, 1}.serial() == 0);
  CHECK(Date{1970, 1, 8}.serial() == 7);
  CHECK(Date{2000, 3, 1}.serial() == 11017);
}
