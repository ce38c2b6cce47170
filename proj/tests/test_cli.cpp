#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trace2lr/cli.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Writes a miniature but complete fixture: schema, registrations for two
/// well-separated activities across 4 subjects / 2 phones / 2 locations,
/// matching intervals, and a config file.
struct Fixture {
  fs::path dir;
  fs::path config;

  Fixture() {
    dir = fs::temp_directory_path() / "t2lr_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    std::ofstream schema(dir / "schema.json");
    schema << R"({"variables": [
      {"name": "count", "kind": "cumulative_numeric", "source_table": "steps"},
      {"name": "mets", "kind": "noncumulative_numeric", "source_table": "natalie"},
      {"name": "motion", "kind": "categorical", "source_table": "motion"}
    ]})";
    schema.close();

    std::ofstream regs(dir / "registrations.csv");
    regs << "timestamp,variable,value,subject,phone,location,session\n";
    std::ofstream ivs(dir / "intervals.csv");
    ivs << "activity,start,end,subject,phone,location,session\n";
    // Each subject: 30 minutes of "walking" (counts high, motion walking)
    // then 30 minutes of "tram" (counts zero-ish, motion vehicle).
    for (int subj = 0; subj < 4; ++subj) {
      const std::string s = "s0" + std::to_string(subj + 1);
      const std::string phone = subj % 2 ? "iPhone 7" : "iPhone XR";
      const std::string loc = subj / 2 ? "hand" : "backpack";
      const std::string prov = s + "," + phone + "," + loc + ",S1";
      const int base_h = 10 + subj;
      char buf[128];
      for (int m = 0; m < 60; ++m) {
        const bool walking = m < 30;
        const int h = base_h;
        std::snprintf(buf, sizeof(buf), "2022-05-02T%02d:%02d:%02d", h, m, 10);
        regs << buf << ",count," << (walking ? 40 + (m * 7) % 25 : (m % 3)) << "," << prov
             << "\n";
        std::snprintf(buf, sizeof(buf), "2022-05-02T%02d:%02d:%02d", h, m, 30);
        regs << buf << ",mets," << (walking ? 3.0 + 0.01 * (m % 9) : 1.1 + 0.01 * (m % 5))
             << "," << prov << "\n";
        if (m % 2 == 0) {
          std::snprintf(buf, sizeof(buf), "2022-05-02T%02d:%02d:%02d", h, m, 45);
          regs << buf << ",motion," << (walking ? "walking" : "automotive") << "," << prov
               << "\n";
        }
      }
      char iv[160];
      std::snprintf(iv, sizeof(iv),
                    "walking,2022-05-02T%02d:00:00,2022-05-02T%02d:30:00,%s\n", base_h, base_h,
                    prov.c_str());
      ivs << iv;
      std::snprintf(iv, sizeof(iv),
                    "tram,2022-05-02T%02d:30:00,2022-05-02T%02d:00:00,%s\n", base_h, base_h + 1,
                    prov.c_str());
      ivs << iv;
    }
    regs.close();
    ivs.close();

    nlohmann::json cfg = {
        {"schema", (dir / "schema.json").string()},
        {"dataset", (dir / "out/dataset.csv").string()},
        {"out_dir", (dir / "out").string()},
        {"seed", 7},
        {"folds", 2},
        {"threads", 1},
        {"scorer",
         {{"family", "gradient_boosted"},
          {"rounds", 8},
          {"max_depth", 3},
          {"learning_rate", 0.3},
          {"min_samples_leaf", 2}}},
        {"calibrator", "logistic"},
        {"bootstrap", {{"replicates", 15}, {"seed", 3}}},
        {"groups", {{"movement", {"walking"}}, {"transport", {"tram"}}}},
        {"ingest",
         {{"registrations", (dir / "registrations.csv").string()},
          {"intervals", (dir / "intervals.csv").string()}}},
        {"timeline", {{"dataset", (dir / "sequence.csv").string()}}}};
    config = dir / "config.json";
    std::ofstream(config) << cfg.dump(2);
  }
};

int cli(const std::vector<std::string>& args) { return trace2lr::run_cli(args); }

}  // namespace

TEST_CASE("cli end-to-end: ingest, evaluate, pairwise, groups, fit, timeline") {
  Fixture fx;
  const std::string cfg = fx.config.string();

  REQUIRE(cli({"ingest", "--config", cfg}) == 0);
  REQUIRE(fs::exists(fx.dir / "out/dataset.csv"));
  REQUIRE(fs::exists(fx.dir / "out/summary.json"));
  const auto summary = nlohmann::json::parse(slurp(fx.dir / "out/summary.json"));
  CHECK(summary["activities"].size() == 2);
  CHECK(summary["n_samples"] == 240);

  SUBCASE("evaluate writes the three diagnostic plots and a report") {
    REQUIRE(cli({"evaluate", "--config", cfg, "--h1", "walking", "--h2", "tram"}) == 0);
    for (const char* f : {"pav.svg", "tippett.svg", "ece.svg", "pav.csv", "tippett.csv",
                          "ece.csv", "evaluation.json", "curves.json"})
      CHECK(fs::exists(fx.dir / "out" / f));
    const auto rep = nlohmann::json::parse(slurp(fx.dir / "out/evaluation.json"));
    CHECK(rep["cllr"].get<double>() < 0.5);  // separable fixture
    CHECK(rep["cllr_min"].get<double>() <= rep["cllr"].get<double>() + 1e-12);

    // Determinism: rerunning produces byte-identical SVG output.
    const std::string first = slurp(fx.dir / "out/pav.svg");
    REQUIRE(cli({"evaluate", "--config", cfg, "--h1", "walking", "--h2", "tram"}) == 0);
    CHECK(slurp(fx.dir / "out/pav.svg") == first);
  }

  SUBCASE("pairwise writes matrix csvs and heatmap") {
    REQUIRE(cli({"pairwise", "--config", cfg}) == 0);
    for (const char* f :
         {"pairwise_cllr.csv", "pairwise_cllrmin.csv", "pairwise_long.csv", "heatmap.svg",
          "pairwise.json"})
      CHECK(fs::exists(fx.dir / "out" / f));
    const std::string long_csv = slurp(fx.dir / "out/pairwise_long.csv");
    CHECK(long_csv.find("walking") != std::string::npos);
    CHECK(long_csv.find("tram") != std::string::npos);
  }

  SUBCASE("groups sweep over the configured grouping") {
    REQUIRE(cli({"groups", "--config", cfg}) == 0);
    REQUIRE(fs::exists(fx.dir / "out/groups.csv"));
    const std::string csv = slurp(fx.dir / "out/groups.csv");
    CHECK(csv.find("movement+transport") != std::string::npos);
    CHECK(fs::exists(fx.dir / "out/groups.svg"));
  }

  SUBCASE("fit writes a reloadable LR system; timeline renders a sequence") {
    REQUIRE(cli({"fit", "--config", cfg, "--h1", "walking", "--h2", "tram"}) == 0);
    REQUIRE(fs::exists(fx.dir / "out/lr_system.json"));
    const auto sys = nlohmann::json::parse(slurp(fx.dir / "out/lr_system.json"));
    CHECK(sys["format"] == "trace2lr.lr_system");
    CHECK(sys["elub"]["method"].get<std::string>().find("surrogate") != std::string::npos);

    // Build a sequence file from the first subject's rows (preserved order).
    {
      std::ifstream in(fx.dir / "out/dataset.csv");
      std::ofstream out(fx.dir / "sequence.csv");
      std::string line;
      bool header = true;
      int kept = 0;
      while (std::getline(in, line)) {
        if (header || (line.find("s01") != std::string::npos && kept < 20)) {
          out << line << "\n";
          if (!header) ++kept;
          header = false;
        }
      }
    }
    REQUIRE(cli({"timeline", "--config", cfg}) == 0);
    for (const char* f : {"timeline.csv", "timeline.svg", "timeline.json"})
      CHECK(fs::exists(fx.dir / "out" / f));
    const auto tj = nlohmann::json::parse(slurp(fx.dir / "out/timeline.json"));
    CHECK(tj["minutes"] == 20);
    CHECK(tj["correct"].get<int>() >= 16);  // separable fixture
  }

  SUBCASE("sensitivity runs per factor") {
    REQUIRE(cli({"sensitivity", "--config", cfg, "--factor", "phone", "--set",
                 "bootstrap.replicates=5"}) == 0);
    CHECK(fs::exists(fx.dir / "out/sensitivity_phone.csv"));
    CHECK(fs::exists(fx.dir / "out/sensitivity_phone.json"));
  }

  SUBCASE("importance aggregates over pairings") {
    REQUIRE(cli({"importance", "--config", cfg}) == 0);
    CHECK(fs::exists(fx.dir / "out/importance.csv"));
    CHECK(fs::exists(fx.dir / "out/importance.svg"));
  }
}

TEST_CASE("cli error paths") {
  CHECK(cli({"pairwise", "--config", "/nonexistent/cfg.json"}) == 1);
  CHECK(cli({"frobnicate", "--config", "x"}) == 1);
  CHECK(cli({"pairwise"}) == 1);          // missing required --config
  CHECK(cli({}) == 1);                    // no verb
  Fixture fx;
  CHECK(cli({"evaluate", "--config", fx.config.string()}) == 1);  // missing --h1/--h2
  CHECK(cli({"pairwise", "--config", fx.config.string(), "--set", "nonsense=1"}) == 1);
  // Dataset not ingested yet: validation error, not a crash.
  CHECK(cli({"pairwise", "--config", fx.config.string()}) == 1);
}
