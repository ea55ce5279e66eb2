#include <sstream>

#include <gtest/gtest.h>

#include "affsls/config.hpp"
#include "affsls/log_io.hpp"
#include "affsls/plot.hpp"
#include "affsls/suites.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace affsls {
namespace {

using test::V;

ClosedLoopLog small_log() {
  ClosedLoopLog log;
  log.controller = "sls";
  log.x = {V({0.1, 1.0 / 3.0}), V({-2e-17, 5}), V({0.6, 0})};
  log.u = {V({0.5}), V({-0.123456789012345678})};
  StepRecord r;
  r.status = SolveStatus::kOptimal;
  r.objective = 0.7;
  r.solve_ms = 1.5;
  log.steps = {r, r};
  return log;
}

GTEST_TEST(LogCsvTest, FormatAndRoundTrip) {
  const ClosedLoopLog log = small_log();
  std::stringstream ss;
  write_log_csv(ss, log);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "step,x1,x2,u1,objective,status,solve_ms");
  EXPECT_NE(text.find("0.33333333333333331"), std::string::npos);
  EXPECT_NE(text.find("\n2,0.59999999999999998,0,,,,\n"), std::string::npos) << text;

  const ClosedLoopLog back = read_log_csv(ss, "sls");
  EXPECT_EQ(back.controller, "sls");
  EXPECT_EQ(back.x, log.x);
  EXPECT_EQ(back.u, log.u);
  ASSERT_EQ(back.steps.size(), 2u);
  EXPECT_EQ(back.steps[1].status, SolveStatus::kOptimal);
  EXPECT_EQ(back.steps[1].objective, 0.7);
}

GTEST_TEST(LogCsvTest, MalformedFilesAreRejected) {
  for (const char* bad : {"", "step,x1,u1\n",
                          "step,x1,u1,objective,status,solve_ms\n0,1,2,3,optimal,0\n",
                          "step,x1,u1,objective,status,solve_ms\n0,1,2,3,weird,0\n1,2,,,,\n",
                          "step,x1,u1,objective,status,solve_ms\n0,abc,2,3,optimal,0\n1,2,,,,\n",
                          "step,x1,u1,objective,status,solve_ms\n1,1,2,3,optimal,0\n2,2,,,,\n"}) {
    std::stringstream ss(bad);
    EXPECT_THROW(read_log_csv(ss, "t"), std::runtime_error) << bad;
  }
}

GTEST_TEST(SummaryJsonTest, FieldsAndOverallVerdict) {
  RunSummary run{"traditional", "traditional.csv", true, 15, "", 1e-9, 0.0};
  RunSummary failed{"sls", "sls.csv", false, 3, "model infeasible at step 3", 0.0, 0.0};
  DeviationReport good{15, 1e-12, 2e-12, 0.0, 1e-4, true};
  DeviationReport bad{15, 1e-3, 0.0, 0.0, 1e-4, false};
  const auto j = nlohmann::json::parse(
      summary_json({run, failed}, {{"traditional", "dd-sls", good}}));
  EXPECT_EQ(j["runs"].size(), 2u);
  EXPECT_EQ(j["runs"][0]["controller"], "traditional");
  EXPECT_FALSE(j["runs"][0].contains("failure"));
  EXPECT_EQ(j["runs"][1]["failure"], "model infeasible at step 3");
  EXPECT_EQ(j["comparisons"][0]["b"], "dd-sls");
  EXPECT_EQ(j["comparisons"][0]["state_deviation"].get<double>(), 1e-12);
  EXPECT_TRUE(j["pass"].get<bool>());
  const auto k = nlohmann::json::parse(summary_json({run}, {{"a", "b", bad}}));
  EXPECT_FALSE(k["pass"].get<bool>());
}

GTEST_TEST(FormatReportTest, MentionsVerdict) {
  EXPECT_NE(format_report({3, 1e-3, 0, 0, 1e-4, false}).find("FAIL"), std::string::npos);
  EXPECT_NE(format_report({3, 0, 0, 0, 1e-4, true}).find("PASS"), std::string::npos);
}

GTEST_TEST(RenderSvgTest, PanelsCurvesAndLegend) {
  ClosedLoopLog a = small_log(), b = small_log();
  a.controller = "traditional";
  b.controller = "dd-sls";
  const std::string svg = render_svg({a, b}, {"theta", "omega", "u"});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  for (const char* s : {"theta", "omega", ">u<", "traditional", "dd-sls", "stroke-dasharray"}) {
    EXPECT_NE(svg.find(s), std::string::npos) << s;
  }
  size_t curves = 0;
  for (size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) {
    ++curves;
  }
  EXPECT_EQ(curves, 6u);  // 3 channels x 2 logs
  EXPECT_THROW(render_svg({}), std::invalid_argument);
  EXPECT_THROW(render_svg({a}, {"only one"}), std::invalid_argument);
}

GTEST_TEST(ConfigTest, BundledExampleMatchesSwingBenchmark) {
  const RunConfig cfg = load_config(std::string(AFFSLS_SOURCE_DIR) + "/configs/swing.example.json");
  ASSERT_TRUE(cfg.benchmark.has_value());
  const BenchmarkSpec ref = swing_benchmark();
  EXPECT_TRUE(cfg.benchmark->A.isApprox(ref.A, 1e-15));
  EXPECT_EQ(cfg.benchmark->s, ref.s);
  EXPECT_EQ(cfg.benchmark->cons.H_x, ref.cons.H_x);
  EXPECT_EQ(cfg.benchmark->cons.h, ref.cons.h);
  EXPECT_EQ(cfg.benchmark->horizon, 10);
  EXPECT_EQ(cfg.controllers.size(), 3u);
  EXPECT_EQ(cfg.labels, (std::vector<std::string>{"theta", "omega", "u"}));
  EXPECT_EQ(cfg.compare_tol, 1e-4);
  EXPECT_EQ(cfg.validate.trials, 200);
}

GTEST_TEST(ConfigTest, EmitParseRoundTrip) {
  const RunConfig cfg = swing_config();
  const std::string text = emit_config(cfg);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(emit_config(back), text);
  EXPECT_EQ(back.benchmark->cost.Q, cfg.benchmark->cost.Q);
  EXPECT_EQ(back.benchmark->cost.u_reg, cfg.benchmark->cost.u_reg);
  EXPECT_EQ(back.controllers, cfg.controllers);
}

GTEST_TEST(ConfigTest, RejectsBadDocuments) {
  nlohmann::json base = nlohmann::json::parse(emit_config(swing_config()));
  auto expect_reject = [](const nlohmann::json& doc, const std::string& needle) {
    try {
      parse_config(doc.dump());
      ADD_FAILURE() << "accepted: " << needle;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  auto doc = base;
  doc["horizon"] = 0;
  expect_reject(doc, "horizon");
  doc = base;
  doc["cost"]["p_norm"] = "3";
  expect_reject(doc, "p_norm");
  doc = base;
  doc["colour"] = 1;
  expect_reject(doc, "colour");
  doc = base;
  doc["cost"]["Qx"] = 1;
  expect_reject(doc, "Qx");
  doc = base;
  doc["controllers"] = {"mpc"};
  expect_reject(doc, "mpc");
  doc = base;
  doc["system"]["B"] = {{0.0}};
  expect_reject(doc, "B");
  doc = base;
  doc["validate"]["trials"] = 0;
  expect_reject(doc, "trials");
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/affsls.json"), ConfigError);
}

GTEST_TEST(ConfigTest, DataFileResolvesAgainstDocumentDirectory) {
  nlohmann::json doc = nlohmann::json::parse(emit_config(swing_config()));
  doc["data"] = {{"file", "rec.csv"}};
  const RunConfig cfg = parse_config(doc.dump(), "/tmp/cfgdir");
  EXPECT_EQ(*cfg.data_file, "rec.csv");
  EXPECT_EQ(resolved_data_file(cfg), "/tmp/cfgdir/rec.csv");
}

GTEST_TEST(SuitesTest, SmallRunPassesEveryProperty) {
  SuiteConfig cfg;
  cfg.trials = 10;
  cfg.disturbance_trials = 3;
  cfg.dd_trials = 5;
  const auto results = run_suites(cfg);
  EXPECT_EQ(results.size(), 8u);
  for (const auto& r : results) EXPECT_TRUE(r.pass) << r.property << " " << r.value;
  const auto again = run_suites(cfg);
  for (size_t i = 0; i < results.size(); ++i) EXPECT_EQ(results[i].value, again[i].value);
}

GTEST_TEST(SuitesTest, CorruptedHankelBreaksMembership) {
  SuiteConfig cfg;
  cfg.trials = 2;
  cfg.disturbance_trials = 1;
  cfg.dd_trials = 5;
  cfg.corrupt_hankel = true;
  bool membership_failed = false;
  for (const auto& r : run_suites(cfg)) {
    if (r.property == "data-driven response membership") membership_failed = !r.pass;
  }
  EXPECT_TRUE(membership_failed);
  cfg.trials = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace affsls
