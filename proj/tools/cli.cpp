// Copyright 2026 The decotune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "decotune/config_space.hpp"
#include "decotune/evaluators.hpp"
#include "decotune/knowledge.hpp"
#include "decotune/llm_gateway.hpp"
#include "decotune/moe_selection.hpp"
#include "decotune/objective.hpp"
#include "decotune/tuner.hpp"

namespace decotune::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Raised for bad flag combinations found after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct ContextFlags {
  std::string requirements;
  std::string dbms = "PostgreSQL";
  std::string workload;
  std::optional<double> ram_gb;
  std::optional<double> cpu_cores;
  std::optional<double> disk_gb;

  void add(CLI::App& app) {
    app.add_option("--requirements", requirements, "Tuning requirements in plain words");
    app.add_option("--dbms", dbms, "Target DBMS")->capture_default_str();
    app.add_option("--workload", workload, "Workload description");
    app.add_option("--ram-gb", ram_gb, "Override the knob spec's RAM")->check(CLI::PositiveNumber);
    app.add_option("--cpu-cores", cpu_cores, "Override the knob spec's CPU core count")
        ->check(CLI::PositiveNumber);
    app.add_option("--disk-gb", disk_gb, "Override the knob spec's disk size")
        ->check(CLI::PositiveNumber);
  }

  TuningContext context(const std::optional<HardwareSpec>& from_spec) const {
    constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;
    HardwareSpec hw = from_spec.value_or(HardwareSpec{});
    if (ram_gb) hw.ram_bytes = *ram_gb * kGiB;
    if (cpu_cores) hw.cpu_cores = *cpu_cores;
    if (disk_gb) hw.disk_bytes = *disk_gb * kGiB;
    if (!(hw.ram_bytes > 0.0 && hw.cpu_cores > 0.0 && hw.disk_bytes > 0.0)) {
      throw UsageError("hardware unknown: add a \"hardware\" block to the knob spec or pass "
                       "--ram-gb, --cpu-cores and --disk-gb");
    }
    return TuningContext{requirements, dbms, workload, hw};
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write to " + path.string() + " failed");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

// Reason of the verdict from the most heavily weighted category.
std::string headline_reason(const RankedKnob& r) {
  const ExpertVerdict* best = nullptr;
  double best_w = -1.0;
  for (const auto& v : r.verdicts) {
    const auto it = r.assignment.weights.find(v.category);
    const double w = it == r.assignment.weights.end() ? 0.0 : it->second;
    if (w > best_w) {
      best_w = w;
      best = &v;
    }
  }
  if (best == nullptr) return "";
  std::string line = best->reason.substr(0, best->reason.find('\n'));
  if (line.size() > 72) line = line.substr(0, 69) + "...";
  return line;
}

// ---------------------------------------------------------------- select

struct SelectArgs {
  std::string knobs;
  std::string knowledge;
  std::string gateway;
  std::string out_dir = ".";
  std::size_t top_n = kDefaultTopN;
  ContextFlags ctx;
};

int cmd_select(const SelectArgs& a, std::ostream& out, std::ostream& err) {
  const KnobSpecFile spec = load_knob_spec(a.knobs);
  const TuningContext ctx = a.ctx.context(spec.hardware);
  const KnowledgeFixtures fixtures = KnowledgeFixtures::load(a.knowledge);
  const auto gateway = LlmGateway::from_config(GatewayConfig::load(a.gateway));

  const SelectionResult result = run_selection(spec.space, fixtures, *gateway, ctx, a.top_n);
  for (const auto& w : result.warnings) err << "warning: " << w << '\n';
  if (result.ranked.empty()) throw Error("no knob survived selection");

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  write_json(dir / "selection.json", selection_report_json(result.ranked));
  write_json(dir / "objective_weights.json",
             json{{"w_tps", result.objective.w_tps}, {"w_lat", result.objective.w_lat}});

  out << std::left << std::setw(5) << "rank" << std::setw(32) << "knob" << std::setw(9)
      << "score" << std::setw(26) << "range" << "reason\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const RankedKnob& r = result.ranked[i];
    const std::string range = "[" + format_number(r.lower) + ", " + format_number(r.upper) + "]";
    std::ostringstream score;
    score << std::fixed << std::setprecision(2) << r.final_score;
    out << std::left << std::setw(5) << i + 1 << std::setw(32) << r.knob_name << std::setw(9)
        << score.str() << std::setw(26) << range << headline_reason(r) << '\n';
  }
  out << "objective weights: w_tps=" << result.objective.w_tps
      << " w_lat=" << result.objective.w_lat << '\n';
  out << "wrote " << (dir / "selection.json").string() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ tune

struct TuneArgs {
  std::string evaluator = "synthetic:two_basin";
  std::string knobs;
  std::string selection;
  bool no_moe = false;
  std::string objective_weights;
  std::optional<double> w_tps;
  std::optional<double> w_lat;
  std::string out_dir = ".";
  std::size_t budget = 100;
  std::size_t cold_start = 10;
  std::uint64_t seed = 0;
  std::size_t top_n = kDefaultTopN;
  std::size_t tau = 50;
  double gamma = 1.0;
  double c_p = 0.1;
  double c_reg = 10.0;
  std::size_t pool_size = 512;
  bool no_decomposition = false;
  std::string clustering_variant = "two_stage";
  std::string warm_start;
  std::size_t warm_k = 10;
  bool resume = false;
};

ObjectiveWeights tune_weights(const TuneArgs& a) {
  if (!a.objective_weights.empty()) {
    if (a.w_tps || a.w_lat) throw UsageError("--objective-weights excludes --w-tps/--w-lat");
    const json j = read_json(a.objective_weights);
    return ObjectiveWeights::normalized(j.at("w_tps").get<double>(), j.at("w_lat").get<double>());
  }
  if (a.w_tps && a.w_lat) return ObjectiveWeights::normalized(*a.w_tps, *a.w_lat);
  if (a.w_tps) return ObjectiveWeights::normalized(*a.w_tps, 1.0 - *a.w_tps);
  if (a.w_lat) return ObjectiveWeights::normalized(1.0 - *a.w_lat, *a.w_lat);
  return ObjectiveWeights{};
}

Subspace tune_subspace(const TuneArgs& a, const ConfigurationSpace& parent) {
  if (a.no_moe) return Subspace::whole(parent);
  if (a.selection.empty()) {
    throw UsageError("tune needs --selection <selection.json> or --no-moe");
  }
  auto ranked = load_selection_report(a.selection);
  if (ranked.size() > a.top_n) ranked.resize(a.top_n);
  std::vector<Subspace::Narrowing> narrowing;
  for (const auto& r : ranked) {
    Subspace::Narrowing n{r.knob_name, std::nullopt, std::nullopt};
    if (std::isfinite(r.lower)) n.lower = r.lower;
    if (std::isfinite(r.upper)) n.upper = r.upper;
    narrowing.push_back(std::move(n));
  }
  return Subspace(parent, narrowing);
}

TunerParams tune_params(const TuneArgs& a) {
  TunerParams p;
  p.budget = a.budget;
  p.cold_start = a.cold_start;
  p.seed = a.seed;
  p.c_p = a.c_p;
  p.max_depth = a.no_decomposition ? 0 : p.max_depth;
  p.warm_start_k = a.warm_k;
  p.decompose.tau = a.tau;
  p.decompose.gamma = a.gamma;
  p.decompose.c_reg = a.c_reg;
  p.decompose.variant = clustering_variant_from_string(a.clustering_variant);
  p.propose.pool_size = a.pool_size;
  try {
    p.check();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return p;
}

int cmd_tune(const TuneArgs& a, std::ostream& out, std::ostream& err) {
  if (a.resume && !a.warm_start.empty()) throw UsageError("--resume excludes --warm-start");
  std::optional<ConfigurationSpace> space;
  if (!a.knobs.empty()) space = load_knob_spec(a.knobs).space;
  const auto evaluator = make_evaluator(a.evaluator, space);
  const TunerParams params = tune_params(a);
  const ObjectiveWeights weights = tune_weights(a);
  const Subspace subspace = tune_subspace(a, evaluator->space());
  const Baseline baseline = evaluator->baseline();

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  const fs::path log_path = dir / "session.jsonl";

  std::optional<TuningSession> session;
  if (a.resume && fs::exists(log_path)) {
    session.emplace(TuningSession::from_log(log_path, subspace, weights, baseline, params));
    err << "resuming " << log_path.string() << " at " << session->dataset().size() << " rows\n";
  } else {
    session.emplace(subspace, weights, baseline, params);
  }
  SessionLog log(log_path, a.resume);
  session->attach_log(&log);

  if (!a.warm_start.empty()) {
    const TuningSession prior =
        TuningSession::from_log(a.warm_start, subspace, weights, baseline, params);
    warm_start(*session, prior, std::min(a.warm_k, prior.dataset().size()), *evaluator);
  } else {
    cold_start(*session, *evaluator);
  }
  tune(*session, *evaluator);

  json summary = session_summary(*session);
  write_json(dir / "summary.json", summary);
  std::vector<double> curve;
  for (const auto& o : session->dataset()) curve.push_back(o.best_p);
  write_text(dir / "best_p.csv", best_p_csv(curve));

  out << "tuned " << session->space().space().dimension() << " knobs over "
      << session->dataset().size() << " iterations\n";
  out << "best p = " << session->best_p() << " at iteration " << session->best().iter << '\n';
  out << "best configuration: " << summary.at("best_config").dump() << '\n';
  out << "wrote " << log_path.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::string log;
  std::string csv;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  const auto rows = read_session_log(a.log);
  if (rows.empty()) throw ParseError(a.log + " holds no observations");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].p > rows[best].p) best = i;
  }
  const double final_best = rows[best].p;
  const double threshold = final_best - 0.05 * std::abs(final_best);
  std::size_t within = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].best_p >= threshold) {
      within = i;
      break;
    }
  }
  std::vector<double> curve;
  for (const auto& r : rows) curve.push_back(r.best_p);

  out << "iterations: " << rows.size() << '\n';
  out << "best p = " << final_best << " at iteration " << rows[best].iter << '\n';
  out << "within 5% of the final best at iteration " << rows[within].iter << '\n';
  out << "best configuration: " << rows[best].configuration.dump() << '\n';
  const std::string csv = best_p_csv(curve);
  if (a.csv.empty()) {
    out << csv;
  } else {
    write_text(a.csv, csv);
    out << "wrote " << a.csv << '\n';
  }
  return kExitOk;
}

// --------------------------------------------------------- make-fixtures

struct FixtureArgs {
  std::string answers;
  std::string knobs;
  std::string knowledge;
  std::string out;
  ContextFlags ctx;
};

void insert_checked(FixtureStore& store, const PromptRequest& request, const json& answer,
                    const std::string& where) {
  if (const auto problem = validate_response(request.response_schema, answer)) {
    throw Error(where + ": " + *problem);
  }
  store.insert(request, answer);
}

int cmd_make_fixtures(const FixtureArgs& a, std::ostream& out) {
  const KnobSpecFile spec = load_knob_spec(a.knobs);
  const TuningContext ctx = a.ctx.context(spec.hardware);
  const KnowledgeFixtures fixtures =
      a.knowledge.empty() ? KnowledgeFixtures{} : KnowledgeFixtures::load(a.knowledge);
  const json answers = read_json(a.answers);
  if (!answers.is_object() || !answers.contains("knobs")) {
    throw ParseError(a.answers + " needs an object with \"objective\" and \"knobs\"");
  }

  FixtureStore store;
  if (answers.contains("objective")) {
    insert_checked(store, objective_prompt(ctx), answers.at("objective"), "objective");
  }
  std::size_t knobs = 0;
  for (const auto& knob : spec.space.knobs()) {
    if (!answers.at("knobs").contains(knob.name)) continue;
    const json& ans = answers.at("knobs").at(knob.name);
    const std::string where = "knob '" + knob.name + "'";
    if (ans.contains("knowledge")) {
      insert_checked(store, knowledge_prompt(knob), ans.at("knowledge"), where + " knowledge");
    }
    // The manager prompt embeds the validated summary, so ingestion runs
    // against the answers recorded so far.
    const LlmGateway partial(std::make_unique<ReplayTransport>(store), 0);
    const auto entries = ingest(knob, fixtures, &partial);
    const KnowledgeSummary summary = validate(knob, entries, ctx.hardware);

    const json manager{{"categories", ans.at("categories")}};
    insert_checked(store, manager_prompt(summary, ctx), manager, where + " categories");
    for (const auto& [name, w] : ans.at("categories").items()) {
      const auto category = category_from_string(name);
      if (!ans.contains("experts") || !ans.at("experts").contains(name)) {
        throw Error(where + ": no expert answer for category " + name);
      }
      insert_checked(store, expert_prompt(summary, *category, ctx), ans.at("experts").at(name),
                     where + " expert " + name);
    }
    ++knobs;
  }
  if (!a.out.empty()) fs::create_directories(fs::absolute(a.out).parent_path());
  store.save(a.out);
  out << "wrote " << store.size() << " fixtures for " << knobs << " knobs to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knob selection and decomposed Bayesian tuning of database configurations"};
  app.set_config("--config", "", "TOML run file; sections name the verb");
  app.require_subcommand(1);

  SelectArgs sel;
  CLI::App* select = app.add_subcommand("select", "Rank knobs through the expert pipeline");
  select->add_option("--knobs", sel.knobs, "Knob spec JSON")->required();
  select->add_option("--knowledge", sel.knowledge, "Knowledge fixtures JSON")->required();
  select->add_option("--gateway", sel.gateway, "Gateway config JSON")->required();
  select->add_option("--out-dir", sel.out_dir, "Output directory")->capture_default_str();
  select->add_option("--top-n", sel.top_n, "Knobs to keep")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sel.ctx.add(*select);

  TuneArgs tn;
  CLI::App* tune_cmd = app.add_subcommand("tune", "Run cold start and the tuning loop");
  tune_cmd->add_option("--evaluator", tn.evaluator,
                       "synthetic:<surface>[,dims=,seed=,drift=,noise=] | replay:<log> | "
                       "command:<program args>[,timeout=S]")
      ->capture_default_str();
  tune_cmd->add_option("--knobs", tn.knobs, "Knob spec JSON (needed by replay and command)");
  tune_cmd->add_option("--selection", tn.selection, "selection.json from the select verb");
  tune_cmd->add_flag("--no-moe", tn.no_moe, "Tune every knob over its native range");
  tune_cmd->add_option("--objective-weights", tn.objective_weights, "objective_weights.json");
  tune_cmd->add_option("--w-tps", tn.w_tps, "Throughput weight")->check(CLI::Range(0.0, 1.0));
  tune_cmd->add_option("--w-lat", tn.w_lat, "Latency weight")->check(CLI::Range(0.0, 1.0));
  tune_cmd->add_option("--out-dir", tn.out_dir, "Output directory")->capture_default_str();
  tune_cmd->add_option("--budget", tn.budget, "Total evaluations")->capture_default_str();
  tune_cmd->add_option("--cold-start", tn.cold_start, "LHS samples")->capture_default_str();
  tune_cmd->add_option("--seed", tn.seed, "Random seed")->capture_default_str();
  tune_cmd->add_option("--top-n", tn.top_n, "Selected knobs to tune")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  tune_cmd->add_option("--tau", tn.tau, "Spectral / kernel-PCA threshold")->capture_default_str();
  tune_cmd->add_option("--gamma", tn.gamma, "Spectral affinity scale")->capture_default_str();
  tune_cmd->add_option("--c-p", tn.c_p, "UCB exploration weight")->capture_default_str();
  tune_cmd->add_option("--c-reg", tn.c_reg, "SVM regularization")->capture_default_str();
  tune_cmd->add_option("--pool-size", tn.pool_size, "Candidates per proposal")
      ->capture_default_str();
  tune_cmd->add_flag("--no-decomposition", tn.no_decomposition, "Plain BO over the whole space");
  tune_cmd->add_option("--clustering-variant", tn.clustering_variant,
                       "two_stage | kmeans | spectral | kernel_pca")
      ->capture_default_str();
  tune_cmd->add_option("--warm-start", tn.warm_start, "Prior session.jsonl to seed from");
  tune_cmd->add_option("--warm-k", tn.warm_k, "Prior configurations to re-evaluate")
      ->capture_default_str();
  tune_cmd->add_flag("--resume", tn.resume, "Continue the session log in --out-dir");

  ReportArgs rep;
  CLI::App* report = app.add_subcommand("report", "Summarize a session log");
  report->add_option("log", rep.log, "session.jsonl")->required();
  report->add_option("--csv", rep.csv, "Write the best-p CSV here instead of stdout");

  FixtureArgs fix;
  CLI::App* fixtures = app.add_subcommand("make-fixtures", "Build replay fixtures from answers");
  fixtures->add_option("--answers", fix.answers, "Scripted answers JSON")->required();
  fixtures->add_option("--knobs", fix.knobs, "Knob spec JSON")->required();
  fixtures->add_option("--knowledge", fix.knowledge, "Knowledge fixtures JSON");
  fixtures->add_option("--out", fix.out, "Fixture file to write")->required();
  fix.ctx.add(*fixtures);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*select) return cmd_select(sel, out, err);
    if (*tune_cmd) return cmd_tune(tn, out, err);
    if (*report) return cmd_report(rep, out);
    if (*fixtures) return cmd_make_fixtures(fix, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace decotune::cli
