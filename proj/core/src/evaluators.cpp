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

#include "decotune/evaluators.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "decotune/rng.hpp"

extern char** environ;

namespace decotune {

namespace {

double gaussian_bump(double dx, double dy, double sigma) {
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

// Mild preference on the third effective coordinate, in [0.7, 1].
double third_axis_factor(double x) { return 1.0 - 0.3 * (x - 0.6) * (x - 0.6) / 0.36; }

// Radial basin: a broad shoulder of width `wide` plus a sharp cone of width
// `sharp`, mixed by `shoulder`.
struct Basin {
  std::array<double, 3> center;
  double height, shoulder, wide, sharp;
};

double basin_value(const Basin& b, const std::array<double, 3>& u, double drift) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double d = u[i] - (b.center[i] - drift);
    d2 += d * d;
  }
  const double d = std::sqrt(d2);
  return b.height * (b.shoulder * std::exp(-d / b.wide) + (1.0 - b.shoulder) * std::exp(-d / b.sharp));
}

// A broad decoy basin away from the ramp's high corner; the global basin is
// the needle's narrow cone at that corner.
constexpr std::array<Basin, 2> kTwoBasin{{
    {{0.20, 0.80, 0.25}, 0.35, 1.0, 0.15, 0.15},
    {{0.85, 0.85, 0.85}, 0.50, 0.0, 0.30, 0.06},
}};
constexpr double kTwoBasinRamp = 0.5;

constexpr Basin kNeedle{{0.85, 0.85, 0.85}, 0.5, 0.0, 0.30, 0.06};
constexpr double kNeedleRamp = 0.5;

struct Centers {
  double ax, ay;
};

Centers noise_centers(double drift) { return {0.65 - drift, 0.40 - drift}; }

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double_option(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty()) {
    throw Error("evaluator option " + key + "='" + value + "' is not a number");
  }
  return v;
}

}  // namespace

const PerformanceReading& Evaluator::default_reading() {
  if (!default_reading_) default_reading_ = evaluate(space_.default_configuration());
  return *default_reading_;
}

const Baseline& Evaluator::baseline() {
  if (!baseline_) {
    const PerformanceReading& r = default_reading();
    baseline_ = Baseline{r.tps, r.latency};
  }
  return *baseline_;
}

std::string_view to_string(SyntheticSurface surface) noexcept {
  switch (surface) {
    case SyntheticSurface::two_basin: return "two_basin";
    case SyntheticSurface::needle: return "needle";
    case SyntheticSurface::additive_noise: return "additive_noise";
  }
  return "two_basin";
}

SyntheticSurface synthetic_surface_from_string(std::string_view text) {
  if (text == "two_basin") return SyntheticSurface::two_basin;
  if (text == "needle") return SyntheticSurface::needle;
  if (text == "additive_noise") return SyntheticSurface::additive_noise;
  throw Error("unknown synthetic surface '" + std::string(text) + "'");
}

ConfigurationSpace SyntheticEvaluator::make_space(std::size_t dims) {
  if (dims < 10) throw Error("synthetic spaces need at least 10 knobs");
  std::vector<Knob> knobs;
  knobs.reserve(dims);
  for (std::size_t i = 0; i < dims; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "knob_%02zu", i);
    switch (i % 4) {
      case 0:
        knobs.push_back(Knob::continuous(name, 0.0, 1000.0, 500.0, "MB"));
        break;
      case 1:
        knobs.push_back(Knob::continuous(name, 0.5, 4.5, 2.5));
        break;
      case 2:
        knobs.push_back(Knob::integer(name, 1, 64, 8, "connections"));
        break;
      default:
        knobs.push_back(Knob::categorical(name, {"off", "on", "auto"}, "off"));
        break;
    }
  }
  return ConfigurationSpace(std::move(knobs));
}

SyntheticEvaluator::SyntheticEvaluator(SyntheticOptions options)
    : Evaluator(make_space(options.dims)), options_(options) {
  if (!(options_.noise_fraction >= 0.0)) throw Error("noise fraction must be >= 0");
  if (std::abs(options_.drift) > 0.15) throw Error("drift must lie in [-0.15, 0.15]");
  switch (options_.surface) {
    case SyntheticSurface::two_basin: effective_ = {0, 5, 9}; break;
    case SyntheticSurface::needle: effective_ = {0, 5, 9}; break;
    case SyntheticSurface::additive_noise: effective_ = {0, 5, 9}; break;
  }
}

double SyntheticEvaluator::quality(const Eigen::VectorXd& unit) const {
  std::array<double, 3> u{};
  for (std::size_t i = 0; i < 3; ++i) u[i] = unit[static_cast<Eigen::Index>(effective_[i])];
  const double ramp = (u[0] + u[1] + u[2]) / 3.0;
  const double drift = options_.drift;
  switch (options_.surface) {
    case SyntheticSurface::two_basin:
      return std::max(basin_value(kTwoBasin[0], u, drift), basin_value(kTwoBasin[1], u, drift)) +
             kTwoBasinRamp * ramp;
    case SyntheticSurface::needle:
      return basin_value(kNeedle, u, drift) + kNeedleRamp * ramp;
    case SyntheticSurface::additive_noise: {
      const Centers c = noise_centers(drift);
      return gaussian_bump(u[0] - c.ax, u[1] - c.ay, 0.22) * third_axis_factor(u[2]);
    }
  }
  return 0.0;
}

PerformanceReading SyntheticEvaluator::reading_from_quality(double q) {
  q = std::clamp(q, -0.5, 1.5);
  return PerformanceReading{1000.0 * (1.0 + q), 0.05 / (1.0 + 0.5 * q)};
}

std::vector<double> SyntheticEvaluator::optimum_coordinates() const {
  const double drift = options_.drift;
  // The cones are steeper than the ramp, so the maxima sit on the centers.
  switch (options_.surface) {
    case SyntheticSurface::two_basin: {
      const auto& c = kTwoBasin[1].center;
      return {c[0] - drift, c[1] - drift, c[2] - drift};
    }
    case SyntheticSurface::needle: {
      const auto& c = kNeedle.center;
      return {c[0] - drift, c[1] - drift, c[2] - drift};
    }
    case SyntheticSurface::additive_noise: {
      const Centers c = noise_centers(drift);
      return {c.ax, c.ay, 0.6};
    }
  }
  return {};
}

double SyntheticEvaluator::optimum_quality() const {
  Eigen::VectorXd u = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(options_.dims), 0.5);
  const auto opt = optimum_coordinates();
  for (std::size_t i = 0; i < effective_.size(); ++i) {
    u[static_cast<Eigen::Index>(effective_[i])] = opt[i];
  }
  return quality(u);
}

PerformanceReading SyntheticEvaluator::evaluate(const Configuration& config) {
  space().validate(config);
  double q = quality(space().encode(config).coords);
  if (options_.surface == SyntheticSurface::additive_noise && options_.noise_fraction > 0.0) {
    const std::uint64_t n = counter_.fetch_add(1);
    Rng rng(Rng::mix(options_.seed, n));
    q += options_.noise_fraction * rng.normal();
  }
  return reading_from_quality(q);
}

nlohmann::json configuration_json(const ConfigurationSpace& space, const Configuration& config) {
  space.validate(config);
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    const Knob& k = space.knob(i);
    switch (k.kind) {
      case KnobKind::categorical:
        j[k.name] = k.categories.at(static_cast<std::size_t>(config.values[i]));
        break;
      case KnobKind::integer:
        j[k.name] = static_cast<std::int64_t>(config.values[i]);
        break;
      case KnobKind::continuous:
        j[k.name] = config.values[i];
        break;
    }
  }
  return j;
}

Configuration configuration_from_json(const ConfigurationSpace& space, const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("configuration must be a JSON object");
  Configuration c;
  c.values.resize(space.dimension());
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    const Knob& k = space.knob(i);
    const auto it = j.find(k.name);
    if (it == j.end()) throw ParseError("configuration lacks knob '" + k.name + "'");
    if (k.kind == KnobKind::categorical) {
      if (!it->is_string()) throw ParseError("knob '" + k.name + "' expects a category label");
      const auto idx = k.category_index(it->get<std::string>());
      if (!idx) {
        throw DomainError(k.name, "unknown category '" + it->get<std::string>() + "'");
      }
      c.values[i] = static_cast<double>(*idx);
    } else {
      if (!it->is_number()) throw ParseError("knob '" + k.name + "' expects a number");
      c.values[i] = it->get<double>();
    }
  }
  space.validate(c);
  return c;
}

ReplayEvaluator::ReplayEvaluator(ConfigurationSpace space,
                                 std::vector<std::pair<Configuration, PerformanceReading>> rows)
    : Evaluator(std::move(space)), rows_(std::move(rows)) {}

ReplayEvaluator::ReplayEvaluator(ConfigurationSpace space, const std::filesystem::path& trace)
    : Evaluator(std::move(space)) {
  std::ifstream in(trace);
  if (!in) throw EvaluatorFatal("cannot open replay trace " + trace.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const nlohmann::json row = nlohmann::json::parse(line);
      const auto& r = row.at("reading");
      PerformanceReading reading{r.at("tps").get<double>(), r.at("latency").get<double>()};
      rows_.emplace_back(configuration_from_json(this->space(), row.at("configuration")), reading);
    } catch (const std::exception& e) {
      throw EvaluatorFatal("replay trace " + trace.string() + " line " + std::to_string(number) +
                           ": " + e.what());
    }
  }
}

PerformanceReading ReplayEvaluator::evaluate(const Configuration& config) {
  ++lookups_;
  for (const auto& [c, reading] : rows_) {
    if (c.values.size() != config.values.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < c.values.size() && same; ++i) {
      same = std::abs(c.values[i] - config.values[i]) <= 1e-9;
    }
    if (same) return reading;
  }
  throw ReplayMiss("configuration not present in the replay trace");
}

CommandEvaluator::CommandEvaluator(ConfigurationSpace space, std::vector<std::string> argv,
                                   std::chrono::milliseconds timeout)
    : Evaluator(std::move(space)), argv_(std::move(argv)), timeout_(timeout) {
  if (argv_.empty() || argv_.front().empty()) throw Error("command evaluator needs a program");
  if (timeout_.count() <= 0) throw Error("command timeout must be positive");
  // A child that exits before reading its input must not kill the tuner.
  ::signal(SIGPIPE, SIG_IGN);
}

nlohmann::json CommandEvaluator::request_json(const Configuration& config) const {
  return nlohmann::json{{"knobs", configuration_json(space(), config)}};
}

PerformanceReading CommandEvaluator::parse_reply(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    // Tolerate chatter before the reply: use the last non-empty line.
    const std::string s(text);
    const auto end = s.find_last_not_of(" \t\r\n");
    if (end == std::string::npos) throw EvaluationError("command printed nothing");
    const auto begin = s.rfind('\n', end);
    j = nlohmann::json::parse(s.substr(begin == std::string::npos ? 0 : begin + 1,
                                       end - (begin == std::string::npos ? 0 : begin + 1) + 1),
                              nullptr, false);
    if (j.is_discarded()) throw EvaluationError("command output is not JSON");
  }
  if (!j.is_object()) throw EvaluationError("command output is not a JSON object");
  const auto tps = j.find("tps");
  auto lat = j.find("lat");
  if (lat == j.end()) lat = j.find("latency");
  if (tps == j.end() || lat == j.end() || !tps->is_number() || !lat->is_number()) {
    throw EvaluationError("command output needs numeric \"tps\" and \"lat\"");
  }
  PerformanceReading r{tps->get<double>(), lat->get<double>()};
  try {
    r.check();
  } catch (const Error& e) {
    throw EvaluationError(std::string("command reading rejected: ") + e.what());
  }
  return r;
}

PerformanceReading CommandEvaluator::evaluate(const Configuration& config) {
  const std::string input = request_json(config).dump() + "\n";

  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw EvaluatorFatal(std::string("pipe: ") + std::strerror(errno));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw EvaluatorFatal(std::string("pipe: ") + std::strerror(errno));
  }
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[0]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[1]);

  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);
  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, argv_.front().c_str(), &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  if (rc != 0) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    throw EvaluatorFatal("cannot start '" + argv_.front() + "': " + std::strerror(rc));
  }

  // Inputs are small, so a blocking write fits the pipe buffer; EPIPE just
  // means the child ignored stdin.
  std::size_t written = 0;
  while (written < input.size()) {
    const ssize_t n = ::write(in_pipe[1], input.data() + written, input.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    written += static_cast<std::size_t>(n);
  }
  ::close(in_pipe[1]);

  std::string output;
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  bool timed_out = false;
  char buf[4096];
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd pfd{out_pipe[0], POLLIN, 0};
    const int pr = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (pr < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (pr == 0) {
      timed_out = true;
      break;
    }
    const ssize_t n = ::read(out_pipe[0], buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) break;
    output.append(buf, static_cast<std::size_t>(n));
  }
  ::close(out_pipe[0]);
  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (timed_out) {
    throw EvaluationError("command timed out after " + std::to_string(timeout_.count()) + " ms");
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw EvaluationError("command exited with status " +
                          std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }
  return parse_reply(output);
}

std::unique_ptr<Evaluator> make_evaluator(std::string_view spec,
                                          const std::optional<ConfigurationSpace>& space) {
  const auto colon = spec.find(':');
  const std::string kind(spec.substr(0, colon));
  const std::string rest(colon == std::string_view::npos ? "" : spec.substr(colon + 1));
  if (kind == "synthetic") {
    const auto parts = split(rest, ',');
    SyntheticOptions o;
    if (!parts.front().empty()) o.surface = synthetic_surface_from_string(parts.front());
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      if (eq == std::string::npos) throw Error("evaluator option '" + parts[i] + "' lacks '='");
      const std::string key = parts[i].substr(0, eq);
      const std::string value = parts[i].substr(eq + 1);
      const double v = parse_double_option(key, value);
      if (key == "dims") {
        o.dims = static_cast<std::size_t>(v);
      } else if (key == "seed") {
        o.seed = static_cast<std::uint64_t>(v);
      } else if (key == "drift") {
        o.drift = v;
      } else if (key == "noise") {
        o.noise_fraction = v;
      } else {
        throw Error("unknown synthetic option '" + key + "'");
      }
    }
    return std::make_unique<SyntheticEvaluator>(o);
  }
  if (kind == "replay") {
    if (!space) throw Error("replay evaluator needs a knob spec");
    if (rest.empty()) throw Error("replay evaluator needs a trace path");
    return std::make_unique<ReplayEvaluator>(*space, std::filesystem::path(rest));
  }
  if (kind == "command") {
    if (!space) throw Error("command evaluator needs a knob spec");
    const auto parts = split(rest, ',');
    std::vector<std::string> argv;
    std::istringstream words(parts.front());
    for (std::string w; words >> w;) argv.push_back(w);
    double timeout_s = 60.0;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      if (eq == std::string::npos || parts[i].substr(0, eq) != "timeout") {
        throw Error("unknown command option '" + parts[i] + "'");
      }
      timeout_s = parse_double_option("timeout", parts[i].substr(eq + 1));
    }
    return std::make_unique<CommandEvaluator>(
        *space, std::move(argv),
        std::chrono::milliseconds(static_cast<std::int64_t>(timeout_s * 1000.0)));
  }
  throw Error("unknown evaluator kind '" + kind + "' (synthetic, replay, command)");
}

}  // namespace decotune
