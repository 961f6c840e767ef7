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

#include <fstream>
#include <sstream>
#include <string>

#include "decotune/tuner.hpp"

namespace decotune {

namespace {

nlohmann::json constraint_json(const RegionConstraint& c) {
  nlohmann::json normal = nlohmann::json::array();
  for (Eigen::Index i = 0; i < c.normal.size(); ++i) normal.push_back(c.normal[i]);
  return nlohmann::json{{"normal", normal}, {"offset", c.offset}, {"sign", c.required_sign}};
}

RegionConstraint constraint_from_json(const nlohmann::json& j) {
  RegionConstraint c;
  const auto& normal = j.at("normal");
  c.normal.resize(static_cast<Eigen::Index>(normal.size()));
  for (std::size_t i = 0; i < normal.size(); ++i) {
    c.normal[static_cast<Eigen::Index>(i)] = normal[i].get<double>();
  }
  c.offset = j.at("offset").get<double>();
  c.required_sign = j.at("sign").get<int>();
  if (c.required_sign != 1 && c.required_sign != -1) throw ParseError("sign must be +1 or -1");
  return c;
}

}  // namespace

SessionLog::SessionLog(const std::filesystem::path& path, bool append)
    : path_(path), out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw Error("cannot open session log " + path.string());
}

void SessionLog::write(const TuningSession& session, const Observation& o) {
  out_ << observation_json(session, o).dump() << '\n';
  out_.flush();
  if (!out_) throw Error("write to session log " + path_.string() + " failed");
}

nlohmann::json observation_json(const TuningSession& session, const Observation& o) {
  nlohmann::json path = nlohmann::json::array();
  for (const auto& c : o.region_path) path.push_back(constraint_json(c));
  nlohmann::json j{
      {"iter", o.iter},
      {"configuration", configuration_json(session.space().parent(), session.space().lift(o.config))},
      {"reading", {{"tps", o.reading.tps}, {"latency", o.reading.latency}}},
      {"p", o.p},
      {"region_path", path},
      {"best_p", o.best_p},
  };
  if (o.flagged) j["flagged"] = true;
  return j;
}

std::vector<LoggedRow> read_session_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open session log " + path.string());
  std::vector<LoggedRow> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      LoggedRow r;
      r.iter = j.at("iter").get<std::size_t>();
      r.configuration = j.at("configuration");
      if (!r.configuration.is_object()) throw ParseError("configuration is not an object");
      r.reading.tps = j.at("reading").at("tps").get<double>();
      r.reading.latency = j.at("reading").at("latency").get<double>();
      r.p = j.at("p").get<double>();
      r.best_p = j.at("best_p").get<double>();
      for (const auto& c : j.at("region_path")) r.region_path.push_back(constraint_from_json(c));
      r.flagged = j.value("flagged", false);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  return rows;
}

nlohmann::json session_summary(const TuningSession& session) {
  const Observation& best = session.best();
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& o : session.dataset()) curve.push_back(o.best_p);
  return nlohmann::json{
      {"best_config", configuration_json(session.space().parent(), session.best_configuration())},
      {"best_p", best.p},
      {"best_iter", best.iter},
      {"iterations", session.dataset().size()},
      {"best_p_curve", curve},
  };
}

std::string best_p_csv(std::span<const double> curve) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,best_p\n";
  for (std::size_t i = 0; i < curve.size(); ++i) out << i + 1 << ',' << curve[i] << '\n';
  return out.str();
}

}  // namespace decotune
