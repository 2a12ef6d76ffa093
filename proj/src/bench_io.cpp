#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hnav/bench.hpp"
#include "json.hpp"

namespace hnav {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Outcome parse_outcome(const std::string& s) {
  if (s == "success") return Outcome::Success;
  if (s == "collision") return Outcome::Collision;
  if (s == "timeout") return Outcome::Timeout;
  throw FormatError("unknown outcome: " + s);
}

json vec3(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
Vec3 to_vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
Vec2 to_vec2(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json reward_json(const RewardBreakdown& r) {
  return {{"r_term", r.r_term}, {"r_pot", r.r_pot}, {"r_kin", r.r_kin}, {"r_horizon", r.r_horizon},
          {"r_vis_social", r.r_vis_social}, {"r_total", r.r_total}};
}

RewardBreakdown reward_from(const json& j) {
  RewardBreakdown r;
  r.r_term = j.at("r_term");
  r.r_pot = j.at("r_pot");
  r.r_kin = j.at("r_kin");
  r.r_horizon = j.at("r_horizon");
  r.r_vis_social = j.at("r_vis_social");
  r.r_total = j.at("r_total");
  return r;
}

}  // namespace

void write_episode_log(const std::string& path, const EpisodeLog& log) {
  std::ofstream out = open_out(path);
  json head = {{"type", "episode_start"}, {"scenario", log.scenario}, {"stack", log.stack},
               {"seed", log.seed}, {"start", {log.start.x(), log.start.y()}},
               {"goal", {log.goal.x(), log.goal.y()}}, {"sensing_range", log.sensing_range}};
  out << head.dump() << '\n';
  for (const StepRecord& s : log.steps) {
    json peds = json::array();
    for (const auto& p : s.peds) peds.push_back({p.id, p.position.x(), p.position.y(), p.cooperative ? 1 : 0});
    json j = {{"type", "step"},
              {"step", s.step},
              {"time", s.time},
              {"digest", hex64(s.digest)},
              {"robot", vec3(s.robot)},
              {"peds", peds},
              {"visible", s.visible},
              {"coop_probs", s.coop_probs},
              {"h", s.horizon},
              {"control", {s.control.v, s.control.w}},
              {"mpc_status", s.mpc_status},
              {"reward", reward_json(s.reward)},
              {"min_barrier", s.min_barrier ? json(*s.min_barrier) : json(nullptr)},
              {"intrusion", s.intrusion}};
    out << j.dump() << '\n';
  }
  json tail = {{"type", "episode_end"}, {"outcome", outcome_name(log.outcome)},
               {"duration", log.duration}, {"path_length", log.path_length},
               {"final_robot", vec3(log.final_robot)}, {"degraded_steps", log.degraded_steps},
               {"notes", log.notes}};
  out << tail.dump() << '\n';
}

EpisodeLog read_episode_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  EpisodeLog log;
  bool started = false, ended = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "episode_start") {
        started = true;
        log.scenario = j.at("scenario");
        log.stack = j.at("stack");
        log.seed = j.at("seed");
        log.start = to_vec2(j.at("start"));
        log.goal = to_vec2(j.at("goal"));
        log.sensing_range = j.at("sensing_range");
      } else if (type == "step") {
        StepRecord s;
        s.step = j.at("step");
        s.time = j.at("time");
        s.digest = std::stoull(j.at("digest").get<std::string>(), nullptr, 16);
        s.robot = to_vec3(j.at("robot"));
        for (const auto& p : j.at("peds"))
          s.peds.push_back({p.at(0).get<int>(), Vec2(p.at(1).get<double>(), p.at(2).get<double>()), p.at(3).get<int>() != 0});
        s.visible = j.at("visible").get<std::vector<int>>();
        s.coop_probs = j.at("coop_probs").get<std::vector<double>>();
        s.horizon = j.at("h");
        s.control = {j.at("control").at(0).get<double>(), j.at("control").at(1).get<double>()};
        s.mpc_status = j.at("mpc_status");
        s.reward = reward_from(j.at("reward"));
        if (!j.at("min_barrier").is_null()) s.min_barrier = j.at("min_barrier").get<double>();
        s.intrusion = j.at("intrusion");
        log.steps.push_back(std::move(s));
      } else if (type == "episode_end") {
        ended = true;
        log.outcome = parse_outcome(j.at("outcome"));
        log.duration = j.at("duration");
        log.path_length = j.at("path_length");
        log.final_robot = to_vec3(j.at("final_robot"));
        log.degraded_steps = j.at("degraded_steps");
        log.notes = j.at("notes").get<std::vector<std::string>>();
      } else {
        throw FormatError("unknown record type " + type);
      }
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!started || !ended) throw FormatError(path + ": missing episode_start or episode_end record");
  return log;
}

void write_episode_csv(const std::string& path, const MetricsSummary& m) {
  std::ofstream out = open_out(path);
  out << "episode,seed,outcome,duration,path_length,air,steps,degraded_steps\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const EpisodeRow& r = m.rows[i];
    out << i << ',' << r.seed << ',' << outcome_name(r.outcome) << ',' << num(r.duration) << ','
        << num(r.path_length) << ',' << num(r.air) << ',' << r.steps << ',' << r.degraded_steps << '\n';
  }
}

std::string summary_json(const MetricsSummary& m) {
  auto opt = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j = {{"scenario", m.scenario}, {"stack", m.stack}, {"n_episodes", m.n_episodes},
            {"n_success", m.n_success}, {"SR", m.SR}, {"CR", m.CR}, {"OR", m.OR},
            {"ANT", opt(m.ANT)}, {"ATL", opt(m.ATL)}, {"AIR", m.AIR}};
  return j.dump(2);
}

void write_summary_json(const std::string& path, const MetricsSummary& m) {
  std::ofstream out = open_out(path);
  out << summary_json(m) << '\n';
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out = open_out(path);
  out << "scenario,h,SR,CR,OR,ANT\n";
  for (const auto& r : rows)
    out << r.scenario << ',' << r.h << ',' << num(r.metrics.SR) << ',' << num(r.metrics.CR) << ','
        << num(r.metrics.OR) << ',' << num(r.metrics.ANT) << '\n';
}

}  // namespace hnav
