#include "hnav/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

namespace hnav {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key + ": not an integer: '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

template <class F>
Setter real(F field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { field(c) = to_double(k, v); };
}

template <class F>
Setter integer(F field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(to_int(k, v));
  };
}

template <class F>
Setter boolean(F field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { field(c) = to_bool(k, v); };
}

#define HNAV_FIELD(expr) [](RunConfig& c) -> auto& { return expr; }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"sim.dt", real(HNAV_FIELD(c.sim.dt))},
      {"sim.arena_spawn_radius", real(HNAV_FIELD(c.sim.arena_spawn_radius))},
      {"sim.n_cooperative", integer(HNAV_FIELD(c.sim.n_cooperative))},
      {"sim.n_noncooperative", integer(HNAV_FIELD(c.sim.n_noncooperative))},
      {"sim.robot_radius", real(HNAV_FIELD(c.sim.robot_radius))},
      {"sim.ped_radius", real(HNAV_FIELD(c.sim.ped_radius))},
      {"sim.v_min", real(HNAV_FIELD(c.sim.v_min))},
      {"sim.v_max", real(HNAV_FIELD(c.sim.v_max))},
      {"sim.w_max", real(HNAV_FIELD(c.sim.w_max))},
      {"sim.v_ref", real(HNAV_FIELD(c.sim.v_ref))},
      {"sim.ped_pref_speed", real(HNAV_FIELD(c.sim.ped_pref_speed))},
      {"sim.timeout", real(HNAV_FIELD(c.sim.timeout))},
      {"sim.sensing_range", real(HNAV_FIELD(c.sim.sensing_range))},
      {"sim.goal_tolerance", real(HNAV_FIELD(c.sim.goal_tolerance))},
      {"sim.recycle_goals", boolean(HNAV_FIELD(c.sim.recycle_goals))},
      {"sim.ped_controller",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "orca") c.sim.ped_controller = PedController::Orca;
         else if (v == "social_force") c.sim.ped_controller = PedController::SocialForce;
         else throw ConfigError(k + ": expected orca or social_force, got '" + v + "'");
       }},
      {"sim.orca.neighbor_dist", real(HNAV_FIELD(c.sim.orca.neighbor_dist))},
      {"sim.orca.time_horizon", real(HNAV_FIELD(c.sim.orca.time_horizon))},
      {"sim.orca.max_neighbors", integer(HNAV_FIELD(c.sim.orca.max_neighbors))},
      {"sim.sf.A", real(HNAV_FIELD(c.sim.sf.A))},
      {"sim.sf.B", real(HNAV_FIELD(c.sim.sf.B))},
      {"sim.sf.relaxation_time", real(HNAV_FIELD(c.sim.sf.relaxation_time))},

      {"mpc.gamma", real(HNAV_FIELD(c.nav.margins.gamma))},
      {"mpc.d_0", real(HNAV_FIELD(c.nav.margins.d_0))},
      {"mpc.d_coop", real(HNAV_FIELD(c.nav.margins.d_coop))},
      {"mpc.d_noncoop", real(HNAV_FIELD(c.nav.margins.d_noncoop))},
      {"mpc.q_x", real(HNAV_FIELD(c.nav.weights.Q(0, 0)))},
      {"mpc.q_y", real(HNAV_FIELD(c.nav.weights.Q(1, 1)))},
      {"mpc.q_theta", real(HNAV_FIELD(c.nav.weights.Q(2, 2)))},
      {"mpc.qf_x", real(HNAV_FIELD(c.nav.weights.Q_f(0, 0)))},
      {"mpc.qf_y", real(HNAV_FIELD(c.nav.weights.Q_f(1, 1)))},
      {"mpc.qf_theta", real(HNAV_FIELD(c.nav.weights.Q_f(2, 2)))},
      {"mpc.r_v", real(HNAV_FIELD(c.nav.weights.R(0, 0)))},
      {"mpc.r_w", real(HNAV_FIELD(c.nav.weights.R(1, 1)))},
      {"mpc.eta", real(HNAV_FIELD(c.nav.weights.eta))},
      {"mpc.sigma_coop", real(HNAV_FIELD(c.nav.weights.sigma_coop))},
      {"mpc.sigma_noncoop", real(HNAV_FIELD(c.nav.weights.sigma_noncoop))},
      {"mpc.rho_s", real(HNAV_FIELD(c.nav.weights.rho_s))},
      {"mpc.rho_s_lin", real(HNAV_FIELD(c.nav.weights.rho_s_lin))},
      {"mpc.sqp_iterations", integer(HNAV_FIELD(c.nav.sqp_iterations))},

      {"navigator.history_length", integer(HNAV_FIELD(c.nav.history_length))},
      {"navigator.h_max", integer(HNAV_FIELD(c.nav.h_max))},
      {"navigator.greedy_horizon", boolean(HNAV_FIELD(c.nav.greedy_horizon))},

      {"reward.lambda_h", real(HNAV_FIELD(c.reward.lambda_h))},
      {"reward.lambda_pot", real(HNAV_FIELD(c.reward.lambda_pot))},
      {"reward.lambda_r", real(HNAV_FIELD(c.reward.lambda_r))},
      {"reward.lambda_v", real(HNAV_FIELD(c.reward.lambda_v))},
      {"reward.lambda_high", real(HNAV_FIELD(c.reward.lambda_high))},
      {"reward.lambda_low", real(HNAV_FIELD(c.reward.lambda_low))},
      {"reward.eta_high", real(HNAV_FIELD(c.reward.eta_high))},
      {"reward.eta_low", real(HNAV_FIELD(c.reward.eta_low))},
      {"reward.goal_reward", real(HNAV_FIELD(c.reward.goal_reward))},
      {"reward.failure_reward", real(HNAV_FIELD(c.reward.failure_reward))},

      {"ppo.gamma", real(HNAV_FIELD(c.policy_train.ppo.gamma))},
      {"ppo.lambda_gae", real(HNAV_FIELD(c.policy_train.ppo.lambda_gae))},
      {"ppo.clip", real(HNAV_FIELD(c.policy_train.ppo.clip))},
      {"ppo.learning_rate", real(HNAV_FIELD(c.policy_train.ppo.learning_rate))},
      {"ppo.epochs", integer(HNAV_FIELD(c.policy_train.ppo.epochs))},
      {"ppo.minibatch", integer(HNAV_FIELD(c.policy_train.ppo.minibatch))},
      {"ppo.entropy_coeff", real(HNAV_FIELD(c.policy_train.ppo.entropy_coeff))},
      {"ppo.value_coeff", real(HNAV_FIELD(c.policy_train.ppo.value_coeff))},
      {"ppo.updates", integer(HNAV_FIELD(c.policy_train.updates))},
      {"ppo.steps_per_update", integer(HNAV_FIELD(c.policy_train.steps_per_update))},
      {"ppo.d_p", integer(HNAV_FIELD(c.policy_train.d_p))},

      {"coop.batch_size", integer(HNAV_FIELD(c.coop_train.batch_size))},
      {"coop.learning_rate", real(HNAV_FIELD(c.coop_train.learning_rate))},
      {"coop.epochs", integer(HNAV_FIELD(c.coop_train.epochs))},
      {"coop.temperature_start", real(HNAV_FIELD(c.coop_train.temperature_start))},
      {"coop.temperature_end", real(HNAV_FIELD(c.coop_train.temperature_end))},
      {"coop.epsilon", real(HNAV_FIELD(c.coop_train.epsilon))},
      {"coop.adjacency_length_scale", real(HNAV_FIELD(c.coop_train.adjacency_length_scale))},
      {"coop.gumbel_noise", boolean(HNAV_FIELD(c.coop_train.gumbel_noise))},
      {"coop.d", integer(HNAV_FIELD(c.coop_dims.d))},
      {"coop.d_k", integer(HNAV_FIELD(c.coop_dims.d_k))},
      {"coop.d_ff", integer(HNAV_FIELD(c.coop_dims.d_ff))},
      {"coop.n_layers", integer(HNAV_FIELD(c.coop_dims.n_layers))},
  };
  return table;
}

#undef HNAV_FIELD

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile file;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    line = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (file.values_.count(full)) throw ConfigError(where + "duplicate key " + full);
    file.values_[full] = trim(line.substr(eq + 1));
  }
  return file;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

RunConfig apply_config(const ConfigFile& file, RunConfig base) {
  const auto& table = setters();
  for (const auto& [key, value] : file.values()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key " + key);
    it->second(base, key, value);
  }
  base.policy_train.h_max = base.nav.h_max;
  base.reward.h_max = base.nav.h_max;
  base.coop_dims.history_length = base.nav.history_length;
  try {
    base.sim.validate();
    base.nav.margins.validate();
    base.nav.weights.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  if (base.nav.h_max < 1 || base.nav.history_length < 2 || base.nav.sqp_iterations < 1)
    throw ConfigError("invalid configuration: navigator.h_max >= 1, history_length >= 2, sqp_iterations >= 1");
  return base;
}

}  // namespace hnav
