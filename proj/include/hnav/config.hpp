#ifndef HNAV_CONFIG_HPP
#define HNAV_CONFIG_HPP

#include <map>
#include <string>

#include "hnav/bench.hpp"
#include "hnav/coop_net.hpp"
#include "hnav/policy.hpp"

namespace hnav {

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Key-value text: `[section]` or `[section.sub]` headers, `key = value`
/// lines, `#` or `;` comments. Keys are stored as "section.key".
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "<string>");
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Everything a run can be configured with; defaults are the declared ones.
struct RunConfig {
  SimConfig sim;
  NavigatorConfig nav;
  RewardCoeffs reward;
  PolicyTrainConfig policy_train;
  CoopTrainConfig coop_train;
  CoopNetDims coop_dims;
};

/// Applies every key of `file` on top of `base`. Unknown keys and malformed
/// values throw ConfigError; the result is validated.
RunConfig apply_config(const ConfigFile& file, RunConfig base = {});

}  // namespace hnav

#endif  // HNAV_CONFIG_HPP
