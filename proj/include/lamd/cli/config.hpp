#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lamd/error.hpp"

// RunConfig: a line-oriented "key = value" file. Blank lines and lines
// starting with '#' are ignored. Every key must be one of kDefaults.

namespace lamd::cli {

struct KeyDefault {
  const char* key;
  const char* value;
};

inline constexpr KeyDefault kDefaults[] = {
    {"seed", "0"},
    {"threads", "1"},
    // dataset
    {"data.source", "synthetic"},
    {"data.n", "2112"},
    {"data.side", "32"},
    {"data.seed", "7"},
    {"data.idx_images", ""},
    {"data.idx_labels", ""},
    {"data.pad_to_32", "false"},
    {"data.n_train", "2048"},
    // model
    {"model.kind", "glo"},
    {"model.architecture", "mlp"},
    {"model.latent_dim", "32"},
    {"model.hidden", "128,256"},
    {"model.disc_hidden", "256,64"},
    {"model.enc_hidden", "256"},
    {"model.dir", ""},
    // training
    {"train.epochs", "50"},
    {"train.batch_size", "32"},
    {"train.lr", "2e-4"},
    {"train.beta1", "0.5"},
    {"train.beta2", "0.999"},
    {"train.adv_weight", "0.1"},
    // recovery
    {"recovery.optimizer", "lbfgs"},
    {"recovery.max_iters", "100"},
    {"recovery.history", "10"},
    {"recovery.restarts", "1"},
    {"recovery.loss", "l2"},
    {"recovery.sgd_lr", "10"},
    {"recovery.adam_lr", "0.1"},
    {"recovery.grad_tol", "1e-9"},
    // audit
    {"audit.name", ""},
    {"audit.train_targets", "64"},
    {"audit.val_targets", "64"},
    {"audit.generated_targets", "64"},
    {"audit.distortion", "additive_noise"},
    {"audit.bins", "20"},
    // distortion sweep
    {"distort.kinds", "warp,patch_noise,additive_noise"},
    {"distort.targets", "32"},
    {"distort.smoothing_radius", "1.5"},
    // image editing demos
    {"edit.target_index", "0"},
    {"edit.image", ""},
    {"inpaint.mask", "8,8,12,16"},
    {"superres.factor", "4"},
    // convergence protocol
    {"convergence.targets", "20"},
    {"convergence.inits", "20"},
    {"convergence.optimizers", "lbfgs,sgd,adam"},
    {"convergence.threshold", "0.024"},
};

class RunConfig {
 public:
  RunConfig() {
    for (const auto& kd : kDefaults) values_[kd.key] = kd.value;
  }

  static RunConfig parse(const std::string& text, const std::string& origin = "<config>") {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      }
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  void set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
  }

  const std::string& str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string& s = str(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) bad(key, "a non-negative integer");
    return v;
  }

  std::size_t count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) bad(key, "a number");
      return v;
    } catch (const std::logic_error&) {
      bad(key, "a number");
    }
  }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    bad(key, "true or false");
  }

  std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const std::string& s : list(key)) {
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) bad(key, "a comma-separated list of integers");
      out.push_back(v);
    }
    return out;
  }

  /// All keys in sorted order, one "key = value" line each.
  std::string resolved() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  [[noreturn]] void bad(const std::string& key, const char* what) const {
    throw ConfigError("config key '" + key + "' must be " + what + ", got '" + str(key) + "'");
  }

  std::map<std::string, std::string> values_;
};

}  // namespace lamd::cli
