#pragma once

#include "bvflow/energy.hpp"
#include "bvflow/types.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace bvflow::cli {

/// Run configuration: a JSON tree addressed by dotted keys ("simulate.epsilons").
/// Overrides are `key=value` pairs; the value is parsed as JSON when it can
/// be and taken as a string otherwise.
class Config {
 public:
  Config() = default;
  explicit Config(nlohmann::json tree) : tree_(std::move(tree)) {}

  static Config load(const std::string& path, const std::vector<std::string>& overrides = {});
  static Config parse(const std::string& text, const std::vector<std::string>& overrides = {});

  void apply_override(const std::string& assignment);

  [[nodiscard]] const nlohmann::json& tree() const { return tree_; }
  [[nodiscard]] bool has(const std::string& key) const;

  [[nodiscard]] double number(const std::string& key) const;
  [[nodiscard]] double number(const std::string& key, double fallback) const;
  /// Like number() but rejects values <= 0.
  [[nodiscard]] double positive(const std::string& key, double fallback) const;
  [[nodiscard]] int integer(const std::string& key, int fallback) const;
  [[nodiscard]] bool boolean(const std::string& key, bool fallback) const;
  [[nodiscard]] std::string string(const std::string& key, const std::string& fallback) const;
  [[nodiscard]] std::vector<double> numbers(const std::string& key) const;
  [[nodiscard]] std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
  [[nodiscard]] Vec vector(const std::string& key) const;
  [[nodiscard]] std::vector<Vec> vectors(const std::string& key) const;

 private:
  [[nodiscard]] const nlohmann::json* find(const std::string& key) const;
  [[nodiscard]] const nlohmann::json& require(const std::string& key) const;

  nlohmann::json tree_ = nlohmann::json::object();
};

/// model.family (+ model.params) or model.polynomial; `horizon` overrides T.
EnergyModel build_model(const Config& cfg);

/// `domain.lo`/`domain.hi`, or `domain.half_width` (default 3) around the origin.
Box build_domain(const Config& cfg, int dim);

}  // namespace bvflow::cli
