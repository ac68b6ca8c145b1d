#include "config.hpp"

#include <fstream>
#include <sstream>

namespace bvflow::cli {

using nlohmann::json;

namespace {

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw InvalidInput("config: malformed key '" + key + "'");
    parts.push_back(part);
  }
  if (parts.empty()) throw InvalidInput("config: empty key");
  return parts;
}

bool is_index(const std::string& s) {
  return !s.empty() && s.find_first_not_of("0123456789") == std::string::npos;
}

}  // namespace

Config Config::load(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), overrides);
}

Config Config::parse(const std::string& text, const std::vector<std::string>& overrides) {
  json tree;
  try {
    tree = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  if (!tree.is_object()) throw InvalidInput("config: top level must be an object");
  Config cfg(std::move(tree));
  for (const auto& o : overrides) cfg.apply_override(o);
  return cfg;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidInput("config: override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &tree_;
  for (const auto& part : split_key(key)) {
    if (node->is_array() && is_index(part)) {
      const auto idx = std::stoul(part);
      if (idx >= node->size()) throw InvalidInput("config: index out of range in '" + key + "'");
      node = &(*node)[idx];
      continue;
    }
    if (!node->is_object()) *node = json::object();
    node = &(*node)[part];
  }
  *node = std::move(value);
}

const json* Config::find(const std::string& key) const {
  const json* node = &tree_;
  for (const auto& part : split_key(key)) {
    if (node->is_object()) {
      auto it = node->find(part);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else if (node->is_array() && is_index(part) && std::stoul(part) < node->size()) {
      node = &(*node)[std::stoul(part)];
    } else {
      return nullptr;
    }
  }
  return node;
}

const json& Config::require(const std::string& key) const {
  const json* node = find(key);
  if (!node) throw InvalidInput("config: missing key '" + key + "'");
  return *node;
}

bool Config::has(const std::string& key) const { return find(key) != nullptr; }

double Config::number(const std::string& key) const {
  const json& v = require(key);
  if (!v.is_number()) throw InvalidInput("config: '" + key + "' must be a number");
  return v.get<double>();
}

double Config::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

double Config::positive(const std::string& key, double fallback) const {
  const double v = number(key, fallback);
  if (!(v > 0.0)) throw InvalidInput("config: '" + key + "' must be positive");
  return v;
}

int Config::integer(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const json& v = require(key);
  if (!v.is_number_integer()) throw InvalidInput("config: '" + key + "' must be an integer");
  return v.get<int>();
}

bool Config::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const json& v = require(key);
  if (!v.is_boolean()) throw InvalidInput("config: '" + key + "' must be true or false");
  return v.get<bool>();
}

std::string Config::string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const json& v = require(key);
  if (!v.is_string()) throw InvalidInput("config: '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> Config::numbers(const std::string& key) const {
  const json& v = require(key);
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw InvalidInput("config: '" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw InvalidInput("config: '" + key + "' must be a list of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<double> Config::numbers(const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? numbers(key) : fallback;
}

Vec Config::vector(const std::string& key) const {
  const auto xs = numbers(key);
  if (xs.empty()) throw InvalidInput("config: '" + key + "' is empty");
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

std::vector<Vec> Config::vectors(const std::string& key) const {
  const json& v = require(key);
  if (!v.is_array()) throw InvalidInput("config: '" + key + "' must be a list");
  std::vector<Vec> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(vector(key + "." + std::to_string(i)));
  return out;
}

EnergyModel build_model(const Config& cfg) {
  if (cfg.has("model.polynomial")) {
    PolynomialSpec poly;
    poly.dim = cfg.integer("model.polynomial.dim", 1);
    poly.horizon = cfg.positive("horizon", cfg.number("model.polynomial.horizon", 1.0));
    poly.shift = cfg.number("model.polynomial.shift", 0.0);
    const auto& terms = cfg.tree()["model"]["polynomial"].value("terms", json::array());
    if (!terms.is_array()) throw InvalidInput("config: model.polynomial.terms must be a list");
    for (std::size_t k = 0; k < terms.size(); ++k) {
      const std::string base = "model.polynomial.terms." + std::to_string(k);
      std::vector<int> alpha;
      for (double a : cfg.numbers(base + ".alpha")) {
        if (a < 0 || a != static_cast<int>(a)) throw InvalidInput("config: " + base + ".alpha must hold non-negative integers");
        alpha.push_back(static_cast<int>(a));
      }
      poly.terms.emplace_back(alpha, cfg.number(base + ".coeff"));
    }
    if (cfg.has("model.polynomial.tilt")) {
      const auto& tilt = cfg.tree()["model"]["polynomial"]["tilt"];
      if (!tilt.is_array()) throw InvalidInput("config: model.polynomial.tilt must be a list");
      for (std::size_t i = 0; i < tilt.size(); ++i) poly.tilt.push_back(cfg.numbers("model.polynomial.tilt." + std::to_string(i)));
    }
    return make_polynomial(poly);
  }
  const std::string family = cfg.string("model.family", "");
  if (family.empty()) throw InvalidInput("config: model.family or model.polynomial is required");
  ParamMap params = default_params(family);
  if (cfg.has("model.params")) {
    const auto& p = cfg.tree()["model"]["params"];
    if (!p.is_object()) throw InvalidInput("config: model.params must be an object");
    for (auto it = p.begin(); it != p.end(); ++it) params[it.key()] = cfg.number("model.params." + it.key());
  }
  if (cfg.has("horizon")) params["T"] = cfg.number("horizon");
  return make_builtin(family, params);
}

Box build_domain(const Config& cfg, int dim) {
  if (cfg.has("domain.lo") || cfg.has("domain.hi")) {
    Box box(cfg.vector("domain.lo"), cfg.vector("domain.hi"));
    if (box.dim() != dim) throw InvalidInput("config: domain dimension does not match the model");
    return box;
  }
  return Box::centered(dim, cfg.positive("domain.half_width", 3.0));
}

}  // namespace bvflow::cli
