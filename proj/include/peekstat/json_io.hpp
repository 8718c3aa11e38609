#pragma once

// JSON forms used by configuration files:
//
//   DistributionModel  {"kind": "uniform01" | "pareto" | "exponential" | "empirical",
//                       "params": {"alpha": a} | {"rate": r} | {"sample": [...]} | {}}
//   Potential          "log" | {"power": a} | {"tail_quantile_of": <DistributionModel>}
//                      | {"table": [[x, g(x)], ...]}, optionally wrapped as
//                      {"g": <one of those>, "mode": "closed_form" | "quadrature"}
//   MixtureGrid        {"lambdas": [...], "weights": [...]}
//                      | {"geometric": {"eta": 1.1, "lambda_max": 4, "count": 100, "s": 1.4}}

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"  // nlohmann/json, vendored

#include "peekstat/distribution.hpp"
#include "peekstat/error.hpp"
#include "peekstat/martingale.hpp"
#include "peekstat/potential.hpp"

namespace peekstat {

using json = nlohmann::json;

namespace detail {

inline const json& require_field(const json& j, const char* key, const char* what) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(std::string(what) + ": missing field '" + key + "'");
  }
  return j.at(key);
}

inline double number_field(const json& j, const char* key, const char* what) {
  const json& v = require_field(j, key, what);
  if (!v.is_number()) throw ConfigError(std::string(what) + ": field '" + key + "' must be a number");
  return v.get<double>();
}

}  // namespace detail

inline json distribution_to_json(const DistributionModel& mu) {
  json params = json::object();
  switch (mu.kind()) {
    case DistKind::Uniform01:
      break;
    case DistKind::Pareto:
      params["alpha"] = mu.alpha();
      break;
    case DistKind::Exponential:
      params["rate"] = mu.rate();
      break;
    case DistKind::Empirical:
      params["sample"] = std::vector<double>(mu.sample().begin(), mu.sample().end());
      break;
  }
  return json{{"kind", to_string(mu.kind())}, {"params", params}};
}

inline DistributionModel distribution_from_json(const json& j) {
  constexpr const char* what = "distribution";
  const json& kind_j = detail::require_field(j, "kind", what);
  if (!kind_j.is_string()) throw ConfigError("distribution: 'kind' must be a string");
  const auto kind = kind_j.get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  try {
    if (kind == "uniform01") return DistributionModel::uniform01();
    if (kind == "pareto") return DistributionModel::pareto(detail::number_field(params, "alpha", what));
    if (kind == "exponential") {
      return DistributionModel::exponential(detail::number_field(params, "rate", what));
    }
    if (kind == "empirical") {
      const json& s = detail::require_field(params, "sample", what);
      if (!s.is_array()) throw ConfigError("distribution: 'sample' must be an array");
      return DistributionModel::empirical(s.get<std::vector<double>>());
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("distribution: ") + e.what());
  }
  throw ConfigError("distribution: unknown kind '" + kind + "'");
}

inline json potential_to_json(const Potential& p) {
  json g;
  switch (p.kind()) {
    case PotentialKind::Log:
      g = "log";
      break;
    case PotentialKind::Power:
      g = json{{"power", p.exponent()}};
      break;
    case PotentialKind::TailQuantileOf:
      g = json{{"tail_quantile_of", distribution_to_json(*p.distribution())}};
      break;
    case PotentialKind::UserTable: {
      json rows = json::array();
      const auto& t = p.table_interpolant();
      for (std::size_t i = 0; i < t.x().size(); ++i) rows.push_back({t.x()[i], t.y()[i]});
      g = json{{"table", rows}};
      break;
    }
  }
  return json{{"g", g},
              {"mode", p.mode() == PotentialMode::ClosedForm ? "closed_form" : "quadrature"}};
}

inline Potential potential_from_json(const json& j) {
  json g = j;
  std::optional<PotentialMode> mode;
  if (j.is_object() && j.contains("g")) {
    g = j.at("g");
    if (j.contains("mode")) {
      const auto m = j.at("mode").get<std::string>();
      if (m == "closed_form") {
        mode = PotentialMode::ClosedForm;
      } else if (m == "quadrature") {
        mode = PotentialMode::Quadrature;
      } else {
        throw ConfigError("potential: unknown mode '" + m + "'");
      }
    }
  }
  try {
    Potential p = [&] {
      if (g.is_string() && g.get<std::string>() == "log") return Potential::log();
      if (g.is_object() && g.contains("power")) return Potential::power(g.at("power").get<double>());
      if (g.is_object() && g.contains("tail_quantile_of")) {
        return Potential::tail_quantile_of(distribution_from_json(g.at("tail_quantile_of")));
      }
      if (g.is_object() && g.contains("table")) {
        std::vector<std::pair<double, double>> knots;
        for (const auto& row : g.at("table")) {
          if (!row.is_array() || row.size() != 2) {
            throw ConfigError("potential: table rows must be [x, g(x)] pairs");
          }
          knots.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
        return Potential::table(std::move(knots));
      }
      throw ConfigError("potential: unrecognised specification " + g.dump());
    }();
    return mode ? p.with_mode(*mode) : p;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("potential: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("potential: ") + e.what());
  }
}

inline json mixture_to_json(const MixtureGrid& g) {
  return json{{"lambdas", g.lambdas}, {"weights", g.weights}};
}

inline MixtureGrid mixture_from_json(const json& j) {
  try {
    if (j.contains("geometric")) {
      const json& p = j.at("geometric");
      return MixtureGrid::geometric(p.value("eta", 1.1), p.value("lambda_max", 4.0),
                                    p.value("count", std::size_t{100}), p.value("s", 1.4));
    }
    MixtureGrid g;
    g.lambdas = detail::require_field(j, "lambdas", "mixture").get<std::vector<double>>();
    g.weights = detail::require_field(j, "weights", "mixture").get<std::vector<double>>();
    g.validate();
    return g;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("mixture: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mixture: ") + e.what());
  }
}

}  // namespace peekstat
