#pragma once

// JSON model and portfolio files.
//
// Model file:     {"class_name", "unit", "beta", "C": [4], "p": [3], "q": [2],
//                  "boundary": {"v": [...], "g": [...]}, "fuel_density_g_per_gal"}
// Portfolio file: [{"class_name", "model_file", "share"}, ...]; the entry whose
//                 share is null is the class automated vehicles are scored with.

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "wavebench/energy.hpp"
#include "wavebench/format.hpp"

namespace wavebench {

namespace detail {

template <std::size_t N>
std::array<double, N> read_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != N) {
    throw ValidationError(key, "expected an array of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j.at(key)[i].is_number()) throw ValidationError(key, "expected numbers");
    out[i] = j.at(key)[i].get<double>();
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline nlohmann::json to_json(const PolyEnergyModel& m) {
  return {
      {"class_name", m.class_name},
      {"unit", to_string(m.unit)},
      {"fuel_density_g_per_gal", m.grams_per_gallon},
      {"beta", m.beta},
      {"C", m.C},
      {"p", m.p},
      {"q", m.q},
      {"boundary", {{"v", m.boundary.speeds()}, {"g", m.boundary.accels()}}},
  };
}

inline PolyEnergyModel poly_model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("model", "expected a JSON object");
  PolyEnergyModel m;
  try {
    m.class_name = j.at("class_name").get<std::string>();
    m.unit = fuel_unit_from_string(j.at("unit").get<std::string>());
    m.beta = j.at("beta").get<double>();
    if (j.contains("fuel_density_g_per_gal")) {
      m.grams_per_gallon = j.at("fuel_density_g_per_gal").get<double>();
    }
    if (j.contains("boundary")) {
      const auto& b = j.at("boundary");
      m.boundary = FeasibilityBoundary(b.at("v").get<std::vector<double>>(),
                                       b.at("g").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model", e.what());
  }
  m.C = detail::read_array<4>(j, "C");
  m.p = detail::read_array<3>(j, "p");
  m.q = detail::read_array<2>(j, "q");
  m.validate();
  return m;
}

inline PolyEnergyModel load_poly_model(const std::filesystem::path& path) {
  try {
    return poly_model_from_json(nlohmann::json::parse(detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string(), e.what());
  }
}

inline void save_poly_model(const PolyEnergyModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(m).dump(2) << '\n';
}

/// Fit samples from CSV with header `v,a,rate`.
inline std::vector<FuelSample> read_fuel_samples_csv(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw CsvParseError(lineno, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "v,a,rate") throw CsvParseError(lineno, "expected header 'v,a,rate'");
  std::vector<FuelSample> out;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double x[3];
    std::size_t start = 0;
    for (int k = 0; k < 3; ++k) {
      const auto comma = line.find(',', start);
      if ((k < 2) != (comma != std::string::npos)) throw CsvParseError(lineno, "expected 3 fields");
      const auto cell = line.substr(start, k < 2 ? comma - start : std::string::npos);
      if (!parse_double(cell, x[k]) || !std::isfinite(x[k])) {
        throw CsvParseError(lineno, "bad number '" + cell + "'");
      }
      start = comma + 1;
    }
    if (x[2] < 0) throw CsvParseError(lineno, "fuel rate must be >= 0");
    out.push_back({x[0], x[1], x[2]});
  }
  if (out.empty()) throw CsvParseError(lineno, "no samples");
  return out;
}

inline VehiclePortfolio load_portfolio(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string(), e.what());
  }
  if (!j.is_array()) throw ValidationError("portfolio", "expected a JSON array");
  const auto base = path.parent_path();
  std::vector<PortfolioEntry> humans;
  std::optional<PortfolioEntry> cav;
  for (const auto& e : j) {
    PortfolioEntry entry;
    try {
      entry.class_name = e.at("class_name").get<std::string>();
      auto model = load_poly_model(base / e.at("model_file").get<std::string>());
      model.class_name = entry.class_name;
      entry.model = std::make_shared<const PolyEnergyModel>(std::move(model));
      if (e.at("share").is_null()) {
        if (cav) throw ValidationError("portfolio", "more than one CAV class (share: null)");
        cav = std::move(entry);
        continue;
      }
      entry.share = e.at("share").get<double>();
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError("portfolio", ex.what());
    }
    humans.push_back(std::move(entry));
  }
  if (!cav) throw ValidationError("portfolio", "no CAV class (an entry with share: null)");
  return VehiclePortfolio(std::move(humans), std::move(*cav));
}

}  // namespace wavebench
