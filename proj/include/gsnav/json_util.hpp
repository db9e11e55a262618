#pragma once

#include <fstream>
#include <limits>
#include <string>

#include <json.hpp>

#include "gsnav/error.hpp"
#include "gsnav/math.hpp"

namespace gsnav {

using Json = nlohmann::json;

inline Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path);
  Json j = Json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) fail(ErrorCode::kParse, "malformed JSON in " + path);
  return j;
}

inline void save_json(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorCode::kIo, "write failed for " + path);
}

/// JSON has no infinity literal; we encode +inf as the string "inf".
inline Json number_or_inf(double v) {
  if (std::isinf(v)) return Json(v > 0 ? "inf" : "-inf");
  return Json(v);
}

inline double parse_number_or_inf(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  fail(ErrorCode::kSchema, where + ": expected number or \"inf\"");
}

inline Json vec3_to_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

inline Vec3 json_to_vec3(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number())
    fail(ErrorCode::kSchema, where + ": expected [x, y, z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline const Json& require_field(const Json& j, const std::string& key,
                                 const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::kSchema, where + ": missing field '" + key + "'");
  return *it;
}

}  // namespace gsnav
