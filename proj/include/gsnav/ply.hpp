#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsnav/error.hpp"
#include "gsnav/scene.hpp"

namespace gsnav::scene {

namespace ply_detail {

struct Property {
  std::string name;
  int size = 4;        // bytes
  bool is_float = false;
};

inline int scalar_size(const std::string& type) {
  if (type == "char" || type == "int8" || type == "uchar" || type == "uint8")
    return 1;
  if (type == "short" || type == "int16" || type == "ushort" || type == "uint16")
    return 2;
  if (type == "int" || type == "int32" || type == "uint" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  return -1;
}

// The eleven properties a splat file must provide, in canonical write order.
inline const std::array<const char*, 11>& canonical_names() {
  static const std::array<const char*, 11> names = {
      "x", "y", "z", "scale_0", "scale_1", "scale_2",
      "rot_0", "rot_1", "rot_2", "rot_3", "opacity"};
  return names;
}

}  // namespace ply_detail

/// Parse a binary little-endian splat PLY.  Requires float32 properties
/// x y z scale_0..2 rot_0..3 opacity on the single `vertex` element, in any
/// order and interleaved with arbitrary tolerated extras (colors, normals,
/// spherical-harmonic coefficients), which are skipped.
inline std::vector<GaussianRecord> load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "load_ply: cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  in.close();

  // --- header ---
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    const std::size_t start = pos;
    const std::size_t nl = content.find('\n', start);
    if (nl == std::string::npos)
      fail(ErrorCode::kParse, "load_ply: " + path + ": unterminated header at byte " +
                                  std::to_string(start));
    line = content.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = nl + 1;
  };

  std::string line;
  next_line(line);
  if (line != "ply")
    fail(ErrorCode::kParse, "load_ply: " + path + ": not a PLY file (byte 0)");
  next_line(line);
  if (line.rfind("format ", 0) != 0)
    fail(ErrorCode::kParse, "load_ply: " + path + ": expected format line at byte " +
                                std::to_string(pos - line.size() - 1));
  if (line != "format binary_little_endian 1.0")
    fail(ErrorCode::kSchema,
         "load_ply: " + path + ": unsupported format '" + line.substr(7) +
             "' (only binary_little_endian 1.0)");

  std::size_t count = 0;
  bool in_vertex = false;
  bool saw_vertex = false;
  std::vector<ply_detail::Property> props;
  for (;;) {
    const std::size_t line_start = pos;
    next_line(line);
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "element") {
      std::string name;
      std::size_t n = 0;
      if (!(ls >> name >> n))
        fail(ErrorCode::kParse, "load_ply: " + path + ": malformed element at byte " +
                                    std::to_string(line_start));
      if (name != "vertex")
        fail(ErrorCode::kSchema,
             "load_ply: " + path + ": unsupported element '" + name + "'");
      if (saw_vertex)
        fail(ErrorCode::kSchema, "load_ply: " + path + ": duplicate vertex element");
      saw_vertex = in_vertex = true;
      count = n;
      continue;
    }
    if (kw == "property") {
      if (!in_vertex)
        fail(ErrorCode::kParse, "load_ply: " + path +
                                    ": property before any element at byte " +
                                    std::to_string(line_start));
      std::string type, name;
      if (!(ls >> type >> name))
        fail(ErrorCode::kParse, "load_ply: " + path + ": malformed property at byte " +
                                    std::to_string(line_start));
      if (type == "list")
        fail(ErrorCode::kSchema,
             "load_ply: " + path + ": list property '" + name + "' not supported");
      const int size = ply_detail::scalar_size(type);
      if (size < 0)
        fail(ErrorCode::kParse, "load_ply: " + path + ": unknown property type '" +
                                    type + "' at byte " + std::to_string(line_start));
      props.push_back({name, size, type == "float" || type == "float32"});
      continue;
    }
    fail(ErrorCode::kParse, "load_ply: " + path + ": unrecognized header line '" +
                                kw + "' at byte " + std::to_string(line_start));
  }
  if (!saw_vertex)
    fail(ErrorCode::kSchema, "load_ply: " + path + ": missing vertex element");

  // Locate the canonical fields and the row stride.
  std::size_t stride = 0;
  std::map<std::string, std::size_t> offset;
  for (const auto& p : props) {
    offset.emplace(p.name, stride);
    stride += static_cast<std::size_t>(p.size);
  }
  std::array<std::size_t, 11> field{};
  for (std::size_t i = 0; i < field.size(); ++i) {
    const char* name = ply_detail::canonical_names()[i];
    const auto it = offset.find(name);
    if (it == offset.end())
      fail(ErrorCode::kSchema,
           "load_ply: " + path + ": missing required property '" + name + "'");
    // The canonical fields must be float32 for fixed-layout decoding.
    for (const auto& p : props)
      if (p.name == name && !p.is_float)
        fail(ErrorCode::kSchema, "load_ply: " + path + ": property '" +
                                     std::string(name) + "' must be float");
    field[i] = it->second;
  }

  const std::size_t need = count * stride;
  const std::size_t have = content.size() - pos;
  if (have < need)
    fail(ErrorCode::kIo, "load_ply: " + path + ": truncated payload (need " +
                             std::to_string(need) + " bytes, have " +
                             std::to_string(have) + ")");

  std::vector<GaussianRecord> recs(count);
  const char* base = content.data() + pos;
  auto f32 = [](const char* p) {
    float v;
    std::memcpy(&v, p, 4);
    return static_cast<double>(v);
  };
  // Degree-0 color coefficients are kept when present; higher-order SH,
  // normals, and other extras are skipped by stride.
  bool has_color = true;
  std::array<std::size_t, 3> color{};
  for (int i = 0; i < 3; ++i) {
    const std::string name = "f_dc_" + std::to_string(i);
    const auto it = offset.find(name);
    bool is_float = false;
    for (const auto& p : props)
      if (p.name == name) is_float = p.is_float;
    if (it == offset.end() || !is_float) {
      has_color = false;
      break;
    }
    color[static_cast<std::size_t>(i)] = it->second;
  }
  for (std::size_t i = 0; i < count; ++i) {
    const char* row = base + i * stride;
    GaussianRecord& r = recs[i];
    r.mu = Vec3(f32(row + field[0]), f32(row + field[1]), f32(row + field[2]));
    r.log_scale = Vec3(f32(row + field[3]), f32(row + field[4]), f32(row + field[5]));
    r.rot_wxyz = Vec4(f32(row + field[6]), f32(row + field[7]), f32(row + field[8]),
                      f32(row + field[9]));
    r.opacity_logit = f32(row + field[10]);
    if (has_color) {
      r.color_dc = Vec3(f32(row + color[0]), f32(row + color[1]), f32(row + color[2]));
      r.has_color = true;
    }
  }
  return recs;
}

/// Write records in the canonical layout load_ply expects (float32 fields in
/// canonical order); load -> write round-trips canonical files byte-for-byte.
inline void write_ply(const std::vector<GaussianRecord>& records,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "write_ply: cannot open " + path);
  bool with_color = !records.empty();
  for (const GaussianRecord& r : records) with_color = with_color && r.has_color;
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << records.size() << "\n";
  for (const char* name : ply_detail::canonical_names())
    out << "property float " << name << "\n";
  if (with_color)
    for (int i = 0; i < 3; ++i) out << "property float f_dc_" << i << "\n";
  out << "end_header\n";
  auto put = [&](double v) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), 4);
  };
  for (const GaussianRecord& r : records) {
    for (int i = 0; i < 3; ++i) put(r.mu[i]);
    for (int i = 0; i < 3; ++i) put(r.log_scale[i]);
    for (int i = 0; i < 4; ++i) put(r.rot_wxyz[i]);
    put(r.opacity_logit);
    if (with_color)
      for (int i = 0; i < 3; ++i) put(r.color_dc[i]);
  }
  if (!out) fail(ErrorCode::kIo, "write_ply: write failed for " + path);
}

}  // namespace gsnav::scene
