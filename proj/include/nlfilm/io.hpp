#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "field.hpp"

namespace nlfilm::io {

using json = nlohmann::ordered_json;

// <stem>.bin holds channel-major little-endian doubles; <stem>.json describes the grid
template <int Dim>
void write_field(const std::filesystem::path& bin, const Field<Dim>& u) {
  if (bin.has_parent_path()) std::filesystem::create_directories(bin.parent_path());
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw Error("cannot open " + bin.string() + " for writing");
  out.write(reinterpret_cast<const char*>(u.data.data()), std::streamsize(u.data.size() * sizeof(double)));
  json meta;
  meta["format"] = "nlfilm-field";
  meta["dimension"] = Dim;
  meta["dims"] = u.grid.dims;
  meta["lengths"] = u.grid.lengths;
  meta["components"] = u.components;
  meta["layout"] = "channel-major, last axis fastest, float64 little-endian";
  if (u.support) {
    std::vector<std::size_t> runs;  // alternating run lengths starting with zeros
    std::uint8_t cur = 0;
    std::size_t len = 0;
    for (auto b : *u.support) {
      if (b != cur) {
        runs.push_back(len);
        cur = b;
        len = 0;
      }
      ++len;
    }
    runs.push_back(len);
    meta["support_runs"] = runs;
  }
  std::ofstream(std::filesystem::path(bin).replace_extension(".json")) << meta.dump(2) << "\n";
}

inline json read_meta(const std::filesystem::path& bin) {
  const auto side = std::filesystem::path(bin).replace_extension(".json");
  std::ifstream in(side);
  if (!in) throw Error("missing field description " + side.string());
  return json::parse(in);
}

template <int Dim>
Field<Dim> read_field(const std::filesystem::path& bin) {
  const json meta = read_meta(bin);
  if (meta.value("format", "") != "nlfilm-field") throw Error(bin.string() + " is not a field dump");
  if (meta.at("dimension").get<int>() != Dim) throw ShapeError("field dump has dimension " + meta.at("dimension").dump());
  Grid<Dim> g(meta.at("dims").get<std::array<int, Dim>>(), meta.at("lengths").get<std::array<double, Dim>>());
  Field<Dim> u(g, meta.at("components").get<int>());
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw Error("cannot open " + bin.string());
  in.read(reinterpret_cast<char*>(u.data.data()), std::streamsize(u.data.size() * sizeof(double)));
  if (in.gcount() != std::streamsize(u.data.size() * sizeof(double))) throw Error(bin.string() + " is truncated");
  if (meta.contains("support_runs")) {
    Mask m;
    std::uint8_t cur = 0;
    for (std::size_t run : meta["support_runs"].get<std::vector<std::size_t>>()) {
      m.insert(m.end(), run, cur);
      cur ^= 1;
    }
    if (m.size() != g.size()) throw ShapeError("support mask size does not match grid");
    u.support = std::move(m);
  }
  return u;
}

inline int field_dimension(const std::filesystem::path& bin) { return read_meta(bin).at("dimension").get<int>(); }

// shortest representation that round-trips
inline std::string number(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error("cannot open " + path.string() + " for writing");
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << number(values[i]);
    out_ << "\n";
  }
  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << values[i];
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

}  // namespace nlfilm::io
