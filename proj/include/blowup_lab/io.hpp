#pragma once

// CSV and JSON emission, content hashing, and the per-run output recorder.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "blowup_lab/eigen.hpp"
#include "blowup_lab/error.hpp"
#include "blowup_lab/geometry.hpp"
#include "blowup_lab/linalg.hpp"
#include "blowup_lab/operator.hpp"
#include "json.hpp"

namespace blowup {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

/// JSON has no infinities; they are written as the strings "inf"/"-inf" and
/// NaN as null.
inline Json json_number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return out.str();
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) { row(header); }

  CsvWriter& cell(double v) { return put(format_double(v)); }
  CsvWriter& cell(std::size_t v) { return put(std::to_string(v)); }
  CsvWriter& cell(int v) { return put(std::to_string(v)); }
  CsvWriter& cell(const std::string& v) { return put(v); }
  CsvWriter& cell(const char* v) { return put(v); }

  void end_row() {
    if (filled_ != columns_) throw InvalidArgument("CSV row has the wrong number of cells");
    out_ << '\n';
    filled_ = 0;
  }

  std::string str() const { return out_.str(); }

 private:
  void row(const std::vector<std::string>& cells) {
    for (const auto& c : cells) put(c);
    end_row();
  }

  CsvWriter& put(const std::string& v) {
    if (filled_ > 0) out_ << ',';
    out_ << v;
    ++filled_;
    return *this;
  }

  std::size_t columns_;
  std::size_t filled_ = 0;
  std::ostringstream out_;
};

/// node, x[, y], value
inline std::string nodal_csv(const Grid& grid, const std::vector<std::pair<std::string, const Vector*>>& fields) {
  std::vector<std::string> header{"node", "x"};
  if (grid.dimension() == 2) header.push_back("y");
  for (const auto& f : fields) header.push_back(f.first);
  CsvWriter w(header);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    w.cell(i).cell(grid.coord(i)[0]);
    if (grid.dimension() == 2) w.cell(grid.coord(i)[1]);
    for (const auto& f : fields) w.cell((*f.second)[static_cast<Index>(i)]);
    w.end_row();
  }
  return w.str();
}

inline std::string distance_csv(const Grid& grid, const DistanceField& d) {
  const Vector v = to_vector(d.values);
  Vector m(static_cast<Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) m[static_cast<Index>(i)] = d.region[i];
  return nodal_csv(grid, {{"in_region", &m}, {"distance", &v}});
}

inline std::string mask_csv(const Grid& grid, const Mask& mask) {
  Vector m(static_cast<Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) m[static_cast<Index>(i)] = mask[i];
  return nodal_csv(grid, {{"value", &m}});
}

/// Coordinate-list text export: one "row col value" triple per line.
inline std::string coordinate_list(const DiscreteOperator& op) {
  std::ostringstream out;
  const CsrMatrix& m = op.matrix();
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (CsrMatrix::InnerIterator it(m, r); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << format_double(it.value()) << '\n';
    }
  }
  return out.str();
}

struct FileRecord {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
};

/// Writes files into one output directory and remembers their hashes.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<FileRecord>& files() const { return files_; }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write output file " + path.string());
    out << content;
    out.close();
    if (!out) throw Error("failed writing output file " + path.string());
    for (auto& f : files_) {
      if (f.path == name) {
        f = {name, sha256_hex(content), content.size()};
        return;
      }
    }
    files_.push_back({name, sha256_hex(content), content.size()});
  }

  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }

 private:
  std::filesystem::path dir_;
  std::vector<FileRecord> files_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace blowup
