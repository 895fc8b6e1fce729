#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace driftkde::csv {

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc{}) throw std::runtime_error("double formatting failed");
  return std::string(buf, res.ptr);
}

/// Builds a CSV document in memory: '#'-prefixed header lines, one column
/// row, then data rows. Byte-deterministic for identical inputs.
class Table {
 public:
  void comment(const std::string& line) {
    header_ += "# " + line + "\n";
  }

  void columns(const std::vector<std::string>& names) {
    columns_ = join(names);
  }

  class RowBuilder {
   public:
    explicit RowBuilder(std::string& out) : out_(out) {}
    RowBuilder& add(const std::string& s) {
      if (!first_) out_ += ',';
      first_ = false;
      out_ += s;
      return *this;
    }
    RowBuilder& add(double v) { return add(format_double(v)); }
    RowBuilder& add(long v) { return add(std::to_string(v)); }
    RowBuilder& add(int v) { return add(std::to_string(v)); }

   private:
    std::string& out_;
    bool first_ = true;
  };

  RowBuilder row() {
    if (!rows_.empty()) rows_ += '\n';
    return RowBuilder(rows_);
  }

  std::string str() const {
    std::string out = header_;
    if (!columns_.empty()) out += columns_ + "\n";
    if (!rows_.empty()) out += rows_ + "\n";
    return out;
  }

  void write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    f << str();
    if (!f) throw std::runtime_error("write failed: " + path);
  }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += v[i];
    }
    return out;
  }

  std::string header_, columns_, rows_;
};

}  // namespace driftkde::csv
