#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "cwm/errors.hpp"

namespace cwm {

/// Shortest round-trip decimal form of a double; stable bytes for a given
/// value, so rerunning an experiment reproduces CSV files exactly.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Minimal CSV writer with deterministic formatting.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ContractError("CsvWriter: cannot open " + path);
    write_strings(header);
  }

  class Row {
   public:
    explicit Row(CsvWriter& w) : w_(w) {}
    Row& col(double v) { return col_str(format_double(v)); }
    Row& col(long v) { return col_str(std::to_string(v)); }
    Row& col(int v) { return col_str(std::to_string(v)); }
    Row& col(std::uint64_t v) { return col_str(std::to_string(v)); }
    Row& col(const std::string& s) { return col_str(s); }
    ~Row() { w_.out_ << '\n'; }

   private:
    Row& col_str(const std::string& s) {
      if (!first_) w_.out_ << ',';
      first_ = false;
      w_.out_ << s;
      return *this;
    }
    CsvWriter& w_;
    bool first_ = true;
  };

  Row row() { return Row(*this); }

 private:
  void write_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }
  std::ofstream out_;
};

}  // namespace cwm
