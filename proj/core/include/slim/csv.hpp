#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

namespace slim {

// Round-trip exact rendering: 17 significant digits, "inf", "-inf", "nan".
std::string format_double(double v);

// Comma-separated rows; fields containing a comma or quote are quoted.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& field(std::string_view text);
  CsvWriter& field(double v);
  CsvWriter& field(std::size_t v);
  CsvWriter& field(std::optional<double> v);  // empty when absent
  CsvWriter& empty();
  void end_row();

 private:
  void separator();

  std::ostream& out_;
  bool row_started_ = false;
};

}  // namespace slim
