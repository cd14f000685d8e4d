// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "linkguard/common/error.hpp"

namespace linkguard {

// Shortest decimal text that parses back to the identical double.
inline std::string format_real(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_reals(std::ostream& out, std::span<const double> values) {
  for (double v : values) out << ' ' << format_real(v);
}

// Whitespace-token reader for the versioned flat model files.
class FlatReader {
 public:
  explicit FlatReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw FormatError("model file: unexpected end of input");
    return w;
  }

  bool peek_eof() {
    in_ >> std::ws;
    return in_.peek() == std::char_traits<char>::eof();
  }

  void expect(std::string_view keyword) {
    auto w = word();
    if (w != keyword) {
      throw FormatError("model file: expected '" + std::string(keyword) + "', found '" + w + "'");
    }
  }

  double real() {
    auto w = word();
    double v = 0.0;
    auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) {
      if (w == "inf") return std::numeric_limits<double>::infinity();
      throw FormatError("model file: '" + w + "' is not a number");
    }
    return v;
  }

  std::uint64_t count() {
    auto w = word();
    std::uint64_t v = 0;
    auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) {
      throw FormatError("model file: '" + w + "' is not a non-negative integer");
    }
    return v;
  }

  std::vector<double> reals(std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = real();
    return out;
  }

 private:
  std::istream& in_;
};

}  // namespace linkguard
