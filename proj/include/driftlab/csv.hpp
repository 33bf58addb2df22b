#pragma once

#include <charconv>
#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <variant>

namespace driftlab::csv {

/// 17 significant digits, '.' decimal separator, independent of locale.
inline std::string format(double value) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

using Cell = std::variant<double, std::int64_t, std::uint64_t, std::string_view>;

inline void write_row(std::ostream& out, std::initializer_list<Cell> cells) {
  bool first = true;
  for (const auto& cell : cells) {
    if (!first) out << ',';
    first = false;
    std::visit(
        [&out](const auto& v) {
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, double>) {
            out << format(v);
          } else {
            out << v;
          }
        },
        cell);
  }
  out << '\n';
}

}  // namespace driftlab::csv
