#include "eafrs/rational.hpp"

#include <charconv>
#include <string_view>

namespace eafrs {
namespace {

std::int64_t parse_int(std::string_view s, const std::string& whole) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw DataError("invalid rational '" + whole + "'");
  }
  return v;
}

}  // namespace

Rational Rational::parse(const std::string& text) {
  std::string_view s(text);
  const auto sep = s.find_first_of("/:");
  if (sep != std::string_view::npos) {
    return Rational(parse_int(s.substr(0, sep), text),
                    parse_int(s.substr(sep + 1), text));
  }
  const auto dot = s.find('.');
  if (dot == std::string_view::npos) return Rational(parse_int(s, text));

  const std::string_view frac = s.substr(dot + 1);
  if (frac.size() > 9) throw DataError("too many decimals in '" + text + "'");
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  const std::int64_t whole = dot == 0 ? 0 : parse_int(s.substr(0, dot), text);
  const std::int64_t part = frac.empty() ? 0 : parse_int(frac, text);
  return Rational(whole * den + part, den);
}

}  // namespace eafrs
