#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "inis/additive_selector.hpp"
#include "inis/common.hpp"

namespace inis {

// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

// Plain-text model format, version 1:
//
//   inis-additive-model 1
//   intercept <real>
//   lambda <real>
//   components <K>
//   then K times:
//     component <covariate index, 1-based>
//     name <rest of line>
//     degree <l>
//     knots <m> <m reals>
//     means <w> <w reals>
//     coefficients <w> <w reals>
//   end
//
// Reals are written in shortest round-trip form, so write/read is exact.
inline void write_model(std::ostream& out, const AdditiveModel& model) {
  auto write_vec = [&](const char* key, const auto& v, std::size_t size) {
    out << key << ' ' << size;
    for (std::size_t i = 0; i < size; ++i) out << ' ' << format_double(v[i]);
    out << '\n';
  };
  out << "inis-additive-model 1\n";
  out << "intercept " << format_double(model.intercept) << '\n';
  out << "lambda " << format_double(model.lambda) << '\n';
  out << "components " << model.components.size() << '\n';
  for (const auto& c : model.components) {
    out << "component " << c.index + 1 << '\n';
    out << "name " << c.name << '\n';
    out << "degree " << c.basis.degree() << '\n';
    write_vec("knots", c.basis.knots(), c.basis.knots().size());
    write_vec("means", c.column_means, static_cast<std::size_t>(c.column_means.size()));
    write_vec("coefficients", c.coefficients, static_cast<std::size_t>(c.coefficients.size()));
  }
  out << "end\n";
}

namespace detail {

class ModelReader {
 public:
  explicit ModelReader(std::istream& in) : in_(in) {}

  // Next line split into key and remainder.
  std::pair<std::string, std::string> line(const std::string& expected_key) {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of input, expected '" + expected_key + "'");
    ++line_no_;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    const auto space = text.find(' ');
    std::string key = text.substr(0, space);
    std::string rest = space == std::string::npos ? std::string() : text.substr(space + 1);
    if (key != expected_key) fail("expected '" + expected_key + "', found '" + key + "'");
    return {key, rest};
  }

  double real(const std::string& key) {
    const auto [k, rest] = line(key);
    double v = 0.0;
    if (!parse_double(rest, v)) fail("bad number '" + rest + "'");
    return v;
  }

  long long integer(const std::string& key) {
    const auto [k, rest] = line(key);
    long long v = 0;
    const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (res.ec != std::errc() || res.ptr != rest.data() + rest.size()) {
      fail("bad integer '" + rest + "'");
    }
    return v;
  }

  std::vector<double> reals(const std::string& key) {
    const auto [k, rest] = line(key);
    std::istringstream ss(rest);
    std::size_t count = 0;
    if (!(ss >> count)) fail("missing element count");
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::string tok;
      if (!(ss >> tok) || !parse_double(tok, v[i])) fail("bad or missing element " + std::to_string(i + 1));
    }
    std::string extra;
    if (ss >> extra) fail("trailing data '" + extra + "'");
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::ParseError, "model line " + std::to_string(line_no_) + ": " + msg);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

inline AdditiveModel read_model(std::istream& in) {
  detail::ModelReader r(in);
  const auto [magic, version] = r.line("inis-additive-model");
  if (version != "1") r.fail("unsupported model format version '" + version + "'");
  AdditiveModel m;
  m.intercept = r.real("intercept");
  m.lambda = r.real("lambda");
  const long long count = r.integer("components");
  if (count < 0) r.fail("negative component count");
  for (long long c = 0; c < count; ++c) {
    AdditiveComponent comp;
    const long long index = r.integer("component");
    if (index < 1) r.fail("component index must be >= 1");
    comp.index = static_cast<std::size_t>(index - 1);
    comp.name = r.line("name").second;
    const long long degree = r.integer("degree");
    comp.basis = SplineBasis::from_knots(static_cast<int>(degree), r.reals("knots"));
    const auto means = r.reals("means");
    const auto coefs = r.reals("coefficients");
    const auto width = static_cast<std::size_t>(comp.basis.dim() - 1);
    if (means.size() != width || coefs.size() != width) {
      r.fail("component " + std::to_string(index) + " needs " + std::to_string(width) +
             " means and coefficients");
    }
    comp.column_means = Eigen::Map<const Vector>(means.data(), static_cast<Eigen::Index>(width));
    comp.coefficients = Eigen::Map<const Vector>(coefs.data(), static_cast<Eigen::Index>(width));
    m.components.push_back(std::move(comp));
  }
  r.line("end");
  return m;
}

}  // namespace inis
