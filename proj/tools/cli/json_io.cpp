#include "cli/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace varcert::cli {

namespace {

void write(const Json& j, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
  const std::string close(static_cast<std::size_t>(indent), ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(it.key()).dump() + ": ";
        write(it.value(), indent + 2, out);
      }
      out += "\n" + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      bool scalars = true;
      for (const auto& e : j) scalars = scalars && !e.is_structured();
      if (scalars) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i > 0) out += ", ";
          write(j[i], indent, out);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        write(j[i], indent + 2, out);
      }
      out += "\n" + close + "]";
      return;
    }
    case Json::value_t::number_float: {
      double v = j.get<double>();
      if (v == 0.0) v = 0.0;
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12e", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump(const Json& j) {
  std::string out;
  write(j, 0, out);
  out += "\n";
  return out;
}

Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw UsageError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                     ": invalid JSON");
  }
}

Json load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

Json to_json(const Vector& v) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Json to_json(const Matrix& m) {
  Json j = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(to_json(Vector(m.row(i).transpose())));
  return j;
}

double number_from(const Json& j, const std::string& what) {
  if (!j.is_number()) throw UsageError(what + ": expected a number");
  return j.get<double>();
}

Vector vector_from(const Json& j, const std::string& what) {
  if (!j.is_array()) throw UsageError(what + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = number_from(j[i], what + "[" + std::to_string(i) + "]");
  }
  return v;
}

Matrix matrix_from(const Json& j, Eigen::Index cols, const std::string& what) {
  if (!j.is_array()) throw UsageError(what + ": expected an array of rows");
  Matrix m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = vector_from(j[i], what + "[" + std::to_string(i) + "]");
    if (row.size() != cols) {
      throw UsageError(what + "[" + std::to_string(i) + "]: expected " +
                       std::to_string(cols) + " entries");
    }
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

}  // namespace varcert::cli
