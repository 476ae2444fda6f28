#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "varcert/types.hpp"

namespace varcert::cli {

using Json = nlohmann::json;

/// Malformed input: bad JSON, schema violations, bad flags. Maps to exit 3.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sorted keys, two-space indent, floats as %.12e, non-finite numbers as null.
std::string dump(const Json& j);

/// Parses text; errors carry "<source>:<line>:<column>".
Json parse_text(const std::string& text, const std::string& source);
Json load_file(const std::string& path);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);

/// `what` names the field in error messages.
Vector vector_from(const Json& j, const std::string& what);
/// A list of equal-length rows; an empty list gives a 0 × cols matrix.
Matrix matrix_from(const Json& j, Eigen::Index cols, const std::string& what);
double number_from(const Json& j, const std::string& what);

}  // namespace varcert::cli
