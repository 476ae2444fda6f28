#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cli/json_io.hpp"
#include "varcert/certify.hpp"
#include "varcert/geometry.hpp"
#include "varcert/sdp.hpp"
#include "varcert/sip.hpp"

namespace varcert::cli {

enum class ProblemKind { Nlp, Sip, Sdp };

const char* to_string(ProblemKind k);

/**
 * A problem document:
 *
 *   {"kind": "nlp" | "sip" | "sdp", "n": 2, "objective": "x1 + x2",
 *    "constraints": {...}, "kappa": 1.0, "point": [0, 0]}
 *
 * constraints for nlp: {"f": ["x1", ...], "Theta": {"A_ineq", "b_ineq",
 * "A_eq", "b_eq"}}; sip: {"theta", "S": [[lo, hi], ...], "psi", "T"};
 * sdp: {"Phi": [[...]], "Psi": [[...]]} with entries as expression strings or
 * numbers, lower triangle empty ("" or null) or equal to the upper one.
 */
struct ProblemFile {
  std::string source;
  ProblemKind kind = ProblemKind::Nlp;
  std::size_t n = 0;
  std::string objective;
  std::optional<double> kappa;
  std::optional<Vector> point;

  std::vector<std::string> f;
  Polyhedron theta_set;

  std::string theta;
  IndexBox s;
  std::string psi;
  IndexBox t;

  std::size_t m = 0;
  std::vector<std::string> phi_upper;
  std::size_t q = 0;
  std::vector<std::string> psi_upper;

  ConstrainedProblem nlp() const;
  SIProblem sip() const;
  SDProblem sdp() const;
};

/// Validates the schema and every dimension, and parses every expression
/// once. Throws UsageError naming the source and field.
ProblemFile parse_problem(const Json& j, const std::string& source);
ProblemFile load_problem(const std::string& path);

}  // namespace varcert::cli
