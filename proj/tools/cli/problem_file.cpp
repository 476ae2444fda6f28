#include "cli/problem_file.hpp"

#include <set>

#include "varcert/errors.hpp"

namespace varcert::cli {

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Nlp:
      return "nlp";
    case ProblemKind::Sip:
      return "sip";
    case ProblemKind::Sdp:
      return "sdp";
  }
  return "?";
}

namespace {

void only_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw UsageError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw UsageError(where + ": unknown key \"" + it.key() + "\"");
  }
}

const Json& required(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw UsageError(where + ": missing \"" + key + "\"");
  return j.at(key);
}

std::string string_from(const Json& j, const std::string& what) {
  if (!j.is_string()) throw UsageError(what + ": expected a string");
  return j.get<std::string>();
}

std::string entry_text(const Json& j, const std::string& what) {
  if (j.is_number()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", j.get<double>());
    return buf;
  }
  return string_from(j, what);
}

IndexBox box_from(const Json& j, const std::string& what) {
  if (!j.is_array()) throw UsageError(what + ": expected [[lo, hi], ...]");
  IndexBox b{Vector(static_cast<Eigen::Index>(j.size())),
             Vector(static_cast<Eigen::Index>(j.size()))};
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = what + "[" + std::to_string(i) + "]";
    const Vector r = vector_from(j[i], w);
    if (r.size() != 2 || !(r[0] <= r[1])) throw UsageError(w + ": expected [lo, hi] with lo ≤ hi");
    b.lower[static_cast<Eigen::Index>(i)] = r[0];
    b.upper[static_cast<Eigen::Index>(i)] = r[1];
  }
  return b;
}

// Upper triangle, row-major; the lower triangle is empty or repeats it.
std::vector<std::string> symmetric_from(const Json& j, const std::string& what,
                                        std::size_t& size) {
  if (!j.is_array() || j.empty()) throw UsageError(what + ": expected a square array");
  size = j.size();
  std::vector<std::string> upper;
  for (std::size_t r = 0; r < size; ++r) {
    const std::string wr = what + "[" + std::to_string(r) + "]";
    if (!j[r].is_array() || j[r].size() != size) {
      throw UsageError(wr + ": expected " + std::to_string(size) + " entries");
    }
    for (std::size_t c = r; c < size; ++c) {
      upper.push_back(entry_text(j[r][c], wr + "[" + std::to_string(c) + "]"));
    }
  }
  for (std::size_t r = 1; r < size; ++r) {
    for (std::size_t c = 0; c < r; ++c) {
      const Json& e = j[r][c];
      if (e.is_null() || (e.is_string() && e.get<std::string>().empty())) continue;
      if (entry_text(e, what) != entry_text(j[c][r], what)) {
        throw UsageError(what + "[" + std::to_string(r) + "][" + std::to_string(c) +
                         "]: matrix is not symmetric");
      }
    }
  }
  return upper;
}

Vector optional_vector(const Json& j, const char* key, const std::string& where,
                       Eigen::Index rows) {
  if (!j.contains(key)) return Vector(rows);
  return vector_from(j.at(key), where + "." + key);
}

}  // namespace

ProblemFile parse_problem(const Json& j, const std::string& source) {
  only_keys(j, {"kind", "n", "objective", "constraints", "kappa", "point", "description"},
            source);
  ProblemFile p;
  p.source = source;
  const std::string kind = string_from(required(j, "kind", source), source + ".kind");
  if (kind == "nlp") {
    p.kind = ProblemKind::Nlp;
  } else if (kind == "sip") {
    p.kind = ProblemKind::Sip;
  } else if (kind == "sdp") {
    p.kind = ProblemKind::Sdp;
  } else {
    throw UsageError(source + ".kind: expected \"nlp\", \"sip\" or \"sdp\"");
  }
  const Json& n = required(j, "n", source);
  if (!n.is_number_integer() || n.get<long long>() < 1) {
    throw UsageError(source + ".n: expected a positive integer");
  }
  p.n = n.get<std::size_t>();
  p.objective = string_from(required(j, "objective", source), source + ".objective");
  if (j.contains("kappa")) {
    p.kappa = number_from(j.at("kappa"), source + ".kappa");
    if (!(*p.kappa >= 0.0)) throw UsageError(source + ".kappa: must be ≥ 0");
  }
  if (j.contains("point")) {
    p.point = vector_from(j.at("point"), source + ".point");
    if (static_cast<std::size_t>(p.point->size()) != p.n) {
      throw UsageError(source + ".point: expected " + std::to_string(p.n) + " entries");
    }
  }

  const std::string where = source + ".constraints";
  const Json& c = required(j, "constraints", source);
  switch (p.kind) {
    case ProblemKind::Nlp: {
      only_keys(c, {"f", "Theta"}, where);
      const Json& f = required(c, "f", where);
      if (!f.is_array() || f.empty()) throw UsageError(where + ".f: expected a non-empty array");
      for (std::size_t i = 0; i < f.size(); ++i) {
        p.f.push_back(entry_text(f[i], where + ".f[" + std::to_string(i) + "]"));
      }
      const auto m = static_cast<Eigen::Index>(p.f.size());
      const std::string tw = where + ".Theta";
      Json theta = c.contains("Theta") ? c.at("Theta") : Json::object();
      only_keys(theta, {"A_ineq", "b_ineq", "A_eq", "b_eq"}, tw);
      const Matrix a = matrix_from(theta.value("A_ineq", Json::array()), m, tw + ".A_ineq");
      const Vector b = optional_vector(theta, "b_ineq", tw, 0);
      const Matrix e = matrix_from(theta.value("A_eq", Json::array()), m, tw + ".A_eq");
      const Vector d = optional_vector(theta, "b_eq", tw, 0);
      if (b.size() != a.rows()) throw UsageError(tw + ".b_ineq: one entry per row of A_ineq");
      if (d.size() != e.rows()) throw UsageError(tw + ".b_eq: one entry per row of A_eq");
      p.theta_set = Polyhedron(a, b, e, d);
      break;
    }
    case ProblemKind::Sip: {
      only_keys(c, {"theta", "S", "psi", "T"}, where);
      if (c.contains("theta")) {
        p.theta = string_from(c.at("theta"), where + ".theta");
        p.s = box_from(required(c, "S", where), where + ".S");
      }
      if (c.contains("psi")) {
        p.psi = string_from(c.at("psi"), where + ".psi");
        p.t = box_from(required(c, "T", where), where + ".T");
      }
      if (p.theta.empty() && p.psi.empty()) {
        throw UsageError(where + ": expected \"theta\" and/or \"psi\"");
      }
      break;
    }
    case ProblemKind::Sdp: {
      only_keys(c, {"Phi", "Psi"}, where);
      p.phi_upper = symmetric_from(required(c, "Phi", where), where + ".Phi", p.m);
      if (c.contains("Psi")) p.psi_upper = symmetric_from(c.at("Psi"), where + ".Psi", p.q);
      break;
    }
  }

  // Parse every expression now so errors surface before any computation.
  try {
    switch (p.kind) {
      case ProblemKind::Nlp:
        (void)p.nlp();
        break;
      case ProblemKind::Sip:
        (void)p.sip();
        break;
      case ProblemKind::Sdp:
        (void)p.sdp();
        break;
    }
  } catch (const InputError& e) {
    throw UsageError(source + ": " + e.what());
  }
  return p;
}

ProblemFile load_problem(const std::string& path) { return parse_problem(load_file(path), path); }

ConstrainedProblem ProblemFile::nlp() const {
  const auto names = numbered_names("x", n);
  return ConstrainedProblem(FnObject::smooth(parse(objective, names)), SmoothMap::parse(f, names),
                            theta_set);
}

SIProblem ProblemFile::sip() const { return SIProblem::parse(n, objective, theta, s, psi, t); }

SDProblem ProblemFile::sdp() const {
  return SDProblem::parse(n, objective, m, phi_upper, q, psi_upper);
}

}  // namespace varcert::cli
