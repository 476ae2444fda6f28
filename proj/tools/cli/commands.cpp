#include "cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "varcert/calculus.hpp"
#include "varcert/certify.hpp"
#include "varcert/errors.hpp"
#include "varcert/funcspace.hpp"
#include "varcert/sdp.hpp"
#include "varcert/sip.hpp"
#include "varcert/solvers.hpp"

#ifndef VARCERT_VERSION
#define VARCERT_VERSION "0.0.0"
#endif

namespace varcert::cli {

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::Verified:
      return kExitVerified;
    case Verdict::Refuted:
      return kExitRefuted;
    case Verdict::Inconclusive:
      return kExitInconclusive;
  }
  return kExitInconclusive;
}

namespace {

struct Flags {
  std::string problem;
  std::string certificate;
  std::string out;
  std::string point;
  std::string direction;
  std::optional<double> kappa;
  std::optional<double> radius;
  std::optional<int> samples;
  std::optional<int> grid;
  std::uint64_t seed = kDefaultSeed;
  Tolerances tol;
};

std::string fmt(double v) {
  if (v == 0.0) v = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Vector parse_list(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError(what + ": cannot read \"" + item + "\" as a number");
    }
  }
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

Vector point_of(const Flags& f, const ProblemFile& p) {
  Vector x;
  if (!f.point.empty()) {
    x = parse_list(f.point, "--point");
  } else if (p.point) {
    x = *p.point;
  } else {
    throw UsageError("no point: pass --point or set \"point\" in " + p.source);
  }
  if (static_cast<std::size_t>(x.size()) != p.n) {
    throw UsageError("--point: expected " + std::to_string(p.n) + " entries");
  }
  return x;
}

std::optional<double> kappa_of(const Flags& f, const ProblemFile& p) {
  return f.kappa ? f.kappa : p.kappa;
}

ModulusOptions modulus_of(const Flags& f) {
  ModulusOptions m;
  if (f.radius) m.radius = *f.radius;
  if (f.samples) m.samples = *f.samples;
  m.seed = f.seed;
  return m;
}

GridOptions grid_of(const Flags& f) {
  GridOptions g;
  if (f.grid) g.density = *f.grid;
  return g;
}

void require_kind(const ProblemFile& p, ProblemKind k, const char* command) {
  if (p.kind != k) {
    throw UsageError(std::string(command) + ": needs a \"" + to_string(k) + "\" problem, " +
                     p.source + " is \"" + to_string(p.kind) + "\"");
  }
}

Json tolerances_json(const Tolerances& t) {
  return Json{{"feas", t.feas}, {"active", t.active}, {"stat", t.stat},
              {"cone", t.cone}, {"bound", t.bound}};
}

Tolerances tolerances_from(const Json& j) {
  Tolerances t;
  if (!j.is_object()) return t;
  auto get = [&j](const char* key, double& v) {
    if (j.contains(key)) v = number_from(j.at(key), std::string("tolerances.") + key);
  };
  get("feas", t.feas);
  get("active", t.active);
  get("stat", t.stat);
  get("cone", t.cone);
  get("bound", t.bound);
  return t;
}

Json header(const char* kind, const ProblemFile& p, const Flags& f, const Vector& x) {
  Json j;
  j["kind"] = kind;
  j["point"] = to_json(x);
  j["problem"] = Json{{"kind", to_string(p.kind)}, {"n", p.n}};
  j["seed"] = f.seed;
  j["tolerances"] = tolerances_json(f.tol);
  j["tool_version"] = VARCERT_VERSION;
  return j;
}

Json bound_json(double lhs, double rhs, double kappa, KappaSource source) {
  return Json{{"lhs", lhs}, {"rhs", rhs}, {"kappa", kappa}, {"kappa_source", to_string(source)}};
}

KappaSource kappa_source_from(const std::string& s) {
  if (s == "asserted") return KappaSource::Asserted;
  if (s == "estimated") return KappaSource::Estimated;
  if (s == "none") return KappaSource::None;
  throw UsageError("bound.kappa_source: unknown value \"" + s + "\"");
}

void summary(std::ostream& err, const char* command, Verdict v, const std::string& detail,
             const std::string& extra) {
  err << command << ": " << to_string(v);
  if (!detail.empty()) err << " (" << detail << ")";
  if (!extra.empty()) err << "  " << extra;
  err << "\n";
}

Json refuted_without_multiplier(Json j, const std::string& what) {
  j["status"] = to_string(Verdict::Refuted);
  j["detail"] = "no multiplier: " + what;
  return j;
}

// Commands. Each fills `cert` and returns its verdict.

Verdict cmd_kkt(const Flags& f, const ProblemFile& pf, Json& cert, std::ostream& err) {
  require_kind(pf, ProblemKind::Nlp, "kkt");
  const ConstrainedProblem p = pf.nlp();
  const Vector x = point_of(f, pf);
  cert = header("kkt", pf, f, x);
  DualOptions o;
  o.kappa = kappa_of(f, pf);
  o.estimate = modulus_of(f);
  o.tol = f.tol;
  Certificate c;
  try {
    c = dual_certificate(p, x, o);
  } catch (const NoMultiplier& e) {
    cert = refuted_without_multiplier(cert, e.what());
    summary(err, "kkt", Verdict::Refuted, "no multiplier", "");
    return Verdict::Refuted;
  }
  cert["status"] = to_string(c.status);
  cert["detail"] = c.detail;
  cert["multipliers"] = to_json(c.lambda);
  cert["residual"] = c.residual;
  cert["cone_residual"] = c.cone_residual;
  cert["bound"] = bound_json(c.bound_lhs, c.bound_rhs, c.kappa, c.kappa_source);
  summary(err, "kkt", c.status, c.detail,
          "residual " + fmt(c.residual) + "  |lambda| " + fmt(c.bound_lhs) + " <= " +
              fmt(c.bound_rhs) + " (kappa " + fmt(c.kappa) + ", " +
              to_string(c.kappa_source) + ")");
  return c.status;
}

Verdict cmd_primal(const Flags& f, const ProblemFile& pf, Json& cert, std::ostream& err) {
  require_kind(pf, ProblemKind::Nlp, "primal");
  const ConstrainedProblem p = pf.nlp();
  const Vector x = point_of(f, pf);
  cert = header("primal", pf, f, x);
  const Certificate c = primal_check(p, x, f.tol);
  cert["status"] = to_string(c.status);
  cert["detail"] = c.detail;
  cert["value"] = c.value;
  if (c.witness) cert["witness"] = to_json(*c.witness);
  summary(err, "primal", c.status, c.detail, "min descent " + fmt(c.value));
  return c.status;
}

Json atoms_json(const std::vector<Atom>& atoms, const char* index_key, const char* weight_key) {
  Json a = Json::array();
  for (const auto& atom : atoms) {
    a.push_back(Json{{index_key, to_json(atom.index)}, {weight_key, atom.weight}});
  }
  return a;
}

Verdict cmd_sip(const Flags& f, const ProblemFile& pf, Json& cert, std::ostream& err) {
  require_kind(pf, ProblemKind::Sip, "sip");
  const SIProblem p = pf.sip();
  const Vector x = point_of(f, pf);
  cert = header("sip", pf, f, x);
  SipOptions o;
  o.kappa = kappa_of(f, pf);
  o.grid = grid_of(f);
  o.modulus = modulus_of(f);
  o.tol = f.tol;
  SipCertificate c;
  try {
    c = p.has_equalities() ? certify_with_equalities(p, x, o) : certify(p, x, o);
  } catch (const NoMultiplier& e) {
    cert = refuted_without_multiplier(cert, e.what());
    summary(err, "sip", Verdict::Refuted, "no multiplier", "");
    return Verdict::Refuted;
  }
  cert["status"] = to_string(c.status);
  cert["detail"] = c.detail;
  cert["atoms"] = atoms_json(c.multiplier.atoms, "s", "lambda");
  if (p.has_equalities()) {
    cert["equality_atoms"] = atoms_json(c.multiplier.equality_atoms, "t", "mu");
  }
  cert["residual"] = c.residual;
  cert["complementarity"] = c.complementarity;
  cert["grid_density"] = c.grid_density;
  cert["bound"] = bound_json(c.bound_lhs, c.bound_rhs, c.kappa, c.kappa_source);
  summary(err, "sip", c.status, c.detail,
          std::to_string(c.multiplier.atoms.size()) + " atoms  residual " + fmt(c.residual) +
              "  sum " + fmt(c.bound_lhs) + " <= " + fmt(c.bound_rhs) + " (kappa " +
              fmt(c.kappa) + ", " + to_string(c.kappa_source) + ")");
  return c.status;
}

Verdict cmd_sdp(const Flags& f, const ProblemFile& pf, Json& cert, std::ostream& err) {
  require_kind(pf, ProblemKind::Sdp, "sdp");
  const SDProblem p = pf.sdp();
  const Vector x = point_of(f, pf);
  cert = header("sdp", pf, f, x);
  SdpOptions o;
  o.kappa = kappa_of(f, pf);
  o.modulus = modulus_of(f);
  o.tol = f.tol;
  o.seed = f.seed;
  SdpCertificate c;
  try {
    c = certify(p, x, o);
  } catch (const NoMultiplier& e) {
    cert = refuted_without_multiplier(cert, e.what());
    summary(err, "sdp", Verdict::Refuted, "no multiplier", "");
    return Verdict::Refuted;
  }
  cert["status"] = to_string(c.status);
  cert["detail"] = c.detail;
  cert["atoms"] = atoms_json(c.atoms, "s", "lambda");
  if (c.mu.size() > 0) cert["mu"] = to_json(c.mu);
  cert["residual"] = c.residual;
  cert["complementarity"] = c.complementarity;
  cert["kernel_dim"] = c.kernel_dim;
  cert["tol_ker"] = c.tol_ker;
  cert["bound"] = bound_json(c.bound_lhs, c.bound_rhs, c.kappa, c.kappa_source);
  summary(err, "sdp", c.status, c.detail,
          std::to_string(c.atoms.size()) + " atoms  residual " + fmt(c.residual) + "  sum " +
              fmt(c.bound_lhs) + " <= " + fmt(c.bound_rhs) + " (kappa " + fmt(c.kappa) + ", " +
              to_string(c.kappa_source) + ")");
  return c.status;
}

// dθ(ȳ)(∇f(x̄)u) for θ = dist(·; Θ): the chain rule against the sampled quotient.
Verdict cmd_subderiv(const Flags& f, const ProblemFile& pf, Json& cert, std::ostream& err) {
  require_kind(pf, ProblemKind::Nlp, "subderiv");
  const Vector x = point_of(f, pf);
  cert = header("subderiv", pf, f, x);
  const auto names = numbered_names("x", pf.n);
  const SmoothMap map = SmoothMap::parse(pf.f, names);
  const Composite c(FnObject::distance(pf.theta_set), map, x);
  const FnObject objective = FnObject::smooth(parse(pf.objective, names));
  SampleSchedule schedule;
  schedule.seed = f.seed;

  std::vector<Vector> dirs;
  if (!f.direction.empty()) {
    dirs.push_back(parse_list(f.direction, "--direction"));
    if (static_cast<std::size_t>(dirs[0].size()) != pf.n) {
      throw UsageError("--direction: expected " + std::to_string(pf.n) + " entries");
    }
  } else {
    for (std::size_t i = 0; i < pf.n; ++i) {
      for (double s : {1.0, -1.0}) {
        Vector u = Vector::Zero(static_cast<Eigen::Index>(pf.n));
        u[static_cast<Eigen::Index>(i)] = s;
        dirs.push_back(u);
      }
    }
  }
  Verdict verdict = Verdict::Verified;
  double worst = 0.0;
  Json rows = Json::array();
  for (const auto& u : dirs) {
    const double obj = subderivative(objective, x, u, schedule).value;
    const ChainSubderivative chain = chain_subderivative(c, u, ChainRoute::MetricSubregularity,
                                                         schedule);
    const SubderivativeValue sampled = subderivative_sampled(c.as_function(), x, u, schedule);
    const double gap = std::abs(chain.value.value - sampled.value);
    worst = std::max(worst, gap);
    Verdict v = Verdict::Verified;
    if (sampled.inconclusive) {
      v = Verdict::Inconclusive;
    } else if (!(gap <= 1e-4)) {
      v = Verdict::Refuted;
    }
    if (v == Verdict::Refuted || (v == Verdict::Inconclusive && verdict == Verdict::Verified)) {
      verdict = v;
    }
    rows.push_back(Json{{"u", to_json(u)},
                        {"objective", obj},
                        {"penalty_chain", chain.value.value},
                        {"penalty_sampled", sampled.value},
                        {"spread", sampled.spread},
                        {"status", to_string(v)}});
  }
  cert["directions"] = rows;
  cert["status"] = to_string(verdict);
  cert["max_gap"] = worst;
  summary(err, "subderiv", verdict, "",
          std::to_string(dirs.size()) + " directions  max |chain - sampled| " + fmt(worst));
  return verdict;
}

Json cq_json(const CQReport& r) {
  Json j{{"verdict", to_string(r.verdict)}, {"detail", r.detail}};
  if (r.witness) j["witness"] = to_json(*r.witness);
  if (r.kappa) j["kappa"] = *r.kappa;
  if (!r.level_kappas.empty()) {
    Json levels = Json::array();
    for (double k : r.level_kappas) levels.push_back(k);
    j["level_kappas"] = levels;
  }
  j["divergent"] = r.divergent;
  return j;
}

Verdict cmd_cq(const Flags& f, const ProblemFile& pf, Json& cert, std::ostream& err) {
  const Vector x = point_of(f, pf);
  cert = header("cq", pf, f, x);
  Json conditions;
  Verdict verdict = Verdict::Inconclusive;
  std::string line;
  if (pf.kind == ProblemKind::Nlp) {
    const Composite c =
        Composite::set(SmoothMap::parse(pf.f, numbered_names("x", pf.n)), pf.theta_set, x);
    const CQReport aqc = abadie_check(c);
    const CQReport ms = msqc_estimate(c, modulus_of(f));
    const CQReport rob = robinson_check(c);
    conditions["abadie"] = cq_json(aqc);
    conditions["msqc"] = cq_json(ms);
    conditions["robinson"] = cq_json(rob);
    // MSQC implies AQC, so a refuted AQC refutes MSQC as well.
    verdict = ms.verdict;
    if (verdict != Verdict::Verified && aqc.verdict == Verdict::Refuted) verdict = Verdict::Refuted;
    line = std::string("abadie ") + to_string(aqc.verdict) + "  msqc " + to_string(ms.verdict) +
           (ms.kappa ? " (kappa " + fmt(*ms.kappa) + ")" : "") + "  robinson " +
           to_string(rob.verdict);
  } else if (pf.kind == ProblemKind::Sip) {
    const SIProblem p = pf.sip();
    const CQReport em = emfcq_check(p, x, grid_of(f), f.tol.active);
    const CQReport ms = sip_kappa_estimate(p, x, modulus_of(f), grid_of(f));
    conditions["emfcq"] = cq_json(em);
    conditions["msqc"] = cq_json(ms);
    verdict = ms.verdict;
    line = std::string("emfcq ") + to_string(em.verdict) + "  msqc " + to_string(ms.verdict) +
           (ms.kappa ? " (kappa " + fmt(*ms.kappa) + ")" : "");
  } else {
    throw UsageError("cq: needs an \"nlp\" or \"sip\" problem");
  }
  cert["conditions"] = conditions;
  cert["status"] = to_string(verdict);
  summary(err, "cq", verdict, "", line);
  return verdict;
}

Verdict verdict_from(const Json& j) {
  const std::string s = j.is_string() ? j.get<std::string>() : "";
  if (s == "VERIFIED") return Verdict::Verified;
  if (s == "REFUTED") return Verdict::Refuted;
  if (s == "INCONCLUSIVE") return Verdict::Inconclusive;
  throw UsageError("certificate: \"status\" must be VERIFIED, REFUTED or INCONCLUSIVE");
}

std::vector<Atom> atoms_from(const Json& j, const char* index_key, const char* weight_key,
                             std::size_t dim, const std::string& what) {
  std::vector<Atom> atoms;
  if (!j.is_array()) throw UsageError(what + ": expected an array");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string w = what + "[" + std::to_string(i) + "]";
    if (!j[i].is_object() || !j[i].contains(index_key) || !j[i].contains(weight_key)) {
      throw UsageError(w + ": expected {\"" + index_key + "\", \"" + weight_key + "\"}");
    }
    Atom a{vector_from(j[i].at(index_key), w + "." + index_key),
           number_from(j[i].at(weight_key), w + "." + weight_key)};
    if (static_cast<std::size_t>(a.index.size()) != dim) {
      throw DimensionMismatch(w + ": index has dimension " + std::to_string(a.index.size()) +
                              ", expected " + std::to_string(dim));
    }
    atoms.push_back(std::move(a));
  }
  return atoms;
}

const Json& field(const Json& j, const char* key) {
  if (!j.contains(key)) throw UsageError(std::string("certificate: missing \"") + key + "\"");
  return j.at(key);
}

struct Recomputed {
  Verdict status = Verdict::Inconclusive;
  std::string detail;
};

// λ ∈ N_Θ(ȳ) iff the projection of λ onto T_Θ(ȳ) = N_Θ(ȳ)° vanishes (Moreau).
double normal_cone_gap(const Polyhedron& theta, const Vector& y, const Vector& lambda,
                       const Tolerances& tol) {
  const PolyhedralCone t = tangent_cone(theta, y, tol.active, tol.feas);
  DykstraOptions d;
  d.tol_move = 1e-14;
  d.max_iter = 100000;
  const DykstraResult r = dykstra_project(lambda, t.ineq(), Vector::Zero(t.ineq().rows()),
                                          t.eq(), Vector::Zero(t.eq().rows()), d);
  return r.point.norm();
}

Recomputed recheck_kkt(const Json& cert, const ProblemFile& pf, const Vector& x,
                       const Tolerances& tol, Json& out) {
  const ConstrainedProblem p = pf.nlp();
  const Vector lambda = vector_from(field(cert, "multipliers"), "multipliers");
  if (static_cast<std::size_t>(lambda.size()) != p.constraint_dim()) {
    throw DimensionMismatch("multipliers: expected " + std::to_string(p.constraint_dim()) +
                            " entries");
  }
  const Json& b = field(cert, "bound");
  const double kappa = number_from(field(b, "kappa"), "bound.kappa");
  if (!p.feasible(x, tol.feas)) throw InfeasiblePoint("recheck: point violates the constraints");
  const Vector g = grad(parse(pf.objective, numbered_names("x", pf.n)), x).value;
  const Matrix j = p.constraint().jacobian(x);
  const double residual = (g + j.transpose() * lambda).norm();
  const double cone = normal_cone_gap(p.theta(), p.constraint().eval(x), lambda, tol);
  const double lhs = lambda.norm();
  const double rhs = kappa * g.norm();
  out["residual"] = residual;
  out["cone_residual"] = cone;
  out["bound"] = Json{{"lhs", lhs}, {"rhs", rhs}, {"kappa", kappa}};
  if (residual > tol.stat) return {Verdict::Refuted, "stationarity residual above tolerance"};
  if (cone > tol.cone * (1.0 + lhs)) return {Verdict::Refuted, "multiplier outside N_Theta"};
  if (lhs > rhs * (1.0 + tol.bound) + 1e-12) return {Verdict::Refuted, kBoundExceeded};
  return {Verdict::Verified, ""};
}

Recomputed recheck_sip_cert(const Json& cert, const ProblemFile& pf, const Vector& x,
                            const Tolerances& tol, Json& out) {
  const SIProblem p = pf.sip();
  SipCertificate c;
  c.x = x;
  c.tol = tol;
  c.multiplier.atoms = atoms_from(field(cert, "atoms"), "s", "lambda", p.index_set().dim(), "atoms");
  if (cert.contains("equality_atoms")) {
    c.multiplier.equality_atoms = atoms_from(cert.at("equality_atoms"), "t", "mu",
                                             p.equality_index_set().dim(), "equality_atoms");
  }
  const Json& b = field(cert, "bound");
  c.kappa = number_from(field(b, "kappa"), "bound.kappa");
  c.kappa_source = kappa_source_from(field(b, "kappa_source").get<std::string>());
  const SipCertificate r = recheck_sip(p, c);
  out["residual"] = r.residual;
  out["complementarity"] = r.complementarity;
  out["bound"] = Json{{"lhs", r.bound_lhs}, {"rhs", r.bound_rhs}, {"kappa", r.kappa}};
  return {r.status, r.detail};
}

Recomputed recheck_sdp_cert(const Json& cert, const ProblemFile& pf, const Vector& x,
                            const Tolerances& tol, Json& out) {
  const SDProblem p = pf.sdp();
  SdpCertificate c;
  c.x = x;
  c.tol = tol;
  c.atoms = atoms_from(field(cert, "atoms"), "s", "lambda", p.phi().size(), "atoms");
  if (cert.contains("mu")) {
    c.mu = matrix_from(cert.at("mu"), static_cast<Eigen::Index>(p.psi().size()), "mu");
  }
  const Json& b = field(cert, "bound");
  c.kappa = number_from(field(b, "kappa"), "bound.kappa");
  c.kappa_source = kappa_source_from(field(b, "kappa_source").get<std::string>());
  const SdpCertificate r = recheck_sdp(p, c);
  out["residual"] = r.residual;
  out["complementarity"] = r.complementarity;
  out["bound"] = Json{{"lhs", r.bound_lhs}, {"rhs", r.bound_rhs}, {"kappa", r.kappa}};
  return {r.status, r.detail};
}

Recomputed recheck_primal(const Json& cert, const ProblemFile& pf, const Vector& x,
                          const Tolerances& tol, Json& out) {
  const ConstrainedProblem p = pf.nlp();
  if (!cert.contains("witness")) {
    // No dual evidence to re-evaluate; the descent LP is solved again.
    const Certificate c = primal_check(p, x, tol);
    out["value"] = c.value;
    return {c.status, "descent LP re-solved"};
  }
  const Vector u = vector_from(cert.at("witness"), "witness");
  if (static_cast<std::size_t>(u.size()) != pf.n) {
    throw DimensionMismatch("witness: expected " + std::to_string(pf.n) + " entries");
  }
  if (!p.feasible(x, tol.feas)) throw InfeasiblePoint("recheck: point violates the constraints");
  const Vector g = grad(parse(pf.objective, numbered_names("x", pf.n)), x).value;
  const PolyhedralCone t = tangent_cone(p.theta(), p.constraint().eval(x), tol.active, tol.feas);
  const Vector ju = p.constraint().jacobian(x) * u;
  double gap = 0.0;
  if (t.ineq().rows() > 0) gap = std::max(gap, (t.ineq() * ju).maxCoeff());
  if (t.eq().rows() > 0) gap = std::max(gap, (t.eq() * ju).cwiseAbs().maxCoeff());
  out["value"] = g.dot(u);
  out["linearized_violation"] = gap;
  if (gap > tol.feas) return {Verdict::Inconclusive, "witness is not a linearized tangent"};
  if (g.dot(u) < -tol.stat) return {Verdict::Refuted, "descent direction confirmed"};
  return {Verdict::Inconclusive, "witness does not descend"};
}

}  // namespace

int recheck(const Json& cert, const ProblemFile& pf, std::ostream& err, Json* report) {
  if (!cert.is_object()) throw UsageError("certificate: expected an object");
  const std::string kind = field(cert, "kind").is_string() ? cert.at("kind").get<std::string>() : "";
  const Json& prob = field(cert, "problem");
  const std::string pkind = field(prob, "kind").is_string() ? prob.at("kind").get<std::string>() : "";
  if (pkind != to_string(pf.kind)) {
    throw DimensionMismatch("certificate is for a \"" + pkind + "\" problem, " + pf.source +
                            " is \"" + to_string(pf.kind) + "\"");
  }
  const Json& pn = field(prob, "n");
  if (!pn.is_number_integer() || pn.get<std::size_t>() != pf.n) {
    throw DimensionMismatch("certificate has n = " + pn.dump() + ", " + pf.source + " has n = " +
                            std::to_string(pf.n));
  }
  const Vector x = vector_from(field(cert, "point"), "point");
  if (static_cast<std::size_t>(x.size()) != pf.n) {
    throw DimensionMismatch("point: expected " + std::to_string(pf.n) + " entries");
  }
  const Tolerances tol = tolerances_from(cert.value("tolerances", Json::object()));
  const Verdict recorded = verdict_from(field(cert, "status"));
  Json out;
  out["kind"] = "recheck";
  out["certificate_kind"] = kind;
  Recomputed r;
  if (kind == "kkt" && pf.kind == ProblemKind::Nlp) {
    r = recheck_kkt(cert, pf, x, tol, out);
  } else if (kind == "primal" && pf.kind == ProblemKind::Nlp) {
    r = recheck_primal(cert, pf, x, tol, out);
  } else if (kind == "sip" && pf.kind == ProblemKind::Sip) {
    r = recheck_sip_cert(cert, pf, x, tol, out);
  } else if (kind == "sdp" && pf.kind == ProblemKind::Sdp) {
    r = recheck_sdp_cert(cert, pf, x, tol, out);
  } else {
    throw UsageError("recheck: cannot re-evaluate a \"" + kind + "\" certificate against a \"" +
                     to_string(pf.kind) + "\" problem");
  }
  out["status"] = to_string(r.status);
  out["recorded_status"] = to_string(recorded);
  out["detail"] = r.detail;
  out["matches"] = r.status == recorded;
  if (r.status != recorded) {
    err << "recheck: recorded " << to_string(recorded) << " but recomputed "
        << to_string(r.status) << (r.detail.empty() ? "" : " (" + r.detail + ")") << "\n";
  } else {
    summary(err, "recheck", r.status, r.detail, "matches the recorded status");
  }
  if (report) *report = out;
  return exit_code(r.status);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Certify optimality conditions for constrained, semi-infinite and "
               "semidefinite problems.",
               "varcert");
  app.require_subcommand(1);
  app.set_version_flag("--version", VARCERT_VERSION);
  Flags f;
  auto common = [&f](CLI::App* sub, bool point_flags) {
    sub->add_option("-p,--problem", f.problem, "Problem file (JSON)")->required();
    sub->add_option("--out", f.out, "Write the JSON result here instead of stdout");
    sub->add_option("--seed", f.seed, "Seed for sampling-based checks");
    sub->add_option("--tol-feas", f.tol.feas, "Feasibility tolerance");
    sub->add_option("--tol-active", f.tol.active, "Activity tolerance");
    sub->add_option("--tol-stat", f.tol.stat, "Stationarity tolerance");
    sub->add_option("--tol-cone", f.tol.cone, "Cone membership tolerance");
    sub->add_option("--tol-bound", f.tol.bound, "Relative slack in the multiplier bound");
    if (!point_flags) return;
    sub->add_option("--point", f.point, "Candidate point, comma separated");
    sub->add_option("--kappa", f.kappa, "Asserted modulus (estimated when absent)");
    sub->add_option("--radius", f.radius, "Sampling radius for modulus estimates");
    sub->add_option("--samples", f.samples, "Samples per radius level");
    sub->add_option("--grid", f.grid, "Index grid points per axis (sip)");
  };
  auto* kkt = app.add_subcommand("kkt", "Dual certificate with bounded multipliers");
  auto* primal = app.add_subcommand("primal", "Primal stationarity over the linearized cone");
  auto* sip = app.add_subcommand("sip", "Atomic multiplier for a semi-infinite problem");
  auto* sdp = app.add_subcommand("sdp", "Eigenvector-atom multiplier for a semidefinite problem");
  auto* subd = app.add_subcommand("subderiv", "Chain-rule subderivative of dist(f(x); Theta)");
  auto* cq = app.add_subcommand("cq", "Qualification conditions at a point");
  auto* re = app.add_subcommand("recheck", "Re-evaluate a certificate against its problem");
  for (auto* s : {kkt, primal, sip, sdp, subd, cq}) common(s, true);
  subd->add_option("--direction", f.direction, "Direction u, comma separated");
  common(re, false);
  re->add_option("-c,--certificate", f.certificate, "Certificate file (JSON)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitVerified;
  } catch (const CLI::CallForVersion&) {
    out << VARCERT_VERSION << "\n";
    return kExitVerified;
  } catch (const CLI::ParseError& e) {
    err << "varcert: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const ProblemFile pf = load_problem(f.problem);
    Json result;
    int code = kExitInconclusive;
    if (re->parsed()) {
      code = recheck(load_file(f.certificate), pf, err, &result);
    } else {
      Verdict v = Verdict::Inconclusive;
      if (kkt->parsed()) v = cmd_kkt(f, pf, result, err);
      if (primal->parsed()) v = cmd_primal(f, pf, result, err);
      if (sip->parsed()) v = cmd_sip(f, pf, result, err);
      if (sdp->parsed()) v = cmd_sdp(f, pf, result, err);
      if (subd->parsed()) v = cmd_subderiv(f, pf, result, err);
      if (cq->parsed()) v = cmd_cq(f, pf, result, err);
      code = exit_code(v);
    }
    const std::string text = dump(result);
    if (f.out.empty()) {
      out << text;
    } else {
      std::ofstream file(f.out);
      if (!file) throw UsageError(f.out + ": cannot write");
      file << text;
    }
    return code;
  } catch (const UsageError& e) {
    err << "varcert: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "varcert: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InfeasiblePoint& e) {
    err << "varcert: REFUTED: " << e.what() << "\n";
    return kExitRefuted;
  } catch (const NotMember& e) {
    err << "varcert: REFUTED: " << e.what() << "\n";
    return kExitRefuted;
  } catch (const NumericalError& e) {
    err << "varcert: numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "varcert: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Json::exception& e) {
    err << "varcert: malformed certificate: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace varcert::cli
