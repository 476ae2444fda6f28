#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cli/json_io.hpp"
#include "cli/problem_file.hpp"
#include "varcert/types.hpp"

namespace varcert::cli {

enum ExitCode : int {
  kExitVerified = 0,
  kExitRefuted = 1,
  kExitInconclusive = 2,
  kExitUsage = 3,
  kExitNumerical = 4,
};

int exit_code(Verdict v);

/// Full command line without the program name, e.g. {"kkt", "-p", "a.json"}.
/// The certificate goes to --out or `out`, the summary to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Re-evaluates a certificate against its problem with expression evaluation
/// and linear algebra only. `report` receives the recomputed certificate.
int recheck(const Json& certificate, const ProblemFile& problem, std::ostream& err,
            Json* report = nullptr);

}  // namespace varcert::cli
