#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldlab/galerkin.hpp"
#include "ldlab/laplace.hpp"
#include "ldlab/noise.hpp"

// Config documents: parsing, schema validation with path-qualified errors,
// construction of the (noise model, system, terminal cost) triple, and the
// canonical hash stamped into result files. The schema itself is documented
// in docs/config-schema.md; this module enforces schema_version 1.

namespace ldlab::config {

using json = nlohmann::json;

// Schema violation. The message is "<path>: <reason>" where <path> is the
// dotted location of the offending node ("noise.q[2]"), so a CLI can print
// what() verbatim and exit 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, std::string reason);
  const std::string& path() const { return path_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

struct Config {
  json doc;  // the parsed document, unmodified
  noise::NoiseModel model;
  galerkin::GalerkinSystem system;
  laplace::TerminalCost terminal;  // constant 0 when the section is absent
  Eigen::VectorXd x0;              // zeros when absent
  double horizon = 1.0;
};

json parse_file(const std::string& path);
json parse_text(const std::string& text);

// Validates and builds, throwing ConfigError at the first violation.
Config build(const json& doc);

struct GridRange {
  double lo = 0.0;
  double hi = 1.0;
  int count = 9;
};

// The optional "run" section: tuning knobs shared by the subcommands.
// Absent fields keep the defaults below; which fields a given subcommand
// actually reads is documented with the schema.
struct RunParams {
  int samples = 10000;
  std::vector<int> n_levels = {5, 10, 20};  // "n": integer or array
  double dt = -1.0;                         // negative: solver default
  int intervals = 32;
  int restarts = 8;
  int stages = 6;
  double mu0 = 1.0;
  Eigen::VectorXd target;                // rate subcommand; empty = unset
  std::vector<Eigen::VectorXd> targets;  // rate sweeps
  Eigen::VectorXd center;                // ldp ball; empty = unset
  double radius = 0.0;
  int grid_points = 21;
  std::vector<double> lambdas = {1.0, 10.0, 100.0, 1000.0};
  int paths = 300;
  GridRange t_grid{0.0, 1.0, 9};
  GridRange x_grid{-1.0, 1.0, 9};
};

// dim is the system dimension, used to check target/center lengths.
RunParams run_params(const json& doc, int dim);

struct Issue {
  std::string path;
  std::string message;
};

struct ValidationReport {
  bool valid = false;
  std::vector<Issue> issues;
  galerkin::StructuralReport structural;  // meaningful iff structural_ran
  bool structural_ran = false;
};

// Full-document check: schema pass (collecting one issue per section), then
// the structural hypotheses of the built system via check_structural and the
// noise construction invariants. Deterministic and algebraic throughout; no
// trajectories are integrated.
ValidationReport validate(const json& doc);

// Sorted-key, no-whitespace serialization: the input to config_hash, so two
// documents differing only in key order or formatting hash identically.
std::string canonical_dump(const json& doc);

// "fnv1a-" + 16 hex digits, FNV-1a 64 over canonical_dump.
std::string config_hash(const json& doc);

// Build stamp ("0.1.0+<git describe>"), embedded in every result file.
std::string version();

}  // namespace ldlab::config
