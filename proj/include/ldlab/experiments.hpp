#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

// The ten named desk-scale experiments behind the acceptance gate. Each is a
// pure function of (seed, threads) with every other constant pinned in the
// runner, so the acceptance binary and the repro subcommand execute the
// identical computation.

namespace ldlab::experiments {

struct Outcome {
  std::string id;        // stable name, e.g. "linear-oracle"
  int criterion = 0;     // 1-based position in the acceptance list
  bool pass = false;
  std::string details;   // one line of measured numbers
  nlohmann::json artifacts;  // tables for result files and plot data
};

// Ids in criterion order (index i holds criterion i+1).
const std::vector<std::string>& experiment_ids();

// seed 0 is the pinned default used by the acceptance gate.
Outcome run_criterion(int criterion, std::uint64_t seed = 0, int threads = 0);
Outcome run_experiment(const std::string& id, std::uint64_t seed = 0,
                       int threads = 0);

}  // namespace ldlab::experiments
