#pragma once

#include <map>
#include <string>
#include <vector>

#include "seqpar/config.hpp"
#include "seqpar/metrics.hpp"
#include "seqpar/simhost.hpp"

namespace seqpar {

struct RunSummary {
  RunConfig config;  // as resolved
  BlockPlan plan;
  DivergenceReport divergence;
  CostReport cost;
  BalanceReport balance;
  std::vector<std::string> violations;  // trace validation + structural audits
  double wall_seconds = 0.0;

  bool ok() const { return violations.empty(); }
};

std::string serialize_summary(const RunSummary& s);

// Oracle + simulated run; writes the configured artifacts (summary JSON,
// trace event lines, heatmap CSV).
RunSummary run(const RunConfig& config);

// Dense-only forward; returns the oracle hidden states.
Matrix run_oracle(const RunConfig& config);

// Cross-product sweep over dotted config paths (e.g. "parallel.hosts") with
// JSON-encoded values per axis. One CSV row per cell in deterministic order;
// a failing cell records its error and the sweep continues.
struct SweepAxis {
  std::string path;
  std::vector<std::string> values;  // JSON literals
};

struct SweepRow {
  std::map<std::string, std::string> cell;  // axis path -> value
  RunSummary summary;
  std::string error;  // empty on success
};

std::vector<SweepRow> sweep(const RunConfig& base, const std::vector<SweepAxis>& axes);

std::string sweep_table_csv(const std::vector<SweepAxis>& axes,
                            const std::vector<SweepRow>& rows);

}  // namespace seqpar
