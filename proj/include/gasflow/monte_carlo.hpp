#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gasflow/misocp.hpp"
#include "gasflow/rng.hpp"

namespace gasflow {

struct McConfig {
  Injections q0;
  std::size_t n_samples = 1000;
  double sigma = 1.0;
  NodeId balancing = 0;
  std::uint64_t seed = 42;
  MisocpOptions solver;
  int jobs = 0;              // OpenMP threads; 0 = runtime default
  bool record_timing = true; // false writes runtime 0 for byte-stable output
};

/// Gaussian noise on every entry but the balancing node, which then takes
/// the negative sum of the others.
Injections perturb_injections(const Injections& q0, double sigma, NodeId balancing, Rng& rng);

struct SampleRecord {
  std::size_t id = 0;
  SolveStatus status = SolveStatus::Infeasible;
  double gap = std::numeric_limits<double>::quiet_NaN();
  double objective = std::numeric_limits<double>::quiet_NaN();
  double runtime_ms = 0.0;
  bool inexact_minor = false;
  std::size_t nodes = 0;
  // Infeasible samples: how the proof was obtained and how well it checks.
  std::string certificate;   // "root", "tree" or empty
  std::size_t certificate_nodes = 0;
  double certificate_residual = 0.0;

  bool feasible() const { return status == SolveStatus::Solved || status == SolveStatus::Inexact; }
  bool operator==(const SampleRecord& o) const;  // NaN equals NaN
};

struct GapQuantiles {
  double min = 0, q25 = 0, median = 0, q75 = 0, q95 = 0, max = 0;
  bool operator==(const GapQuantiles&) const = default;
};

struct McAggregates {
  std::size_t samples = 0, solved = 0, inexact = 0, infeasible = 0, timeout = 0;
  std::size_t feasible = 0;
  // Over feasible samples only; absent when there are none.
  std::optional<GapQuantiles> gap;
  std::optional<double> frac_below_1e4, frac_below_1e3;
  std::optional<double> mean_runtime_ms, median_runtime_ms;
  bool operator==(const McAggregates&) const = default;
};

struct McReport {
  std::vector<SampleRecord> records;  // by sample id
  McAggregates aggregates;
  std::vector<double> ranked_gap;     // feasible gaps, non-decreasing
  std::vector<double> runtime_ms;     // per sample id
  bool operator==(const McReport&) const = default;
};

/// Samples solved in parallel (OpenMP); sample i draws from Rng::stream(seed, i).
McReport run_monte_carlo(const GasNetwork& net, const McConfig& cfg);
/// Same experiment on one thread; the reference for the parallel loop.
McReport run_monte_carlo_serial(const GasNetwork& net, const McConfig& cfg);

McAggregates aggregate(const std::vector<SampleRecord>& records);

/// Columns sample_id,status,gap,objective,runtime_ms; doubles as %.17g,
/// missing values empty.
std::string report_csv(const McReport& report);
std::string report_json(const McReport& report);
McReport report_from_json(const std::string& text);

enum class ReportFormat { Csv, Json };
void emit_report(const McReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace gasflow
