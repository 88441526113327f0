#pragma once

#include "alpr/scheduler.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alpr {

enum class TrajectoryKind { saturating, plateau, noisy_linear, scripted };

/// Scripted mAP trajectory for the mock trainer. Which parameters matter
/// depends on `kind`:
///   saturating:   asymptote·(1 − e^(−rate·n)), n = epochs completed
///   plateau:      level·min(epoch, start)/start, flat from `start` on
///   noisy_linear: intercept + slope·epoch
///   scripted:     values[epoch], the last value repeating past the end
/// Every kind adds noise·U(−1,1) drawn from Rng::stream(seed, epoch), and the
/// result is clamped to [0,1].
struct TrajectorySpec {
  std::string name;
  TrajectoryKind kind = TrajectoryKind::saturating;
  double asymptote = 0.8;
  double rate = 0.15;
  double level = 0.6;
  int start = 5;
  double intercept = 0.05;
  double slope = 0.01;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> values;
  /// Saturating trajectories are multiplied by (1 + lr_boost) on epochs whose
  /// learning rate lies inside the band of the profile that stage should use,
  /// so a mis-set learning rate shows up as a dip.
  double lr_boost = 0.02;
};

/// One scenario per line: `name kind key=value ...`, where kind is one of
/// saturating, plateau, noisy-linear, scripted and `values` takes a
/// comma-separated list. `#` starts a comment.
std::vector<TrajectorySpec> parse_scenarios(std::string_view text);

/// Stateless trainer: each report depends only on the plan and the spec, so
/// resumed sessions continue exactly like uninterrupted ones.
Trainer mock_trainer(const TrajectorySpec& spec, const SchedulerConfig& config);

struct ScenarioResult {
  TrajectorySpec spec;
  SessionTrace trace;
};

/// Runs every scenario through run_session, concurrently; results keep input order.
std::vector<ScenarioResult> run_scenarios(std::span<const TrajectorySpec> specs, const SchedulerConfig& config);

struct TraceSummary {
  Phase branch = Phase::stage1;
  int stage1_epochs = 0;
  EndReason stage1_end = EndReason::none;
  int stage2_epochs = 0;
  EndReason stage2_end = EndReason::none;
  double best_map = 0;
  double stage1_best_map = 0;
};

TraceSummary summarize(const SessionTrace& trace);

/// Invariant violations of a finished trace; empty when the trace is sound.
std::vector<std::string> validate_trace(const SessionTrace& trace, const SchedulerConfig& config);

// --- Result tables -----------------------------------------------------------

enum class TableLayout { detection, ocr, timing };
enum class TableFormat { text, csv };

struct TableRow {
  std::string label;
  std::vector<std::optional<double>> values;  // nullopt renders as "-"

  friend bool operator==(const TableRow&, const TableRow&) = default;
};

/// Column headers including the leading label column.
const std::vector<std::string>& table_columns(TableLayout layout);
/// Decimals per layout: 2 for detection percentages and timings, 4 for OCR.
int table_decimals(TableLayout layout);

std::string render_table(std::span<const TableRow> rows, TableLayout layout, TableFormat format);
std::vector<TableRow> parse_table_csv(std::string_view csv, TableLayout layout);

std::string render_scenario_summary(std::span<const ScenarioResult> results, TableFormat format);

}  // namespace alpr
