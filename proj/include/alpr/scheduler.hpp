#pragma once

#include "alpr/augment.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace alpr {

struct LrProfile {
  double base_lr = 0;
  double min_lr = 0;
  double momentum = 0;
  double weight_decay = 0;

  friend bool operator==(const LrProfile&, const LrProfile&) = default;
};

struct LossWeights {
  double box = 7.5;
  double cls = 0.5;
  double dfl = 1.5;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct UnfreezePhase {
  std::string name;
  int frozen_layers = 0;

  friend bool operator==(const UnfreezePhase&, const UnfreezePhase&) = default;
};

/// Two-stage training controller settings.
///
/// Stage 1 runs at most `stage1_epochs` with progressive unfreezing over equal
/// phases. It ends early on convergence (mean mAP of the last `window` epochs
/// minus that of the `window` before it is below `convergence_threshold`) or
/// after `patience` epochs without a new best. Stage 2 is chosen by the best
/// stage-1 mAP: strictly above `branch_map_threshold` gives the converged
/// branch (full unfreeze, conservative profile), anything else the fallback
/// branch (light freeze, moderate profile). Stage 2 anneals the learning rate
/// with a cosine from the profile's base to its minimum.
struct SchedulerConfig {
  int stage1_epochs = 35;
  int batch_size = 10;
  int window = 8;
  double convergence_threshold = 0.001;
  int patience = 15;
  double branch_map_threshold = 0.7;
  int stage2_converged_epochs = 45;
  int stage2_fallback_epochs = 55;
  std::vector<UnfreezePhase> unfreeze_schedule{{"early", 12}, {"middle", 8}, {"late", 4}};
  int stage2_light_freeze = 4;
  int stage2_patience = 15;
  LrProfile aggressive{1e-2, 1e-4, 0.95, 1e-3};
  LrProfile conservative{1e-3, 1e-5, 0.9, 5e-4};
  LrProfile moderate{5e-3, 5e-5, 0.937, 5e-4};
  LossWeights loss_weights;

  void validate() const;
  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

/// `key = value` overrides for the scalar SchedulerConfig fields, e.g.
/// `stage1_epochs = 20` or `conservative.base_lr = 2e-3`.
SchedulerConfig parse_scheduler_overrides(std::string_view text, SchedulerConfig base);

enum class Phase { stage1, stage2_converged, stage2_fallback, stopped };
enum class EndReason { none, budget, converged, early_stop };

const char* to_string(Phase phase);
const char* to_string(EndReason reason);

/// Outbound per-epoch directive.
struct EpochPlan {
  int global_epoch = 0;
  int stage = 1;
  int frozen_layers = 0;
  double learning_rate = 0;
  double momentum = 0;
  double weight_decay = 0;
  LossWeights loss_weights;
  AugmentationPhasePreset preset;
  int batch_size = 0;

  friend bool operator==(const EpochPlan&, const EpochPlan&) = default;
};

/// Inbound training feedback.
struct MetricReport {
  int global_epoch = 0;
  double map50 = 0;
  double val_loss = 0;
  std::optional<double> wall_time_ms;  // supplied by real trainers only

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

struct SchedulerState {
  Phase phase = Phase::stage1;
  std::vector<MetricReport> history;
  double best_map = 0;
  int epochs_since_best = 0;
  bool converged = false;  // convergence detector, evaluated on the current stage
  bool stage1_complete = false;
  EndReason stage1_end = EndReason::none;
  Phase branch = Phase::stage1;  // stage-2 variant once chosen
  int stage2_start = -1;         // global epoch of the first stage-2 plan
  int stage2_epochs = 0;
  EndReason stage2_end = EndReason::none;

  friend bool operator==(const SchedulerState&, const SchedulerState&) = default;
};

/// lr_min + ½(lr_max − lr_min)(1 + cos(π t / T)); exactly lr_min for t >= T.
double cosine_lr(int t, int T, double lr_max, double lr_min);

/// Frozen-layer count for a stage-1 epoch: the schedule split into equal
/// phases of ⌈stage1_epochs / phases⌉ epochs.
int stage1_frozen_layers(int epoch, const SchedulerConfig& config);

/// Plan for the next epoch. Throws ProtocolError once stopped, or when stage 1
/// has finished and stage_transition has not been applied.
EpochPlan next_plan(const SchedulerState& state, const SchedulerConfig& config);

/// Records a report, which must carry the next expected epoch.
SchedulerState observe(SchedulerState state, const MetricReport& report, const SchedulerConfig& config);

/// Convergence test over the last 2·window reports of `reports`.
bool window_converged(const std::vector<MetricReport>& reports, std::size_t begin, const SchedulerConfig& config);

/// Stage 1 → stage 2 branch. Throws ProtocolError before stage 1 has ended.
SchedulerState stage_transition(SchedulerState state, const SchedulerConfig& config);

inline bool is_stopped(const SchedulerState& s) { return s.phase == Phase::stopped; }

// --- Wire format -------------------------------------------------------------
// Single-line JSON with snake_case keys. Readers ignore unknown keys.

std::string to_json_line(const EpochPlan& plan);
std::string to_json_line(const MetricReport& report);
std::string to_json_line(const SchedulerState& state);
EpochPlan plan_from_json(std::string_view line);
MetricReport report_from_json(std::string_view line);
SchedulerState state_from_json(std::string_view line);

struct TraceEntry {
  EpochPlan plan;
  MetricReport report;
  double wall_time_ms = 0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct SessionTrace {
  std::vector<TraceEntry> entries;
  SchedulerState final_state;
};

/// `{"plan":{...},"report":{...},"wall_time_ms":...}`
std::string to_json_line(const TraceEntry& entry);
TraceEntry trace_entry_from_json(std::string_view line);
/// Newline-delimited trace file contents.
std::vector<TraceEntry> parse_trace(std::string_view text);

using Trainer = std::function<MetricReport(const EpochPlan&)>;

struct SessionOptions {
  /// Entries replayed (and checked against fresh plans) before the trainer runs.
  std::vector<TraceEntry> resume;
  /// Receives every trace line as soon as it is known.
  std::ostream* trace_sink = nullptr;
  /// Wall time recorded when a report carries none.
  double simulated_epoch_ms = 1000.0;
};

/// A trainer failure; carries the trace up to the failing epoch.
class SessionAborted : public std::runtime_error {
 public:
  SessionAborted(const std::string& what, SessionTrace partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SessionTrace& partial() const { return partial_; }

 private:
  SessionTrace partial_;
};

/// Drives next_plan / trainer / observe / stage_transition until stopped.
SessionTrace run_session(const Trainer& trainer, const SchedulerConfig& config,
                         const SessionOptions& options = {});

/// Trainer speaking the line protocol: writes each plan as one JSON line to
/// `plans`, then reads one report line from `reports`.
class StreamTrainer {
 public:
  StreamTrainer(std::istream& reports, std::ostream& plans) : reports_(&reports), plans_(&plans) {}
  MetricReport operator()(const EpochPlan& plan);

 private:
  std::istream* reports_;
  std::ostream* plans_;
};

}  // namespace alpr
