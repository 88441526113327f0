#include "alpr/scheduler.hpp"

#include "alpr/error.hpp"
#include "text_util.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>

namespace alpr {

using nlohmann::json;

void SchedulerConfig::validate() const {
  for (int v : {stage1_epochs, batch_size, window, patience, stage2_converged_epochs, stage2_fallback_epochs,
                stage2_patience})
    if (v <= 0) throw DataError("scheduler counts must be positive");
  if (window > stage1_epochs) throw DataError("window must not exceed stage1_epochs");
  if (patience < window) throw DataError("patience must be at least the window length");
  if (unfreeze_schedule.empty()) throw DataError("unfreeze schedule must not be empty");
  for (const auto& p : unfreeze_schedule)
    if (p.frozen_layers < 0) throw DataError("frozen layer counts must be >= 0");
  if (stage2_light_freeze < 0) throw DataError("stage2_light_freeze must be >= 0");
  for (const auto* p : {&aggressive, &conservative, &moderate})
    if (!(p->base_lr > 0) || !(p->min_lr > 0) || p->min_lr > p->base_lr)
      throw DataError("learning-rate profiles need 0 < min_lr <= base_lr");
}

SchedulerConfig parse_scheduler_overrides(std::string_view text, SchedulerConfig base) {
  std::map<std::string, int*, std::less<>> ints{
      {"stage1_epochs", &base.stage1_epochs},
      {"batch_size", &base.batch_size},
      {"window", &base.window},
      {"patience", &base.patience},
      {"stage2_converged_epochs", &base.stage2_converged_epochs},
      {"stage2_fallback_epochs", &base.stage2_fallback_epochs},
      {"stage2_light_freeze", &base.stage2_light_freeze},
      {"stage2_patience", &base.stage2_patience},
  };
  std::map<std::string, double*, std::less<>> reals{
      {"convergence_threshold", &base.convergence_threshold},
      {"branch_map_threshold", &base.branch_map_threshold},
      {"loss.box", &base.loss_weights.box},
      {"loss.cls", &base.loss_weights.cls},
      {"loss.dfl", &base.loss_weights.dfl},
  };
  for (auto [name, profile] : {std::pair{"aggressive", &base.aggressive}, std::pair{"conservative", &base.conservative},
                               std::pair{"moderate", &base.moderate}}) {
    const std::string n = name;
    reals[n + ".base_lr"] = &profile->base_lr;
    reals[n + ".min_lr"] = &profile->min_lr;
    reals[n + ".momentum"] = &profile->momentum;
    reals[n + ".weight_decay"] = &profile->weight_decay;
  }

  int line_no = 0;
  for (const auto raw : detail::lines(text)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    const auto line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(where, "expected 'key = value'");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (auto it = ints.find(key); it != ints.end()) {
      const auto v = detail::parse_int<int>(value);
      if (!v) throw ParseError(where, "expected an integer for '" + std::string(key) + "'");
      *it->second = *v;
    } else if (auto jt = reals.find(key); jt != reals.end()) {
      const auto v = detail::parse_double(value);
      if (!v) throw ParseError(where, "expected a number for '" + std::string(key) + "'");
      *jt->second = *v;
    } else if (key == "unfreeze_schedule") {
      std::vector<UnfreezePhase> phases;
      for (const auto part : detail::split(value, ',')) {
        const auto v = detail::parse_int<int>(part);
        if (!v) throw ParseError(where, "unfreeze_schedule expects comma-separated integers");
        phases.push_back({"phase" + std::to_string(phases.size() + 1), *v});
      }
      base.unfreeze_schedule = std::move(phases);
    } else {
      throw ParseError(where, "unknown scheduler setting '" + std::string(key) + "'");
    }
  }
  base.validate();
  return base;
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::stage1: return "stage1";
    case Phase::stage2_converged: return "stage2_converged";
    case Phase::stage2_fallback: return "stage2_fallback";
    case Phase::stopped: return "stopped";
  }
  return "?";
}

const char* to_string(EndReason reason) {
  switch (reason) {
    case EndReason::none: return "none";
    case EndReason::budget: return "budget";
    case EndReason::converged: return "converged";
    case EndReason::early_stop: return "early_stop";
  }
  return "?";
}

double cosine_lr(int t, int T, double lr_max, double lr_min) {
  if (T <= 0 || t >= T) return lr_min;
  if (t <= 0) return lr_max;
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t / T));
}

int stage1_frozen_layers(int epoch, const SchedulerConfig& config) {
  const int phases = static_cast<int>(config.unfreeze_schedule.size());
  const int span = (config.stage1_epochs + phases - 1) / phases;
  const int idx = std::min(epoch / span, phases - 1);
  return config.unfreeze_schedule[static_cast<std::size_t>(idx)].frozen_layers;
}

EpochPlan next_plan(const SchedulerState& state, const SchedulerConfig& config) {
  if (state.phase == Phase::stopped) throw ProtocolError("next_plan called after the scheduler stopped");
  EpochPlan plan;
  plan.global_epoch = static_cast<int>(state.history.size());
  plan.batch_size = config.batch_size;
  plan.loss_weights = config.loss_weights;

  if (state.phase == Phase::stage1) {
    if (state.stage1_complete) throw ProtocolError("stage 1 has ended; apply stage_transition first");
    plan.stage = 1;
    plan.frozen_layers = stage1_frozen_layers(plan.global_epoch, config);
    plan.learning_rate = config.aggressive.base_lr;
    plan.momentum = config.aggressive.momentum;
    plan.weight_decay = config.aggressive.weight_decay;
    plan.preset = stage1_preset();
    return plan;
  }

  const bool conv = state.phase == Phase::stage2_converged;
  const LrProfile& profile = conv ? config.conservative : config.moderate;
  plan.stage = 2;
  plan.frozen_layers = conv ? 0 : config.stage2_light_freeze;
  plan.learning_rate =
      cosine_lr(plan.global_epoch - state.stage2_start, state.stage2_epochs - 1, profile.base_lr, profile.min_lr);
  plan.momentum = profile.momentum;
  plan.weight_decay = profile.weight_decay;
  plan.preset = stage2_preset();
  return plan;
}

bool window_converged(const std::vector<MetricReport>& reports, std::size_t begin, const SchedulerConfig& config) {
  const auto w = static_cast<std::size_t>(config.window);
  if (reports.size() < begin + 2 * w) return false;
  const auto mean = [&](std::size_t from) {
    double s = 0;
    for (std::size_t i = from; i < from + w; ++i) s += reports[i].map50;
    return s / static_cast<double>(w);
  };
  const std::size_t n = reports.size();
  return mean(n - w) - mean(n - 2 * w) < config.convergence_threshold;
}

SchedulerState observe(SchedulerState state, const MetricReport& report, const SchedulerConfig& config) {
  if (state.phase == Phase::stopped) throw ProtocolError("report received after the scheduler stopped");
  if (state.phase == Phase::stage1 && state.stage1_complete)
    throw ProtocolError("report received after stage 1 ended");
  const int expected = static_cast<int>(state.history.size());
  if (report.global_epoch != expected)
    throw ProtocolError("out-of-order report: expected epoch " + std::to_string(expected) + ", got " +
                        std::to_string(report.global_epoch));
  if (!(report.map50 >= 0.0 && report.map50 <= 1.0)) throw DataError("map50 must lie in [0,1]");
  if (!(report.val_loss >= 0.0)) throw DataError("val_loss must be nonnegative");

  state.history.push_back(report);
  if (state.history.size() == 1 || report.map50 > state.best_map) {
    state.best_map = report.map50;
    state.epochs_since_best = 0;
  } else {
    ++state.epochs_since_best;
  }

  if (state.phase == Phase::stage1) {
    state.converged = window_converged(state.history, 0, config);
    if (state.epochs_since_best >= config.patience)
      state.stage1_end = EndReason::early_stop;
    else if (state.converged)
      state.stage1_end = EndReason::converged;
    else if (static_cast<int>(state.history.size()) >= config.stage1_epochs)
      state.stage1_end = EndReason::budget;
    state.stage1_complete = state.stage1_end != EndReason::none;
    return state;
  }

  state.converged = window_converged(state.history, static_cast<std::size_t>(state.stage2_start), config);
  const int done = static_cast<int>(state.history.size()) - state.stage2_start;
  if (state.epochs_since_best >= config.stage2_patience)
    state.stage2_end = EndReason::early_stop;
  else if (done >= state.stage2_epochs)
    state.stage2_end = EndReason::budget;
  if (state.stage2_end != EndReason::none) state.phase = Phase::stopped;
  return state;
}

SchedulerState stage_transition(SchedulerState state, const SchedulerConfig& config) {
  if (state.phase != Phase::stage1 || !state.stage1_complete)
    throw ProtocolError("stage_transition requires a finished stage 1");
  const bool conv = state.best_map > config.branch_map_threshold;
  state.phase = conv ? Phase::stage2_converged : Phase::stage2_fallback;
  state.branch = state.phase;
  state.stage2_start = static_cast<int>(state.history.size());
  state.stage2_epochs = conv ? config.stage2_converged_epochs : config.stage2_fallback_epochs;
  state.epochs_since_best = 0;
  state.converged = false;
  return state;
}

// --- JSON --------------------------------------------------------------------

namespace {

Phase phase_from(const std::string& s) {
  for (Phase p : {Phase::stage1, Phase::stage2_converged, Phase::stage2_fallback, Phase::stopped})
    if (s == to_string(p)) return p;
  throw ParseError("phase", "unknown phase '" + s + "'");
}

EndReason reason_from(const std::string& s) {
  for (EndReason r : {EndReason::none, EndReason::budget, EndReason::converged, EndReason::early_stop})
    if (s == to_string(r)) return r;
  throw ParseError("end reason", "unknown value '" + s + "'");
}

json preset_json(const AugmentationPhasePreset& p) {
  return {{"rotation_deg", p.rotation_deg}, {"translation_frac", p.translation_frac},
          {"scale_factor", p.scale_factor}, {"shear_deg", p.shear_deg},
          {"hflip_p", p.hflip_p},           {"mosaic_p", p.mosaic_p},
          {"mixup_p", p.mixup_p},           {"copypaste_p", p.copypaste_p},
          {"hue_frac", p.hue_frac},         {"sat_frac", p.sat_frac},
          {"val_frac", p.val_frac}};
}

AugmentationPhasePreset preset_from(const json& j) {
  AugmentationPhasePreset p;
  p.rotation_deg = j.at("rotation_deg").get<double>();
  p.translation_frac = j.at("translation_frac").get<double>();
  p.scale_factor = j.at("scale_factor").get<double>();
  p.shear_deg = j.at("shear_deg").get<double>();
  p.hflip_p = j.at("hflip_p").get<double>();
  p.mosaic_p = j.at("mosaic_p").get<double>();
  p.mixup_p = j.at("mixup_p").get<double>();
  p.copypaste_p = j.at("copypaste_p").get<double>();
  p.hue_frac = j.at("hue_frac").get<double>();
  p.sat_frac = j.at("sat_frac").get<double>();
  p.val_frac = j.at("val_frac").get<double>();
  return p;
}

json plan_json(const EpochPlan& p) {
  return {{"global_epoch", p.global_epoch},
          {"stage", p.stage},
          {"frozen_layers", p.frozen_layers},
          {"learning_rate", p.learning_rate},
          {"momentum", p.momentum},
          {"weight_decay", p.weight_decay},
          {"loss_weights", {{"box", p.loss_weights.box}, {"cls", p.loss_weights.cls}, {"dfl", p.loss_weights.dfl}}},
          {"preset", preset_json(p.preset)},
          {"batch_size", p.batch_size}};
}

EpochPlan plan_from(const json& j) {
  EpochPlan p;
  p.global_epoch = j.at("global_epoch").get<int>();
  p.stage = j.at("stage").get<int>();
  p.frozen_layers = j.at("frozen_layers").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.momentum = j.at("momentum").get<double>();
  p.weight_decay = j.at("weight_decay").get<double>();
  const json& lw = j.at("loss_weights");
  p.loss_weights = {lw.at("box").get<double>(), lw.at("cls").get<double>(), lw.at("dfl").get<double>()};
  p.preset = preset_from(j.at("preset"));
  p.batch_size = j.at("batch_size").get<int>();
  return p;
}

json report_json(const MetricReport& r) {
  json j{{"global_epoch", r.global_epoch}, {"map50", r.map50}, {"val_loss", r.val_loss}};
  if (r.wall_time_ms) j["wall_time_ms"] = *r.wall_time_ms;
  return j;
}

MetricReport report_from(const json& j) {
  MetricReport r;
  r.global_epoch = j.at("global_epoch").get<int>();
  r.map50 = j.at("map50").get<double>();
  r.val_loss = j.at("val_loss").get<double>();
  if (j.contains("wall_time_ms")) r.wall_time_ms = j.at("wall_time_ms").get<double>();
  if (!(r.map50 >= 0.0 && r.map50 <= 1.0)) throw ParseError("map50", "must lie in [0,1]");
  if (!(r.val_loss >= 0.0)) throw ParseError("val_loss", "must be nonnegative");
  return r;
}

template <typename F>
auto parse_with(std::string_view line, const char* what, F&& f) {
  try {
    const json j = json::parse(line);
    if (!j.is_object()) throw ParseError(what, "expected a JSON object");
    return f(j);
  } catch (const json::exception& e) {
    throw ParseError(what, e.what());
  }
}

}  // namespace

std::string to_json_line(const EpochPlan& plan) { return plan_json(plan).dump(); }
std::string to_json_line(const MetricReport& report) { return report_json(report).dump(); }

std::string to_json_line(const SchedulerState& s) {
  json history = json::array();
  for (const auto& r : s.history) history.push_back(report_json(r));
  return json{{"phase", to_string(s.phase)},
              {"history", history},
              {"best_map", s.best_map},
              {"epochs_since_best", s.epochs_since_best},
              {"converged", s.converged},
              {"stage1_complete", s.stage1_complete},
              {"stage1_end", to_string(s.stage1_end)},
              {"branch", to_string(s.branch)},
              {"stage2_start", s.stage2_start},
              {"stage2_epochs", s.stage2_epochs},
              {"stage2_end", to_string(s.stage2_end)}}
      .dump();
}

EpochPlan plan_from_json(std::string_view line) { return parse_with(line, "plan", plan_from); }
MetricReport report_from_json(std::string_view line) { return parse_with(line, "report", report_from); }

SchedulerState state_from_json(std::string_view line) {
  return parse_with(line, "state", [](const json& j) {
    SchedulerState s;
    s.phase = phase_from(j.at("phase").get<std::string>());
    for (const auto& r : j.at("history")) s.history.push_back(report_from(r));
    s.best_map = j.at("best_map").get<double>();
    s.epochs_since_best = j.at("epochs_since_best").get<int>();
    s.converged = j.at("converged").get<bool>();
    s.stage1_complete = j.at("stage1_complete").get<bool>();
    s.stage1_end = reason_from(j.at("stage1_end").get<std::string>());
    s.branch = phase_from(j.at("branch").get<std::string>());
    s.stage2_start = j.at("stage2_start").get<int>();
    s.stage2_epochs = j.at("stage2_epochs").get<int>();
    s.stage2_end = reason_from(j.at("stage2_end").get<std::string>());
    return s;
  });
}

std::string to_json_line(const TraceEntry& e) {
  return json{{"plan", plan_json(e.plan)}, {"report", report_json(e.report)}, {"wall_time_ms", e.wall_time_ms}}.dump();
}

TraceEntry trace_entry_from_json(std::string_view line) {
  return parse_with(line, "trace entry", [](const json& j) {
    return TraceEntry{plan_from(j.at("plan")), report_from(j.at("report")), j.at("wall_time_ms").get<double>()};
  });
}

std::vector<TraceEntry> parse_trace(std::string_view text) {
  std::vector<TraceEntry> out;
  int line_no = 0;
  for (const auto line : detail::lines(text)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(trace_entry_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError("trace line " + std::to_string(line_no), e.what());
    }
  }
  return out;
}

// --- Session -----------------------------------------------------------------

SessionTrace run_session(const Trainer& trainer, const SchedulerConfig& config, const SessionOptions& options) {
  config.validate();
  SessionTrace trace;
  SchedulerState& state = trace.final_state;

  const auto record = [&](TraceEntry entry) {
    if (options.trace_sink) *options.trace_sink << to_json_line(entry) << '\n' << std::flush;
    trace.entries.push_back(std::move(entry));
  };
  const auto advance = [&] {
    if (state.phase == Phase::stage1 && state.stage1_complete) state = stage_transition(state, config);
  };

  for (const auto& entry : options.resume) {
    advance();
    if (is_stopped(state)) throw ProtocolError("resumed trace runs past the end of the session");
    const EpochPlan plan = next_plan(state, config);
    if (!(plan == entry.plan))
      throw ProtocolError("resumed trace diverges from the scheduler at epoch " + std::to_string(plan.global_epoch));
    state = observe(state, entry.report, config);
    record(entry);
  }

  for (;;) {
    advance();
    if (is_stopped(state)) break;
    const EpochPlan plan = next_plan(state, config);
    MetricReport report;
    try {
      report = trainer(plan);
    } catch (const std::exception& e) {
      throw SessionAborted("trainer failed at epoch " + std::to_string(plan.global_epoch) + ": " + e.what(), trace);
    }
    state = observe(state, report, config);
    record({plan, report, report.wall_time_ms.value_or(options.simulated_epoch_ms)});
  }
  return trace;
}

MetricReport StreamTrainer::operator()(const EpochPlan& plan) {
  *plans_ << to_json_line(plan) << '\n' << std::flush;
  std::string line;
  while (std::getline(*reports_, line))
    if (!detail::trim(line).empty()) break;
  if (detail::trim(line).empty()) throw ProtocolError("report stream closed before epoch " + std::to_string(plan.global_epoch));
  MetricReport report = report_from_json(line);
  if (report.global_epoch != plan.global_epoch)
    throw ProtocolError("out-of-order report: expected epoch " + std::to_string(plan.global_epoch) + ", got " +
                        std::to_string(report.global_epoch));
  return report;
}

}  // namespace alpr
