#include "alpr/simharness.hpp"

#include "alpr/error.hpp"
#include "alpr/rng.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

namespace alpr {

// --- Scenarios ---------------------------------------------------------------

std::vector<TrajectorySpec> parse_scenarios(std::string_view text) {
  std::vector<TrajectorySpec> specs;
  int line_no = 0;
  for (const auto raw : detail::lines(text)) {
    ++line_no;
    const std::string where = "line " + std::to_string(line_no);
    const auto line = detail::trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto fields = detail::split_ws(line);
    if (fields.size() < 2) throw ParseError(where, "expected 'name kind key=value ...'");

    TrajectorySpec spec;
    spec.name = std::string(fields[0]);
    const auto kind = fields[1];
    if (kind == "saturating")
      spec.kind = TrajectoryKind::saturating;
    else if (kind == "plateau")
      spec.kind = TrajectoryKind::plateau;
    else if (kind == "noisy-linear")
      spec.kind = TrajectoryKind::noisy_linear;
    else if (kind == "scripted")
      spec.kind = TrajectoryKind::scripted;
    else
      throw ParseError(where, "unknown trajectory kind '" + std::string(kind) + "'");

    for (std::size_t i = 2; i < fields.size(); ++i) {
      const auto eq = fields[i].find('=');
      if (eq == std::string_view::npos) throw ParseError(where, "expected key=value, got '" + std::string(fields[i]) + "'");
      const auto key = fields[i].substr(0, eq);
      const auto value = fields[i].substr(eq + 1);
      const auto number = [&]() {
        const auto v = detail::parse_double(value);
        if (!v || !std::isfinite(*v)) throw ParseError(where, "'" + std::string(key) + "' needs a number");
        return *v;
      };
      if (key == "asymptote") spec.asymptote = number();
      else if (key == "rate") spec.rate = number();
      else if (key == "level") spec.level = number();
      else if (key == "intercept") spec.intercept = number();
      else if (key == "slope") spec.slope = number();
      else if (key == "noise") spec.noise = number();
      else if (key == "boost") spec.lr_boost = number();
      else if (key == "start") {
        const auto v = detail::parse_int<int>(value);
        if (!v || *v <= 0) throw ParseError(where, "'start' needs a positive integer");
        spec.start = *v;
      } else if (key == "seed") {
        const auto v = detail::parse_int<std::uint64_t>(value);
        if (!v) throw ParseError(where, "'seed' needs a non-negative integer");
        spec.seed = *v;
      } else if (key == "values") {
        for (const auto part : detail::split(value, ',')) {
          const auto v = detail::parse_double(part);
          if (!v || !(*v >= 0.0 && *v <= 1.0)) throw ParseError(where, "scripted values must lie in [0,1]");
          spec.values.push_back(*v);
        }
      } else {
        throw ParseError(where, "unknown scenario key '" + std::string(key) + "'");
      }
    }
    if (spec.kind == TrajectoryKind::scripted && spec.values.empty())
      throw ParseError(where, "scripted scenario needs values=...");
    specs.push_back(std::move(spec));
  }
  return specs;
}

namespace {

bool in_band(double lr, const LrProfile& p) { return lr >= p.min_lr && lr <= p.base_lr; }

const LrProfile& intended_profile(const EpochPlan& plan, const SchedulerConfig& config) {
  if (plan.stage == 1) return config.aggressive;
  return plan.frozen_layers == 0 ? config.conservative : config.moderate;
}

}  // namespace

Trainer mock_trainer(const TrajectorySpec& spec, const SchedulerConfig& config) {
  if (spec.kind == TrajectoryKind::scripted && spec.values.empty())
    throw DataError("scripted trajectory without values");
  return [spec, config](const EpochPlan& plan) {
    const int e = plan.global_epoch;
    double map = 0.0;
    switch (spec.kind) {
      case TrajectoryKind::saturating:
        map = spec.asymptote * (1.0 - std::exp(-spec.rate * (e + 1)));
        if (in_band(plan.learning_rate, intended_profile(plan, config))) map *= 1.0 + spec.lr_boost;
        break;
      case TrajectoryKind::plateau:
        map = spec.level * std::min(e, spec.start) / spec.start;
        break;
      case TrajectoryKind::noisy_linear:
        map = spec.intercept + spec.slope * e;
        break;
      case TrajectoryKind::scripted:
        map = spec.values[std::min<std::size_t>(static_cast<std::size_t>(e), spec.values.size() - 1)];
        break;
    }
    if (spec.noise != 0.0) {
      Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(e));
      map += spec.noise * rng.symmetric(1.0);
    }
    map = std::clamp(map, 0.0, 1.0);
    return MetricReport{e, map, 1.0 - map, std::nullopt};
  };
}

std::vector<ScenarioResult> run_scenarios(std::span<const TrajectorySpec> specs, const SchedulerConfig& config) {
  if (specs.empty()) throw DataError("run_scenarios: no scenarios");
  std::vector<std::future<SessionTrace>> jobs;
  for (const auto& spec : specs)
    jobs.push_back(std::async(std::launch::async, [&spec, &config] { return run_session(mock_trainer(spec, config), config); }));
  std::vector<ScenarioResult> out;
  for (std::size_t i = 0; i < specs.size(); ++i) out.push_back({specs[i], jobs[i].get()});
  return out;
}

TraceSummary summarize(const SessionTrace& trace) {
  TraceSummary s;
  const auto& st = trace.final_state;
  s.branch = st.branch;
  s.stage1_end = st.stage1_end;
  s.stage2_end = st.stage2_end;
  for (const auto& e : trace.entries) {
    if (e.plan.stage == 1) {
      ++s.stage1_epochs;
      s.stage1_best_map = std::max(s.stage1_best_map, e.report.map50);
    } else {
      ++s.stage2_epochs;
    }
    s.best_map = std::max(s.best_map, e.report.map50);
  }
  return s;
}

std::vector<std::string> validate_trace(const SessionTrace& trace, const SchedulerConfig& config) {
  std::vector<std::string> issues;
  const auto fail = [&](std::string msg) { issues.push_back(std::move(msg)); };
  const auto& entries = trace.entries;

  int transitions = 0;
  int prev_frozen = -1;
  double best = 0.0;
  double stage1_best = 0.0;
  int stage1 = 0;
  int stage2 = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string at = "epoch " + std::to_string(i) + ": ";
    if (e.plan.global_epoch != static_cast<int>(i) || e.report.global_epoch != static_cast<int>(i))
      fail(at + "epochs not consecutive");
    if (i > 0 && e.plan.stage != entries[i - 1].plan.stage) {
      ++transitions;
      if (!(entries[i - 1].plan.stage == 1 && e.plan.stage == 2)) fail(at + "stage moved backwards");
    }
    if (e.report.map50 < 0.0 || e.report.map50 > 1.0) fail(at + "map50 outside [0,1]");
    best = i == 0 ? e.report.map50 : std::max(best, e.report.map50);
    if (e.plan.stage == 1) {
      ++stage1;
      stage1_best = stage1 == 1 ? e.report.map50 : std::max(stage1_best, e.report.map50);
      if (prev_frozen >= 0 && e.plan.frozen_layers > prev_frozen) fail(at + "frozen layers increased in stage 1");
      prev_frozen = e.plan.frozen_layers;
      if (!(e.plan.preset == stage1_preset())) fail(at + "stage-1 plan without the stage-1 preset");
    } else {
      ++stage2;
      if (!(e.plan.preset == stage2_preset())) fail(at + "stage-2 plan without the stage-2 preset");
    }
  }
  if (transitions > 1) fail("more than one stage transition");
  if (stage1 > config.stage1_epochs) fail("stage 1 exceeded its epoch budget");

  const auto& st = trace.final_state;
  if (!entries.empty() && st.best_map != best) fail("final best_map differs from the maximum report");
  if (st.phase != Phase::stopped) fail("session did not stop");
  const bool converged = stage1_best > config.branch_map_threshold;
  const Phase expected = converged ? Phase::stage2_converged : Phase::stage2_fallback;
  if (stage2 > 0 && st.branch != expected) fail("stage-2 branch disagrees with the stage-1 best mAP");
  const int budget = converged ? config.stage2_converged_epochs : config.stage2_fallback_epochs;
  if (st.stage2_end != EndReason::early_stop && stage2 != budget)
    fail("stage 2 ran " + std::to_string(stage2) + " epochs instead of " + std::to_string(budget));
  if (st.stage2_end == EndReason::early_stop && stage2 > budget) fail("stage 2 exceeded its epoch budget");
  for (const auto& e : entries) {
    if (e.plan.stage != 2) continue;
    const int want = converged ? 0 : config.stage2_light_freeze;
    if (e.plan.frozen_layers != want) {
      fail("stage-2 frozen layer count does not match the branch");
      break;
    }
  }
  return issues;
}

// --- Tables ------------------------------------------------------------------

const std::vector<std::string>& table_columns(TableLayout layout) {
  static const std::vector<std::string> detection{"Model", "Accuracy(%)", "Precision(%)", "Recall(%)", "F1 Score(%)",
                                                  "IoU(%)"};
  static const std::vector<std::string> ocr{"Model", "Validation Loss", "Character Error Rate (CER)",
                                            "Word Error Rate (WER)", "Levenshtein Distance"};
  static const std::vector<std::string> timing{"Model", "With Training Dataset", "With External Dataset"};
  switch (layout) {
    case TableLayout::detection: return detection;
    case TableLayout::ocr: return ocr;
    case TableLayout::timing: return timing;
  }
  return detection;
}

int table_decimals(TableLayout layout) { return layout == TableLayout::ocr ? 4 : 2; }

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError(where, "unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

std::string grid(const std::vector<std::vector<std::string>>& cells, TableFormat format) {
  std::string out;
  if (format == TableFormat::csv) {
    for (const auto& row : cells) {
      for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + csv_field(row[c]);
      out += "\n";
    }
    return out;
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  // Widths in code points so Bengali labels still line up.
  const auto display = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
  };
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display(row[c]));
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const std::string pad(width[c] - display(cells[r][c]), ' ');
      if (c) line += "  ";
      line += c == 0 ? cells[r][c] + pad : pad + cells[r][c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      out += std::string(total, '-') + "\n";
    }
  }
  return out;
}

}  // namespace

std::string render_table(std::span<const TableRow> rows, TableLayout layout, TableFormat format) {
  const auto& columns = table_columns(layout);
  const int decimals = table_decimals(layout);
  std::vector<std::vector<std::string>> cells{columns};
  for (const auto& row : rows) {
    if (row.values.size() + 1 != columns.size())
      throw DataError("row '" + row.label + "' has " + std::to_string(row.values.size()) + " values, layout expects " +
                      std::to_string(columns.size() - 1));
    std::vector<std::string> line{row.label};
    for (const auto& v : row.values) line.push_back(v ? detail::fixed(*v, decimals) : "-");
    cells.push_back(std::move(line));
  }
  return grid(cells, format);
}

std::vector<TableRow> parse_table_csv(std::string_view csv, TableLayout layout) {
  const auto& columns = table_columns(layout);
  const auto lines = detail::lines(csv);
  if (lines.empty()) throw ParseError("line 1", "missing header");
  if (csv_split(lines[0], "line 1") != columns) throw ParseError("line 1", "header does not match the layout");
  std::vector<TableRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1);
    auto fields = csv_split(lines[i], where);
    if (fields.size() != columns.size()) throw ParseError(where, "column count mismatch");
    TableRow row{std::move(fields[0]), {}};
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (fields[c] == "-") {
        row.values.emplace_back(std::nullopt);
        continue;
      }
      const auto v = detail::parse_double(fields[c]);
      if (!v) throw ParseError(where, "not a number: '" + fields[c] + "'");
      row.values.emplace_back(*v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_scenario_summary(std::span<const ScenarioResult> results, TableFormat format) {
  std::vector<std::vector<std::string>> cells{
      {"Scenario", "Branch", "Stage 1 epochs", "Stage 1 end", "Stage 2 epochs", "Stage 2 end", "Total", "Best mAP"}};
  for (const auto& r : results) {
    const TraceSummary s = summarize(r.trace);
    cells.push_back({r.spec.name, to_string(s.branch), std::to_string(s.stage1_epochs), to_string(s.stage1_end),
                     std::to_string(s.stage2_epochs), to_string(s.stage2_end),
                     std::to_string(s.stage1_epochs + s.stage2_epochs), detail::fixed(s.best_map, 4)});
  }
  return grid(cells, format);
}

}  // namespace alpr
