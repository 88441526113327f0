// alprkit: command-line front end for the toolkit.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include "alpr/annot.hpp"
#include "alpr/augment.hpp"
#include "alpr/detmetrics.hpp"
#include "alpr/error.hpp"
#include "alpr/raster.hpp"
#include "alpr/scheduler.hpp"
#include "alpr/seqdecode.hpp"
#include "alpr/simharness.hpp"
#include "alpr/textmetrics.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace alpr;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string output_dir = "alprkit-out";
  std::string format = "text";
  int verbosity = 0;

  TableFormat table_format() const { return format == "csv" ? TableFormat::csv : TableFormat::text; }
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text)) throw DataError("cannot write " + p.string());
}

void report_warnings(const Globals& g, const std::string& where, const Warnings& w) {
  if (g.verbosity < 1) return;
  for (const auto& msg : w) std::cerr << "warning: " << where << ": " << msg << '\n';
}

/// Files under `root` with the given extension, sorted, as paths relative to root.
std::vector<fs::path> files_with_ext(const fs::path& root, std::initializer_list<std::string_view> exts) {
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::array<int, 2> parse_size(const std::string& s) {
  int w = 0, h = 0;
  char x = 0;
  std::istringstream in(s);
  if (!(in >> w >> x >> h) || x != 'x' || w <= 0 || h <= 0 || !in.eof())
    throw CLI::ValidationError("--image-size", "expected WIDTHxHEIGHT, got '" + s + "'");
  return {w, h};
}

// --- convert -----------------------------------------------------------------

struct ConvertArgs {
  std::string from, to, input, classes, image_size;
};

int cmd_convert(const Globals& g, const ConvertArgs& a) {
  ClassTable classes;
  if (!a.classes.empty()) classes = ClassTable::parse(read_text(a.classes));
  std::optional<std::array<int, 2>> size;
  if (!a.image_size.empty()) size = parse_size(a.image_size);
  if (a.from == "yolo" && !size) throw CLI::ValidationError("--image-size", "required for yolo input");
  if (a.to == "voc" && classes.size() == 0) throw CLI::ValidationError("--classes", "required for voc output");

  const fs::path in_root = a.input;
  const fs::path out_root = g.output_dir;
  const auto inputs = files_with_ext(in_root, {a.from == "voc" ? ".xml" : ".txt"});
  if (inputs.empty()) throw DataError("no " + a.from + " files under " + in_root.string());

  std::size_t warnings = 0;
  for (const auto& rel : inputs) {
    Warnings w;
    AnnotatedImage img;
    const std::string text = read_text(in_root / rel);
    try {
      img = a.from == "voc" ? parse_voc(text, classes, &w) : parse_yolo(text, (*size)[0], (*size)[1], &w);
    } catch (const ParseError& e) {
      throw ParseError(rel.generic_string() + ": " + e.where(), e.what());
    }
    report_warnings(g, rel.generic_string(), w);
    warnings += w.size();

    fs::path out = out_root / rel;
    if (a.to == "yolo") {
      out.replace_extension(".txt");
      write_text(out, emit_yolo(img));
    } else if (a.to == "voc") {
      out.replace_extension(".xml");
      write_text(out, emit_voc(img, classes, img.source_id.empty() ? rel.stem().string() : img.source_id));
    } else {
      out.replace_extension(".pgm");
      std::ostringstream pgm;
      write_pgm(rasterize_mask(img), pgm);
      write_text(out, pgm.str());
    }
  }
  if (a.from == "voc" && a.to != "voc") write_text(out_root / "classes.txt", classes.to_text());
  std::cout << "converted " << inputs.size() << " file(s) " << a.from << " -> " << a.to << ", " << warnings
            << " warning(s)\n";
  return 0;
}

// --- augment -----------------------------------------------------------------

struct AugmentArgs {
  std::string input, preset_file;
  int stage = 1;
  int count = 0;
};

int cmd_augment(const Globals& g, const AugmentArgs& a) {
  AugmentationPhasePreset preset = a.stage == 1 ? stage1_preset() : stage2_preset();
  if (!a.preset_file.empty()) preset = parse_preset_overrides(read_text(a.preset_file), preset);
  preset.validate();

  const fs::path root = a.input;
  std::vector<LabeledImage> batch;
  std::size_t skipped = 0;
  for (const auto& rel : files_with_ext(root, {".png", ".jpg", ".jpeg"})) {
    LabeledImage item;
    try {
      item.pixels = read_image(root / rel);
    } catch (const DataError& e) {
      std::cerr << "warning: skipping " << rel.generic_string() << ": " << e.what() << '\n';
      ++skipped;
      continue;
    }
    fs::path label = root / rel;
    label.replace_extension(".txt");
    Warnings w;
    if (fs::exists(label))
      item.labels = parse_yolo(read_text(label), item.pixels.width(), item.pixels.height(), &w);
    item.labels.width = item.pixels.width();
    item.labels.height = item.pixels.height();
    item.labels.source_id = rel.generic_string();
    report_warnings(g, label.string(), w);
    batch.push_back(std::move(item));
  }
  if (batch.empty()) throw DataError("no decodable images under " + root.string());

  const fs::path out_root = g.output_dir;
  fs::create_directories(out_root);
  std::size_t n_mosaic = 0, n_mixup = 0, n_paste = 0, n_flip = 0;
  for (int i = 0; i < a.count; ++i) {
    const auto item = augment_item(batch, static_cast<std::size_t>(i) % batch.size(), preset, g.seed,
                                   static_cast<std::uint64_t>(i));
    char stem[32];
    std::snprintf(stem, sizeof stem, "aug_%05d", i);
    write_png(item.sample.pixels, out_root / (std::string(stem) + ".png"));
    write_text(out_root / (std::string(stem) + ".txt"), emit_yolo(item.sample.labels));
    n_mosaic += item.applied.mosaic;
    n_mixup += item.applied.mixup;
    n_paste += item.applied.copy_paste;
    n_flip += item.applied.hflip;
  }

  const double n = std::max(a.count, 1);
  const std::pair<const char*, double> rows[] = {{"mosaic", preset.mosaic_p},
                                                 {"mixup", preset.mixup_p},
                                                 {"copy-paste", preset.copypaste_p},
                                                 {"hflip", preset.hflip_p}};
  const std::size_t counts[] = {n_mosaic, n_mixup, n_paste, n_flip};
  std::cout << "wrote " << a.count << " augmented pair(s) from " << batch.size() << " image(s); skipped " << skipped
            << '\n';
  char line[128];
  if (g.format == "csv") std::cout << "Operation,Applied(%),Preset(%)\n";
  else std::cout << "Operation   Applied(%)  Preset(%)\n" << std::string(33, '-') << '\n';
  for (int k = 0; k < 4; ++k) {
    const char* fmt = g.format == "csv" ? "%s,%.2f,%.2f\n" : "%-10s  %10.2f  %9.2f\n";
    std::snprintf(line, sizeof line, fmt, rows[k].first, 100.0 * counts[k] / n, 100.0 * rows[k].second);
    std::cout << line;
  }
  return 0;
}

// --- eval-det ----------------------------------------------------------------

struct EvalDetArgs {
  std::string preds, gt, image_size, label = "model";
  double iou = kHitIouThreshold;
  double conf_cutoff = 0.0;
};

int cmd_eval_det(const Globals& g, const EvalDetArgs& a) {
  const auto preds = parse_predictions(read_text(a.preds));
  const fs::path root = a.gt;
  std::map<std::string, AnnotatedImage> gts;
  ClassTable classes;
  for (const auto& rel : files_with_ext(root, {".xml"})) {
    Warnings w;
    gts[rel.stem().string()] = parse_voc(read_text(root / rel), classes, &w);
    report_warnings(g, rel.generic_string(), w);
  }
  const auto yolo = files_with_ext(root, {".txt"});
  if (!yolo.empty() && !a.image_size.empty()) {
    const auto size = parse_size(a.image_size);
    for (const auto& rel : yolo) gts[rel.stem().string()] = parse_yolo(read_text(root / rel), size[0], size[1]);
  }
  if (gts.empty()) throw DataError("no ground-truth files under " + root.string());

  std::vector<std::string> unknown;
  for (const auto& [id, _] : preds)
    if (!gts.count(id)) unknown.push_back(id);
  if (!unknown.empty()) {
    std::string list;
    for (const auto& id : unknown) list += (list.empty() ? "" : ", ") + id;
    throw DataError("predictions for image id(s) without ground truth: " + list);
  }

  std::vector<ImageEval> images;
  for (const auto& [id, img] : gts) {
    ImageEval e;
    for (const auto& lb : img.boxes) e.gts.push_back(lb.box);
    if (auto it = preds.find(id); it != preds.end()) e.preds = it->second;
    images.push_back(std::move(e));
  }
  EvalOptions options;
  options.iou_threshold = a.iou;
  options.hit_threshold = a.iou;
  options.confidence_cutoff = a.conf_cutoff;
  const EvalOutcome r = evaluate_dataset(images, options);
  const std::vector<TableRow> rows{
      {a.label, {100 * r.accuracy, 100 * r.precision, 100 * r.recall, 100 * r.f1, 100 * r.mean_iou}}};
  std::cout << render_table(rows, TableLayout::detection, g.table_format());
  if (g.format == "text")
    std::cout << "images " << r.n_images << "  tp " << r.tp << "  fp " << r.fp << "  fn " << r.fn << '\n';
  return 0;
}

// --- eval-ocr ----------------------------------------------------------------

struct EvalOcrArgs {
  std::string pairs, aggregation = "micro", unit = "scalar", label = "model";
  std::optional<double> val_loss;
};

int cmd_eval_ocr(const Globals& g, const EvalOcrArgs& a) {
  const auto pairs = parse_ocr_tsv(read_text(a.pairs));
  ScoreOptions options;
  options.aggregation = a.aggregation == "macro" ? Aggregation::macro : Aggregation::micro;
  options.unit = a.unit == "grapheme" ? CharUnit::grapheme : CharUnit::scalar;
  const OcrScore s = score_corpus(pairs, options);
  const std::vector<TableRow> rows{{a.label, {a.val_loss, s.cer, s.wer, s.levenshtein}}};
  std::cout << render_table(rows, TableLayout::ocr, g.table_format());
  return 0;
}

// --- decode ------------------------------------------------------------------

struct DecodeArgs {
  std::string logits, vocab, out;
  GenerationConfig config;
  bool no_early_stopping = false;
};

int cmd_decode(const Globals& g, DecodeArgs a) {
  a.config.early_stopping = !a.no_early_stopping;
  a.config.validate();
  const auto decoded = decode_fixture(fs::path(a.logits), fs::path(a.vocab), a.config);
  std::ostringstream out;
  if (g.format == "csv") out << "sample,transcript,log_score\n";
  for (const auto& d : decoded) {
    if (g.format == "csv")
      out << d.id << ',' << d.transcript.text() << ',' << d.best.log_score << '\n';
    else
      out << d.id << '\t' << d.transcript.text() << '\n';
  }
  if (a.out.empty())
    std::cout << out.str();
  else
    write_text(a.out, out.str());
  return 0;
}

// --- schedule ----------------------------------------------------------------

struct ScheduleArgs {
  std::string scenarios, config, resume, trace_out, only;
  bool live = false;
};

int cmd_schedule(const Globals& g, const ScheduleArgs& a) {
  SchedulerConfig config;
  if (!a.config.empty()) config = parse_scheduler_overrides(read_text(a.config), config);
  config.validate();

  SessionOptions options;
  if (!a.resume.empty()) options.resume = parse_trace(read_text(a.resume));
  std::ofstream trace_file;
  if (!a.trace_out.empty()) {
    if (fs::path(a.trace_out).has_parent_path()) fs::create_directories(fs::path(a.trace_out).parent_path());
    trace_file.open(a.trace_out, std::ios::binary);
    if (!trace_file) throw DataError("cannot write " + a.trace_out);
    // Replayed entries are written again so the file holds the whole session.
    options.trace_sink = &trace_file;
  }

  if (a.live) {
    const SessionTrace t = run_session(StreamTrainer(std::cin, std::cout), config, options);
    const TraceSummary s = summarize(t);
    std::cerr << "branch " << to_string(s.branch) << ", stage 1 " << s.stage1_epochs << " epoch(s) ("
              << to_string(s.stage1_end) << "), stage 2 " << s.stage2_epochs << " epoch(s) (" << to_string(s.stage2_end)
              << "), best mAP " << s.best_map << '\n';
    return 0;
  }

  auto specs = parse_scenarios(read_text(a.scenarios));
  if (!a.only.empty()) {
    std::erase_if(specs, [&](const TrajectorySpec& s) { return s.name != a.only; });
    if (specs.empty()) throw DataError("no scenario named '" + a.only + "'");
  }
  if (specs.empty()) throw DataError("scenario file is empty");
  if ((options.trace_sink || !options.resume.empty()) && specs.size() != 1)
    throw CLI::ValidationError("--resume/--trace-out", "need a single scenario; select one with --only");

  std::vector<ScenarioResult> results;
  if (specs.size() == 1) {
    results.push_back({specs[0], run_session(mock_trainer(specs[0], config), config, options)});
  } else {
    results = run_scenarios(specs, config);
    if (!g.output_dir.empty()) {
      for (const auto& r : results) {
        std::string lines;
        for (const auto& e : r.trace.entries) lines += to_json_line(e) + "\n";
        write_text(fs::path(g.output_dir) / "traces" / (r.spec.name + ".ndjson"), lines);
      }
    }
  }
  for (const auto& r : results) {
    const auto issues = validate_trace(r.trace, config);
    for (const auto& msg : issues) std::cerr << "warning: " << r.spec.name << ": " << msg << '\n';
  }
  std::cout << render_scenario_summary(results, g.table_format());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plate detection and recognition toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for randomized subcommands");
  app.add_option("--output-dir", g.output_dir, "Directory for generated files")->envname("ALPRKIT_OUTPUT_DIR");
  app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"text", "csv"}));
  app.add_flag("-v,--verbose", g.verbosity, "Print warnings (repeat for more)");

  ConvertArgs conv;
  auto* c = app.add_subcommand("convert", "Convert annotations between VOC, YOLO and mask formats");
  c->add_option("--from", conv.from, "Input format")->required()->check(CLI::IsMember({"voc", "yolo"}));
  c->add_option("--to", conv.to, "Output format")->required()->check(CLI::IsMember({"voc", "yolo", "mask"}));
  c->add_option("input", conv.input, "Input directory")->required();
  c->add_option("--classes", conv.classes, "Class table, one name per line");
  c->add_option("--image-size", conv.image_size, "WIDTHxHEIGHT for YOLO input");

  AugmentArgs aug;
  auto* ag = app.add_subcommand("augment", "Write augmented image/label pairs");
  ag->add_option("input", aug.input, "Directory of images with same-stem YOLO labels")->required();
  ag->add_option("--stage", aug.stage, "Augmentation phase")->required()->check(CLI::IsMember({1, 2}));
  ag->add_option("--count", aug.count, "Number of pairs to write")->required()->check(CLI::NonNegativeNumber);
  ag->add_option("--preset", aug.preset_file, "Preset overrides (key = value lines)");

  EvalDetArgs det;
  auto* ed = app.add_subcommand("eval-det", "Score detections against ground truth");
  ed->add_option("preds", det.preds, "Prediction file")->required();
  ed->add_option("gt", det.gt, "Ground-truth directory (VOC XML, or YOLO with --image-size)")->required();
  ed->add_option("--iou", det.iou, "IoU threshold for hits and true positives")->check(CLI::Range(0.0, 1.0));
  ed->add_option("--conf-cutoff", det.conf_cutoff, "Ignore predictions below this confidence");
  ed->add_option("--image-size", det.image_size, "WIDTHxHEIGHT for YOLO ground truth");
  ed->add_option("--label", det.label, "Row label");

  EvalOcrArgs ocr;
  auto* eo = app.add_subcommand("eval-ocr", "Score transcripts (CER, WER, Levenshtein)");
  eo->add_option("pairs", ocr.pairs, "TSV of id, prediction, ground truth")->required();
  eo->add_option("--aggregation", ocr.aggregation)->check(CLI::IsMember({"micro", "macro"}));
  eo->add_option("--unit", ocr.unit)->check(CLI::IsMember({"scalar", "grapheme"}));
  eo->add_option("--val-loss", ocr.val_loss, "Validation loss to show in the report");
  eo->add_option("--label", ocr.label, "Row label");

  DecodeArgs dec;
  auto* dc = app.add_subcommand("decode", "Beam-search decode a logit fixture");
  dc->add_option("logits", dec.logits, "Logit fixture")->required();
  dc->add_option("vocab", dec.vocab, "Vocabulary")->required();
  dc->add_option("--num-beams", dec.config.num_beams)->check(CLI::PositiveNumber);
  dc->add_option("--max-length", dec.config.max_length)->check(CLI::PositiveNumber);
  dc->add_option("--length-penalty", dec.config.length_penalty);
  dc->add_option("--no-repeat-ngram", dec.config.no_repeat_ngram_size)->check(CLI::NonNegativeNumber);
  dc->add_flag("--no-early-stopping", dec.no_early_stopping);
  dc->add_option("--out", dec.out, "Write transcripts here instead of standard output");

  ScheduleArgs sch;
  auto* sc = app.add_subcommand("schedule", "Run the two-stage training scheduler");
  auto* scen = sc->add_option("scenarios", sch.scenarios, "Scenario file for the mock trainer");
  auto* live = sc->add_flag("--live", sch.live, "Drive a trainer over stdin/stdout");
  scen->excludes(live);
  sc->add_option("--config", sch.config, "Scheduler overrides (key = value lines)");
  sc->add_option("--resume", sch.resume, "Trace of an interrupted run to replay first");
  sc->add_option("--trace-out", sch.trace_out, "Write the session trace here");
  sc->add_option("--only", sch.only, "Run only the named scenario");

  try {
    app.parse(argc, argv);
    if (*sc && sch.scenarios.empty() && !sch.live) throw CLI::RequiredError("scenarios or --live");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*c) return cmd_convert(g, conv);
    if (*ag) return cmd_augment(g, aug);
    if (*ed) return cmd_eval_det(g, det);
    if (*eo) return cmd_eval_ocr(g, ocr);
    if (*dc) return cmd_decode(g, dec);
    if (*sc) return cmd_schedule(g, sch);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
