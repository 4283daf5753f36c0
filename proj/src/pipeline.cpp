// SPDX-License-Identifier: Apache-2.0
#include "deid/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"

#include "deid/dicom.hpp"
#include "deid/png_io.hpp"

namespace deid::pipeline {

namespace fs = std::filesystem;

namespace {

std::vector<uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::vector<uint8_t>& bytes) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

struct WorkItem {
  fs::path input;
  fs::path relative;
  bool is_dicom = false;
};

bool excluded_png(const fs::path& path) {
  std::string stem = path.stem().string();
  return stem.ends_with("_mask") || stem.ends_with("_clean") ||
         stem.find("_mask_f") != std::string::npos;
}

std::vector<WorkItem> discover(const std::string& input_dir) {
  std::vector<WorkItem> items;
  fs::path root(input_dir);
  if (!fs::is_directory(root)) throw ConfigError("input directory not found: " + input_dir);
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    if (ext == ".dcm") {
      items.push_back({entry.path(), fs::relative(entry.path(), root), true});
    } else if (ext == ".png" && !excluded_png(entry.path())) {
      items.push_back({entry.path(), fs::relative(entry.path(), root), false});
    }
  }
  std::sort(items.begin(), items.end(),
            [](const WorkItem& a, const WorkItem& b) { return a.input < b.input; });
  return items;
}

// Buffered outputs for one input: nothing is written until the whole file
// pipeline succeeded, so a crash leaves no partial outputs.
struct PendingOutputs {
  std::vector<std::pair<fs::path, std::vector<uint8_t>>> files;

  void add(fs::path path, std::vector<uint8_t> bytes) {
    files.emplace_back(std::move(path), std::move(bytes));
  }
  void flush() const {
    for (const auto& [path, bytes] : files) write_file(path, bytes);
  }
};

ImageFrame rewindow_with_scale(const ImageFrame& frame, const WindowScale& scale) {
  if (frame.bits == 8) return frame;
  ImageFrame out = ImageFrame::make(frame.width, frame.height, frame.channels, 8);
  if (scale.hi <= scale.lo) return out;
  double inv = 255.0 / double(scale.hi - scale.lo);
  for (size_t i = 0; i < frame.samples.size(); ++i) {
    double v = (double(frame.samples[i]) - scale.lo) * inv;
    long r = std::lround(v);
    out.samples[i] = uint16_t(std::clamp<long>(r, 0, 255));
  }
  return out;
}

struct PixelPathResult {
  std::vector<ImageFrame> final_frames;
  std::vector<Mask> masks;
  std::vector<redact::TextBox> boxes;
  bool residual_clean = true;
  bool used_fallback = false;
};

// Shared pixel path: detect, redact, inpaint, composite, verify.
PixelPathResult process_frames(const std::vector<ImageFrame>& frames,
                               const redact::Detector& detector,
                               const PipelineConfig& cfg, const std::string& file_id) {
  PixelPathResult result;
  for (size_t f = 0; f < frames.size(); ++f) {
    const ImageFrame& original = frames[f];
    WindowScale scale;
    ImageFrame view8 = window_to_8bit(original, &scale);

    std::vector<redact::TextBox> boxes = detector.detect(view8);
    for (auto& b : boxes) b.frame_index = int(f);

    ImageFrame final_frame = original;
    Mask mask = Mask::zeros(original.width, original.height);
    if (!boxes.empty()) {
      auto [redacted8, box_mask] = redact::redact(view8, boxes);
      mask = box_mask;

      ImageFrame filled8;
      if (cfg.inpaint.backend == inpaint::InpaintConfig::Backend::External) {
        inpaint::BackendRequest request;
        request.masked_frame = redacted8;
        request.mask = mask;
        request.prompt = cfg.backend_prompt;
        request.request_id = file_id + "#" + std::to_string(f);
        try {
          filled8 = inpaint::external_inpaint(request, cfg.backend);
        } catch (const BackendError&) {
          if (cfg.backend.fail_hard) throw;
          filled8 = inpaint::telea_fill(redacted8, mask, cfg.inpaint);
          result.used_fallback = true;
        }
      } else {
        filled8 = inpaint::telea_fill(redacted8, mask, cfg.inpaint);
      }

      // back to original depth inside the mask only
      ImageFrame restored = original;
      for (int y = 0; y < original.height; ++y) {
        for (int x = 0; x < original.width; ++x) {
          if (!mask.at(x, y)) continue;
          for (int c = 0; c < original.channels; ++c) {
            uint16_t v8 = filled8.at(x, y, c);
            restored.at(x, y, c) =
                original.bits == 16 ? unwindow_value(uint8_t(v8), scale) : v8;
          }
        }
      }
      final_frame = inpaint::composite_identity(original, restored, mask);
    }

    // verification re-pass under the same window
    ImageFrame verify_view = rewindow_with_scale(final_frame, scale);
    if (!detector.detect(verify_view).empty()) result.residual_clean = false;

    result.final_frames.push_back(std::move(final_frame));
    result.masks.push_back(std::move(mask));
    for (auto& b : boxes) result.boxes.push_back(std::move(b));
  }
  return result;
}

const scrub::PolicyTable& load_policy(const std::string& path) {
  if (path.empty()) return scrub::PolicyTable::default_table();
  static std::map<std::string, scrub::PolicyTable> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(path);
  if (it != cache.end()) return it->second;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read policy table " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto [pos, _] = cache.emplace(path, scrub::PolicyTable::parse(buf.str()));
  return pos->second;
}

scrub::JitterKey load_key(const PipelineConfig& cfg) {
  if (!cfg.key_file.empty()) return scrub::JitterKey::from_file(cfg.key_file);
  return scrub::JitterKey::from_env(cfg.key_env);
}

std::string mask_name(const fs::path& relative, int frame, bool multi) {
  fs::path base = relative;
  base.replace_extension();
  if (multi) return base.string() + "_mask_f" + std::to_string(frame) + ".png";
  return base.string() + "_mask.png";
}

}  // namespace

std::string FileRecord::to_json_line() const {
  nlohmann::json j;
  j["file"] = input;
  j["status"] = status;
  if (!reason.empty()) j["reason"] = reason;
  j["frames"] = frames;
  j["boxes"] = boxes;
  j["residual_clean"] = residual_clean;
  if (used_fallback) j["inpaint_fallback"] = true;
  j["scrub"] = nlohmann::json::parse(scrub_report.to_json_line(input))["actions"];
  j["scrub_pass"] = scrub_report.pass;
  j["scrub_residual"] = int(scrub_report.residual.size());
  return j.dump();
}

Summary run_deid(const PipelineConfig& cfg) {
  if (cfg.output_dir.empty()) throw ConfigError("output directory is required");
  if (fs::weakly_canonical(fs::path(cfg.input_dir)) ==
      fs::weakly_canonical(fs::path(cfg.output_dir))) {
    throw ConfigError("output dir must differ from input dir");
  }

  auto items = discover(cfg.input_dir);
  bool any_dicom = std::any_of(items.begin(), items.end(),
                               [](const WorkItem& w) { return w.is_dicom; });

  const scrub::PolicyTable& policy = load_policy(cfg.policy_path);
  std::unique_ptr<scrub::JitterKey> key;
  if (any_dicom) key = std::make_unique<scrub::JitterKey>(load_key(cfg));

  auto detector = redact::make_detector(cfg.detector, cfg.detector_params);

#ifdef _OPENMP
  if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
#endif

  fs::create_directories(cfg.output_dir);
  std::vector<FileRecord> records(items.size());

#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < (long long)items.size(); ++i) {
    const WorkItem& item = items[size_t(i)];
    FileRecord rec;
    rec.input = item.relative.string();
    try {
      PendingOutputs pending;
      if (item.is_dicom) {
        auto bytes = read_file(item.input);
        dicom::DataSet ds = dicom::parse_dicom(bytes);
        auto [scrubbed, report] = scrub::scrub(ds, policy, *key);
        rec.scrub_report = report;
        if (report.quarantined) {
          rec.status = "quarantined";
          rec.reason = report.quarantine_reason;
          records[size_t(i)] = std::move(rec);
          continue;
        }

        dicom::DataSet out_ds = std::move(scrubbed);
        if (out_ds.find(dicom::tags::kPixelData)) {
          std::vector<ImageFrame> frames;
          try {
            frames = dicom::get_frames(out_ds);
          } catch (const UnsupportedCodecError& e) {
            rec.status = "skipped";
            rec.reason = e.what();
            records[size_t(i)] = std::move(rec);
            continue;
          }
          rec.frames = int(frames.size());
          auto pixel = process_frames(frames, *detector, cfg, rec.input);
          rec.boxes = int(pixel.boxes.size());
          rec.residual_clean = pixel.residual_clean;
          rec.used_fallback = pixel.used_fallback;
          out_ds = dicom::put_frames(std::move(out_ds), pixel.final_frames);

          for (size_t f = 0; f < pixel.masks.size(); ++f) {
            pending.add(fs::path(cfg.output_dir) /
                            mask_name(item.relative, int(f), pixel.masks.size() > 1 ||
                                                                 item.is_dicom),
                        encode_mask_png(pixel.masks[f]));
          }
          std::ostringstream csv;
          redact::sequester_header(csv);
          redact::sequester(csv, rec.input, pixel.boxes);
          std::string csv_str = csv.str();
          fs::path csv_path = item.relative;
          csv_path.replace_extension();
          pending.add(fs::path(cfg.output_dir) / (csv_path.string() + "_text.csv"),
                      std::vector<uint8_t>(csv_str.begin(), csv_str.end()));
        }
        pending.add(fs::path(cfg.output_dir) / item.relative,
                    dicom::serialize_dicom(out_ds));
      } else {
        ImageFrame frame = read_png(item.input.string());
        std::vector<ImageFrame> frames{std::move(frame)};
        auto pixel = process_frames(frames, *detector, cfg, rec.input);
        rec.frames = 1;
        rec.boxes = int(pixel.boxes.size());
        rec.residual_clean = pixel.residual_clean;
        rec.used_fallback = pixel.used_fallback;

        pending.add(fs::path(cfg.output_dir) / item.relative,
                    encode_png(pixel.final_frames[0]));
        pending.add(fs::path(cfg.output_dir) / mask_name(item.relative, 0, false),
                    encode_mask_png(pixel.masks[0]));
        std::ostringstream csv;
        redact::sequester_header(csv);
        redact::sequester(csv, rec.input, pixel.boxes);
        std::string csv_str = csv.str();
        fs::path csv_path = item.relative;
        csv_path.replace_extension();
        pending.add(fs::path(cfg.output_dir) / (csv_path.string() + "_text.csv"),
                    std::vector<uint8_t>(csv_str.begin(), csv_str.end()));
      }
      pending.flush();
      rec.status = "ok";
    } catch (const std::exception& e) {
      rec.status = "quarantined";
      rec.reason = e.what();
    }
    records[size_t(i)] = std::move(rec);
  }

  Summary summary;
  summary.files = int(records.size());
  std::ofstream report(fs::path(cfg.output_dir) / "report.jsonl", std::ios::binary);
  for (auto& rec : records) {
    if (rec.status == "ok") ++summary.ok;
    else if (rec.status == "skipped") ++summary.skipped;
    else ++summary.quarantined;
    summary.total_boxes += rec.boxes;
    summary.metadata_findings += int(rec.scrub_report.residual.size());
    if (!rec.residual_clean) ++summary.residual_files;
    report << rec.to_json_line() << '\n';
    summary.records.push_back(std::move(rec));
  }
  if (cfg.fail_hard && (summary.quarantined > 0 || summary.residual_files > 0)) {
    throw Error("fail-hard: batch had quarantined files or residual findings");
  }
  return summary;
}

Summary run_synth(const PipelineConfig& cfg, const synth::SynthConfig& synth_cfg,
                  int count, int make_cleans, int clean_size) {
#ifdef _OPENMP
  if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
#endif
  if (make_cleans > 0) {
    synth::make_phantom_cleans(cfg.input_dir, make_cleans, clean_size, cfg.seed + 1);
  }
  auto manifest = synth::generate_corpus(cfg.input_dir, cfg.output_dir, count,
                                         synth_cfg, cfg.seed);
  Summary summary;
  summary.files = count;
  summary.ok = count;
  summary.total_boxes = int(manifest.size());
  return summary;
}

EvalResult run_eval(const EvalConfig& cfg) {
  namespace mt = deid::metrics;
  EvalResult result;
  fs::path corpus(cfg.corpus_dir);
  fs::path outputs(cfg.outputs_dir);
  fs::path report_dir = cfg.report_dir.empty() ? outputs : fs::path(cfg.report_dir);
  fs::create_directories(report_dir);

  auto manifest = synth::read_manifest((corpus / "manifest.csv").string());
  std::map<std::string, std::vector<synth::ManifestRow>> by_image;
  for (auto& row : manifest) by_image[row.image_id].push_back(row);

  // every corpus image participates, including ones with no items
  std::set<std::string> ids;
  for (const auto& entry : fs::directory_iterator(corpus)) {
    std::string name = entry.path().filename().string();
    if (name.ends_with("_clean.png")) {
      ids.insert(name.substr(0, name.size() - std::string("_clean.png").size()));
    }
  }

  std::vector<mt::ReportRow> rows;
  for (const auto& id : ids) {
    Mask glyph_truth = read_mask_png((corpus / (id + "_mask.png")).string());
    Mask box_truth = Mask::zeros(glyph_truth.width, glyph_truth.height);
    auto it = by_image.find(id);
    if (it != by_image.end()) {
      for (const auto& row : it->second) {
        for (int y = row.y; y < row.y + row.h; ++y) {
          for (int x = row.x; x < row.x + row.w; ++x) box_truth.set(x, y);
        }
      }
    }
    Mask pred = read_mask_png((outputs / (id + "_mask.png")).string());

    mt::PixelConfusion confusion = mt::mask_confusion(pred, box_truth);
    result.detection_total.tp += confusion.tp;
    result.detection_total.fp += confusion.fp;
    result.detection_total.fn += confusion.fn;
    result.detection_total.tn += confusion.tn;
    mt::Prf p = mt::prf(confusion);

    mt::ReportRow row;
    row.image_id = id;
    row.values = {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};

    const Mask* eval_mask = &pred;
    if (cfg.mask_source == "truth-boxes") eval_mask = &box_truth;
    else if (cfg.mask_source == "truth-glyphs") eval_mask = &glyph_truth;
    else if (cfg.mask_source != "pred") {
      throw ConfigError("unknown mask source " + cfg.mask_source);
    }
    if (eval_mask->count() > 0) {
      ImageFrame clean = read_png((corpus / (id + "_clean.png")).string());
      ImageFrame restored = read_png((outputs / (id + ".png")).string());
      mt::MaskedMetrics mm = mt::masked_metrics(clean, restored, *eval_mask);
      row.values.emplace_back("sad", mm.sad);
      row.values.emplace_back("ssd", mm.ssd);
      row.values.emplace_back("mse", mm.mse);
      row.values.emplace_back("rmse", mm.rmse);
      row.values.emplace_back("ssim", mm.ssim);
      row.values.emplace_back("n_mask", double(mm.n_mask));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("run_eval: no corpus images found");

  result.summary = mt::corpus_report(rows);
  result.report_csv_path = (report_dir / "eval_images.csv").string();
  mt::write_report_csv(result.report_csv_path, rows);

  if (!cfg.pred_csv.empty()) {
    std::ifstream in(cfg.pred_csv, std::ios::binary);
    if (!in) throw ConfigError("cannot read predictions csv " + cfg.pred_csv);
    std::vector<std::pair<std::string, std::string>> pairs;
    std::set<std::string> labels;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      size_t comma = line.find(',');
      if (comma == std::string::npos) throw Error("bad predictions row: " + line);
      std::string truth = line.substr(0, comma);
      std::string pred = line.substr(comma + 1);
      if (first && (truth == "true" || truth == "truth")) {
        first = false;
        continue;
      }
      first = false;
      pairs.emplace_back(truth, pred);
      labels.insert(truth);
      labels.insert(pred);
    }
    std::vector<std::string> classes(labels.begin(), labels.end());
    auto index_of = [&](const std::string& s) {
      return int(std::lower_bound(classes.begin(), classes.end(), s) - classes.begin());
    };
    auto cm = mt::ConfusionMatrixK::make(int(classes.size()));
    for (const auto& [t, p] : pairs) ++cm.at(index_of(t), index_of(p));
    result.macro = mt::macro_prf(cm);
    result.has_macro = true;
  }

  std::ofstream txt(report_dir / "eval_summary.txt", std::ios::binary);
  txt << mt::summary_table(result.summary);
  {
    mt::Prf micro = mt::prf(result.detection_total);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "micro            precision %.6f recall %.6f f1 %.6f\n",
                  micro.precision, micro.recall, micro.f1);
    txt << buf;
    if (result.has_macro) {
      std::snprintf(buf, sizeof(buf),
                    "classifier macro precision %.6f recall %.6f f1 %.6f\n",
                    result.macro.precision, result.macro.recall, result.macro.f1);
      txt << buf;
    }
  }
  std::ofstream js(report_dir / "eval_summary.json", std::ios::binary);
  js << mt::summary_json(result.summary) << '\n';
  return result;
}

Summary run_verify(const PipelineConfig& cfg) {
  const scrub::PolicyTable& policy = load_policy(cfg.policy_path);
  auto detector = redact::make_detector(cfg.detector, cfg.detector_params);
  auto items = discover(cfg.input_dir);

  Summary summary;
  summary.files = int(items.size());
  for (const auto& item : items) {
    FileRecord rec;
    rec.input = item.relative.string();
    rec.status = "ok";
    try {
      std::vector<ImageFrame> frames;
      if (item.is_dicom) {
        auto bytes = read_file(item.input);
        dicom::DataSet ds = dicom::parse_dicom(bytes);
        auto report = scrub::revalidate(ds, policy);
        rec.scrub_report = report;
        summary.metadata_findings += int(report.residual.size());
        if (ds.find(dicom::tags::kPixelData)) frames = dicom::get_frames(ds);
      } else {
        frames.push_back(read_png(item.input.string()));
      }
      rec.frames = int(frames.size());
      for (const auto& frame : frames) {
        auto boxes = detector->detect(frame);
        rec.boxes += int(boxes.size());
      }
      summary.total_boxes += rec.boxes;
      if (rec.boxes > 0) {
        rec.residual_clean = false;
        ++summary.residual_files;
      }
      ++summary.ok;
    } catch (const std::exception& e) {
      rec.status = "quarantined";
      rec.reason = e.what();
      ++summary.quarantined;
    }
    summary.records.push_back(std::move(rec));
  }
  return summary;
}

}  // namespace deid::pipeline
