// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deid/inpaint.hpp"
#include "deid/metrics.hpp"
#include "deid/redact.hpp"
#include "deid/scrub.hpp"
#include "deid/synth.hpp"

namespace deid::pipeline {

struct PipelineConfig {
  std::string input_dir;
  std::string output_dir;
  std::string policy_path;  // empty: embedded default table
  std::string key_env = "DEID_KEY";
  std::string key_file;  // takes precedence over key_env when set
  std::string detector = "reference";
  redact::DetectorParams detector_params;
  inpaint::InpaintConfig inpaint;
  inpaint::BackendConfig backend;
  std::string backend_prompt;  // modality context for the external backend
  int workers = 0;             // 0: library default
  uint64_t seed = 0;
  bool fail_hard = false;
};

struct FileRecord {
  std::string input;
  std::string status;  // ok | quarantined | skipped
  std::string reason;
  int frames = 0;
  int boxes = 0;
  bool residual_clean = true;  // verification re-pass found no boxes
  bool used_fallback = false;  // external backend fell back to telea
  scrub::ScrubReport scrub_report;

  std::string to_json_line() const;
};

struct Summary {
  int files = 0, ok = 0, quarantined = 0, skipped = 0;
  int total_boxes = 0;
  int metadata_findings = 0;
  int residual_files = 0;  // files whose re-pass still detected text
  std::vector<FileRecord> records;

  bool clean() const {
    return quarantined == 0 && skipped == 0 && metadata_findings == 0 &&
           residual_files == 0;
  }
};

// Full de-identification batch: parse, scrub, detect, redact, sequester,
// inpaint, composite, verify, write. PNG inputs take the pixel-only path.
Summary run_deid(const PipelineConfig& config);

// Synthetic corpus entry point; optionally fabricates phantom clean images
// first when the clean directory has none.
Summary run_synth(const PipelineConfig& config, const synth::SynthConfig& synth_config,
                  int count, int make_cleans = 0, int clean_size = 512);

struct EvalConfig {
  std::string corpus_dir;   // manifest.csv, *_clean.png, *_mask.png
  std::string outputs_dir;  // run_deid outputs for the same corpus
  std::string report_dir;   // defaults to outputs_dir
  std::string pred_csv;     // optional classifier predictions (true,pred)
  std::string mask_source = "pred";  // pred | truth-boxes | truth-glyphs
};

struct EvalResult {
  metrics::CorpusSummary summary;
  // Micro-averaged detection counts across the corpus.
  metrics::PixelConfusion detection_total;
  metrics::MacroPrf macro;
  bool has_macro = false;
  std::string report_csv_path;
};

EvalResult run_eval(const EvalConfig& config);

// Standalone re-audit of an output tree: metadata revalidation plus pixel
// re-detection. Summary.clean() decides the exit status.
Summary run_verify(const PipelineConfig& config);

}  // namespace deid::pipeline
