// SPDX-License-Identifier: Apache-2.0
//
// deid: batch de-identification of DICOM and PNG medical images.
// Subcommands: run, synth, eval, verify, policy check.
// Exit codes: 0 clean, 2 findings present, 3 fatal configuration error.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "deid/pipeline.hpp"

using namespace deid;

namespace {

int exit_findings(const pipeline::Summary& summary) {
  return summary.clean() ? 0 : 2;
}

void print_summary(const pipeline::Summary& s) {
  std::printf("files %d  ok %d  quarantined %d  skipped %d  boxes %d\n", s.files,
              s.ok, s.quarantined, s.skipped, s.total_boxes);
  if (s.metadata_findings > 0) {
    std::printf("metadata findings: %d\n", s.metadata_findings);
  }
  if (s.residual_files > 0) {
    std::printf("files with residual pixel text: %d\n", s.residual_files);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DICOM/PNG de-identification pipeline"};
  app.require_subcommand(1);

  pipeline::PipelineConfig cfg;
  synth::SynthConfig synth_cfg;
  pipeline::EvalConfig eval_cfg;

  auto add_detector_flags = [&](CLI::App* cmd) {
    cmd->add_option("--detector", cfg.detector, "detector name (reference)");
    cmd->add_option("--intensity-floor", cfg.detector_params.intensity_floor,
                    "near-saturated threshold (8-bit)");
    cmd->add_option("--word-gap", cfg.detector_params.word_gap_factor,
                    "word gap as a multiple of the median glyph extent");
  };

  // --- run ---
  auto* run = app.add_subcommand("run", "de-identify a directory of images");
  run->add_option("--input,-i", cfg.input_dir, "input directory")->required();
  run->add_option("--output,-o", cfg.output_dir, "output directory")->required();
  run->add_option("--policy", cfg.policy_path, "policy table path (default: builtin)");
  run->add_option("--key-env", cfg.key_env, "environment variable holding the jitter key");
  run->add_option("--key-file", cfg.key_file, "file holding the jitter key");
  std::string backend = "telea";
  run->add_option("--backend", backend, "inpainting backend: telea|external");
  run->add_option("--radius", cfg.inpaint.radius, "inpainting radius (default 3)");
  run->add_option("--endpoint", cfg.backend.endpoint, "external backend endpoint");
  run->add_option("--prompt", cfg.backend_prompt,
                  "modality context prompt for the external backend");
  run->add_option("--workers", cfg.workers, "worker threads (0 = default)");
  run->add_option("--seed", cfg.seed, "run seed (recorded; pipeline is deterministic)");
  run->add_flag("--fail-hard", cfg.fail_hard, "abort the batch on any failure");
  add_detector_flags(run);

  // --- synth ---
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic overlay corpus");
  int synth_n = 100, make_cleans = 0, clean_size = 512;
  synth_cmd->add_option("--cleans", cfg.input_dir, "directory of clean PNG images")
      ->required();
  synth_cmd->add_option("--out", cfg.output_dir, "corpus output directory")->required();
  synth_cmd->add_option("--n", synth_n, "number of images to generate");
  synth_cmd->add_option("--seed", cfg.seed, "corpus seed");
  synth_cmd->add_option("--make-cleans", make_cleans,
                        "first synthesize this many phantom clean images");
  synth_cmd->add_option("--clean-size", clean_size, "phantom clean edge length");
  synth_cmd->add_option("--min-items", synth_cfg.min_items, "items per image, lower bound");
  synth_cmd->add_option("--max-items", synth_cfg.max_items, "items per image, upper bound");
  synth_cmd->add_option("--font-min", synth_cfg.font_min, "font height lower bound");
  synth_cmd->add_option("--font-max", synth_cfg.font_max, "font height upper bound");
  synth_cmd->add_option("--workers", cfg.workers, "worker threads");

  // --- eval ---
  auto* eval_cmd = app.add_subcommand("eval", "score pipeline outputs against a corpus");
  eval_cmd->add_option("--corpus", eval_cfg.corpus_dir, "synthetic corpus directory")
      ->required();
  eval_cmd->add_option("--outputs", eval_cfg.outputs_dir, "pipeline output directory")
      ->required();
  eval_cmd->add_option("--report-dir", eval_cfg.report_dir, "where to write reports");
  eval_cmd->add_option("--pred-csv", eval_cfg.pred_csv,
                       "classifier predictions (true,pred) for macro metrics");
  eval_cmd->add_option("--mask-source", eval_cfg.mask_source,
                       "restoration mask: pred|truth-boxes|truth-glyphs");

  // --- verify ---
  auto* verify_cmd = app.add_subcommand("verify", "re-audit a de-identified tree");
  verify_cmd->add_option("--input,-i", cfg.input_dir, "directory to audit")->required();
  verify_cmd->add_option("--policy", cfg.policy_path, "policy table path");
  add_detector_flags(verify_cmd);

  // --- policy check ---
  auto* policy_cmd = app.add_subcommand("policy", "policy table utilities");
  auto* policy_check = policy_cmd->add_subcommand("check", "validate a policy table");
  std::string policy_path;
  policy_check->add_option("path", policy_path, "policy file (default: builtin)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      cfg.inpaint.backend = backend == "external"
                                ? inpaint::InpaintConfig::Backend::External
                                : inpaint::InpaintConfig::Backend::Telea;
      if (backend != "telea" && backend != "external") {
        throw ConfigError("unknown backend " + backend);
      }
      auto summary = pipeline::run_deid(cfg);
      print_summary(summary);
      return exit_findings(summary);
    }
    if (synth_cmd->parsed()) {
      auto summary = pipeline::run_synth(cfg, synth_cfg, synth_n, make_cleans, clean_size);
      std::printf("generated %d images, %d overlay items\n", summary.files,
                  summary.total_boxes);
      return 0;
    }
    if (eval_cmd->parsed()) {
      auto result = pipeline::run_eval(eval_cfg);
      std::cout << metrics::summary_table(result.summary);
      auto micro = metrics::prf(result.detection_total);
      std::printf("micro            precision %.6f recall %.6f f1 %.6f\n",
                  micro.precision, micro.recall, micro.f1);
      if (result.has_macro) {
        std::printf("classifier macro precision %.6f recall %.6f f1 %.6f\n",
                    result.macro.precision, result.macro.recall, result.macro.f1);
      }
      std::printf("per-image rows: %s\n", result.report_csv_path.c_str());
      return 0;
    }
    if (verify_cmd->parsed()) {
      auto summary = pipeline::run_verify(cfg);
      print_summary(summary);
      for (const auto& rec : summary.records) {
        for (const auto& f : rec.scrub_report.residual) {
          std::printf("finding %s %s: %s\n", rec.input.c_str(), f.tag.str().c_str(),
                      f.reason.c_str());
        }
        if (!rec.residual_clean) {
          std::printf("finding %s: residual pixel text (%d boxes)\n",
                      rec.input.c_str(), rec.boxes);
        }
      }
      return exit_findings(summary);
    }
    if (policy_check->parsed()) {
      if (policy_path.empty()) {
        const auto& table = scrub::PolicyTable::default_table();
        std::printf("builtin policy: %zu entries, all 18 HIPAA categories covered\n",
                    table.entries().size());
      } else {
        std::ifstream in(policy_path, std::ios::binary);
        if (!in) throw ConfigError("cannot read " + policy_path);
        std::stringstream buf;
        buf << in.rdbuf();
        auto table = scrub::PolicyTable::parse(buf.str());
        std::printf("%s: %zu entries, all 18 HIPAA categories covered\n",
                    policy_path.c_str(), table.entries().size());
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 3;
  } catch (const PolicyError& e) {
    std::fprintf(stderr, "policy error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
