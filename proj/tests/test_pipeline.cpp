// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "deid/digest.hpp"
#include "deid/dicom.hpp"
#include "deid/pipeline.hpp"
#include "deid/png_io.hpp"
#include "deid/rng.hpp"
#include "support.hpp"

using namespace deid;
using namespace deid::pipeline;
namespace fs = std::filesystem;

namespace {

const char* kKeyEnv = "DEID_TEST_KEY";

void ensure_key() {
  setenv(kKeyEnv, "unit-test-key-0123456789abcdef", 1);
}

PipelineConfig base_config(const std::string& in, const std::string& out) {
  PipelineConfig cfg;
  cfg.input_dir = in;
  cfg.output_dir = out;
  cfg.key_env = kKeyEnv;
  return cfg;
}

std::string tree_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::string rel = fs::relative(f, dir).string();
    h.update(rel.data(), rel.size());
    h.update(bytes.data(), bytes.size());
  }
  auto d = h.finish();
  return Sha256::hex(d);
}

// DICOM file with a burned-in overlay, built through the library API.
std::vector<uint8_t> dicom_with_text(const std::string& pid, int bits,
                                     const std::string& text, uint64_t seed) {
  using namespace deid::dicom;
  Pcg32 rng(seed);
  ImageFrame frame = ImageFrame::make(256, 128, 1, bits);
  for (auto& s : frame.samples) {
    s = uint16_t(bits == 16 ? rng.range(0, 52000) : rng.range(10, 180));
  }
  synth::OverlayItem item{text, 20, 30, 14, 0.0, 255, 2};
  auto [overlaid, truth] = synth::render_overlay(frame, {item});

  DataSet ds;
  ds.set(DataElement::make({0x0002, 0x0010}, Vr::UI, kExplicitLEUid));
  ds.set(DataElement::make({0x0008, 0x0020}, Vr::DA, "20210401"));
  ds.set(DataElement::make({0x0008, 0x0060}, Vr::CS, "US"));
  ds.set(DataElement::make({0x0010, 0x0010}, Vr::PN, "DOE^JANE"));
  ds.set(DataElement::make({0x0010, 0x0020}, Vr::LO, pid));
  ds.set(DataElement::make_us({0x0028, 0x0002}, 1));
  ds.set(DataElement::make_us({0x0028, 0x0010}, 128));
  ds.set(DataElement::make_us({0x0028, 0x0011}, 256));
  ds.set(DataElement::make_us({0x0028, 0x0100}, uint16_t(bits)));
  ds.set(DataElement::make_bytes({0x7FE0, 0x0010}, bits == 16 ? Vr::OW : Vr::OB, {}));
  ds = put_frames(std::move(ds), {overlaid});
  return serialize_dicom(ds);
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("png corpus end to end: no residue, identity outside masks, determinism") {
  ensure_key();
  testsupport::TempDir cleans("pl_cleans");
  testsupport::TempDir corpus("pl_corpus");
  testsupport::TempDir out_a("pl_out_a");
  testsupport::TempDir out_b("pl_out_b");

  synth::make_phantom_cleans(cleans.str(), 2, 160, 5);
  synth::SynthConfig synth_cfg;
  synth_cfg.max_items = 2;
  synth_cfg.min_item_gap = 24;
  synth::generate_corpus(cleans.str(), corpus.str(), 6, synth_cfg, 42);

  auto summary = run_deid(base_config(corpus.str(), out_a.str()));
  CHECK(summary.files == 6);
  CHECK(summary.ok == 6);
  CHECK(summary.quarantined == 0);
  CHECK(summary.residual_files == 0);
  CHECK(summary.total_boxes > 0);

  for (int i = 0; i < 6; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%06d", i);
    ImageFrame input = read_png((corpus.path() / (std::string(id) + ".png")).string());
    ImageFrame output = read_png((out_a.path() / (std::string(id) + ".png")).string());
    Mask mask = read_mask_png((out_a.path() / (std::string(id) + "_mask.png")).string());
    for (int y = 0; y < input.height; ++y) {
      for (int x = 0; x < input.width; ++x) {
        if (!mask.at(x, y)) CHECK(output.at(x, y) == input.at(x, y));
      }
    }
    CHECK(fs::exists(out_a.path() / (std::string(id) + "_text.csv")));
  }

  auto summary_b = run_deid(base_config(corpus.str(), out_b.str()));
  CHECK(summary_b.ok == 6);
  CHECK(tree_digest(out_a.path()) == tree_digest(out_b.path()));

  // verification pass over the outputs is clean
  auto verify = run_verify(base_config(out_a.str(), ""));
  CHECK(verify.clean());

  // evaluation produces reports with sane headline numbers
  EvalConfig ecfg;
  ecfg.corpus_dir = corpus.str();
  ecfg.outputs_dir = out_a.str();
  auto eval = run_eval(ecfg);
  CHECK(fs::exists(eval.report_csv_path));
  CHECK(fs::exists(out_a.path() / "eval_summary.txt"));
  for (const auto& [name, agg] : eval.summary.metrics) {
    if (name == "recall") CHECK(agg.mean > 0.9);
    if (name == "precision") CHECK(agg.mean > 0.8);
    if (name == "ssim") CHECK(agg.mean > 0.5);
  }
}

TEST_CASE("dicom end to end scrubs metadata and pixels") {
  ensure_key();
  testsupport::TempDir in("pl_dicom_in");
  testsupport::TempDir out("pl_dicom_out");
  {
    auto bytes = dicom_with_text("P100", 8, "JANE DOE", 1);
    std::ofstream f(in.path() / "study1.dcm", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  }
  auto summary = run_deid(base_config(in.str(), out.str()));
  REQUIRE(summary.ok == 1);
  CHECK(summary.total_boxes >= 1);
  CHECK(summary.residual_files == 0);
  CHECK(summary.metadata_findings == 0);

  std::ifstream f(out.path() / "study1.dcm", std::ios::binary);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  auto ds = dicom::parse_dicom(bytes);
  CHECK(scrub::is_pseudonym(ds.text(dicom::tags::kPatientName)));
  CHECK(scrub::is_pseudonym(ds.text(dicom::tags::kPatientId)));
  CHECK(ds.text({0x0008, 0x0020}) != "20210401");  // date moved
  auto reval = scrub::revalidate(ds, scrub::PolicyTable::default_table());
  CHECK(reval.pass);

  // sidecar carries the extracted text
  std::ifstream csv(out.path() / "study1_text.csv");
  std::string contents((std::istreambuf_iterator<char>(csv)),
                       std::istreambuf_iterator<char>());
  CHECK(contents.find("JANE DOE") != std::string::npos);
  CHECK(fs::exists(out.path() / "study1_mask_f0.png"));
}

TEST_CASE("16-bit frames keep original depth outside the mask") {
  ensure_key();
  testsupport::TempDir in("pl_16_in");
  testsupport::TempDir out("pl_16_out");
  auto original_bytes = dicom_with_text("P200", 16, "B1234567", 2);
  {
    std::ofstream f(in.path() / "deep.dcm", std::ios::binary);
    f.write(reinterpret_cast<const char*>(original_bytes.data()),
            std::streamsize(original_bytes.size()));
  }
  auto summary = run_deid(base_config(in.str(), out.str()));
  REQUIRE(summary.ok == 1);
  CHECK(summary.residual_files == 0);

  auto original = dicom::get_frames(dicom::parse_dicom(original_bytes))[0];
  std::ifstream f(out.path() / "deep.dcm", std::ios::binary);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  auto restored = dicom::get_frames(dicom::parse_dicom(bytes))[0];
  CHECK(restored.bits == 16);
  Mask mask = read_mask_png((out.path() / "deep_mask_f0.png").string());
  REQUIRE(mask.count() > 0);
  for (int y = 0; y < original.height; ++y) {
    for (int x = 0; x < original.width; ++x) {
      if (!mask.at(x, y)) CHECK(restored.at(x, y) == original.at(x, y));
    }
  }
}

TEST_CASE("corrupt input quarantines with no partial outputs") {
  ensure_key();
  testsupport::TempDir in("pl_bad_in");
  testsupport::TempDir out("pl_bad_out");
  {
    std::ofstream f(in.path() / "broken.dcm", std::ios::binary);
    f << "this is not dicom";
  }
  {
    auto bytes = dicom_with_text("P300", 8, "C7654321", 3);
    std::ofstream f(in.path() / "good.dcm", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  }
  auto summary = run_deid(base_config(in.str(), out.str()));
  CHECK(summary.files == 2);
  CHECK(summary.ok == 1);
  CHECK(summary.quarantined == 1);
  CHECK_FALSE(fs::exists(out.path() / "broken.dcm"));
  CHECK(fs::exists(out.path() / "good.dcm"));

  int quarantine_records = 0;
  std::ifstream report(out.path() / "report.jsonl");
  std::string line;
  while (std::getline(report, line)) {
    if (line.find("quarantined") != std::string::npos &&
        line.find("broken.dcm") != std::string::npos) {
      ++quarantine_records;
    }
  }
  CHECK(quarantine_records == 1);

  // fail-hard mode surfaces the failure instead
  auto cfg = base_config(in.str(), out.str() + "_hard");
  cfg.fail_hard = true;
  CHECK_THROWS_AS(run_deid(cfg), Error);
}

TEST_CASE("missing PatientID quarantines the file") {
  ensure_key();
  testsupport::TempDir in("pl_nopid_in");
  testsupport::TempDir out("pl_nopid_out");
  {
    using namespace deid::dicom;
    DataSet ds;
    ds.set(DataElement::make({0x0002, 0x0010}, Vr::UI, kExplicitLEUid));
    ds.set(DataElement::make({0x0010, 0x0010}, Vr::PN, "DOE^JOHN"));
    auto bytes = serialize_dicom(ds);
    std::ofstream f(in.path() / "nopid.dcm", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  }
  auto summary = run_deid(base_config(in.str(), out.str()));
  CHECK(summary.quarantined == 1);
  CHECK_FALSE(fs::exists(out.path() / "nopid.dcm"));
}

TEST_CASE("dead external backend falls back to telea with a report entry") {
  ensure_key();
  testsupport::TempDir cleans("pl_fb_cleans");
  testsupport::TempDir corpus("pl_fb_corpus");
  testsupport::TempDir out("pl_fb_out");
  synth::make_phantom_cleans(cleans.str(), 1, 128, 11);
  synth::SynthConfig synth_cfg;
  synth_cfg.max_items = 1;
  synth::generate_corpus(cleans.str(), corpus.str(), 1, synth_cfg, 77);

  auto cfg = base_config(corpus.str(), out.str());
  cfg.inpaint.backend = inpaint::InpaintConfig::Backend::External;
  cfg.backend.endpoint = "127.0.0.1:1";
  cfg.backend.retries = 0;
  cfg.backend.timeout_ms = 300;
  auto summary = run_deid(cfg);
  REQUIRE(summary.ok == 1);
  CHECK(summary.records[0].used_fallback);
  CHECK(summary.residual_files == 0);

  std::ifstream report(out.path() / "report.jsonl");
  std::string contents((std::istreambuf_iterator<char>(report)),
                       std::istreambuf_iterator<char>());
  CHECK(contents.find("inpaint_fallback") != std::string::npos);
}

TEST_CASE("verify flags tampered outputs") {
  ensure_key();
  testsupport::TempDir dir("pl_verify");
  {
    using namespace deid::dicom;
    DataSet ds;
    ds.set(DataElement::make({0x0002, 0x0010}, Vr::UI, kExplicitLEUid));
    ds.set(DataElement::make({0x0010, 0x0010}, Vr::PN, "STILL^HERE"));
    ds.set(DataElement::make({0x0010, 0x0020}, Vr::LO, "RAWID42"));
    auto bytes = serialize_dicom(ds);
    std::ofstream f(dir.path() / "leaky.dcm", std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  }
  auto summary = run_verify(base_config(dir.str(), ""));
  CHECK_FALSE(summary.clean());
  CHECK(summary.metadata_findings >= 2);
}

TEST_SUITE_END();
