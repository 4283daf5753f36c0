// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Heavy runs (the 500-image corpus) are shared between
// criteria 9, 10 and 11.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "deid/ctc.hpp"
#include "deid/dicom.hpp"
#include "deid/digest.hpp"
#include "deid/inpaint.hpp"
#include "deid/metrics.hpp"
#include "deid/pipeline.hpp"
#include "deid/png_io.hpp"
#include "deid/rng.hpp"
#include "deid/scrub.hpp"
#include "deid/synth.hpp"
#include "naive_metrics.hpp"

using namespace deid;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail = "") {
  std::printf("[%s] C%-2d %s%s%s\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------- C1 + C2

template <typename Float>
Float brute_force_prob(const ctc::ProbMatrix& y, const ctc::LabelSeq& l) {
  int T = y.time_steps, C = y.num_classes;
  size_t total = 1;
  for (int t = 0; t < T; ++t) total *= size_t(C);
  Float sum = 0;
  ctc::Path path(size_t(T), 0);
  for (size_t code = 0; code < total; ++code) {
    size_t c = code;
    Float prod = 1;
    for (int t = 0; t < T; ++t) {
      path[size_t(t)] = int(c % C);
      c /= C;
      prod *= Float(y.at(t, path[size_t(t)]));
    }
    if (ctc::collapse(path) == l) sum += prod;
  }
  return sum;
}

ctc::ProbMatrix random_matrix(Pcg32& rng, int T, int C, double floor) {
  ctc::ProbMatrix y = ctc::ProbMatrix::make(T, C);
  for (int t = 0; t < T; ++t) {
    double sum = 0;
    for (int k = 0; k < C; ++k) {
      double v = floor + rng.uniform();
      y.at(t, k) = v;
      sum += v;
    }
    for (int k = 0; k < C; ++k) y.at(t, k) /= sum;
  }
  return y;
}

void criterion_1() {
  auto start = std::chrono::steady_clock::now();
  Pcg32 rng(20240001);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    int T = rng.range(1, 6);
    int L = rng.range(1, 3);
    auto y = random_matrix(rng, T, L + 1, 0.02);
    ctc::LabelSeq l(size_t(rng.range(0, T + 1)), 0);
    for (auto& s : l) s = rng.range(1, L);
    worst = std::max(worst, std::abs(ctc::ctc_prob(y, l) - brute_force_prob<double>(y, l)));
  }

  double worst_norm = 0;
  for (int trial = 0; trial < 4; ++trial) {
    int T = rng.range(1, 4);
    int L = 2;
    auto y = random_matrix(rng, T, L + 1, 0.02);
    double total = 0;
    for (int len = 0; len <= T; ++len) {
      size_t combos = 1;
      for (int i = 0; i < len; ++i) combos *= size_t(L);
      for (size_t code = 0; code < combos; ++code) {
        ctc::LabelSeq l(size_t(len), 0);
        size_t c = code;
        for (int i = 0; i < len; ++i) {
          l[size_t(i)] = int(c % L) + 1;
          c /= size_t(L);
        }
        total += ctc_prob(y, l);
      }
    }
    worst_norm = std::max(worst_norm, std::abs(total - 1.0));
  }
  double elapsed = seconds_since(start);
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "max |diff| %.2e, norm dev %.2e, %.2f s", worst, worst_norm, elapsed);
  report(1, worst < 1e-10 && worst_norm < 1e-9 && elapsed < 10.0,
         "CTC forward equals brute-force enumeration; total probability is 1", detail);
}

void criterion_2() {
  Pcg32 rng(20240002);
  double worst = 0;
  int done = 0;
  while (done < 100) {
    auto y = random_matrix(rng, 5, 3, 0.5);
    ctc::LabelSeq l(size_t(rng.range(0, 3)), 0);
    for (auto& s : l) s = rng.range(1, 2);
    if (ctc::ctc_prob(y, l) <= 0.0) continue;
    ++done;
    auto grad = ctc::ctc_loss_grad(y, l);
    const long double h = 1e-6L;
    for (int t = 0; t < 5; ++t) {
      for (int k = 0; k < 3; ++k) {
        auto yp = y, ym = y;
        yp.at(t, k) += double(h);
        ym.at(t, k) -= double(h);
        long double fd = (-std::log(brute_force_prob<long double>(yp, l)) +
                          std::log(brute_force_prob<long double>(ym, l))) /
                         (2 * h);
        double a = grad[size_t(t) * 3 + k];
        double rel = std::abs(double(fd) - a) /
                     std::max({std::abs(a), std::abs(double(fd)), 1e-8});
        worst = std::max(worst, rel);
      }
    }
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "max relative error %.2e", worst);
  report(2, worst < 1e-5, "CTC gradient matches central finite differences", detail);
}

void criterion_3() {
  // Known-defective anchor example: a blank separates repeated labels, so
  // a collapse consistent with the forward recursion yields "jaane" here.
  // Asserted literally anyway; see README for the analysis.
  const std::string alphabet = "jane";
  ctc::Path path;
  for (char c : std::string("--jj-a-a-nn-ee--")) {
    path.push_back(c == '-' ? ctc::kBlank : int(alphabet.find(c)) + 1);
  }
  std::string got;
  for (int s : ctc::collapse(path)) got.push_back(alphabet[size_t(s - 1)]);
  report(3, got == "jane", "collapse(\"--jj-a-a-nn-ee--\") == \"jane\"",
         "collapse produced \"" + got + "\"");
}

// -------------------------------------------------------------------- C4

Mask disk_mask(int size, double radius) {
  Mask m = Mask::zeros(size, size);
  double c = size / 2.0 - 0.5;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double dx = x - c, dy = y - c;
      if (dx * dx + dy * dy <= radius * radius) m.set(x, y);
    }
  }
  return m;
}

Mask random_rect_mask(Pcg32& rng, int w, int h, int rects) {
  Mask m = Mask::zeros(w, h);
  for (int r = 0; r < rects; ++r) {
    int bw = rng.range(2, w / 3), bh = rng.range(2, h / 3);
    int x0 = rng.range(0, w - bw - 1), y0 = rng.range(0, h - bh - 1);
    for (int y = y0; y < y0 + bh; ++y) {
      for (int x = x0; x < x0 + bw; ++x) m.set(x, y);
    }
  }
  m.set(0, 0, false);
  return m;
}

void criterion_4() {
  bool ok = true;
  std::string detail;
  for (double radius : {5.0, 10.0, 20.0}) {
    int size = int(radius * 2 + 9);
    auto dm = inpaint::fast_march(disk_mask(size, radius));
    int c = size / 2;
    double center = std::max(dm.dist(c, c), dm.dist(c - 1, c - 1));
    if (std::abs(center - radius) > 0.15 * radius) {
      ok = false;
      detail += "disk r" + std::to_string(int(radius)) + " center " +
                std::to_string(center) + "; ";
    }
  }
  Pcg32 rng(20240004);
  for (int trial = 0; trial < 50; ++trial) {
    Mask m = random_rect_mask(rng, 48, 36, rng.range(1, 4));
    auto dm = inpaint::fast_march(m);
    double prev = -1;
    for (int idx : dm.order) {
      if (dm.d[size_t(idx)] < prev - 1e-12) {
        ok = false;
        detail += "non-monotone extraction; ";
        break;
      }
      prev = dm.d[size_t(idx)];
    }
  }
  report(4, ok, "fast-march disk accuracy within 15% and monotone extraction",
         detail.empty() ? "disks r=5,10,20; 50 random masks" : detail);
}

void criterion_5() {
  Pcg32 rng(20240005);
  bool constant_ok = true, locality_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    uint16_t value = uint16_t(rng.range(0, 255));
    ImageFrame frame = ImageFrame::make(40, 30, 1, 8, value);
    Mask m = random_rect_mask(rng, 40, 30, rng.range(1, 3));
    ImageFrame out = inpaint::telea_fill(frame, m);
    if (!(out == frame)) constant_ok = false;

    ImageFrame textured = ImageFrame::make(40, 30, 1, 8);
    for (auto& s : textured.samples) s = uint16_t(rng.range(0, 255));
    ImageFrame filled = inpaint::telea_fill(textured, m);
    for (int y = 0; y < 30 && locality_ok; ++y) {
      for (int x = 0; x < 40; ++x) {
        if (!m.at(x, y) && filled.at(x, y) != textured.at(x, y)) {
          locality_ok = false;
          break;
        }
      }
    }
  }

  ImageFrame ramp = ImageFrame::make(256, 64, 1, 8);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 256; ++x) ramp.at(x, y) = uint16_t(x);
  }
  Mask strip = Mask::zeros(256, 64);
  ImageFrame corrupted = ramp;
  for (int y = 0; y < 64; ++y) {
    for (int x = 120; x < 126; ++x) {
      strip.set(x, y);
      corrupted.at(x, y) = 0;
    }
  }
  ImageFrame filled = inpaint::telea_fill(corrupted, strip);
  int worst = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 120; x < 126; ++x) {
      worst = std::max(worst, std::abs(int(filled.at(x, y)) - x));
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "constant ok %d, ramp max err %d, outside-mask identity %d",
                constant_ok, worst, locality_ok);
  report(5, constant_ok && worst <= 3 && locality_ok,
         "telea fill: constant identity, ramp within 3 levels, locality", detail);
}

void criterion_6() {
  Pcg32 rng(20240006);
  double worst = 0;
  bool rows_ok = true;
  for (int i = 0; i < 100; ++i) {
    ImageFrame a = ImageFrame::make(32, 32, 1, 8);
    ImageFrame b = ImageFrame::make(32, 32, 1, 8);
    for (auto& s : a.samples) s = uint16_t(rng.range(0, 255));
    for (auto& s : b.samples) s = uint16_t(rng.range(0, 255));
    Mask m = Mask::zeros(32, 32);
    for (auto& v : m.on) v = rng.range(0, 99) < 40 ? 1 : 0;
    if (m.count() == 0) m.set(16, 16);

    auto fast = metrics::masked_errors(a, b, m);
    auto slow = reference::naive_masked_errors(a, b, m);
    worst = std::max({worst, std::abs(fast.sad - slow.sad), std::abs(fast.ssd - slow.ssd),
                      std::abs(fast.mse - slow.mse), std::abs(fast.rmse - slow.rmse)});
    worst = std::max(worst, std::abs(metrics::masked_ssim(a, b, m) -
                                     reference::naive_masked_ssim(a, b, m)));
    if (std::abs(fast.rmse * fast.rmse - fast.mse) > 1e-9) rows_ok = false;
    if (metrics::masked_ssim(a, a, m) != 1.0) rows_ok = false;
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "max |diff| vs naive %.2e", worst);
  report(6, worst < 1e-9 && rows_ok,
         "SAD/SSD/MSE/RMSE/SSIM match naive references; ssim(x,x)==1; rmse^2==mse",
         detail);
}

// -------------------------------------------------------------------- C7

dicom::DataSet fuzz_dataset(Pcg32& rng, const std::string& pid) {
  using namespace deid::dicom;
  DataSet ds;
  auto add = [&](uint16_t g, uint16_t e, Vr vr, std::string_view v) {
    ds.set(DataElement::make({g, e}, vr, v));
  };
  add(0x0002, 0x0010, Vr::UI, rng.range(0, 1) ? kExplicitLEUid : kImplicitLEUid);
  add(0x0008, 0x0018, Vr::UI, "1.2.840.99." + std::to_string(rng.next()));
  // planted dates
  char date[16];
  std::snprintf(date, sizeof(date), "%04d%02d%02d", rng.range(1990, 2023),
                rng.range(1, 12), rng.range(1, 28));
  add(0x0008, 0x0020, Vr::DA, date);
  if (rng.range(0, 1)) {
    std::snprintf(date, sizeof(date), "%04d%02d%02d", rng.range(1950, 2000),
                  rng.range(1, 12), rng.range(1, 28));
    add(0x0010, 0x0030, Vr::DA, date);
  }
  add(0x0008, 0x0030, Vr::TM, "101530");
  add(0x0008, 0x0060, Vr::CS, rng.range(0, 1) ? "CT" : "MR");
  // planted direct identifiers, varying subsets
  if (rng.range(0, 3) > 0) add(0x0010, 0x0010, Vr::PN, "DOE^JANE^M");
  if (rng.range(0, 3) > 0) add(0x0008, 0x0090, Vr::PN, "SMITH^JOHN^DR");
  if (rng.range(0, 3) > 0) add(0x0008, 0x0050, Vr::SH, "ACC" + std::to_string(rng.next() % 100000));
  if (rng.range(0, 3) > 0) add(0x0008, 0x0080, Vr::LO, "ST MARY HOSPITAL");
  if (rng.range(0, 3) > 0) add(0x0010, 0x1040, Vr::LO, "12 MAIN STREET");
  if (rng.range(0, 3) > 0) add(0x0010, 0x2154, Vr::SH, "555-123-4567");
  if (rng.range(0, 3) > 0) add(0x0018, 0x1000, Vr::LO, "SN-889944231");
  if (rng.range(0, 3) > 0) add(0x0020, 0x4000, Vr::LT, "seen by DR ADAMS 20200101");
  add(0x0010, 0x0020, Vr::LO, pid);
  add(0x0010, 0x0040, Vr::CS, rng.range(0, 1) ? "F" : "M");
  // benign unmatched elements that must not change
  add(0x0018, 0x0015, Vr::CS, "CHEST");
  add(0x0018, 0x0050, Vr::DS, "2.5");
  // private block: benign plus planted PHI shapes
  add(0x0009, 0x0010, Vr::LO, "VENDOR BLOCK");
  if (rng.range(0, 1)) add(0x0009, 0x0011, Vr::LO, "DOE^JANE");
  if (rng.range(0, 1)) add(0x0011, 0x0001, Vr::LO, "MRN 12345678");
  if (rng.range(0, 1)) add(0x0011, 0x0002, Vr::LO, "(555) 987-6543");
  add(0x0011, 0x0003, Vr::LO, "GAIN=12");
  // occasionally a nested sequence holding an identifier
  if (rng.range(0, 1)) {
    DataElement sq;
    sq.tag = {0x0008, 0x1110};
    sq.vr = Vr::SQ;
    sq.undefined_length = rng.range(0, 1) == 1;
    DataSet item;
    item.syntax = ds.syntax;
    item.has_preamble = false;
    item.set(DataElement::make({0x0008, 0x1155}, Vr::UI,
                               "1.2.840.99." + std::to_string(rng.next())));
    item.set(DataElement::make({0x0010, 0x0010}, Vr::PN, "DOE^JANE"));
    sq.items.push_back(std::move(item));
    sq.item_undefined_length.push_back(rng.range(0, 1));
    ds.set(std::move(sq));
  }
  std::string ts = ds.text(dicom::tags::kTransferSyntaxUid);
  ds.syntax = ts == kImplicitLEUid ? TransferSyntax::ImplicitLE : TransferSyntax::ExplicitLE;
  ds.syntax_uid = ts;
  return ds;
}

void criterion_7_and_8() {
  Pcg32 rng(20240007);
  auto key = scrub::JitterKey::from_bytes(
      std::vector<uint8_t>{'a', 'c', 'c', 'e', 'p', 't', 'a', 'n', 'c', 'e', '-', 'k',
                           'e', 'y', '0', '1'});
  const auto& policy = scrub::PolicyTable::default_table();

  int findings = 0, roundtrip_failures = 0, idempotence_failures = 0;
  bool intervals_ok = true;
  std::map<std::string, std::vector<std::pair<int64_t, int64_t>>> date_pairs;

  for (int i = 0; i < 200; ++i) {
    std::string pid = "PAT" + std::to_string(rng.range(0, 39));  // shared patients
    auto ds = fuzz_dataset(rng, pid);
    auto bytes = dicom::serialize_dicom(ds);

    // criterion 8: serialize(parse(f)) == f
    auto reparsed = dicom::parse_dicom(bytes);
    if (dicom::serialize_dicom(reparsed) != bytes) ++roundtrip_failures;

    auto [scrubbed, rep] = scrub::scrub(reparsed, policy, key);
    auto reval = scrub::revalidate(scrubbed, policy);
    findings += int(reval.residual.size());

    // date-interval bookkeeping for same-patient pairs
    std::string orig_date = ds.text({0x0008, 0x0020});
    std::string new_date = scrubbed.text({0x0008, 0x0020});
    auto od = scrub::parse_dicom_date(orig_date);
    auto nd = scrub::parse_dicom_date(new_date);
    if (od && nd) date_pairs[pid].push_back({*od, *nd});

    // idempotence byte-for-byte
    auto second = scrub::scrub(scrubbed, policy, key);
    if (dicom::serialize_dicom(second.dataset) != dicom::serialize_dicom(scrubbed)) {
      ++idempotence_failures;
    }
  }
  for (const auto& [pid, pairs] : date_pairs) {
    for (size_t i = 1; i < pairs.size(); ++i) {
      if (pairs[i].second - pairs[0].second != pairs[i].first - pairs[0].first) {
        intervals_ok = false;
      }
    }
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "residual findings %d, idempotence failures %d, intervals %s", findings,
                idempotence_failures, intervals_ok ? "preserved" : "broken");
  report(7, findings == 0 && idempotence_failures == 0 && intervals_ok,
         "scrub leaves zero findings on 200 fuzzed files; idempotent; intervals",
         detail);
  char detail8[64];
  std::snprintf(detail8, sizeof(detail8), "%d/200 failures", roundtrip_failures);
  report(8, roundtrip_failures == 0, "100% of DICOM fixtures round-trip byte-identically",
         detail8);
}

// --------------------------------------------------------------- C9..C11

void criteria_9_10_11(const fs::path& scratch) {
  auto start = std::chrono::steady_clock::now();
  fs::path cleans = scratch / "cleans";
  fs::path corpus = scratch / "corpus";
  fs::path out_a = scratch / "run_a";
  fs::path out_b = scratch / "run_b";

  synth::make_phantom_cleans(cleans.string(), 8, 512, 20240009);
  synth::SynthConfig synth_cfg;  // stock generator settings
  synth::generate_corpus(cleans.string(), corpus.string(), 500, synth_cfg, 20240009);

  pipeline::PipelineConfig cfg;
  cfg.input_dir = corpus.string();
  cfg.output_dir = out_a.string();
  cfg.key_env = "DEID_ACCEPTANCE_KEY";
  setenv("DEID_ACCEPTANCE_KEY", "acceptance-key-0123456789abcdef", 1);
  auto summary = pipeline::run_deid(cfg);

  pipeline::EvalConfig eval_cfg;
  eval_cfg.corpus_dir = corpus.string();
  eval_cfg.outputs_dir = out_a.string();
  eval_cfg.report_dir = (scratch / "eval").string();  // keep run_a pristine
  auto eval = pipeline::run_eval(eval_cfg);
  double elapsed = seconds_since(start);

  double recall = 0, precision = 0;
  for (const auto& [name, agg] : eval.summary.metrics) {
    if (name == "recall") recall = agg.mean;
    if (name == "precision") precision = agg.mean;
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "mean recall %.4f, mean precision %.4f, %d files ok, %.1f s", recall,
                precision, summary.ok, elapsed);
  report(9,
         summary.ok == 500 && recall >= 0.95 && precision >= 0.85 && elapsed < 300.0,
         "500-image pipeline run reaches recall >= 0.95 and precision >= 0.85",
         detail);

  // C10: zero residual detections and bit-exact identity outside the masks
  bool identity_ok = true;
  for (int i = 0; i < 500 && identity_ok; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%06d", i);
    ImageFrame input = read_png((corpus / (std::string(id) + ".png")).string());
    ImageFrame output = read_png((out_a / (std::string(id) + ".png")).string());
    Mask mask = read_mask_png((out_a / (std::string(id) + "_mask.png")).string());
    for (int y = 0; y < input.height && identity_ok; ++y) {
      for (int x = 0; x < input.width; ++x) {
        if (!mask.at(x, y) && output.at(x, y) != input.at(x, y)) {
          identity_ok = false;
          break;
        }
      }
    }
  }
  char detail10[96];
  std::snprintf(detail10, sizeof(detail10), "residual files %d, outside-mask identity %s",
                summary.residual_files, identity_ok ? "bit-exact" : "violated");
  report(10, summary.residual_files == 0 && identity_ok,
         "verification re-pass finds no text; non-mask pixels are bit-identical",
         detail10);

  // C11: a second identical run produces a bit-identical output tree
  auto cfg_b = cfg;
  cfg_b.output_dir = out_b.string();
  pipeline::run_deid(cfg_b);

  auto digest_tree = [](const fs::path& dir) {
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
  };
  std::string ha = digest_tree(out_a);
  std::string hb = digest_tree(out_b);
  report(11, ha == hb, "two identically seeded runs produce bit-identical trees",
         ha == hb ? "sha256 " + ha.substr(0, 16) + "..." : ha + " != " + hb);
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  fs::path scratch = fs::temp_directory_path() / "deid_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7_and_8();
  criteria_9_10_11(scratch);

  fs::remove_all(scratch);
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
