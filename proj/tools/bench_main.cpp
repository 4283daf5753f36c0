// SPDX-License-Identifier: Apache-2.0
//
// Benchmarks the OpenMP kernels against the serial reference
// implementations kept for testing, plus absolute timings for the
// serial-by-construction stages (fast marching, fill).
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "deid/inpaint.hpp"
#include "deid/metrics.hpp"
#include "deid/redact.hpp"
#include "deid/rng.hpp"
#include "deid/synth.hpp"
#include "naive_metrics.hpp"

using namespace deid;

namespace {

double time_ms(const std::function<void()>& fn, int repeats = 3) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    auto start = std::chrono::steady_clock::now();
    fn();
    double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    best = std::min(best, ms);
  }
  return best;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-24s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  const int W = 1024, H = 1024;
  Pcg32 rng(42);
  ImageFrame a = ImageFrame::make(W, H, 1, 8);
  ImageFrame b = ImageFrame::make(W, H, 1, 8);
  for (auto& s : a.samples) s = uint16_t(rng.range(0, 255));
  for (auto& s : b.samples) s = uint16_t(rng.range(0, 255));
  Mask m = Mask::zeros(W, H);
  for (auto& v : m.on) v = rng.range(0, 99) < 25 ? 1 : 0;

#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP\n");
#endif
  std::printf("%-24s %13s %13s %9s\n", "kernel (1024x1024)", "serial ref", "parallel",
              "speedup");

  volatile double sink = 0;
  row("masked_errors",
      time_ms([&] { sink = sink + reference::naive_masked_errors(a, b, m).mse; }),
      time_ms([&] { sink = sink + metrics::masked_errors(a, b, m).mse; }));
  row("masked_ssim",
      time_ms([&] { sink = sink + reference::naive_masked_ssim(a, b, m); }),
      time_ms([&] { sink = sink + metrics::masked_ssim(a, b, m); }));
  row("mask_confusion",
      time_ms([&] { sink = sink + double(reference::naive_mask_confusion(m, m).tp); }),
      time_ms([&] { sink = sink + double(metrics::mask_confusion(m, m).tp); }));

  // detection + fill stages (serial per frame by design; timing only)
  ImageFrame scene = ImageFrame::make(512, 512, 1, 8, 60);
  synth::OverlayItem item{"JANE DOE A1234567", 40, 60, 18, 0.0, 255, 2};
  auto [overlaid, truth] = synth::render_overlay(scene, {item});
  redact::ReferenceDetector detector;
  std::vector<redact::TextBox> boxes;
  double detect_ms = time_ms([&] { boxes = detector.detect(overlaid); });
  auto [redacted, mask] = redact::redact(overlaid, boxes);
  double march_ms =
      time_ms([&] { sink = sink + double(inpaint::fast_march(mask).order.size()); });
  double fill_ms = time_ms(
      [&] { sink = sink + double(inpaint::telea_fill(redacted, mask).samples[0]); });
  std::printf("%-24s %10.2f ms\n", "detect (512x512)", detect_ms);
  std::printf("%-24s %10.2f ms\n", "fast_march", march_ms);
  std::printf("%-24s %10.2f ms\n", "telea_fill", fill_ms);

  // corpus generation: per-image independence carries the parallelism
  double synth_ms = time_ms(
      [&] {
        synth::SynthConfig cfg;
        cfg.max_items = 3;
        std::filesystem::remove_all("/tmp/deid_bench_corpus");
        synth::make_phantom_cleans("/tmp/deid_bench_corpus/cleans", 2, 256, 7);
        synth::generate_corpus("/tmp/deid_bench_corpus/cleans",
                               "/tmp/deid_bench_corpus/out", 16, cfg, 7);
      },
      1);
  std::printf("%-24s %10.2f ms\n", "corpus x16 (256px)", synth_ms);
  std::filesystem::remove_all("/tmp/deid_bench_corpus");
  return sink > 1e308 ? 1 : 0;
}
