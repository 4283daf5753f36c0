// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deid/image.hpp"

namespace deid::metrics {

struct PixelConfusion {
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

PixelConfusion mask_confusion(const Mask& pred, const Mask& truth);

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
};

// Degenerate conventions: an empty prediction scores precision 1 when
// nothing was missed and 0 otherwise; recall symmetric; f1 is 0 when
// precision+recall is 0.
Prf prf(const PixelConfusion& c);
Prf prf_from_counts(uint64_t tp, uint64_t fp, uint64_t fn);

struct MaskedMetrics {
  double sad = 0, ssd = 0, mse = 0, rmse = 0;
  double ssim = 0;
  uint64_t n_mask = 0;
};

// Error sums/means over mask==1 pixels only; channels averaged after
// per-channel computation. rmse is derived from the averaged mse so
// rmse^2 == mse holds on every report row.
MaskedMetrics masked_errors(const ImageFrame& a, const ImageFrame& b, const Mask& m);

// Mean over mask==1 of the per-pixel SSIM map (uniform window, clamped at
// borders; window statistics are unrestricted, only the averaging is
// mask-restricted). C1=(0.01 L)^2, C2=(0.03 L)^2 with L the dynamic range.
double masked_ssim(const ImageFrame& a, const ImageFrame& b, const Mask& m,
                   int window = 7);

// masked_errors plus the ssim field.
MaskedMetrics masked_metrics(const ImageFrame& a, const ImageFrame& b, const Mask& m);

struct ConfusionMatrixK {
  int k = 0;
  std::vector<uint64_t> counts;  // row-major, row = true class

  static ConfusionMatrixK make(int k) {
    ConfusionMatrixK m;
    m.k = k;
    m.counts.assign(size_t(k) * k, 0);
    return m;
  }
  uint64_t at(int truth, int pred) const { return counts[size_t(truth) * k + pred]; }
  uint64_t& at(int truth, int pred) { return counts[size_t(truth) * k + pred]; }
};

struct MacroPrf {
  double precision = 0, recall = 0, f1 = 0;
};

// Unweighted mean of per-class precision/recall/F1.
MacroPrf macro_prf(const ConfusionMatrixK& cm);

struct Aggregate {
  double mean = 0;
  double stddev = 0;  // population (divisor N)
  uint64_t n = 0;
};

Aggregate aggregate(const std::vector<double>& values);

struct ReportRow {
  std::string image_id;
  std::vector<std::pair<std::string, double>> values;
};

struct CorpusSummary {
  std::vector<std::pair<std::string, Aggregate>> metrics;
};

// Aggregates per-image rows into mean +/- population sigma per metric.
CorpusSummary corpus_report(const std::vector<ReportRow>& rows);

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);
std::string summary_table(const CorpusSummary& summary);
std::string summary_json(const CorpusSummary& summary);

}  // namespace deid::metrics
