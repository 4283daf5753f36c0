// SPDX-License-Identifier: Apache-2.0
#include "deid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace deid::metrics {

PixelConfusion mask_confusion(const Mask& pred, const Mask& truth) {
  if (pred.width != truth.width || pred.height != truth.height) {
    throw Error("mask_confusion: dimensions differ");
  }
  uint64_t tp = 0, fp = 0, fn = 0;
  const size_t n = pred.on.size();
  const uint8_t* p = pred.on.data();
  const uint8_t* t = truth.on.data();
#pragma omp parallel for schedule(static) reduction(+ : tp, fp, fn)
  for (long long i = 0; i < (long long)n; ++i) {
    bool pi = p[i] != 0, ti = t[i] != 0;
    tp += pi && ti;
    fp += pi && !ti;
    fn += !pi && ti;
  }
  PixelConfusion c;
  c.tp = tp;
  c.fp = fp;
  c.fn = fn;
  c.tn = n - tp - fp - fn;
  return c;
}

Prf prf_from_counts(uint64_t tp, uint64_t fp, uint64_t fn) {
  Prf out;
  if (tp + fp == 0) {
    out.precision = fn == 0 ? 1.0 : 0.0;
  } else {
    out.precision = double(tp) / double(tp + fp);
  }
  if (tp + fn == 0) {
    out.recall = fp == 0 ? 1.0 : 0.0;
  } else {
    out.recall = double(tp) / double(tp + fn);
  }
  double pr = out.precision + out.recall;
  out.f1 = pr > 0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

Prf prf(const PixelConfusion& c) { return prf_from_counts(c.tp, c.fp, c.fn); }

MaskedMetrics masked_errors(const ImageFrame& a, const ImageFrame& b, const Mask& m) {
  if (!a.same_shape(b) || a.width != m.width || a.height != m.height) {
    throw Error("masked_errors: dimensions differ");
  }
  MaskedMetrics out;
  out.n_mask = m.count();
  if (out.n_mask == 0) throw Error("masked_errors: empty mask");

  const int channels = a.channels;
  const long long n = (long long)a.pixel_count();
  // exact integer accumulation, order independent
  std::vector<uint64_t> sad_ch(size_t(channels), 0), ssd_ch(size_t(channels), 0);
  for (int c = 0; c < channels; ++c) {
    uint64_t sad = 0, ssd = 0;
#pragma omp parallel for schedule(static) reduction(+ : sad, ssd)
    for (long long i = 0; i < n; ++i) {
      if (!m.on[size_t(i)]) continue;
      int64_t d = int64_t(a.samples[size_t(i) * channels + size_t(c)]) -
                  int64_t(b.samples[size_t(i) * channels + size_t(c)]);
      uint64_t ad = uint64_t(d < 0 ? -d : d);
      sad += ad;
      ssd += ad * ad;
    }
    sad_ch[size_t(c)] = sad;
    ssd_ch[size_t(c)] = ssd;
  }
  double sad_sum = 0, ssd_sum = 0;
  for (int c = 0; c < channels; ++c) {
    sad_sum += double(sad_ch[size_t(c)]);
    ssd_sum += double(ssd_ch[size_t(c)]);
  }
  out.sad = sad_sum / channels;
  out.ssd = ssd_sum / channels;
  out.mse = out.ssd / double(out.n_mask);
  out.rmse = std::sqrt(out.mse);
  return out;
}

namespace {

// Summed-area table with a zero top row and left column. Products of 8/16
// bit samples summed over an image stay below 2^53, so these sums are
// exact in doubles and the windowed statistics match a naive double loop
// bit for bit.
struct Integral {
  int w = 0, h = 0;
  std::vector<double> s;

  double rect(int x0, int y0, int x1, int y1) const {  // inclusive coords
    const int W = w + 1;
    return s[size_t(y1 + 1) * W + (x1 + 1)] - s[size_t(y0) * W + (x1 + 1)] -
           s[size_t(y1 + 1) * W + x0] + s[size_t(y0) * W + x0];
  }
};

Integral make_integral(const ImageFrame& a, const ImageFrame& b, int channel, int mode) {
  // mode 0: a, 1: b, 2: a*a, 3: b*b, 4: a*b
  Integral out;
  out.w = a.width;
  out.h = a.height;
  out.s.assign(size_t(a.width + 1) * (a.height + 1), 0.0);
  const int W = a.width + 1;
  for (int y = 0; y < a.height; ++y) {
    double row = 0.0;
    for (int x = 0; x < a.width; ++x) {
      double av = a.at(x, y, channel);
      double bv = b.at(x, y, channel);
      double v = 0;
      switch (mode) {
        case 0: v = av; break;
        case 1: v = bv; break;
        case 2: v = av * av; break;
        case 3: v = bv * bv; break;
        case 4: v = av * bv; break;
      }
      row += v;
      out.s[size_t(y + 1) * W + (x + 1)] = out.s[size_t(y) * W + (x + 1)] + row;
    }
  }
  return out;
}

}  // namespace

double masked_ssim(const ImageFrame& a, const ImageFrame& b, const Mask& m, int window) {
  if (!a.same_shape(b) || a.width != m.width || a.height != m.height) {
    throw Error("masked_ssim: dimensions differ");
  }
  if (m.count() == 0) throw Error("masked_ssim: empty mask");
  if (window < 1 || window % 2 == 0) throw Error("masked_ssim: window must be odd");

  const double L = a.max_value();
  const double C1 = (0.01 * L) * (0.01 * L);
  const double C2 = (0.03 * L) * (0.03 * L);
  const int r = window / 2;

  double channel_sum = 0.0;
  for (int ch = 0; ch < a.channels; ++ch) {
    Integral Sa = make_integral(a, b, ch, 0);
    Integral Sb = make_integral(a, b, ch, 1);
    Integral Saa = make_integral(a, b, ch, 2);
    Integral Sbb = make_integral(a, b, ch, 3);
    Integral Sab = make_integral(a, b, ch, 4);

    std::vector<double> ssim_map(a.pixel_count(), 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < a.height; ++y) {
      int y0 = std::max(0, y - r), y1 = std::min(a.height - 1, y + r);
      for (int x = 0; x < a.width; ++x) {
        int x0 = std::max(0, x - r), x1 = std::min(a.width - 1, x + r);
        double n = double((x1 - x0 + 1) * (y1 - y0 + 1));
        double mu_a = Sa.rect(x0, y0, x1, y1) / n;
        double mu_b = Sb.rect(x0, y0, x1, y1) / n;
        double va = Saa.rect(x0, y0, x1, y1) / n - mu_a * mu_a;
        double vb = Sbb.rect(x0, y0, x1, y1) / n - mu_b * mu_b;
        double cov = Sab.rect(x0, y0, x1, y1) / n - mu_a * mu_b;
        double num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
        double den = (mu_a * mu_a + mu_b * mu_b + C1) * (va + vb + C2);
        ssim_map[size_t(y) * a.width + x] = num / den;
      }
    }
    // serial masked mean keeps the reduction order fixed
    double sum = 0.0;
    uint64_t count = 0;
    for (size_t i = 0; i < m.on.size(); ++i) {
      if (m.on[i]) {
        sum += ssim_map[i];
        ++count;
      }
    }
    channel_sum += sum / double(count);
  }
  return channel_sum / a.channels;
}

MaskedMetrics masked_metrics(const ImageFrame& a, const ImageFrame& b, const Mask& m) {
  MaskedMetrics out = masked_errors(a, b, m);
  out.ssim = masked_ssim(a, b, m);
  return out;
}

MacroPrf macro_prf(const ConfusionMatrixK& cm) {
  if (cm.k < 2) throw Error("macro_prf: need at least two classes");
  MacroPrf out;
  for (int k = 0; k < cm.k; ++k) {
    uint64_t tp = cm.at(k, k);
    uint64_t fp = 0, fn = 0;
    for (int i = 0; i < cm.k; ++i) {
      if (i == k) continue;
      fp += cm.at(i, k);
      fn += cm.at(k, i);
    }
    Prf p = prf_from_counts(tp, fp, fn);
    out.precision += p.precision;
    out.recall += p.recall;
    out.f1 += p.f1;
  }
  out.precision /= cm.k;
  out.recall /= cm.k;
  out.f1 /= cm.k;
  return out;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0;
  for (double v : values) sum += v;
  out.mean = sum / double(values.size());
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(ss / double(values.size()));  // population sigma
  return out;
}

CorpusSummary corpus_report(const std::vector<ReportRow>& rows) {
  if (rows.empty()) throw Error("corpus_report: no rows");
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> columns;
  for (const auto& row : rows) {
    for (const auto& [name, value] : row.values) {
      if (!columns.count(name)) order.push_back(name);
      columns[name].push_back(value);
    }
  }
  CorpusSummary summary;
  for (const auto& name : order) {
    summary.metrics.emplace_back(name, aggregate(columns[name]));
  }
  return summary;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report " + path);
  if (rows.empty()) return;
  // union of column names in first-appearance order; blank cells for rows
  // that lack a metric (e.g. images with nothing to restore)
  std::vector<std::string> names;
  for (const auto& row : rows) {
    for (const auto& [name, _] : row.values) {
      if (std::find(names.begin(), names.end(), name) == names.end()) {
        names.push_back(name);
      }
    }
  }
  out << "image_id";
  for (const auto& name : names) out << ',' << name;
  out << '\n';
  char buf[40];
  for (const auto& row : rows) {
    out << row.image_id;
    for (const auto& name : names) {
      out << ',';
      for (const auto& [n, value] : row.values) {
        if (n == name) {
          std::snprintf(buf, sizeof(buf), "%.9g", value);
          out << buf;
          break;
        }
      }
    }
    out << '\n';
  }
}

std::string summary_table(const CorpusSummary& summary) {
  std::ostringstream out;
  char buf[96];
  out << "metric            mean +/- sigma        n\n";
  for (const auto& [name, agg] : summary.metrics) {
    std::snprintf(buf, sizeof(buf), "%-16s %12.6f %10.6f %8llu\n", name.c_str(),
                  agg.mean, agg.stddev, (unsigned long long)agg.n);
    out << buf;
  }
  return out.str();
}

std::string summary_json(const CorpusSummary& summary) {
  std::ostringstream out;
  out << "{";
  bool first = true;
  char buf[64];
  for (const auto& [name, agg] : summary.metrics) {
    if (!first) out << ",";
    first = false;
    std::snprintf(buf, sizeof(buf), "{\"mean\":%.9g,\"stddev\":%.9g,\"n\":%llu}",
                  agg.mean, agg.stddev, (unsigned long long)agg.n);
    out << "\"" << name << "\":" << buf;
  }
  out << "}";
  return out.str();
}

}  // namespace deid::metrics
