// SPDX-License-Identifier: Apache-2.0
#include "deid/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace deid::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

// Blank-extended label sequence b l1 b l2 ... b, length 2|l|+1.
std::vector<int> extend(const LabelSeq& l) {
  std::vector<int> ext(2 * l.size() + 1, kBlank);
  for (size_t i = 0; i < l.size(); ++i) ext[2 * i + 1] = l[i];
  return ext;
}

// Forward (alpha) lattice in log space, row-major [t][s].
std::vector<double> forward(const ProbMatrix& y, const std::vector<int>& ext) {
  int T = y.time_steps;
  int S = int(ext.size());
  std::vector<double> alpha(size_t(T) * S, kNegInf);
  alpha[0] = safe_log(y.at(0, ext[0]));
  if (S > 1) alpha[1] = safe_log(y.at(0, ext[1]));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = alpha[size_t(t - 1) * S + s];
      if (s >= 1) acc = log_add(acc, alpha[size_t(t - 1) * S + s - 1]);
      if (s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]) {
        acc = log_add(acc, alpha[size_t(t - 1) * S + s - 2]);
      }
      alpha[size_t(t) * S + s] = acc + safe_log(y.at(t, ext[s]));
    }
  }
  return alpha;
}

std::vector<double> backward(const ProbMatrix& y, const std::vector<int>& ext) {
  int T = y.time_steps;
  int S = int(ext.size());
  std::vector<double> beta(size_t(T) * S, kNegInf);
  beta[size_t(T - 1) * S + S - 1] = safe_log(y.at(T - 1, ext[S - 1]));
  if (S > 1) beta[size_t(T - 1) * S + S - 2] = safe_log(y.at(T - 1, ext[S - 2]));
  for (int t = T - 2; t >= 0; --t) {
    for (int s = S - 1; s >= 0; --s) {
      double acc = beta[size_t(t + 1) * S + s];
      if (s + 1 < S) acc = log_add(acc, beta[size_t(t + 1) * S + s + 1]);
      if (s + 2 < S && ext[s + 2] != kBlank && ext[s + 2] != ext[s]) {
        acc = log_add(acc, beta[size_t(t + 1) * S + s + 2]);
      }
      beta[size_t(t) * S + s] = acc + safe_log(y.at(t, ext[s]));
    }
  }
  return beta;
}

}  // namespace

bool ProbMatrix::rows_normalized(double tol) const {
  for (int t = 0; t < time_steps; ++t) {
    double sum = 0.0;
    for (int k = 0; k < num_classes; ++k) {
      double v = at(t, k);
      if (v < 0.0) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

LabelSeq collapse(const Path& path) {
  LabelSeq out;
  int prev = -1;
  for (int s : path) {
    if (s != prev && s != kBlank) out.push_back(s);
    prev = s;
  }
  return out;
}

double ctc_log_prob(const ProbMatrix& y, const LabelSeq& l) {
  if (y.time_steps == 0) return l.empty() ? 0.0 : kNegInf;
  if (int(l.size()) > y.time_steps) return kNegInf;
  for (int s : l) {
    if (s <= 0 || s >= y.num_classes) throw Error("label symbol out of range");
  }
  auto ext = extend(l);
  auto alpha = forward(y, ext);
  int T = y.time_steps;
  int S = int(ext.size());
  double lp = alpha[size_t(T - 1) * S + S - 1];
  if (S > 1) lp = log_add(lp, alpha[size_t(T - 1) * S + S - 2]);
  return lp;
}

double ctc_prob(const ProbMatrix& y, const LabelSeq& l) {
  double lp = ctc_log_prob(y, l);
  return lp == kNegInf ? 0.0 : std::exp(lp);
}

double ctc_loss(const ProbMatrix& y, const LabelSeq& l) {
  double lp = ctc_log_prob(y, l);
  if (lp == kNegInf) return std::numeric_limits<double>::infinity();
  return -lp;
}

std::vector<double> ctc_loss_grad(const ProbMatrix& y, const LabelSeq& l) {
  double lp = ctc_log_prob(y, l);
  if (lp == kNegInf) throw Error("ctc_loss_grad: infeasible label sequence");

  auto ext = extend(l);
  auto alpha = forward(y, ext);
  auto beta = backward(y, ext);
  int T = y.time_steps;
  int S = int(ext.size());

  std::vector<double> grad(size_t(T) * y.num_classes, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < y.num_classes; ++k) {
      double acc = kNegInf;
      for (int s = 0; s < S; ++s) {
        if (ext[s] != k) continue;
        acc = log_add(acc, alpha[size_t(t) * S + s] + beta[size_t(t) * S + s]);
      }
      if (acc == kNegInf) continue;
      double yv = y.at(t, k);
      if (yv <= 0.0) continue;
      // alpha and beta both carry the y_t factor, so dp/dy_t(k) is
      // sum alpha*beta / y^2, and dloss/dy = -(dp/dy)/p.
      grad[size_t(t) * y.num_classes + k] = -std::exp(acc - lp - 2.0 * std::log(yv));
    }
  }
  return grad;
}

Decoded best_path_decode(const ProbMatrix& y) {
  Decoded out;
  Path path;
  path.reserve(y.time_steps);
  double log_conf = 0.0;
  for (int t = 0; t < y.time_steps; ++t) {
    int best = 0;
    double best_p = y.at(t, 0);
    for (int k = 1; k < y.num_classes; ++k) {
      if (y.at(t, k) > best_p) {  // ties stay with the lower index
        best_p = y.at(t, k);
        best = k;
      }
    }
    path.push_back(best);
    log_conf += safe_log(best_p);
  }
  out.labels = collapse(path);
  out.confidence = y.time_steps == 0 ? 0.0 : std::exp(log_conf / y.time_steps);
  return out;
}

}  // namespace deid::ctc
