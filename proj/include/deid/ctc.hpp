// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "deid/common.hpp"

namespace deid::ctc {

// Class index 0 is reserved for the blank symbol.
inline constexpr int kBlank = 0;

// T x (|L|+1) matrix of per-step class probabilities, row-major.
struct ProbMatrix {
  int time_steps = 0;
  int num_classes = 0;
  std::vector<double> p;

  static ProbMatrix make(int t, int classes) {
    ProbMatrix m;
    m.time_steps = t;
    m.num_classes = classes;
    m.p.assign(size_t(t) * classes, 0.0);
    return m;
  }
  double at(int t, int k) const { return p[size_t(t) * num_classes + k]; }
  double& at(int t, int k) { return p[size_t(t) * num_classes + k]; }

  // Every row sums to 1 within tol and entries are nonnegative.
  bool rows_normalized(double tol = 1e-9) const;
};

// Label sequence over the alphabet (indices >= 1, no blanks).
using LabelSeq = std::vector<int>;
// Length-T sequence over alphabet plus blank.
using Path = std::vector<int>;

// The collapse mapping: merge runs of identical symbols, then drop blanks.
LabelSeq collapse(const Path& path);

// p(l|y): sum over all paths collapsing to l, forward recursion over the
// blank-extended sequence in log space. Infeasible labels score exactly 0.
double ctc_prob(const ProbMatrix& y, const LabelSeq& l);
double ctc_log_prob(const ProbMatrix& y, const LabelSeq& l);  // -inf if infeasible

// Negative log-likelihood; +infinity signals the infeasible case.
double ctc_loss(const ProbMatrix& y, const LabelSeq& l);

// d(ctc_loss)/dy[t][k] from the forward-backward recursions. Throws
// Error when the label is infeasible (loss is infinite there).
std::vector<double> ctc_loss_grad(const ProbMatrix& y, const LabelSeq& l);

struct Decoded {
  LabelSeq labels;
  double confidence = 0.0;  // geometric mean of the argmax probabilities
};

// Lexicon-free best-path decoding; argmax ties break toward the lowest
// class index.
Decoded best_path_decode(const ProbMatrix& y);

}  // namespace deid::ctc
