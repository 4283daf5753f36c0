// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>
#include <string>

#include "doctest.h"

#include "deid/ctc.hpp"
#include "deid/rng.hpp"

using namespace deid;
using namespace deid::ctc;

namespace {

// Brute-force oracle: enumerate every (|L|+1)^T path, group by collapse.
// Independent of the forward-backward implementation.
template <typename Float>
Float brute_force_prob(const ProbMatrix& y, const LabelSeq& l) {
  int T = y.time_steps;
  int C = y.num_classes;
  size_t total = 1;
  for (int t = 0; t < T; ++t) total *= size_t(C);
  Float sum = 0;
  Path path(static_cast<size_t>(T), 0);
  for (size_t code = 0; code < total; ++code) {
    size_t c = code;
    Float prod = 1;
    for (int t = 0; t < T; ++t) {
      path[size_t(t)] = int(c % C);
      c /= C;
      prod *= Float(y.at(t, path[size_t(t)]));
    }
    if (collapse(path) == l) sum += prod;
  }
  return sum;
}

ProbMatrix random_matrix(Pcg32& rng, int T, int C, double floor = 0.02) {
  ProbMatrix y = ProbMatrix::make(T, C);
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

LabelSeq random_label(Pcg32& rng, int max_len, int alphabet) {
  LabelSeq l(size_t(rng.range(0, max_len)));
  for (auto& s : l) s = rng.range(1, alphabet);
  return l;
}

// Maps a path string over "-jane" style alphabets to class indices.
Path path_from_string(const std::string& s, const std::string& alphabet) {
  Path p;
  for (char c : s) {
    if (c == '-') {
      p.push_back(kBlank);
    } else {
      size_t pos = alphabet.find(c);
      REQUIRE(pos != std::string::npos);
      p.push_back(int(pos) + 1);
    }
  }
  return p;
}

std::string label_to_string(const LabelSeq& l, const std::string& alphabet) {
  std::string out;
  for (int s : l) out.push_back(alphabet[size_t(s - 1)]);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("ctc");

TEST_CASE("collapse merges runs then removes blanks") {
  const std::string alpha = "jane";
  // A blank between repeated labels keeps both copies; that is the point of
  // the blank symbol, so '-a-a-' collapses to 'aa', not 'a'.
  CHECK(label_to_string(collapse(path_from_string("--jj-aa-nn-ee--", alpha)), alpha) ==
        "jane");
  CHECK(label_to_string(collapse(path_from_string("--jj-a-a-nn-ee--", alpha)), alpha) ==
        "jaane");
  CHECK(collapse(path_from_string("----", alpha)).empty());
  CHECK(label_to_string(collapse(path_from_string("aabb", "ab")), "ab") == "ab");
}

TEST_CASE("collapse never outputs blanks and is stable under re-embedding") {
  Pcg32 rng(11);
  for (int i = 0; i < 200; ++i) {
    Path p(size_t(rng.range(0, 12)));
    for (auto& s : p) s = rng.range(0, 3);
    LabelSeq l = collapse(p);
    for (int s : l) CHECK(s != kBlank);
    // Re-embedding the collapsed labels as a path and collapsing again is
    // the identity as long as adjacent repeats are blank-separated.
    Path embedded;
    for (int s : l) {
      if (!embedded.empty() && embedded.back() == s) embedded.push_back(kBlank);
      embedded.push_back(s);
    }
    CHECK(collapse(embedded) == l);
  }
}

TEST_CASE("single-step probability is the class probability") {
  ProbMatrix y = ProbMatrix::make(1, 2);
  y.at(0, 0) = 0.3;  // blank
  y.at(0, 1) = 0.7;  // 'a'
  CHECK(ctc_prob(y, {1}) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("two uniform steps give 0.75 for the single label") {
  ProbMatrix y = ProbMatrix::make(2, 2);
  for (int t = 0; t < 2; ++t)
    for (int k = 0; k < 2; ++k) y.at(t, k) = 0.5;
  // paths a.a, a.-, -.a out of four
  CHECK(ctc_prob(y, {1}) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(brute_force_prob<double>(y, {1}) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("infeasible label lengths score exactly zero") {
  Pcg32 rng(5);
  ProbMatrix y = random_matrix(rng, 4, 4);
  LabelSeq l{1, 2, 3, 1, 2};  // |l|=5 > T=4
  CHECK(ctc_prob(y, l) == 0.0);
  // repeated adjacent symbols need a separating blank: "aa" needs T >= 3
  ProbMatrix y2 = random_matrix(rng, 2, 2);
  CHECK(ctc_prob(y2, {1, 1}) == 0.0);
  CHECK(ctc_loss(y2, {1, 1}) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(ctc_loss_grad(y2, {1, 1}), Error);
}

TEST_CASE("forward recursion equals brute-force enumeration") {
  Pcg32 rng(2024);
  for (int i = 0; i < 200; ++i) {
    int T = rng.range(1, 6);
    int L = rng.range(1, 3);
    ProbMatrix y = random_matrix(rng, T, L + 1);
    LabelSeq l = random_label(rng, T + 1, L);
    double got = ctc_prob(y, l);
    double want = brute_force_prob<double>(y, l);
    CHECK(std::abs(got - want) < 1e-10);
  }
}

TEST_CASE("probabilities over all label sequences sum to one") {
  Pcg32 rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    int T = rng.range(1, 4);
    int L = 2;
    ProbMatrix y = random_matrix(rng, T, L + 1);
    REQUIRE(y.rows_normalized());
    // enumerate every label sequence of length 0..T over {1..L}
    double total = 0;
    for (int len = 0; len <= T; ++len) {
      size_t combos = 1;
      for (int i = 0; i < len; ++i) combos *= size_t(L);
      for (size_t code = 0; code < combos; ++code) {
        LabelSeq l(static_cast<size_t>(len), 0);
        size_t c = code;
        for (int i = 0; i < len; ++i) {
          l[size_t(i)] = int(c % L) + 1;
          c /= size_t(L);
        }
        total += ctc_prob(y, l);
      }
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("loss is the negative log of the probability") {
  Pcg32 rng(31);
  ProbMatrix y = random_matrix(rng, 5, 3);
  LabelSeq l{1, 2};
  CHECK(ctc_loss(y, l) == doctest::Approx(-std::log(ctc_prob(y, l))).epsilon(1e-12));
}

TEST_CASE("gradient matches long-double finite differences of the brute force") {
  Pcg32 rng(4242);
  double worst = 0;
  for (int inst = 0; inst < 100; ++inst) {
    ProbMatrix y = random_matrix(rng, 5, 3, 0.5);  // well conditioned rows
    LabelSeq l = random_label(rng, 3, 2);
    if (ctc_prob(y, l) <= 0.0) {
      --inst;
      continue;
    }
    auto grad = ctc_loss_grad(y, l);
    const long double h = 1e-6L;
    for (int t = 0; t < 5; ++t) {
      for (int k = 0; k < 3; ++k) {
        ProbMatrix yp = y, ym = y;
        yp.at(t, k) += double(h);
        ym.at(t, k) -= double(h);
        long double lp = -std::log(brute_force_prob<long double>(yp, l));
        long double lm = -std::log(brute_force_prob<long double>(ym, l));
        long double fd = (lp - lm) / (2 * h);
        double a = grad[size_t(t) * 3 + k];
        double rel = std::abs(double(fd) - a) /
                     std::max({std::abs(a), std::abs(double(fd)), 1e-8});
        worst = std::max(worst, rel);
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("gradient closed form at T=1") {
  ProbMatrix y = ProbMatrix::make(1, 3);
  y.at(0, 0) = 0.2;
  y.at(0, 1) = 0.5;
  y.at(0, 2) = 0.3;
  auto grad = ctc_loss_grad(y, {1});
  CHECK(grad[1] == doctest::Approx(-1.0 / 0.5).epsilon(1e-12));
  CHECK(grad[0] == 0.0);
  CHECK(grad[2] == 0.0);
}

TEST_CASE("classes unused by the extended sequence carry zero gradient") {
  Pcg32 rng(9);
  ProbMatrix y = random_matrix(rng, 4, 4);
  LabelSeq l{1};  // class 2 and 3 unused
  auto grad = ctc_loss_grad(y, l);
  for (int t = 0; t < 4; ++t) {
    CHECK(grad[size_t(t) * 4 + 2] == 0.0);
    CHECK(grad[size_t(t) * 4 + 3] == 0.0);
  }
}

TEST_CASE("best-path decoding is collapse of per-row argmaxes") {
  // one-hot rows spelling --a-b
  const std::string alpha = "ab";
  ProbMatrix y = ProbMatrix::make(5, 3);
  Path want = path_from_string("--a-b", alpha);
  for (int t = 0; t < 5; ++t) y.at(t, want[size_t(t)]) = 1.0;
  auto dec = best_path_decode(y);
  CHECK(label_to_string(dec.labels, alpha) == "ab");
  CHECK(dec.confidence == doctest::Approx(1.0).epsilon(1e-12));

  ProbMatrix y2 = ProbMatrix::make(2, 3);
  for (int t = 0; t < 2; ++t) {
    y2.at(t, 0) = 0.1;
    y2.at(t, 1) = 0.6;
    y2.at(t, 2) = 0.3;
  }
  auto dec2 = best_path_decode(y2);
  CHECK(label_to_string(dec2.labels, alpha) == "a");
  CHECK(dec2.confidence == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("decode equals the row-max oracle on random matrices") {
  Pcg32 rng(123);
  for (int i = 0; i < 100; ++i) {
    ProbMatrix y = random_matrix(rng, 6, 4);
    auto dec = best_path_decode(y);
    Path argmax;
    for (int t = 0; t < 6; ++t) {
      int best = 0;
      for (int k = 1; k < 4; ++k) {
        if (y.at(t, k) > y.at(t, best)) best = k;
      }
      argmax.push_back(best);
    }
    CHECK(dec.labels == collapse(argmax));
  }
}

TEST_CASE("argmax ties break toward the lowest class index") {
  ProbMatrix y = ProbMatrix::make(1, 3);
  y.at(0, 0) = 0.4;
  y.at(0, 1) = 0.4;
  y.at(0, 2) = 0.2;
  auto dec = best_path_decode(y);
  CHECK(dec.labels.empty());  // blank (index 0) wins the tie
}

TEST_SUITE_END();
