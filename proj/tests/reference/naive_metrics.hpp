// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "deid/image.hpp"
#include "deid/metrics.hpp"

// Serial double-loop reference implementations. These are the oracles the
// test suite checks the production kernels against, and the baseline the
// bench target compares OpenMP kernels to. They must stay independent of
// the implementations in src/.
namespace deid::reference {

metrics::PixelConfusion naive_mask_confusion(const Mask& pred, const Mask& truth);

metrics::MaskedMetrics naive_masked_errors(const ImageFrame& a, const ImageFrame& b,
                                           const Mask& m);

// Sliding-window SSIM map computed window-by-window with explicit loops,
// averaged over mask pixels.
double naive_masked_ssim(const ImageFrame& a, const ImageFrame& b, const Mask& m,
                         int window = 7);

// Exact Euclidean distance transform by exhaustive search: distance from
// each masked pixel to the nearest unmasked pixel center.
std::vector<double> naive_distance_transform(const Mask& mask);

}  // namespace deid::reference
