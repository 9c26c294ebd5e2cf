#pragma once

#include <cmath>
#include <vector>

#include "glora/tensor.hpp"

namespace testutil {

// Brute-force CTC: enumerate every V^T alignment path, keep those whose
// collapse (repeats removed, then blanks) equals the target, and sum their
// probabilities. Exponential, only for tiny cases.
inline double ctc_brute_force_nll(const glora::Tensor& logits, const std::vector<int>& targets,
                                  int blank) {
  const int t_max = logits.dim(0), v = logits.dim(1);

  std::vector<double> probs(static_cast<size_t>(t_max) * v);
  for (int t = 0; t < t_max; ++t) {
    double mx = logits.at(t, 0);
    for (int j = 1; j < v; ++j) mx = std::max(mx, logits.at(t, j));
    double z = 0.0;
    for (int j = 0; j < v; ++j) z += std::exp(logits.at(t, j) - mx);
    for (int j = 0; j < v; ++j)
      probs[static_cast<size_t>(t) * v + j] = std::exp(logits.at(t, j) - mx) / z;
  }

  std::vector<int> path(static_cast<size_t>(t_max), 0);
  double total = 0.0;
  while (true) {
    std::vector<int> collapsed;
    int prev = -1;
    for (int id : path) {
      if (id != prev && id != blank) collapsed.push_back(id);
      prev = id;
    }
    if (collapsed == targets) {
      double p = 1.0;
      for (int t = 0; t < t_max; ++t) p *= probs[static_cast<size_t>(t) * v + path[static_cast<size_t>(t)]];
      total += p;
    }
    int pos = t_max - 1;
    while (pos >= 0 && path[static_cast<size_t>(pos)] == v - 1) path[static_cast<size_t>(pos--)] = 0;
    if (pos < 0) break;
    ++path[static_cast<size_t>(pos)];
  }
  return -std::log(total);
}

}  // namespace testutil
