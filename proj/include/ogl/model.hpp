//
// Copyright 2026 The ogl-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef OGL_MODEL_HPP_
#define OGL_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "ogl/data.hpp"

namespace ogl {

using ModelParams = std::vector<double>;

// Multinomial logistic regression. Parameters are C rows of (u+1) weights,
// the last entry of each row being the bias.
struct Softmax {
  int dims = 0;
  int classes = 0;

  int num_params() const { return (dims + 1) * classes; }
  ModelParams Zeros() const { return ModelParams(num_params(), 0.0); }

  void Logits(const ModelParams& w, const double* x, double* z) const {
    const int stride = dims + 1;
    for (int c = 0; c < classes; ++c) {
      const double* row = w.data() + c * stride;
      double s = row[dims];
      for (int j = 0; j < dims; ++j) s += row[j] * x[j];
      z[c] = s;
    }
  }

  // Negative log-likelihood of one sample; if grad is non-null, adds
  // scale * d(loss)/dw into it.
  double SampleLoss(const ModelParams& w, const double* x, int y,
                    std::vector<double>& z, double* grad = nullptr,
                    double scale = 1.0) const {
    Logits(w, x, z.data());
    double mx = *std::max_element(z.begin(), z.begin() + classes);
    double sum = 0;
    for (int c = 0; c < classes; ++c) sum += std::exp(z[c] - mx);
    double lse = mx + std::log(sum);
    if (grad != nullptr) {
      const int stride = dims + 1;
      for (int c = 0; c < classes; ++c) {
        double g = std::exp(z[c] - lse) - (c == y ? 1.0 : 0.0);
        g *= scale;
        double* row = grad + c * stride;
        for (int j = 0; j < dims; ++j) row[j] += g * x[j];
        row[dims] += g;
      }
    }
    return lse - z[y];
  }

  // Mean loss over idx; grad (resized) gets the mean gradient if non-null.
  double Loss(const ModelParams& w, const Dataset& d,
              const std::vector<int>& idx,
              std::vector<double>* grad = nullptr) const {
    std::vector<double> z(classes);
    if (grad != nullptr) grad->assign(num_params(), 0.0);
    if (idx.empty()) return 0.0;
    const double scale = 1.0 / idx.size();
    double total = 0;
    for (int k : idx) {
      total += SampleLoss(w, d.row(k), d.labels[k], z,
                          grad ? grad->data() : nullptr, scale);
    }
    return total * scale;
  }

  int Predict(const ModelParams& w, const double* x) const {
    std::vector<double> z(classes);
    Logits(w, x, z.data());
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
  }

  double Accuracy(const ModelParams& w, const Dataset& d,
                  const std::vector<int>& idx) const {
    if (idx.empty()) return 0.0;
    int hit = 0;
    for (int k : idx) hit += Predict(w, d.row(k)) == d.labels[k];
    return static_cast<double>(hit) / idx.size();
  }
};

// beta = max_k ||(x_k, 1)||^2 / 2. The softmax Hessian in logit space is
// diag(p) - p p^T, whose top eigenvalue is at most 1/2.
inline double SmoothnessConstant(const Dataset& d) {
  double best = 0;
  for (size_t k = 0; k < d.size(); ++k) {
    const double* x = d.row(k);
    double s = 1.0;
    for (int j = 0; j < d.dims; ++j) s += x[j] * x[j];
    best = std::max(best, s);
  }
  return 0.5 * best;
}

inline double Norm2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace ogl

#endif  // OGL_MODEL_HPP_
