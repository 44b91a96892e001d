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

#ifndef OGL_DATA_HPP_
#define OGL_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ogl/rng.hpp"

namespace ogl {

// Row-major feature matrix plus labels.
struct Dataset {
  int dims = 0;
  int classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  size_t size() const { return labels.size(); }
  const double* row(size_t k) const { return features.data() + k * dims; }
};

// D_n for every worker, as indices into one shared Dataset.
struct WorkerData {
  std::vector<std::vector<int>> indices;

  int num_workers() const { return static_cast<int>(indices.size()); }
};

inline absl::StatusOr<Dataset> MakeSynthetic(int classes, int dims,
                                             int per_class,
                                             std::uint64_t seed) {
  if (classes < 2) return absl::InvalidArgumentError("classes must be >= 2");
  if (dims < 2) return absl::InvalidArgumentError("dims must be >= 2");
  if (per_class < 1) return absl::InvalidArgumentError("per_class must be >= 1");
  Dataset d;
  d.dims = dims;
  d.classes = classes;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> means(size_t(classes) * dims);
  Rng mrng = MakeStream(seed, Purpose::kSyntheticMeans);
  for (double& v : means) v = 3.0 * gauss(mrng);
  d.features.reserve(size_t(classes) * per_class * dims);
  for (int c = 0; c < classes; ++c) {
    Rng prng = MakeStream(seed, Purpose::kSyntheticPoints, c);
    for (int k = 0; k < per_class; ++k) {
      for (int j = 0; j < dims; ++j) {
        d.features.push_back(means[size_t(c) * dims + j] + gauss(prng));
      }
      d.labels.push_back(c);
    }
  }
  return d;
}

// Rows "f1,...,fu,label"; labels must be 0..C-1.
inline absl::StatusOr<Dataset> LoadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  Dataset d;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        vals.push_back(std::stod(cell, &used));
      } catch (...) {
        if (lineno == 1 && d.labels.empty()) break;  // header row
        return absl::InvalidArgumentError(
            absl::StrCat(path, ":", lineno, ": bad number '", cell, "'"));
      }
    }
    if (vals.empty() && lineno == 1) continue;
    if (vals.size() < 2) {
      if (lineno == 1) continue;
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", lineno, ": need >= 1 feature and a label"));
    }
    int u = static_cast<int>(vals.size()) - 1;
    if (d.dims == 0) d.dims = u;
    if (u != d.dims) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", lineno, ": ragged row"));
    }
    double lab = vals.back();
    if (lab < 0 || lab != std::floor(lab)) {
      return absl::InvalidArgumentError(
          absl::StrCat(path, ":", lineno, ": label must be a class id"));
    }
    d.features.insert(d.features.end(), vals.begin(), vals.end() - 1);
    d.labels.push_back(static_cast<int>(lab));
    d.classes = std::max(d.classes, static_cast<int>(lab) + 1);
  }
  if (d.labels.empty()) return absl::InvalidArgumentError("empty dataset");
  if (d.classes < 2) return absl::InvalidArgumentError("need >= 2 classes");
  return d;
}

// Indices of each class, in dataset order.
inline std::vector<std::vector<int>> IndicesByClass(
    const Dataset& d, const std::vector<int>& subset) {
  std::vector<std::vector<int>> by(d.classes);
  for (int k : subset) by[d.labels[k]].push_back(k);
  return by;
}

inline std::vector<int> AllIndices(const Dataset& d) {
  std::vector<int> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

struct Split {
  std::vector<int> train;
  std::vector<int> test;
};

// Per-class shuffle, then the first round(frac * count) go to test.
inline Split StratifiedSplit(const Dataset& d, double test_frac,
                             std::uint64_t seed) {
  Split out;
  auto by = IndicesByClass(d, AllIndices(d));
  for (int c = 0; c < d.classes; ++c) {
    auto& idx = by[c];
    Rng rng = MakeStream(seed, Purpose::kSplit, c);
    std::shuffle(idx.begin(), idx.end(), rng);
    size_t nt = static_cast<size_t>(std::llround(test_frac * idx.size()));
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + nt);
    out.train.insert(out.train.end(), idx.begin() + nt, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

// props[c][n]: share of class c given to worker n, each row ~ Dir(beta 1_N).
inline std::vector<std::vector<double>> DirichletProportions(
    int classes, int n, double beta, std::uint64_t seed) {
  std::vector<std::vector<double>> props(classes, std::vector<double>(n));
  for (int c = 0; c < classes; ++c) {
    Rng rng = MakeStream(seed, Purpose::kPartition, c);
    std::gamma_distribution<double> gamma(beta, 1.0);
    double sum = 0;
    for (double& p : props[c]) sum += (p = gamma(rng));
    if (!(sum > 0)) {
      // every gamma draw underflowed (tiny beta): the limit is a vertex
      std::uniform_int_distribution<int> pick(0, n - 1);
      std::fill(props[c].begin(), props[c].end(), 0.0);
      props[c][pick(rng)] = 1.0;
      continue;
    }
    for (double& p : props[c]) p /= sum;
  }
  return props;
}

// Largest-remainder apportionment of `count` items; ties go to lower index.
inline std::vector<int> Apportion(int count, const std::vector<double>& p) {
  const size_t n = p.size();
  std::vector<int> out(n);
  std::vector<std::pair<double, size_t>> rem(n);
  int given = 0;
  for (size_t k = 0; k < n; ++k) {
    double exact = count * p[k];
    out[k] = static_cast<int>(std::floor(exact));
    given += out[k];
    rem[k] = {exact - out[k], k};
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  for (size_t k = 0; given < count; ++k, ++given) out[rem[k % n].second]++;
  return out;
}

// Splits `subset` across workers with the given per-class proportions.
// `salt` separates the within-class shuffles of different subsets.
inline WorkerData PartitionWithProportions(
    const Dataset& d, const std::vector<int>& subset,
    const std::vector<std::vector<double>>& props, std::uint64_t seed,
    std::uint64_t salt = 0) {
  const int n = static_cast<int>(props.empty() ? 0 : props[0].size());
  WorkerData w;
  w.indices.assign(n, {});
  auto by = IndicesByClass(d, subset);
  for (int c = 0; c < d.classes; ++c) {
    auto& idx = by[c];
    Rng rng = MakeStream(seed, Purpose::kPartition, c, salt + 1);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto counts = Apportion(static_cast<int>(idx.size()), props[c]);
    size_t pos = 0;
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < counts[k]; ++j) w.indices[k].push_back(idx[pos++]);
    }
  }
  for (auto& v : w.indices) std::sort(v.begin(), v.end());
  return w;
}

inline absl::StatusOr<WorkerData> DirichletPartition(
    const Dataset& d, const std::vector<int>& subset, int n, double beta,
    std::uint64_t seed) {
  if (n < 1) return absl::InvalidArgumentError("need >= 1 worker");
  if (!(beta > 0)) return absl::InvalidArgumentError("beta must be > 0");
  return PartitionWithProportions(
      d, subset, DirichletProportions(d.classes, n, beta, seed), seed);
}

// Sorted set of labels present in each worker's shard.
inline std::vector<std::vector<int>> LabelsPresent(const Dataset& d,
                                                   const WorkerData& w) {
  std::vector<std::vector<int>> out(w.num_workers());
  for (int k = 0; k < w.num_workers(); ++k) {
    std::vector<char> seen(d.classes, 0);
    for (int i : w.indices[k]) seen[d.labels[i]] = 1;
    for (int c = 0; c < d.classes; ++c) {
      if (seen[c]) out[k].push_back(c);
    }
  }
  return out;
}

}  // namespace ogl

#endif  // OGL_DATA_HPP_
