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

#ifndef OGL_PROPAGATION_HPP_
#define OGL_PROPAGATION_HPP_

#include <map>
#include <vector>

#include "ogl/topology.hpp"
#include "ogl/trainer.hpp"

namespace ogl {

// Epoch-unrolled dataflow. Each mechanism output is tracked as the set of
// group models that depend on it; the set grows only across shared workers
// at inter-group epochs. A mechanism counts toward (n, i) when it belongs
// to one of n's groups and reaches a model of one of i's groups released at
// or before epoch t.
//
// Returns, for each group of n, how many of its mechanisms are seen by i.
inline std::map<int, long> PropagationOracle(const GroupStructure& s, int S,
                                             int t, int n, int i,
                                             Algorithm alg) {
  const int M = s.num_groups();
  std::vector<std::vector<int>> nbr(M);
  for (int w = 0; w < s.num_workers(); ++w) {
    for (int g : s.groups_of(w)) {
      for (int h : s.groups_of(w)) {
        if (g != h) nbr[g].push_back(h);
      }
    }
  }
  auto seen_by_i = [&](const std::vector<char>& in) {
    for (int m : s.groups_of(i)) {
      if (in[m]) return true;
    }
    return false;
  };

  std::map<int, long> counts;
  for (int src : s.groups_of(n)) {
    long c = 0;
    // first model index carrying each mechanism of src
    std::vector<int> births;
    if (alg == Algorithm::kDpOgl) {
      for (int tau = 1; tau <= t - 1; ++tau) births.push_back(tau + 1);
    } else {
      for (int k = 1; k * S + 1 <= t; ++k) births.push_back(k * S + 1);
    }
    for (int birth : births) {
      std::vector<char> in(M, 0);
      in[src] = 1;
      bool hit = false;
      for (int e = birth; e <= t && !hit; ++e) {
        if (seen_by_i(in)) {
          hit = true;
          break;
        }
        if ((e - 1) % S == 0) {
          // theta^{e+1}_g reads theta^e of every group sharing a worker
          std::vector<char> next = in;
          for (int g = 0; g < M; ++g) {
            if (!in[g]) continue;
            for (int h : nbr[g]) next[h] = 1;
          }
          in.swap(next);
        }
      }
      if (hit) ++c;
    }
    counts[src] = c;
  }
  return counts;
}

}  // namespace ogl

#endif  // OGL_PROPAGATION_HPP_
