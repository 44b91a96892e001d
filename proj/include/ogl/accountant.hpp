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

#ifndef OGL_ACCOUNTANT_HPP_
#define OGL_ACCOUNTANT_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ogl/topology.hpp"
#include "ogl/trainer.hpp"

namespace ogl {

enum class RdpMode { kSampled, kFull };
enum class Variant { kAsPrinted, kExamplesConsistent };
enum class Bound { kThm1, kThm2 };

inline const std::vector<double>& DefaultAlphaGrid() {
  static const std::vector<double> grid = {
      1.25, 1.5, 1.75, 2,  2.25, 2.5, 3,  3.5, 4,   4.5, 5,   6,  7,
      8,    10,  12,   16, 20,   24,  28, 32,  48,  64,  128, 256};
  return grid;
}

// Per-step budget of one group mechanism. kSampled is the loose
// subsampled-Gaussian closed form 2 pi^2 alpha / sigma^2.
inline absl::StatusOr<double> PerStepRdp(double sigma, double pi, double alpha,
                                         RdpMode mode) {
  if (!(sigma > 0)) return absl::InvalidArgumentError("sigma must be > 0");
  if (!(alpha > 1)) return absl::InvalidArgumentError("alpha must be > 1");
  if (mode == RdpMode::kFull) return alpha / (2 * sigma * sigma);
  return 2 * pi * pi * alpha / (sigma * sigma);
}

inline long FloorDiv(long a, long b) {
  long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Number of S-epoch blocks of a source group whose output can have reached
// a group rho hops away by epoch t.
inline long DeliveredBlocks(int t, int S, GroupDistance rho, Variant v) {
  if (!rho.finite()) return 0;
  long k = v == Variant::kExamplesConsistent
               ? FloorDiv(t - 2, S) - rho.hops + 1
               : FloorDiv(t - 1, S) - rho.hops;
  return std::max(0L, k);
}

// Leakage contribution of one source group m' in M_n, in units of its
// per-step epsilon.
struct DelayTerm {
  int group = 0;
  bool shared = false;  // m' is also one of i's groups
  GroupDistance rho;
  long count = 0;
};

inline std::vector<DelayTerm> DelayCounts(const GroupStructure& s,
                                          const std::vector<std::vector<GroupDistance>>& dist,
                                          int S, int t, int n, int i,
                                          Algorithm alg, Variant v) {
  std::vector<DelayTerm> out;
  for (int m2 : s.groups_of(n)) {
    DelayTerm d;
    d.group = m2;
    d.shared = s.InGroup(i, m2);
    for (int m : s.groups_of(i)) d.rho = std::min(d.rho, dist[m2][m]);
    if (d.shared) {
      // every released mechanism of the group is seen directly
      d.count = alg == Algorithm::kDpOgl ? std::max(0, t - 1)
                                         : std::max(0L, FloorDiv(t - 1, S));
    } else {
      long b = DeliveredBlocks(t, S, d.rho, v);
      d.count = alg == Algorithm::kDpOgl ? b * S : b;
    }
    out.push_back(d);
  }
  return out;
}

// Reciprocal LSI constants. A zero reciprocal is a point mass.
struct LsiState {
  bool plus = false;
  int S = 1;
  int horizon = 0;  // epochs 1..horizon
  // inv_b[t][m], t = 1..horizon+1 (index 0 unused)
  std::vector<std::vector<double>> inv_b;
  // inv_a/inv_h[t][m][k]: k-th member of group m
  std::vector<std::vector<std::vector<double>>> inv_a, inv_h;
  // DP-OGL: indexed by epoch t. DP-OGL+: indexed by interval q >= 0.
  std::vector<std::vector<double>> inv_e, inv_hbar;
};

inline double LipschitzFactor(const HyperParams& hp, double beta) {
  double r = 1 + std::pow(1 + hp.eta * beta, hp.L);
  return r * r;
}

namespace internal {

inline void FillWorkerTerms(const GroupStructure& s, const HyperParams& hp,
                            double K, int t, LsiState& st) {
  const int M = s.num_groups();
  const bool inter = (t - 1) % hp.S == 0;
  st.inv_a[t].assign(M, {});
  st.inv_h[t].assign(M, {});
  for (int m = 0; m < M; ++m) {
    for (int n : s.members(m)) {
      double a = 0;
      if (inter) {
        for (int g : s.groups_of(n)) a += st.inv_b[t][g];
      } else {
        a = st.inv_b[t][m];
      }
      st.inv_a[t][m].push_back(a);
      st.inv_h[t][m].push_back(K * a);
    }
  }
}

inline absl::Status CheckLsiPreconditions(const GroupStructure& s,
                                          const HyperParams& hp, double beta) {
  if (!(beta >= 0) || !std::isfinite(beta)) {
    return absl::InvalidArgumentError("beta must be finite and >= 0");
  }
  if (static_cast<int>(hp.groups.size()) != s.num_groups()) {
    return absl::InvalidArgumentError("hyperparameters do not match M");
  }
  for (size_t m = 0; m < hp.groups.size(); ++m) {
    if (hp.groups[m].pi != 1.0) {
      return absl::FailedPreconditionError(absl::StrCat(
          "LSI recursion needs full participation: pi[", m, "] != 1"));
    }
    if (!std::isfinite(hp.groups[m].clip)) {
      return absl::FailedPreconditionError("LSI recursion needs finite clip");
    }
  }
  return absl::OkStatus();
}

}  // namespace internal

inline absl::StatusOr<LsiState> LsiRecursionDpOgl(const GroupStructure& s,
                                                  const HyperParams& hp,
                                                  double beta, int horizon) {
  if (auto st = internal::CheckLsiPreconditions(s, hp, beta); !st.ok()) {
    return st;
  }
  const int M = s.num_groups();
  const double K = LipschitzFactor(hp, beta);
  LsiState st;
  st.S = hp.S;
  st.horizon = horizon;
  st.inv_b.assign(horizon + 2, std::vector<double>(M, 0.0));
  st.inv_a.resize(horizon + 1);
  st.inv_h.resize(horizon + 1);
  st.inv_e.assign(horizon + 1, std::vector<double>(M, 0.0));
  st.inv_hbar.assign(horizon + 1, std::vector<double>(M, 0.0));
  for (int t = 1; t <= horizon; ++t) {
    internal::FillWorkerTerms(s, hp, K, t, st);
    for (int m = 0; m < M; ++m) {
      const double n = static_cast<double>(s.members(m).size());
      const double cs = hp.groups[m].clip * hp.groups[m].sigma;
      double sum_h = 0;
      for (double h : st.inv_h[t][m]) sum_h += h;
      st.inv_e[t][m] = cs * cs + sum_h;
      st.inv_hbar[t][m] = st.inv_b[t][m] + n * n * sum_h;
      const double p = hp.groups[m].pi;
      st.inv_b[t + 1][m] = st.inv_b[t][m] + p * p * n * n * st.inv_e[t][m];
    }
  }
  return st;
}

// horizon is rounded up to whole intervals.
inline absl::StatusOr<LsiState> LsiRecursionDpOglPlus(const GroupStructure& s,
                                                      const HyperParams& hp,
                                                      double beta,
                                                      int horizon) {
  if (auto st = internal::CheckLsiPreconditions(s, hp, beta); !st.ok()) {
    return st;
  }
  const int M = s.num_groups();
  const int S = hp.S;
  const int Q = (horizon + S - 1) / S;
  horizon = Q * S;
  const double K = LipschitzFactor(hp, beta);
  LsiState st;
  st.plus = true;
  st.S = S;
  st.horizon = horizon;
  st.inv_b.assign(horizon + 2, std::vector<double>(M, 0.0));
  st.inv_a.resize(horizon + 1);
  st.inv_h.resize(horizon + 1);
  st.inv_e.assign(Q, std::vector<double>(M, 0.0));
  st.inv_hbar.assign(Q, std::vector<double>(M, 0.0));
  for (int q = 0; q < Q; ++q) {
    const int t0 = q * S + 1;
    for (int t = t0; t < t0 + S; ++t) {
      if (t > t0) {
        for (int m = 0; m < M; ++m) {
          const double n = static_cast<double>(s.members(m).size());
          const double p = hp.groups[m].pi;
          double sum_h = 0;
          for (double h : st.inv_h[t - 1][m]) sum_h += h;
          st.inv_b[t][m] = st.inv_b[t - 1][m] + p * p * n * n * sum_h;
        }
      }
      internal::FillWorkerTerms(s, hp, K, t, st);
    }
    for (int m = 0; m < M; ++m) {
      const double n = static_cast<double>(s.members(m).size());
      const double cs = hp.groups[m].clip * hp.groups[m].sigma;
      const double p = hp.groups[m].pi;
      double sum_h = 0;
      for (int t = t0; t < t0 + S; ++t) {
        for (double h : st.inv_h[t][m]) sum_h += h;
      }
      st.inv_e[q][m] = S * cs * cs + sum_h;
      st.inv_hbar[q][m] = st.inv_b[t0][m] + n * n * sum_h;
      st.inv_b[t0 + S][m] = st.inv_b[t0][m] + p * p * n * n * st.inv_e[q][m];
    }
  }
  return st;
}

// mu of group j at DP-OGL mechanism epoch tau (or DP-OGL+ interval tau),
// for the targeted worker n.
inline double DegradationMu(const GroupStructure& s, const HyperParams& hp,
                            const LsiState& lsi, int j, int tau, double alpha,
                            int n) {
  if (s.InGroup(n, j)) return 1.0;
  const double inv = lsi.inv_hbar[tau][j];
  if (std::isinf(inv)) return 1.0;  // hbar = 0
  double cs2 = hp.groups[j].clip * hp.groups[j].sigma;
  cs2 *= cs2;
  if (lsi.plus) cs2 *= lsi.S;
  // alpha / (alpha + hbar c^2 sigma^2) with hbar = 1/inv
  return alpha * inv / (alpha * inv + cs2);
}

// N x N matrix; nullopt marks a trusted (undefined) cell.
struct PrivacyMatrix {
  int n = 0;
  std::vector<std::optional<double>> cells;

  PrivacyMatrix() = default;
  explicit PrivacyMatrix(int size) : n(size), cells(size_t(size) * size) {}
  std::optional<double>& at(int a, int b) { return cells[size_t(a) * n + b]; }
  const std::optional<double>& at(int a, int b) const {
    return cells[size_t(a) * n + b];
  }
  friend bool operator==(const PrivacyMatrix&, const PrivacyMatrix&) = default;
};

// Structural per-pair accountant for one (structure, hyperparameters) pair.
class Accountant {
 public:
  static absl::StatusOr<Accountant> Create(const GroupStructure& s,
                                           const HyperParams& hp,
                                           Bound bound, double beta = 0,
                                           int horizon = -1) {
    if (static_cast<int>(hp.groups.size()) != s.num_groups()) {
      return absl::InvalidArgumentError("hyperparameters do not match M");
    }
    if (hp.S < 1) return absl::InvalidArgumentError("S must be >= 1");
    if (hp.diagnostic) {
      return absl::FailedPreconditionError(
          "accounting is disabled in diagnostic mode");
    }
    for (size_t m = 0; m < hp.groups.size(); ++m) {
      if (!(hp.groups[m].sigma > 0)) {
        return absl::FailedPreconditionError(
            absl::StrCat("sigma[", m, "] must be > 0 for accounting"));
      }
    }
    if (hp.algorithm == Algorithm::kDpOglPlus &&
        hp.threat != ThreatModel::kTM2) {
      return absl::FailedPreconditionError(
          "DP-OGL+ is only accounted under threat model TM2 (its "
          "intermediate updates are unprotected inside a group)");
    }
    Accountant a;
    a.s_ = s;
    a.hp_ = hp;
    a.bound_ = bound;
    a.adj_ = BuildAdjacency(s);
    a.dist_ = AllPairsDistances(a.adj_);
    if (bound == Bound::kThm2) {
      if (!IsString(s)) {
        return absl::FailedPreconditionError(
            "degraded (thm2) bound needs a string group structure");
      }
      if (horizon < 0) horizon = hp.T;
      auto lsi = hp.algorithm == Algorithm::kDpOgl
                     ? LsiRecursionDpOgl(s, hp, beta, std::max(horizon, 1))
                     : LsiRecursionDpOglPlus(s, hp, beta, std::max(horizon, 1));
      if (!lsi.ok()) return lsi.status();
      a.lsi_ = *std::move(lsi);
    }
    return a;
  }

  const GroupStructure& structure() const { return s_; }
  const HyperParams& hp() const { return hp_; }
  const LsiState& lsi() const { return lsi_; }
  Bound bound() const { return bound_; }
  const std::vector<std::vector<GroupDistance>>& distances() const {
    return dist_;
  }

  bool Trusted(int n, int i) const {
    if (n == i) return true;
    return hp_.threat == ThreatModel::kTM2 && s_.ShareGroup(n, i);
  }

  double StepEps(int m, double alpha) const {
    const auto& g = hp_.groups[m];
    return *PerStepRdp(g.sigma, g.pi, alpha,
                       bound_ == Bound::kThm1 ? RdpMode::kSampled
                                              : RdpMode::kFull);
  }

  std::vector<DelayTerm> Delays(int n, int i, int t, Variant v) const {
    return DelayCounts(s_, dist_, hp_.S, t, n, i, hp_.algorithm, v);
  }

  // eps_{n,i}^{1:t}; nullopt for a trusted pair.
  std::optional<double> Pair(int n, int i, int t, double alpha,
                             Variant v) const {
    if (Trusted(n, i)) return std::nullopt;
    double total = 0;
    for (const DelayTerm& d : Delays(n, i, t, v)) {
      if (d.count == 0) continue;
      if (d.shared && hp_.algorithm == Algorithm::kDpOglPlus) continue;
      const double eps = StepEps(d.group, alpha);
      if (bound_ == Bound::kThm1 || d.shared) {
        total += static_cast<double>(d.count) * eps;
      } else {
        total += eps * DegradedBlocks(n, i, d, t, alpha, v);
      }
    }
    return total;
  }

  PrivacyMatrix Matrix(int t, double alpha, Variant v) const {
    const int N = s_.num_workers();
    PrivacyMatrix pm(N);
    // workers with equal memberships give equal cells
    std::map<std::pair<int, int>, std::optional<double>> memo;
    auto sig = Signatures();
    for (int n = 0; n < N; ++n) {
      for (int i = 0; i < N; ++i) {
        if (Trusted(n, i)) continue;
        auto key = std::make_pair(sig[n], sig[i]);
        auto it = memo.find(key);
        if (it == memo.end()) it = memo.emplace(key, Pair(n, i, t, alpha, v)).first;
        pm.at(n, i) = it->second;
      }
    }
    return pm;
  }

  // Product of mu factors for each delivered block, summed (and times S
  // for DP-OGL). Multiplied by the per-step epsilon by the caller.
  double DegradedBlocks(int n, int i, const DelayTerm& d, int t, double alpha,
                        Variant v) const {
    (void)i;
    const int S = hp_.S;
    const long blocks = DeliveredBlocks(t, S, d.rho, v);
    if (blocks == 0) return 0;
    const int rho = d.rho.hops;
    // destination: i's group closest to the source, lowest id on ties
    int dest = -1;
    for (int m : s_.groups_of(i)) {
      if (dist_[d.group][m].hops == rho) {
        dest = m;
        break;
      }
    }
    std::vector<int> path = ShortestPath(adj_, d.group, dest);
    double sum = 0;
    for (long j = 1; j <= blocks; ++j) {
      double prod = 1;
      if (hp_.algorithm == Algorithm::kDpOgl) {
        for (int k = 1; k < rho; ++k) {
          for (long tau = (j + k - 1) * S + 1; tau <= (j + k) * S; ++tau) {
            prod *= DegradationMu(s_, hp_, lsi_, path[k], tau, alpha, n);
          }
        }
        prod *= DegradationMu(s_, hp_, lsi_, path[rho], (j + rho - 1) * S + 1,
                              alpha, n);
      } else {
        for (int k = 1; k < rho; ++k) {
          prod *= DegradationMu(s_, hp_, lsi_, path[k], j + k - 1, alpha, n);
        }
        if (S == 1) {
          prod *= DegradationMu(s_, hp_, lsi_, path[rho], j + rho - 1, alpha, n);
        }
      }
      sum += prod;
    }
    return hp_.algorithm == Algorithm::kDpOgl ? S * sum : sum;
  }

  // Same as PwpRdp(Matrix(t, alpha, v)) but evaluated once per pair of
  // membership signatures.
  std::vector<std::optional<double>> WorkerPwp(int t, double alpha,
                                               Variant v) const {
    const int N = s_.num_workers();
    auto sig = Signatures();
    int nsig = 0;
    for (int x : sig) nsig = std::max(nsig, x + 1);
    std::vector<int> rep(nsig, -1), second(nsig, -1);
    for (int w = 0; w < N; ++w) {
      if (rep[sig[w]] < 0) {
        rep[sig[w]] = w;
      } else if (second[sig[w]] < 0) {
        second[sig[w]] = w;
      }
    }
    std::vector<std::optional<double>> per_sig(nsig);
    for (int a = 0; a < nsig; ++a) {
      for (int b = 0; b < nsig; ++b) {
        int n = rep[a];
        int i = a == b ? second[b] : rep[b];
        if (i < 0 || Trusted(n, i)) continue;
        auto e = Pair(n, i, t, alpha, v);
        if (e.has_value()) per_sig[a] = std::max(per_sig[a].value_or(0.0), *e);
      }
    }
    std::vector<std::optional<double>> out(N);
    for (int w = 0; w < N; ++w) out[w] = per_sig[sig[w]];
    return out;
  }

  // Max over admissible adversaries; nullopt when there are none.
  std::vector<std::optional<double>> PwpRdp(const PrivacyMatrix& pm) const {
    std::vector<std::optional<double>> out(pm.n);
    for (int n = 0; n < pm.n; ++n) {
      for (int i = 0; i < pm.n; ++i) {
        const auto& c = pm.at(n, i);
        if (c.has_value()) out[n] = std::max(out[n].value_or(0.0), *c);
      }
    }
    return out;
  }

 private:
  std::vector<int> Signatures() const {
    std::map<std::vector<int>, int> ids;
    std::vector<int> sig(s_.num_workers());
    for (int n = 0; n < s_.num_workers(); ++n) {
      auto it = ids.emplace(s_.groups_of(n), static_cast<int>(ids.size())).first;
      sig[n] = it->second;
    }
    return sig;
  }

  GroupStructure s_;
  HyperParams hp_;
  Bound bound_ = Bound::kThm1;
  AdjacencyMatrix adj_;
  std::vector<std::vector<GroupDistance>> dist_;
  LsiState lsi_;
};

inline absl::StatusOr<std::optional<double>> Thm1PairBound(
    const GroupStructure& s, HyperParams hp, double alpha, int n, int i, int t,
    Variant v) {
  hp.algorithm = Algorithm::kDpOgl;
  hp.threat = ThreatModel::kTM1;
  auto acc = Accountant::Create(s, hp, Bound::kThm1);
  if (!acc.ok()) return acc.status();
  return acc->Pair(n, i, t, alpha, v);
}

inline absl::StatusOr<std::optional<double>> Thm1PlusPairBound(
    const GroupStructure& s, HyperParams hp, double alpha, int n, int i, int t,
    Variant v) {
  hp.algorithm = Algorithm::kDpOglPlus;
  hp.threat = ThreatModel::kTM2;
  auto acc = Accountant::Create(s, hp, Bound::kThm1);
  if (!acc.ok()) return acc.status();
  return acc->Pair(n, i, t, alpha, v);
}

inline absl::StatusOr<std::optional<double>> Thm2PairBound(
    const GroupStructure& s, const HyperParams& hp, double alpha, double beta,
    int n, int i, int t, Variant v) {
  auto acc = Accountant::Create(s, hp, Bound::kThm2, beta, std::max(t, 1));
  if (!acc.ok()) return acc.status();
  return acc->Pair(n, i, t, alpha, v);
}

struct DpResult {
  double eps_dp = 0;
  double alpha_star = 0;
  double eps_rdp = 0;  // curve value at alpha_star
};

// min over the grid of eps(alpha) + log(1/delta)/(alpha-1); first minimum
// wins, so ties go to the smaller alpha when the grid is ascending.
inline absl::StatusOr<DpResult> RdpToDp(const std::vector<double>& alphas,
                                        const std::vector<double>& eps,
                                        double delta) {
  if (alphas.empty()) return absl::InvalidArgumentError("empty alpha grid");
  if (alphas.size() != eps.size()) {
    return absl::InvalidArgumentError("curve and grid sizes differ");
  }
  if (!(delta > 0 && delta <= 1)) {
    return absl::InvalidArgumentError("delta must be in (0,1]");
  }
  const double pen = std::log(1 / delta);
  DpResult best;
  best.eps_dp = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < alphas.size(); ++k) {
    if (!(alphas[k] > 1)) {
      return absl::InvalidArgumentError("alpha must be > 1");
    }
    double v = eps[k] + pen / (alphas[k] - 1);
    if (v < best.eps_dp ||
        (v == best.eps_dp && alphas[k] < best.alpha_star)) {
      best = {v, alphas[k], eps[k]};
    }
  }
  return best;
}

}  // namespace ogl

#endif  // OGL_ACCOUNTANT_HPP_
