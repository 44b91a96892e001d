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

#ifndef OGL_TRAINER_HPP_
#define OGL_TRAINER_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "ogl/data.hpp"
#include "ogl/model.hpp"
#include "ogl/rng.hpp"
#include "ogl/topology.hpp"

namespace ogl {

enum class Algorithm { kDpOgl, kDpOglPlus };
enum class ThreatModel { kTM1, kTM2 };

struct GroupParams {
  double clip = 1.0;   // c_m
  double sigma = 1.0;  // noise multiplier
  double pi = 1.0;     // Poisson rate
};

struct HyperParams {
  int S = 1;
  int L = 1;
  double eta = 0.1;
  int T = 0;
  std::vector<GroupParams> groups;  // one per group
  int batch_size = 0;               // <= 0: full local batch
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::kDpOgl;
  ThreatModel threat = ThreatModel::kTM1;
  // sigma = 0 and clip = inf are only legal here; accounting is off.
  bool diagnostic = false;

  absl::Status Validate(int num_groups) const {
    if (S < 1) return absl::InvalidArgumentError("S: must be >= 1");
    if (L < 1) return absl::InvalidArgumentError("L: must be >= 1");
    if (!(eta >= 0) || !std::isfinite(eta)) {
      return absl::InvalidArgumentError("eta: must be finite and >= 0");
    }
    if (T < 0) return absl::InvalidArgumentError("T: must be >= 0");
    if (static_cast<int>(groups.size()) != num_groups) {
      return absl::InvalidArgumentError(absl::StrCat(
          "clip/sigma/pi: need ", num_groups, " entries, got ", groups.size()));
    }
    if (algorithm == Algorithm::kDpOglPlus && T % S != 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("T: DP-OGL+ needs T to be a multiple of S (T=", T,
                       ", S=", S, ")"));
    }
    for (size_t m = 0; m < groups.size(); ++m) {
      const auto& g = groups[m];
      if (!(g.pi > 0 && g.pi <= 1)) {
        return absl::InvalidArgumentError(
            absl::StrCat("pi[", m, "]: must be in (0,1]"));
      }
      if (!(g.clip > 0) || (std::isinf(g.clip) && !diagnostic)) {
        return absl::InvalidArgumentError(absl::StrCat(
            "clip[", m, "]: must be > 0 (inf only in diagnostic mode)"));
      }
      if (!(g.sigma >= 0) || !std::isfinite(g.sigma) ||
          (g.sigma == 0 && !diagnostic)) {
        return absl::InvalidArgumentError(absl::StrCat(
            "sigma[", m, "]: must be > 0 (0 only in diagnostic mode)"));
      }
    }
    return absl::OkStatus();
  }
};

inline absl::StatusOr<ModelParams> WorkerMerge(
    const std::vector<const ModelParams*>& models) {
  if (models.empty()) return absl::InvalidArgumentError("nothing to merge");
  ModelParams out = *models[0];
  for (size_t k = 1; k < models.size(); ++k) {
    for (size_t j = 0; j < out.size(); ++j) out[j] += (*models[k])[j];
  }
  if (models.size() > 1) {
    for (double& v : out) v /= static_cast<double>(models.size());
  }
  return out;
}

// Mean of the worker's group models, i.e. its deployment model.
inline ModelParams Personalize(const GroupStructure& s, int n,
                               const std::vector<ModelParams>& theta) {
  std::vector<const ModelParams*> ptrs;
  for (int m : s.groups_of(n)) ptrs.push_back(&theta[m]);
  return *WorkerMerge(ptrs);
}

// L mini-batch SGD steps; batches are drawn without replacement from a
// shuffled order, reshuffling when it runs out.
inline ModelParams LocalTrain(const Softmax& model, const ModelParams& start,
                              const Dataset& d, const std::vector<int>& shard,
                              int L, double eta, int batch_size, Rng& rng) {
  ModelParams x = start;
  if (shard.empty()) return x;
  const size_t b = (batch_size <= 0 || size_t(batch_size) >= shard.size())
                       ? shard.size()
                       : size_t(batch_size);
  std::vector<int> order = shard;
  size_t pos = order.size();  // force a shuffle on first use
  std::vector<int> batch(b);
  std::vector<double> grad;
  for (int step = 0; step < L; ++step) {
    if (b == order.size()) {
      std::copy(order.begin(), order.end(), batch.begin());
    } else {
      if (pos + b > order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        pos = 0;
      }
      std::copy(order.begin() + pos, order.begin() + pos + b, batch.begin());
      pos += b;
    }
    model.Loss(x, d, batch, &grad);
    for (size_t j = 0; j < x.size(); ++j) x[j] -= eta * grad[j];
  }
  return x;
}

// delta / max(1, ||delta|| / c). c = inf disables clipping.
inline ModelParams ClipUpdate(ModelParams delta, double c) {
  if (std::isinf(c)) return delta;
  double norm = Norm2(delta);
  double scale = std::max(1.0, norm / c);
  if (scale > 1.0) {
    for (double& v : delta) v /= scale;
  }
  return delta;
}

inline std::vector<int> PoissonSample(const std::vector<int>& members,
                                      double pi, Rng& rng) {
  std::vector<int> out;
  if (pi >= 1.0) return members;
  std::bernoulli_distribution coin(pi);
  for (int n : members) {
    if (coin(rng)) out.push_back(n);
  }
  return out;
}

inline void AddGaussianNoise(std::vector<double>& v, double stddev, Rng& rng) {
  if (stddev == 0) return;
  std::normal_distribution<double> gauss(0.0, stddev);
  for (double& x : v) x += gauss(rng);
}

// sigma = 0 means no noise even when clip = inf.
inline double NoiseStd(double clip, double sigma) {
  return sigma == 0 ? 0.0 : clip * sigma;
}

struct EpochMetrics {
  int epoch = 0;
  double avg_train_loss = 0;
  double avg_test_acc = 0;
};

// Per-group bookkeeping for one DP-OGL+ interval.
struct IntervalState {
  ModelParams anchor;                 // theta at the interval start
  std::vector<int> sampled;           // frozen for the whole interval
  std::vector<ModelParams> raw_sums;  // per sampled worker
};

struct TrainingState {
  int epoch = 1;                    // next epoch t; theta holds theta^t
  std::vector<ModelParams> theta;   // one per group
  std::vector<IntervalState> interval;
};

struct TrainingResult {
  TrainingState final_state;
  std::vector<EpochMetrics> metrics;
  std::vector<std::vector<ModelParams>> trajectory;  // theta^1..theta^{T+1}
};

class Trainer {
 public:
  Trainer(const GroupStructure& s, const HyperParams& hp, const Dataset& d,
          const WorkerData& train, const WorkerData& test)
      : s_(s), hp_(hp), d_(d), train_(train), test_(test),
        model_{d.dims, d.classes} {}

  const Softmax& model() const { return model_; }

  TrainingState Initial() const {
    TrainingState st;
    st.theta.assign(s_.num_groups(), model_.Zeros());
    st.interval.assign(s_.num_groups(), {});
    return st;
  }

  bool InterEpoch(int t) const { return (t - 1) % hp_.S == 0; }

  // x_{n,m}^{t,0}: merged model at inter-group epochs, else the own group's.
  ModelParams WorkerStart(int n, int m, int t,
                          const std::vector<ModelParams>& theta) const {
    if (InterEpoch(t)) return Personalize(s_, n, theta);
    return theta[m];
  }

  ModelParams WorkerUpdate(int n, int m, int t,
                           const std::vector<ModelParams>& theta) const {
    ModelParams start = WorkerStart(n, m, t, theta);
    Rng rng = MakeStream(hp_.seed, Purpose::kTrain, m, t, n);
    ModelParams x = LocalTrain(model_, start, d_, train_.indices[n], hp_.L,
                               hp_.eta, hp_.batch_size, rng);
    for (size_t j = 0; j < x.size(); ++j) x[j] -= start[j];
    return x;
  }

  // theta_m^{t+1} under DP-OGL.
  ModelParams GroupRoundDpOgl(int m, int t,
                              const std::vector<ModelParams>& theta) const {
    const GroupParams& g = hp_.groups[m];
    Rng srng = MakeStream(hp_.seed, Purpose::kSample, m, t);
    auto sampled = PoissonSample(s_.members(m), g.pi, srng);
    std::vector<double> sum(model_.num_params(), 0.0);
    for (int n : sampled) {
      ModelParams u = ClipUpdate(WorkerUpdate(n, m, t, theta), g.clip);
      for (size_t j = 0; j < sum.size(); ++j) sum[j] += u[j];
    }
    Rng nrng = MakeStream(hp_.seed, Purpose::kNoise, m, t);
    AddGaussianNoise(sum, NoiseStd(g.clip, g.sigma), nrng);
    const double denom = g.pi * static_cast<double>(s_.members(m).size());
    ModelParams out = theta[m];
    for (size_t j = 0; j < out.size(); ++j) out[j] += sum[j] / denom;
    return out;
  }

  // theta_m^{t+1} under DP-OGL+. Mutates the group's interval state.
  ModelParams GroupRoundDpOglPlus(int m, int t,
                                  const std::vector<ModelParams>& theta,
                                  IntervalState& iv) const {
    const GroupParams& g = hp_.groups[m];
    const int S = hp_.S;
    if ((t - 1) % S == 0) {
      Rng srng = MakeStream(hp_.seed, Purpose::kSample, m, t);
      iv.anchor = theta[m];
      iv.sampled = PoissonSample(s_.members(m), g.pi, srng);
      iv.raw_sums.assign(iv.sampled.size(), model_.Zeros());
    }
    const double denom = g.pi * static_cast<double>(s_.members(m).size());
    std::vector<double> step(model_.num_params(), 0.0);
    for (size_t k = 0; k < iv.sampled.size(); ++k) {
      ModelParams u = WorkerUpdate(iv.sampled[k], m, t, theta);
      for (size_t j = 0; j < u.size(); ++j) {
        iv.raw_sums[k][j] += u[j];
        step[j] += u[j];
      }
    }
    if (t % S != 0) {
      // not a mechanism epoch: raw, unclipped, noiseless
      ModelParams out = theta[m];
      for (size_t j = 0; j < out.size(); ++j) out[j] += step[j] / denom;
      return out;
    }
    const double clip = std::sqrt(static_cast<double>(S)) * g.clip;
    std::vector<double> sum(model_.num_params(), 0.0);
    for (auto& raw : iv.raw_sums) {
      ModelParams u = ClipUpdate(raw, clip);
      for (size_t j = 0; j < sum.size(); ++j) sum[j] += u[j];
    }
    Rng nrng = MakeStream(hp_.seed, Purpose::kNoise, m, t);
    AddGaussianNoise(sum, NoiseStd(clip, g.sigma), nrng);
    ModelParams out = iv.anchor;
    for (size_t j = 0; j < out.size(); ++j) out[j] += sum[j] / denom;
    return out;
  }

  // One epoch for every group; reads only theta^t (epoch barrier).
  void Step(TrainingState& st, int threads = 1) const {
    const int M = s_.num_groups();
    const int t = st.epoch;
    std::vector<ModelParams> next(M);
    auto run = [&](int m) {
      next[m] = hp_.algorithm == Algorithm::kDpOgl
                    ? GroupRoundDpOgl(m, t, st.theta)
                    : GroupRoundDpOglPlus(m, t, st.theta, st.interval[m]);
    };
    if (threads <= 1 || M == 1) {
      for (int m = 0; m < M; ++m) run(m);
    } else {
      std::atomic<int> cursor{0};
      std::vector<std::thread> pool;
      for (int k = 0; k < std::min(threads, M); ++k) {
        pool.emplace_back([&] {
          for (int m = cursor++; m < M; m = cursor++) run(m);
        });
      }
      for (auto& th : pool) th.join();
    }
    st.theta = std::move(next);
    ++st.epoch;
  }

  // Averages over workers with non-empty shards.
  EpochMetrics Evaluate(const std::vector<ModelParams>& theta,
                        int epoch) const {
    EpochMetrics e;
    e.epoch = epoch;
    double loss = 0, acc = 0;
    int nl = 0, na = 0;
    for (int n = 0; n < s_.num_workers(); ++n) {
      ModelParams w = Personalize(s_, n, theta);
      if (!train_.indices[n].empty()) {
        loss += model_.Loss(w, d_, train_.indices[n]);
        ++nl;
      }
      if (n < test_.num_workers() && !test_.indices[n].empty()) {
        acc += model_.Accuracy(w, d_, test_.indices[n]);
        ++na;
      }
    }
    e.avg_train_loss = nl ? loss / nl : 0.0;
    e.avg_test_acc = na ? acc / na : 0.0;
    return e;
  }

  TrainingResult Run(int threads = 1, bool keep_trajectory = false,
                     bool with_metrics = true) const {
    TrainingResult r;
    TrainingState st = Initial();
    if (keep_trajectory) r.trajectory.push_back(st.theta);
    for (int t = 1; t <= hp_.T; ++t) {
      Step(st, threads);
      if (keep_trajectory) r.trajectory.push_back(st.theta);
      if (with_metrics) r.metrics.push_back(Evaluate(st.theta, t));
    }
    r.final_state = std::move(st);
    return r;
  }

 private:
  const GroupStructure& s_;
  const HyperParams& hp_;
  const Dataset& d_;
  const WorkerData& train_;
  const WorkerData& test_;
  Softmax model_;
};

inline absl::StatusOr<TrainingResult> RunTraining(
    const GroupStructure& s, const HyperParams& hp, const Dataset& d,
    const WorkerData& train, const WorkerData& test, int threads = 1,
    bool keep_trajectory = false) {
  if (auto st = hp.Validate(s.num_groups()); !st.ok()) return st;
  if (train.num_workers() != s.num_workers()) {
    return absl::InvalidArgumentError("worker data does not match N");
  }
  Trainer tr(s, hp, d, train, test);
  return tr.Run(threads, keep_trajectory);
}

}  // namespace ogl

#endif  // OGL_TRAINER_HPP_
