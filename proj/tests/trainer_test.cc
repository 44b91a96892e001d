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

#include "ogl/trainer.hpp"

#include <cmath>
#include <limits>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace ogl {
namespace {

using ::testing::HasSubstr;
using testing::MakeWorld;
using testing::UniformHp;

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(WorkerMergeTest, Examples) {
  ModelParams a{1, 2}, b{3, 4}, c{5, 9};
  EXPECT_EQ(*WorkerMerge({&a}), a);
  EXPECT_EQ(*WorkerMerge({&a, &b}), (ModelParams{2, 3}));
  EXPECT_EQ(*WorkerMerge({&a, &b, &c}), (ModelParams{3, 5}));
  EXPECT_FALSE(WorkerMerge({}).ok());
}

TEST(ClipTest, Examples) {
  EXPECT_EQ(ClipUpdate({3, 4}, 10), (ModelParams{3, 4}));
  auto u = ClipUpdate({3, 4}, 1);
  EXPECT_NEAR(u[0], 0.6, 1e-15);
  EXPECT_NEAR(u[1], 0.8, 1e-15);
  EXPECT_EQ(ClipUpdate({3, 4}, 5), (ModelParams{3, 4}));
  EXPECT_EQ(ClipUpdate({300, 400}, kInf), (ModelParams{300, 400}));
  EXPECT_EQ(ClipUpdate({0, 0}, 1), (ModelParams{0, 0}));
}

TEST(ClipTest, NormBoundAndDirection) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 3);
  for (int rep = 0; rep < 500; ++rep) {
    ModelParams v(7);
    for (double& x : v) x = g(rng);
    double c = std::exp(g(rng) / 3);
    auto u = ClipUpdate(v, c);
    EXPECT_LE(Norm2(u), c * (1 + 1e-12));
    double k = Norm2(u) / Norm2(v);
    for (size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(u[j], k * v[j], 1e-12);
  }
}

TEST(NoiseTest, ZeroSigmaIsNoiselessEvenUnclipped) {
  EXPECT_EQ(NoiseStd(kInf, 0), 0.0);
  EXPECT_EQ(NoiseStd(0.5, 2), 1.0);
}

TEST(PoissonTest, FullRateTakesEveryone) {
  Rng rng(0);
  std::vector<int> mem{0, 3, 5};
  EXPECT_EQ(PoissonSample(mem, 1.0, rng), mem);
}

TEST(PoissonTest, InclusionRate) {
  std::vector<int> mem(10);
  std::iota(mem.begin(), mem.end(), 0);
  long hits = 0, trials = 0;
  for (int m = 0; m < 10000; ++m) {
    Rng rng = MakeStream(42, Purpose::kSample, 0, m + 1);
    hits += PoissonSample(mem, 0.7, rng).size();
    trials += mem.size();
  }
  EXPECT_NEAR(static_cast<double>(hits) / trials, 0.7, 0.01);
}

TEST(LocalTrainTest, ZeroStepSizeIsIdentity) {
  auto w = MakeWorld(3, 2);
  Softmax m{w.data.dims, w.data.classes};
  ModelParams start(m.num_params(), 0.3);
  Rng rng(1);
  EXPECT_EQ(LocalTrain(m, start, w.data, w.train.indices[0], 5, 0.0, 4, rng),
            start);
}

TEST(LocalTrainTest, EmptyShardIsIdentity) {
  auto w = MakeWorld(3, 2);
  Softmax m{w.data.dims, w.data.classes};
  ModelParams start(m.num_params(), -0.2);
  Rng rng(1);
  EXPECT_EQ(LocalTrain(m, start, w.data, {}, 5, 0.5, 0, rng), start);
}

TEST(LocalTrainTest, SingleSampleStepMatchesFiniteDifferenceGradient) {
  auto w = MakeWorld(1, 3);
  Softmax m{w.data.dims, w.data.classes};
  ModelParams start(m.num_params());
  for (size_t j = 0; j < start.size(); ++j) start[j] = 0.1 * std::sin(j + 1.0);
  const int k = w.train.indices[0][5];
  Rng rng(1);
  auto got = LocalTrain(m, start, w.data, {k}, 1, 0.3, 0, rng);
  const double h = 1e-6;
  for (size_t j = 0; j < start.size(); ++j) {
    ModelParams a = start, b = start;
    a[j] += h;
    b[j] -= h;
    double fd = (m.Loss(a, w.data, {k}) - m.Loss(b, w.data, {k})) / (2 * h);
    EXPECT_NEAR(got[j], start[j] - 0.3 * fd, 1e-7);
  }
}

TEST(LocalTrainTest, FullBatchDescentIsMonotoneBelowOneOverBeta) {
  auto w = MakeWorld(2, 4);
  Softmax m{w.data.dims, w.data.classes};
  const double eta = 1.0 / SmoothnessConstant(w.data);
  const auto& shard = w.train.indices[0];
  ModelParams x = m.Zeros();
  double prev = m.Loss(x, w.data, shard);
  for (int step = 0; step < 50; ++step) {
    Rng rng(0);
    x = LocalTrain(m, x, w.data, shard, 1, eta, 0, rng);
    double cur = m.Loss(x, w.data, shard);
    EXPECT_LE(cur, prev + 1e-12);
    prev = cur;
  }
}

TEST(LocalTrainTest, MiniBatchDeterministicPerStream) {
  auto w = MakeWorld(2, 4);
  Softmax m{w.data.dims, w.data.classes};
  Rng a = MakeStream(7, Purpose::kTrain, 0, 1, 0);
  Rng b = MakeStream(7, Purpose::kTrain, 0, 1, 0);
  Rng c = MakeStream(7, Purpose::kTrain, 0, 2, 0);
  const auto& sh = w.train.indices[0];
  auto xa = LocalTrain(m, m.Zeros(), w.data, sh, 6, 0.2, 3, a);
  auto xb = LocalTrain(m, m.Zeros(), w.data, sh, 6, 0.2, 3, b);
  auto xc = LocalTrain(m, m.Zeros(), w.data, sh, 6, 0.2, 3, c);
  EXPECT_EQ(xa, xb);
  EXPECT_NE(xa, xc);
}

TEST(HyperParamsTest, ValidationMessagesNameTheField) {
  auto hp = UniformHp(2, 1, 1, 1);
  hp.T = 4;
  EXPECT_TRUE(hp.Validate(2).ok());
  EXPECT_THAT(std::string(hp.Validate(3).message()), HasSubstr("clip/sigma/pi"));
  auto bad = hp;
  bad.S = 0;
  EXPECT_THAT(std::string(bad.Validate(2).message()), HasSubstr("S:"));
  bad = hp;
  bad.groups[1].pi = 0;
  EXPECT_THAT(std::string(bad.Validate(2).message()), HasSubstr("pi[1]"));
  bad = hp;
  bad.groups[0].pi = 1.5;
  EXPECT_FALSE(bad.Validate(2).ok());
  bad = hp;
  bad.groups[0].sigma = 0;
  EXPECT_THAT(std::string(bad.Validate(2).message()), HasSubstr("sigma[0]"));
  bad.diagnostic = true;
  EXPECT_TRUE(bad.Validate(2).ok());
  bad = hp;
  bad.groups[1].clip = kInf;
  EXPECT_THAT(std::string(bad.Validate(2).message()), HasSubstr("clip[1]"));
  bad.diagnostic = true;
  EXPECT_TRUE(bad.Validate(2).ok());
  bad = hp;
  bad.algorithm = Algorithm::kDpOglPlus;
  bad.S = 3;
  EXPECT_THAT(std::string(bad.Validate(2).message()), HasSubstr("T:"));
  bad.T = 6;
  EXPECT_TRUE(bad.Validate(2).ok());
  bad = hp;
  bad.eta = -1;
  EXPECT_FALSE(bad.Validate(2).ok());
  bad = hp;
  bad.L = 0;
  EXPECT_FALSE(bad.Validate(2).ok());
}

TEST(TrainerTest, ZeroEpochsReturnsInitialModel) {
  auto s = testing::Ring(3);
  auto w = MakeWorld(6, 1);
  auto hp = UniformHp(3, 1, 1, 0.7);
  auto r = *RunTraining(s, hp, w.data, w.train, w.test);
  EXPECT_TRUE(r.metrics.empty());
  EXPECT_EQ(r.final_state.epoch, 1);
  for (const auto& th : r.final_state.theta) {
    EXPECT_EQ(th, ModelParams(th.size(), 0.0));
  }
}

TEST(TrainerTest, RejectsMismatchedWorkerData) {
  auto s = testing::Ring(3);
  auto w = MakeWorld(5, 1);
  auto hp = UniformHp(3, 1, 1, 1);
  EXPECT_FALSE(RunTraining(s, hp, w.data, w.train, w.test).ok());
}

TEST(TrainerTest, TwoWorkerRoundByHand) {
  auto s = *GroupStructure::Create(2, {{0, 1}});
  auto w = MakeWorld(2, 8);
  auto hp = UniformHp(1, kInf, 0, 1);
  hp.diagnostic = true;
  hp.L = 2;
  hp.eta = 0.4;
  hp.T = 1;
  Trainer tr(s, hp, w.data, w.train, w.test);
  auto st = tr.Initial();
  tr.Step(st);
  Softmax m{w.data.dims, w.data.classes};
  Rng r0(0), r1(0);
  auto x0 = LocalTrain(m, m.Zeros(), w.data, w.train.indices[0], 2, 0.4, 0, r0);
  auto x1 = LocalTrain(m, m.Zeros(), w.data, w.train.indices[1], 2, 0.4, 0, r1);
  for (size_t j = 0; j < x0.size(); ++j) {
    EXPECT_NEAR(st.theta[0][j], (x0[j] + x1[j]) / 2, 1e-14);
  }
}

TEST(TrainerTest, InterEpochStartIsTheWorkerMerge) {
  auto s = testing::TwoGroupChain();
  auto w = MakeWorld(3, 1);
  auto hp = UniformHp(2, 1, 1, 1);
  hp.S = 3;
  Trainer tr(s, hp, w.data, w.train, w.test);
  std::vector<ModelParams> theta{ModelParams(15, 1.0), ModelParams(15, 3.0)};
  for (int t : {1, 4, 7}) {
    EXPECT_EQ(tr.WorkerStart(1, 0, t, theta), ModelParams(15, 2.0));
    EXPECT_EQ(tr.WorkerStart(1, 1, t, theta), ModelParams(15, 2.0));
    EXPECT_EQ(tr.WorkerStart(0, 0, t, theta), theta[0]);
  }
  for (int t : {2, 3, 5}) {
    EXPECT_EQ(tr.WorkerStart(1, 0, t, theta), theta[0]);
    EXPECT_EQ(tr.WorkerStart(1, 1, t, theta), theta[1]);
  }
}

// Plain federated averaging, written out without the trainer.
std::vector<ModelParams> FedAvgOracle(const testing::World& w, int T, int L,
                                      double eta) {
  Softmax m{w.data.dims, w.data.classes};
  const int N = w.train.num_workers();
  ModelParams theta = m.Zeros();
  std::vector<ModelParams> traj{theta};
  std::vector<double> grad;
  for (int t = 0; t < T; ++t) {
    ModelParams next(theta.size(), 0.0);
    for (int n = 0; n < N; ++n) {
      ModelParams x = theta;
      if (!w.train.indices[n].empty()) {
        for (int l = 0; l < L; ++l) {
          m.Loss(x, w.data, w.train.indices[n], &grad);
          for (size_t j = 0; j < x.size(); ++j) x[j] -= eta * grad[j];
        }
      }
      for (size_t j = 0; j < x.size(); ++j) next[j] += x[j] / N;
    }
    theta = next;
    traj.push_back(theta);
  }
  return traj;
}

TEST(TrainerTest, SingleGroupNoiselessIsFedAvg) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto w = MakeWorld(6, seed);
    auto s = *GenerateStructure(StructureKind::kGL, 6, 1);
    auto hp = UniformHp(1, kInf, 0, 1);
    hp.diagnostic = true;
    hp.T = 20;
    hp.L = 3;
    hp.eta = 0.2;
    hp.seed = seed;
    auto r = *RunTraining(s, hp, w.data, w.train, w.test, 1, true);
    auto want = FedAvgOracle(w, 20, 3, 0.2);
    ASSERT_EQ(r.trajectory.size(), want.size());
    for (size_t t = 0; t < want.size(); ++t) {
      for (size_t j = 0; j < want[t].size(); ++j) {
        ASSERT_NEAR(r.trajectory[t][0][j], want[t][j], 1e-12)
            << "seed " << seed << " t " << t;
      }
    }
  }
}

TEST(TrainerTest, AggregateIsUnbiased) {
  // full batch: updates are fixed, only the Poisson draw varies
  auto s = *GenerateStructure(StructureKind::kGL, 5, 1);
  auto w = MakeWorld(5, 11);
  auto hp = UniformHp(1, 0.05, 0, 0.7);
  hp.diagnostic = true;
  hp.L = 3;
  hp.eta = 0.5;
  Softmax m{w.data.dims, w.data.classes};
  ModelParams want(m.num_params(), 0.0);
  for (int n = 0; n < 5; ++n) {
    Rng r(0);
    auto x = LocalTrain(m, m.Zeros(), w.data, w.train.indices[n], 3, 0.5, 0, r);
    auto u = ClipUpdate(x, 0.05);
    for (size_t j = 0; j < u.size(); ++j) want[j] += u[j] / 5;
  }
  const int reps = 4000;
  std::vector<double> mean(want.size(), 0), sq(want.size(), 0);
  std::vector<ModelParams> zero(1, m.Zeros());
  for (int k = 0; k < reps; ++k) {
    hp.seed = 1000 + k;
    Trainer tr(s, hp, w.data, w.train, w.test);
    auto out = tr.GroupRoundDpOgl(0, 1, zero);
    for (size_t j = 0; j < out.size(); ++j) {
      mean[j] += out[j] / reps;
      sq[j] += out[j] * out[j] / reps;
    }
  }
  for (size_t j = 0; j < want.size(); ++j) {
    double se = std::sqrt(std::max(sq[j] - mean[j] * mean[j], 0.0) / reps);
    EXPECT_NEAR(mean[j], want[j], 4 * se + 1e-12) << j;
  }
}

// Empty shards make every update zero, so the output is pure noise / (pi |N|).
double NoiseVariance(Algorithm alg, int S, double c, double sigma) {
  auto s = *GroupStructure::Create(2, {{0, 1}});
  testing::World w;
  w.data = *MakeSynthetic(3, 4, 2, 0);
  w.train.indices.assign(2, {});
  w.test.indices.assign(2, {});
  auto hp = UniformHp(1, c, sigma, 1);
  hp.algorithm = alg;
  hp.S = S;
  hp.T = S;
  double sum = 0, sq = 0;
  long n = 0;
  for (int k = 0; k < 2000; ++k) {
    hp.seed = k;
    auto r = *RunTraining(s, hp, w.data, w.train, w.test);
    for (double v : r.final_state.theta[0]) {
      sum += v;
      sq += v * v;
      ++n;
    }
  }
  double mu = sum / n;
  return sq / n - mu * mu;
}

TEST(TrainerTest, NoiseScaleDpOgl) {
  // std c sigma on the sum, divided by |N| = 2
  EXPECT_NEAR(NoiseVariance(Algorithm::kDpOgl, 1, 0.5, 2.0), 0.25, 0.0125);
}

TEST(TrainerTest, NoiseScaleDpOglPlusGrowsWithInterval) {
  // one mechanism per interval with std sqrt(S) c sigma
  EXPECT_NEAR(NoiseVariance(Algorithm::kDpOglPlus, 3, 0.5, 2.0), 0.75, 0.0375);
  EXPECT_NEAR(NoiseVariance(Algorithm::kDpOglPlus, 1, 0.5, 2.0), 0.25, 0.0125);
}

TEST(TrainerTest, PlusWithUnitIntervalIsBitIdenticalToDpOgl) {
  auto s = testing::Ring(4);
  auto w = MakeWorld(8, 5);
  auto hp = UniformHp(4, 0.3, 1.1, 0.7);
  hp.T = 8;
  hp.L = 2;
  hp.batch_size = 4;
  hp.seed = 77;
  auto a = *RunTraining(s, hp, w.data, w.train, w.test, 1, true);
  hp.algorithm = Algorithm::kDpOglPlus;
  auto b = *RunTraining(s, hp, w.data, w.train, w.test, 1, true);
  EXPECT_EQ(a.trajectory, b.trajectory);
}

TEST(TrainerTest, PlusIntervalByHand) {
  auto s = *GroupStructure::Create(2, {{0, 1}});
  auto w = MakeWorld(2, 6);
  const double c = 0.02;
  auto hp = UniformHp(1, c, 0, 1);
  hp.diagnostic = true;
  hp.algorithm = Algorithm::kDpOglPlus;
  hp.S = 3;
  hp.T = 3;
  hp.L = 2;
  hp.eta = 0.5;
  auto r = *RunTraining(s, hp, w.data, w.train, w.test, 1, true);

  Softmax m{w.data.dims, w.data.classes};
  ModelParams theta = m.Zeros();
  std::vector<ModelParams> raw(2, m.Zeros());
  for (int t = 1; t <= 3; ++t) {
    ModelParams next = theta;
    for (int n = 0; n < 2; ++n) {
      Rng rr(0);
      auto x = LocalTrain(m, theta, w.data, w.train.indices[n], 2, 0.5, 0, rr);
      for (size_t j = 0; j < x.size(); ++j) {
        raw[n][j] += x[j] - theta[j];
        next[j] += (x[j] - theta[j]) / 2;
      }
    }
    if (t < 3) {
      for (size_t j = 0; j < next.size(); ++j) {
        ASSERT_NEAR(r.trajectory[t][0][j], next[j], 1e-14) << t;
      }
    }
    theta = next;
  }
  // the interval output clips the accumulated updates at sqrt(3) c
  ModelParams want = m.Zeros();
  for (int n = 0; n < 2; ++n) {
    double scale = std::max(1.0, Norm2(raw[n]) / (std::sqrt(3.0) * c));
    ASSERT_GT(scale, 1.0);
    for (size_t j = 0; j < want.size(); ++j) want[j] += raw[n][j] / scale / 2;
  }
  for (size_t j = 0; j < want.size(); ++j) {
    EXPECT_NEAR(r.trajectory[3][0][j], want[j], 1e-14);
  }
}

TEST(TrainerTest, PlusSamplesOncePerInterval) {
  auto s = *GenerateStructure(StructureKind::kGL, 10, 1);
  auto w = MakeWorld(10, 2);
  auto hp = UniformHp(1, 1, 1, 0.5);
  hp.algorithm = Algorithm::kDpOglPlus;
  hp.S = 4;
  hp.T = 8;
  Trainer tr(s, hp, w.data, w.train, w.test);
  auto st = tr.Initial();
  tr.Step(st);
  auto first = st.interval[0].sampled;
  for (int k = 0; k < 3; ++k) {
    tr.Step(st);
    EXPECT_EQ(st.interval[0].sampled, first);
  }
  Rng rng = MakeStream(hp.seed, Purpose::kSample, 0, 1);
  EXPECT_EQ(first, PoissonSample(s.members(0), 0.5, rng));
}

TEST(TrainerTest, ThreadedRunMatchesSequential) {
  auto s = *GenerateStructure(StructureKind::kRI, 12, 6);
  auto w = MakeWorld(12, 9);
  for (auto alg : {Algorithm::kDpOgl, Algorithm::kDpOglPlus}) {
    auto hp = UniformHp(6, 0.2, 1.3, 0.7);
    hp.algorithm = alg;
    hp.S = 2;
    hp.T = 10;
    hp.batch_size = 5;
    hp.L = 3;
    auto a = *RunTraining(s, hp, w.data, w.train, w.test, 1, true);
    auto b = *RunTraining(s, hp, w.data, w.train, w.test, 4, true);
    EXPECT_EQ(a.trajectory, b.trajectory);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    for (size_t k = 0; k < a.metrics.size(); ++k) {
      EXPECT_EQ(a.metrics[k].avg_train_loss, b.metrics[k].avg_train_loss);
    }
  }
}

TEST(TrainerTest, GroupsDrawFromSeparateStreams) {
  // changing group 0's noise leaves group 1's first step untouched
  auto s = testing::TwoGroupChain();
  auto w = MakeWorld(3, 3);
  auto hp = UniformHp(2, 0.3, 1, 0.7);
  hp.T = 1;
  auto a = *RunTraining(s, hp, w.data, w.train, w.test);
  hp.groups[0].sigma = 5;
  auto b = *RunTraining(s, hp, w.data, w.train, w.test);
  EXPECT_NE(a.final_state.theta[0], b.final_state.theta[0]);
  EXPECT_EQ(a.final_state.theta[1], b.final_state.theta[1]);
}

TEST(TrainerTest, SeedChangesTrajectory) {
  auto s = testing::TwoGroupChain();
  auto w = MakeWorld(3, 3);
  auto hp = UniformHp(2, 0.3, 1, 0.7);
  hp.T = 3;
  auto a = *RunTraining(s, hp, w.data, w.train, w.test);
  auto a2 = *RunTraining(s, hp, w.data, w.train, w.test);
  hp.seed = 1;
  auto b = *RunTraining(s, hp, w.data, w.train, w.test);
  EXPECT_EQ(a.final_state.theta, a2.final_state.theta);
  EXPECT_NE(a.final_state.theta, b.final_state.theta);
}

TEST(TrainerTest, EvaluateSkipsEmptyShards) {
  auto s = *GroupStructure::Create(2, {{0, 1}});
  auto w = MakeWorld(2, 1);
  w.train.indices[1].clear();
  w.test.indices[1].clear();
  auto hp = UniformHp(1, 1, 1, 1);
  Trainer tr(s, hp, w.data, w.train, w.test);
  Softmax m{w.data.dims, w.data.classes};
  std::vector<ModelParams> theta{m.Zeros()};
  auto e = tr.Evaluate(theta, 1);
  EXPECT_NEAR(e.avg_train_loss, std::log(3.0), 1e-12);
  EXPECT_EQ(e.avg_test_acc, m.Accuracy(theta[0], w.data, w.test.indices[0]));
}

}  // namespace
}  // namespace ogl
