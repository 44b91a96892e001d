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

#ifndef OGL_HARNESS_HPP_
#define OGL_HARNESS_HPP_

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "json.hpp"
#include "ogl/accountant.hpp"
#include "ogl/data.hpp"
#include "ogl/topology.hpp"
#include "ogl/trainer.hpp"

namespace ogl {

using nlohmann::json;

// %.17g round-trips every double.
inline std::string FormatDouble(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline absl::StatusOr<double> ParseDouble(absl::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) {
    return absl::InvalidArgumentError(absl::StrCat("not a number: '", s, "'"));
  }
  return v;
}

inline std::string Sha256Hex(absl::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out.push_back(hex[md[k] >> 4]);
    out.push_back(hex[md[k] & 15]);
  }
  return out;
}

struct DataConfig {
  int classes = 4;
  int dims = 5;
  int per_class = 100;
  double beta = 0.1;  // Dirichlet concentration
  double test_fraction = 0.2;
  std::string csv;    // non-empty: load instead of synthesizing
};

struct AccountantConfig {
  bool enabled = true;
  Bound bound = Bound::kThm1;
  Variant variant = Variant::kExamplesConsistent;
  std::vector<double> alphas = DefaultAlphaGrid();
  double delta = 1e-5;
  double heatmap_alpha = 2.0;
};

struct ExperimentConfig {
  json structure;  // {"kind","N","M"} or {"N","members_of_group"}
  HyperParams hp;
  DataConfig data;
  AccountantConfig accountant;
  std::string output_dir = "out";
  std::vector<int> heatmap_epochs;  // empty: just T
  int threads = 1;
};

inline const char* AlgorithmName(Algorithm a) {
  return a == Algorithm::kDpOgl ? "DP-OGL" : "DP-OGL+";
}
inline const char* ThreatName(ThreatModel t) {
  return t == ThreatModel::kTM1 ? "TM1" : "TM2";
}
inline const char* VariantName(Variant v) {
  return v == Variant::kAsPrinted ? "as_printed" : "examples_consistent";
}
inline const char* BoundName(Bound b) {
  return b == Bound::kThm1 ? "thm1" : "thm2";
}

inline absl::StatusOr<Variant> ParseVariant(absl::string_view s) {
  if (s == "as_printed") return Variant::kAsPrinted;
  if (s == "examples_consistent") return Variant::kExamplesConsistent;
  return absl::InvalidArgumentError(
      absl::StrCat("variant: expected as_printed|examples_consistent, got '",
                   s, "'"));
}

inline absl::StatusOr<ThreatModel> ParseThreat(absl::string_view s) {
  if (s == "TM1" || s == "tm1") return ThreatModel::kTM1;
  if (s == "TM2" || s == "tm2") return ThreatModel::kTM2;
  return absl::InvalidArgumentError(
      absl::StrCat("threat_model: expected tm1|tm2, got '", s, "'"));
}

namespace internal {

inline absl::Status FieldError(absl::string_view field, absl::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat(field, ": ", what));
}

inline absl::StatusOr<int> StructureGroups(const json& st) {
  if (!st.is_object()) return FieldError("structure", "must be an object");
  if (st.contains("members_of_group")) {
    if (!st["members_of_group"].is_array()) {
      return FieldError("structure.members_of_group", "must be an array");
    }
    return static_cast<int>(st["members_of_group"].size());
  }
  if (!st.contains("M") || !st["M"].is_number_integer()) {
    return FieldError("structure.M", "required integer");
  }
  return st["M"].get<int>();
}

inline absl::StatusOr<double> NumberOrInf(const json& v, absl::string_view f) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && v.get<std::string>() == "inf") {
    return std::numeric_limits<double>::infinity();
  }
  return FieldError(f, "expected a number");
}

// scalar broadcast to every group, or one value per group
inline absl::StatusOr<std::vector<double>> PerGroup(const json& v, int M,
                                                    absl::string_view f) {
  std::vector<double> out;
  if (v.is_array()) {
    if (static_cast<int>(v.size()) != M) {
      return FieldError(f, absl::StrCat("expected ", M, " values, got ",
                                        v.size()));
    }
    for (const auto& x : v) {
      auto d = NumberOrInf(x, f);
      if (!d.ok()) return d.status();
      out.push_back(*d);
    }
    return out;
  }
  auto d = NumberOrInf(v, f);
  if (!d.ok()) return d.status();
  return std::vector<double>(M, *d);
}

inline json NumberJson(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

template <typename T>
absl::Status Get(const json& j, const char* key, T& out, absl::string_view f) {
  if (!j.contains(key)) return absl::OkStatus();
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    return FieldError(f, "wrong type");
  }
  return absl::OkStatus();
}

#define OGL_RETURN_IF_ERROR(expr)          \
  do {                                     \
    if (auto _st = (expr); !_st.ok()) {    \
      return _st;                          \
    }                                      \
  } while (0)

}  // namespace internal

inline absl::Status ValidateConfig(const ExperimentConfig& c) {
  using internal::FieldError;
  auto M = internal::StructureGroups(c.structure);
  if (!M.ok()) return M.status();
  OGL_RETURN_IF_ERROR(c.hp.Validate(*M));
  if (c.hp.T < 1 && !c.heatmap_epochs.empty()) {
    return FieldError("heatmap_epochs", "T must be >= 1");
  }
  for (int e : c.heatmap_epochs) {
    if (e < 1 || e > c.hp.T) {
      return FieldError("heatmap_epochs",
                        absl::StrCat("epoch ", e, " outside [1, T]"));
    }
  }
  if (c.threads < 1) return FieldError("threads", "must be >= 1");
  const auto& d = c.data;
  if (d.csv.empty()) {
    if (d.classes < 2) return FieldError("data.classes", "must be >= 2");
    if (d.dims < 2) return FieldError("data.dims", "must be >= 2");
    if (d.per_class < 1) return FieldError("data.per_class", "must be >= 1");
  } else if (!std::filesystem::exists(d.csv)) {
    return FieldError("data.csv", absl::StrCat("file not found: ", d.csv));
  }
  if (!(d.beta > 0)) return FieldError("data.beta", "must be > 0");
  if (!(d.test_fraction >= 0 && d.test_fraction < 1)) {
    return FieldError("data.test_fraction", "must be in [0,1)");
  }
  const auto& a = c.accountant;
  if (a.alphas.empty()) return FieldError("accountant.alphas", "empty grid");
  for (double x : a.alphas) {
    if (!(x > 1)) return FieldError("accountant.alphas", "every alpha must be > 1");
  }
  if (!(a.delta > 0 && a.delta < 1)) {
    return FieldError("accountant.delta", "must be in (0,1)");
  }
  if (!(a.heatmap_alpha > 1)) {
    return FieldError("accountant.heatmap_alpha", "must be > 1");
  }
  if (c.hp.diagnostic && a.enabled) {
    return FieldError("accountant.enabled",
                      "must be false in diagnostic mode");
  }
  return absl::OkStatus();
}

inline absl::StatusOr<ExperimentConfig> ConfigFromJson(const json& j) {
  using internal::FieldError;
  using internal::Get;
  if (!j.is_object()) return FieldError("config", "must be a JSON object");
  static const std::set<std::string> known = {
      "structure", "S",         "L",           "eta",        "T",
      "clip",      "sigma",     "pi",          "batch_size", "seed",
      "algorithm", "threat_model", "diagnostic", "accountant", "data",
      "output_dir", "heatmap_epochs", "threads"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) return FieldError(k, "unknown field");
  }
  ExperimentConfig c;
  if (!j.contains("structure")) return FieldError("structure", "required");
  c.structure = j["structure"];
  auto M = internal::StructureGroups(c.structure);
  if (!M.ok()) return M.status();
  auto& hp = c.hp;
  OGL_RETURN_IF_ERROR(Get(j, "S", hp.S, "S"));
  OGL_RETURN_IF_ERROR(Get(j, "L", hp.L, "L"));
  OGL_RETURN_IF_ERROR(Get(j, "eta", hp.eta, "eta"));
  OGL_RETURN_IF_ERROR(Get(j, "T", hp.T, "T"));
  OGL_RETURN_IF_ERROR(Get(j, "batch_size", hp.batch_size, "batch_size"));
  OGL_RETURN_IF_ERROR(Get(j, "seed", hp.seed, "seed"));
  OGL_RETURN_IF_ERROR(Get(j, "diagnostic", hp.diagnostic, "diagnostic"));
  std::vector<double> clip(*M, 1.0), sigma(*M, 1.0), pi(*M, 1.0);
  for (auto [key, dst] : {std::pair{"clip", &clip}, std::pair{"sigma", &sigma},
                          std::pair{"pi", &pi}}) {
    if (!j.contains(key)) continue;
    auto v = internal::PerGroup(j[key], *M, key);
    if (!v.ok()) return v.status();
    *dst = *v;
  }
  hp.groups.resize(*M);
  for (int m = 0; m < *M; ++m) hp.groups[m] = {clip[m], sigma[m], pi[m]};
  std::string alg = "DP-OGL", threat = "TM1";
  OGL_RETURN_IF_ERROR(Get(j, "algorithm", alg, "algorithm"));
  OGL_RETURN_IF_ERROR(Get(j, "threat_model", threat, "threat_model"));
  if (alg == "DP-OGL") {
    hp.algorithm = Algorithm::kDpOgl;
  } else if (alg == "DP-OGL+") {
    hp.algorithm = Algorithm::kDpOglPlus;
  } else {
    return FieldError("algorithm", "expected DP-OGL or DP-OGL+");
  }
  auto tm = ParseThreat(threat);
  if (!tm.ok()) return tm.status();
  hp.threat = *tm;

  if (j.contains("accountant")) {
    const json& a = j["accountant"];
    if (!a.is_object()) return FieldError("accountant", "must be an object");
    auto& ac = c.accountant;
    OGL_RETURN_IF_ERROR(Get(a, "enabled", ac.enabled, "accountant.enabled"));
    OGL_RETURN_IF_ERROR(Get(a, "alphas", ac.alphas, "accountant.alphas"));
    OGL_RETURN_IF_ERROR(Get(a, "delta", ac.delta, "accountant.delta"));
    OGL_RETURN_IF_ERROR(
        Get(a, "heatmap_alpha", ac.heatmap_alpha, "accountant.heatmap_alpha"));
    std::string bound = BoundName(ac.bound), variant = VariantName(ac.variant);
    OGL_RETURN_IF_ERROR(Get(a, "bound", bound, "accountant.bound"));
    OGL_RETURN_IF_ERROR(Get(a, "variant", variant, "accountant.variant"));
    if (bound == "thm1") {
      ac.bound = Bound::kThm1;
    } else if (bound == "thm2") {
      ac.bound = Bound::kThm2;
    } else {
      return FieldError("accountant.bound", "expected thm1 or thm2");
    }
    auto v = ParseVariant(variant);
    if (!v.ok()) return v.status();
    ac.variant = *v;
  } else if (hp.diagnostic) {
    c.accountant.enabled = false;
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    if (!d.is_object()) return FieldError("data", "must be an object");
    auto& dc = c.data;
    OGL_RETURN_IF_ERROR(Get(d, "classes", dc.classes, "data.classes"));
    OGL_RETURN_IF_ERROR(Get(d, "dims", dc.dims, "data.dims"));
    OGL_RETURN_IF_ERROR(Get(d, "per_class", dc.per_class, "data.per_class"));
    OGL_RETURN_IF_ERROR(Get(d, "beta", dc.beta, "data.beta"));
    OGL_RETURN_IF_ERROR(
        Get(d, "test_fraction", dc.test_fraction, "data.test_fraction"));
    OGL_RETURN_IF_ERROR(Get(d, "csv", dc.csv, "data.csv"));
  }
  OGL_RETURN_IF_ERROR(Get(j, "output_dir", c.output_dir, "output_dir"));
  OGL_RETURN_IF_ERROR(
      Get(j, "heatmap_epochs", c.heatmap_epochs, "heatmap_epochs"));
  OGL_RETURN_IF_ERROR(Get(j, "threads", c.threads, "threads"));
  OGL_RETURN_IF_ERROR(ValidateConfig(c));
  return c;
}

inline absl::StatusOr<ExperimentConfig> LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": invalid JSON"));
  }
  return ConfigFromJson(j);
}

// Canonical form with every default filled in.
inline json ConfigToJson(const ExperimentConfig& c) {
  json clip = json::array(), sigma = json::array(), pi = json::array();
  for (const auto& g : c.hp.groups) {
    clip.push_back(internal::NumberJson(g.clip));
    sigma.push_back(g.sigma);
    pi.push_back(g.pi);
  }
  std::vector<int> epochs = c.heatmap_epochs;
  if (epochs.empty() && c.hp.T > 0) epochs = {c.hp.T};
  return json{
      {"structure", c.structure},
      {"S", c.hp.S},
      {"L", c.hp.L},
      {"eta", c.hp.eta},
      {"T", c.hp.T},
      {"clip", clip},
      {"sigma", sigma},
      {"pi", pi},
      {"batch_size", c.hp.batch_size},
      {"seed", c.hp.seed},
      {"algorithm", AlgorithmName(c.hp.algorithm)},
      {"threat_model", ThreatName(c.hp.threat)},
      {"diagnostic", c.hp.diagnostic},
      {"accountant",
       {{"enabled", c.accountant.enabled},
        {"bound", BoundName(c.accountant.bound)},
        {"variant", VariantName(c.accountant.variant)},
        {"alphas", c.accountant.alphas},
        {"delta", c.accountant.delta},
        {"heatmap_alpha", c.accountant.heatmap_alpha}}},
      {"data",
       {{"classes", c.data.classes},
        {"dims", c.data.dims},
        {"per_class", c.data.per_class},
        {"beta", c.data.beta},
        {"test_fraction", c.data.test_fraction},
        {"csv", c.data.csv}}},
      {"output_dir", c.output_dir},
      {"heatmap_epochs", epochs},
      {"threads", c.threads}};
}

// output_dir and threads never change results, so they are left out.
inline std::string ConfigHash(const ExperimentConfig& c) {
  json j = ConfigToJson(c);
  j.erase("output_dir");
  j.erase("threads");
  return Sha256Hex(j.dump());
}

// OGL_SEED, if set, replaces the configured seed.
inline absl::Status ApplySeedOverride(ExperimentConfig& c) {
  const char* env = std::getenv("OGL_SEED");
  if (env == nullptr || *env == '\0') return absl::OkStatus();
  std::uint64_t v = 0;
  absl::string_view s(env);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("OGL_SEED: not an unsigned integer: '", s, "'"));
  }
  c.hp.seed = v;
  return absl::OkStatus();
}

// Everything built from the config before training.
struct Prepared {
  Dataset data;
  Split split;
  WorkerData train;
  WorkerData test;
  GroupStructure structure;
  double beta = 0;  // smoothness constant
};

inline absl::StatusOr<Prepared> Prepare(const ExperimentConfig& c) {
  OGL_RETURN_IF_ERROR(ValidateConfig(c));
  Prepared p;
  const std::uint64_t seed = c.hp.seed;
  if (c.data.csv.empty()) {
    auto d = MakeSynthetic(c.data.classes, c.data.dims, c.data.per_class, seed);
    if (!d.ok()) return d.status();
    p.data = *std::move(d);
  } else {
    auto d = LoadCsv(c.data.csv);
    if (!d.ok()) return d.status();
    p.data = *std::move(d);
  }
  p.beta = SmoothnessConstant(p.data);

  int N = 0;
  if (!c.structure.contains("N") || !c.structure["N"].is_number_integer()) {
    return internal::FieldError("structure.N", "required integer");
  }
  N = c.structure["N"].get<int>();
  if (N < 1) return internal::FieldError("structure.N", "must be >= 1");
  p.split = StratifiedSplit(p.data, c.data.test_fraction, seed);
  auto props = DirichletProportions(p.data.classes, N, c.data.beta, seed);
  p.train = PartitionWithProportions(p.data, p.split.train, props, seed, 0);
  p.test = PartitionWithProportions(p.data, p.split.test, props, seed, 1);

  if (c.structure.contains("members_of_group")) {
    auto s = StructureFromJson(c.structure);
    if (!s.ok()) {
      return internal::FieldError("structure", s.status().message());
    }
    p.structure = *std::move(s);
  } else {
    std::string kind = c.structure.value("kind", std::string());
    auto k = ParseStructureKind(kind);
    if (!k.ok()) return internal::FieldError("structure.kind", k.status().message());
    std::optional<std::vector<std::vector<int>>> labels;
    if (*k == StructureKind::kLB) labels = LabelsPresent(p.data, p.train);
    auto s = GenerateStructure(*k, N, c.structure["M"].get<int>(), labels);
    if (!s.ok()) return internal::FieldError("structure", s.status().message());
    p.structure = *std::move(s);
  }
  return p;
}

// ---- CSV emission and parsing ----

inline absl::Status WriteFile(const std::filesystem::path& path,
                              const std::string& body) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) return absl::PermissionDeniedError(
      absl::StrCat("cannot write ", path.string()));
  out << body;
  out.close();
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path.string()));
  return absl::OkStatus();
}

inline std::string MetricsCsv(const std::vector<EpochMetrics>& rows) {
  std::string s = "epoch,avg_train_loss,avg_test_acc\n";
  for (const auto& r : rows) {
    absl::StrAppend(&s, r.epoch, ",", FormatDouble(r.avg_train_loss), ",",
                    FormatDouble(r.avg_test_acc), "\n");
  }
  return s;
}

struct PwpRow {
  int epoch = 0;
  int worker = 0;
  std::optional<DpResult> value;  // nullopt: no admissible adversary

  friend bool operator==(const PwpRow& a, const PwpRow& b) {
    if (a.epoch != b.epoch || a.worker != b.worker ||
        a.value.has_value() != b.value.has_value()) {
      return false;
    }
    if (!a.value) return true;
    return a.value->eps_dp == b.value->eps_dp &&
           a.value->alpha_star == b.value->alpha_star &&
           a.value->eps_rdp == b.value->eps_rdp;
  }
};

inline std::string PwpCsv(const std::vector<PwpRow>& rows) {
  std::string s = "epoch,worker,eps_rdp,alpha_star,eps_dp\n";
  for (const auto& r : rows) {
    absl::StrAppend(&s, r.epoch, ",", r.worker, ",");
    if (r.value) {
      absl::StrAppend(&s, FormatDouble(r.value->eps_rdp), ",",
                      FormatDouble(r.value->alpha_star), ",",
                      FormatDouble(r.value->eps_dp), "\n");
    } else {
      absl::StrAppend(&s, "absent,absent,absent\n");
    }
  }
  return s;
}

inline std::string HeatmapCsv(const PrivacyMatrix& pm) {
  std::string s = "n,i,eps\n";
  for (int n = 0; n < pm.n; ++n) {
    for (int i = 0; i < pm.n; ++i) {
      if (n == i) continue;
      const auto& c = pm.at(n, i);
      absl::StrAppend(&s, n, ",", i, ",",
                      c.has_value() ? FormatDouble(*c) : "trusted", "\n");
    }
  }
  return s;
}

namespace internal {

inline absl::StatusOr<std::vector<std::vector<std::string>>> CsvRows(
    absl::string_view body, absl::string_view header) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> lines = absl::StrSplit(body, '\n', absl::SkipEmpty());
  if (lines.empty() || lines[0] != header) {
    return absl::InvalidArgumentError(absl::StrCat("expected header ", header));
  }
  for (size_t k = 1; k < lines.size(); ++k) {
    rows.push_back(absl::StrSplit(lines[k], ','));
  }
  return rows;
}

inline absl::StatusOr<int> ParseInt(absl::string_view s) {
  int v = 0;
  if (!absl::SimpleAtoi(s, &v)) {
    return absl::InvalidArgumentError(absl::StrCat("not an integer: '", s, "'"));
  }
  return v;
}

}  // namespace internal

inline absl::StatusOr<std::vector<EpochMetrics>> ParseMetricsCsv(
    absl::string_view body) {
  auto rows = internal::CsvRows(body, "epoch,avg_train_loss,avg_test_acc");
  if (!rows.ok()) return rows.status();
  std::vector<EpochMetrics> out;
  for (const auto& r : *rows) {
    if (r.size() != 3) return absl::InvalidArgumentError("metrics: bad row");
    auto l = ParseDouble(r[1]);
    auto a = ParseDouble(r[2]);
    auto e = internal::ParseInt(r[0]);
    if (!e.ok() || !l.ok() || !a.ok()) {
      return absl::InvalidArgumentError("metrics: bad number");
    }
    out.push_back({*e, *l, *a});
  }
  return out;
}

inline absl::StatusOr<std::vector<PwpRow>> ParsePwpCsv(absl::string_view body) {
  auto rows = internal::CsvRows(body, "epoch,worker,eps_rdp,alpha_star,eps_dp");
  if (!rows.ok()) return rows.status();
  std::vector<PwpRow> out;
  for (const auto& r : *rows) {
    if (r.size() != 5) return absl::InvalidArgumentError("pwp: bad row");
    PwpRow row;
    auto ep = internal::ParseInt(r[0]);
    auto wk = internal::ParseInt(r[1]);
    if (!ep.ok() || !wk.ok()) return absl::InvalidArgumentError("pwp: bad index");
    row.epoch = *ep;
    row.worker = *wk;
    if (r[2] != "absent") {
      auto e = ParseDouble(r[2]);
      auto a = ParseDouble(r[3]);
      auto d = ParseDouble(r[4]);
      if (!e.ok() || !a.ok() || !d.ok()) {
        return absl::InvalidArgumentError("pwp: bad number");
      }
      row.value = DpResult{*d, *a, *e};
    }
    out.push_back(row);
  }
  return out;
}

inline absl::StatusOr<PrivacyMatrix> ParseHeatmapCsv(absl::string_view body,
                                                     int n) {
  auto rows = internal::CsvRows(body, "n,i,eps");
  if (!rows.ok()) return rows.status();
  PrivacyMatrix pm(n);
  for (const auto& r : *rows) {
    if (r.size() != 3) return absl::InvalidArgumentError("heatmap: bad row");
    auto pa = internal::ParseInt(r[0]);
    auto pb = internal::ParseInt(r[1]);
    if (!pa.ok() || !pb.ok()) return absl::InvalidArgumentError("heatmap: bad index");
    int a = *pa, b = *pb;
    if (a < 0 || b < 0 || a >= n || b >= n) {
      return absl::InvalidArgumentError("heatmap: index out of range");
    }
    if (r[2] == "trusted") continue;
    auto v = ParseDouble(r[2]);
    if (!v.ok()) return v.status();
    pm.at(a, b) = *v;
  }
  return pm;
}

inline absl::Status EmitHeatmap(const PrivacyMatrix& pm,
                                const std::filesystem::path& path) {
  return WriteFile(path, HeatmapCsv(pm));
}

// ---- accounting ----

// PwP rows for epochs 1..T, each converted to DP over the alpha grid.
inline std::vector<PwpRow> ComputePwp(const Accountant& acc,
                                      const AccountantConfig& ac, int T) {
  std::vector<PwpRow> rows;
  const int N = acc.structure().num_workers();
  for (int t = 1; t <= T; ++t) {
    std::vector<std::vector<std::optional<double>>> by_alpha;
    for (double a : ac.alphas) by_alpha.push_back(acc.WorkerPwp(t, a, ac.variant));
    for (int n = 0; n < N; ++n) {
      PwpRow r{t, n, std::nullopt};
      if (by_alpha[0][n].has_value()) {
        std::vector<double> curve;
        for (const auto& v : by_alpha) curve.push_back(*v[n]);
        r.value = *RdpToDp(ac.alphas, curve, ac.delta);
      }
      rows.push_back(r);
    }
  }
  return rows;
}

struct Manifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> files;  // relative to output_dir
  std::string accounting_status = "ok";
  double beta = 0;

  json ToJson(const std::filesystem::path& dir) const {
    json files_j = json::array();
    for (const auto& f : files) {
      std::ifstream in(dir / f, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      files_j.push_back({{"path", f}, {"sha256", Sha256Hex(ss.str())}});
    }
    return json{{"config_hash", config_hash},
                {"seed", seed},
                {"smoothness_beta", FormatDouble(beta)},
                {"accounting", accounting_status},
                {"files", files_j}};
  }
};

inline std::string HeatmapName(int t) { return absl::StrCat("heatmap_t", t, ".csv"); }

// Accounting stage only. Writes pwp.csv and heatmaps into dir.
inline absl::Status RunAccounting(const ExperimentConfig& c, const Prepared& p,
                                  const std::filesystem::path& dir,
                                  std::vector<std::string>& files) {
  auto acc = Accountant::Create(p.structure, c.hp, c.accountant.bound, p.beta,
                                c.hp.T);
  if (!acc.ok()) return acc.status();
  auto rows = ComputePwp(*acc, c.accountant, c.hp.T);
  OGL_RETURN_IF_ERROR(WriteFile(dir / "pwp.csv", PwpCsv(rows)));
  files.push_back("pwp.csv");
  std::vector<int> epochs = c.heatmap_epochs;
  if (epochs.empty()) epochs = {c.hp.T};
  for (int t : epochs) {
    auto pm = acc->Matrix(t, c.accountant.heatmap_alpha, c.accountant.variant);
    OGL_RETURN_IF_ERROR(EmitHeatmap(pm, dir / HeatmapName(t)));
    files.push_back(HeatmapName(t));
  }
  return absl::OkStatus();
}

inline absl::Status WriteManifest(const std::filesystem::path& dir,
                                  Manifest& m) {
  m.files.push_back("manifest.json");
  json j = m.ToJson(dir);
  // the manifest cannot hash itself
  j["files"].erase(j["files"].size() - 1);
  j["files"].push_back({{"path", "manifest.json"}});
  return WriteFile(dir / "manifest.json", j.dump(2) + "\n");
}

// Full pipeline: data, partition, training, accounting, files.
inline absl::StatusOr<Manifest> RunExperiment(const ExperimentConfig& c) {
  auto p = Prepare(c);
  if (!p.ok()) return p.status();
  const std::filesystem::path dir = c.output_dir;
  Manifest m;
  m.config_hash = ConfigHash(c);
  m.seed = c.hp.seed;
  m.beta = p->beta;
  auto tr = RunTraining(p->structure, c.hp, p->data, p->train, p->test,
                        c.threads);
  if (!tr.ok()) return tr.status();
  OGL_RETURN_IF_ERROR(WriteFile(dir / "metrics.csv", MetricsCsv(tr->metrics)));
  m.files.push_back("metrics.csv");
  if (c.accountant.enabled && c.hp.T > 0) {
    auto st = RunAccounting(c, *p, dir, m.files);
    if (!st.ok()) m.accounting_status = std::string(st.message());
  } else {
    m.accounting_status = "disabled";
  }
  OGL_RETURN_IF_ERROR(WriteManifest(dir, m));
  return m;
}

// Accounting without training; it only depends on the structure.
inline absl::StatusOr<Manifest> AccountOnly(const ExperimentConfig& c) {
  auto p = Prepare(c);
  if (!p.ok()) return p.status();
  const std::filesystem::path dir = c.output_dir;
  Manifest m;
  m.config_hash = ConfigHash(c);
  m.seed = c.hp.seed;
  m.beta = p->beta;
  if (auto st = RunAccounting(c, *p, dir, m.files); !st.ok()) {
    m.accounting_status = std::string(st.message());
  }
  OGL_RETURN_IF_ERROR(WriteManifest(dir, m));
  return m;
}

}  // namespace ogl

#endif  // OGL_HARNESS_HPP_
