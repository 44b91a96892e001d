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

// ogl run <config.json>        train + account, write CSVs and manifest
// ogl account <config.json>    accounting only
// ogl distances <structure.json>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/strings/numbers.h"
#include "absl/strings/str_split.h"
#include "ogl/ogl.hpp"

namespace {

struct Overrides {
  std::string out;
  std::string heatmap_epochs;
  std::string variant;
  std::string threat;
};

absl::StatusOr<ogl::ExperimentConfig> LoadWithOverrides(const std::string& path,
                                                        const Overrides& o) {
  auto cfg = ogl::LoadConfig(path);
  if (!cfg.ok()) return cfg.status();
  if (!o.out.empty()) cfg->output_dir = o.out;
  if (!o.heatmap_epochs.empty()) {
    cfg->heatmap_epochs.clear();
    for (absl::string_view tok : absl::StrSplit(o.heatmap_epochs, ',')) {
      int v = 0;
      if (!absl::SimpleAtoi(tok, &v)) {
        return absl::InvalidArgumentError(
            absl::StrCat("--heatmap-epochs: bad epoch '", tok, "'"));
      }
      cfg->heatmap_epochs.push_back(v);
    }
  }
  if (!o.variant.empty()) {
    auto v = ogl::ParseVariant(o.variant);
    if (!v.ok()) return v.status();
    cfg->accountant.variant = *v;
  }
  if (!o.threat.empty()) {
    auto t = ogl::ParseThreat(o.threat);
    if (!t.ok()) return t.status();
    cfg->hp.threat = *t;
  }
  if (auto st = ogl::ApplySeedOverride(*cfg); !st.ok()) return st;
  if (auto st = ogl::ValidateConfig(*cfg); !st.ok()) return st;
  return cfg;
}

int Report(const absl::StatusOr<ogl::Manifest>& m, const std::string& dir) {
  if (!m.ok()) {
    std::cerr << "error: " << m.status().message() << "\n";
    return 1;
  }
  for (const auto& f : m->files) std::cout << dir << "/" << f << "\n";
  if (m->accounting_status != "ok" && m->accounting_status != "disabled") {
    std::cerr << "accounting failed: " << m->accounting_status << "\n";
    return 2;
  }
  return 0;
}

int Distances(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    return 1;
  }
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    std::cerr << "error: " << path << ": invalid JSON\n";
    return 1;
  }
  absl::StatusOr<ogl::GroupStructure> s;
  if (j.contains("members_of_group")) {
    s = ogl::StructureFromJson(j);
  } else {
    auto kind = ogl::ParseStructureKind(j.value("kind", std::string()));
    if (!kind.ok()) {
      std::cerr << "error: " << kind.status().message() << "\n";
      return 1;
    }
    s = ogl::GenerateStructure(*kind, j.value("N", 0), j.value("M", 0));
  }
  if (!s.ok()) {
    std::cerr << "error: " << s.status().message() << "\n";
    return 1;
  }
  auto a = ogl::BuildAdjacency(*s);
  auto d = ogl::AllPairsDistances(a);
  std::cout << "# group distance rho (rows m, cols m')\n";
  for (int m = 0; m < s->num_groups(); ++m) {
    for (int k = 0; k < s->num_groups(); ++k) {
      std::cout << (k ? "," : "") << ogl::ToString(d[m][k]);
    }
    std::cout << "\n";
  }
  std::cout << "# GtoH distance (rows source group m', cols worker i)\n";
  for (int m = 0; m < s->num_groups(); ++m) {
    for (int i = 0; i < s->num_workers(); ++i) {
      std::cout << (i ? "," : "") << ogl::ToString(ogl::GtoHDistance(a, *s, m, i));
    }
    std::cout << "\n";
  }
  std::cout << "# string: " << (ogl::IsString(*s) ? "yes" : "no") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Overlapping grouped learning simulator and privacy accountant"};
  app.require_subcommand(1);
  Overrides o;
  std::string config;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "experiment config JSON")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--heatmap-epochs", o.heatmap_epochs,
                    "comma separated epochs, e.g. 50,100,200");
    sub->add_option("--variant", o.variant, "as_printed|examples_consistent");
    sub->add_option("--threat", o.threat, "tm1|tm2");
  };
  auto* run = app.add_subcommand("run", "train and account");
  add_common(run);
  auto* account = app.add_subcommand("account", "accounting only");
  add_common(account);  // falls through to AccountOnly below
  std::string structure;
  auto* dist = app.add_subcommand("distances", "print rho and GtoH tables");
  dist->add_option("structure", structure, "structure JSON")->required();

  CLI11_PARSE(app, argc, argv);

  if (dist->parsed()) return Distances(structure);
  auto cfg = LoadWithOverrides(config, o);
  if (!cfg.ok()) {
    std::cerr << "error: " << cfg.status().message() << "\n";
    return 1;
  }
  if (run->parsed()) return Report(ogl::RunExperiment(*cfg), cfg->output_dir);
  return Report(ogl::AccountOnly(*cfg), cfg->output_dir);
}
