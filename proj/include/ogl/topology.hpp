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

#ifndef OGL_TOPOLOGY_HPP_
#define OGL_TOPOLOGY_HPP_

#include <algorithm>
#include <compare>
#include <cstdlib>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "json.hpp"

namespace ogl {

// Workers 0..N-1 and groups 0..M-1 with the two membership maps kept in sync.
class GroupStructure {
 public:
  GroupStructure() = default;

  static absl::StatusOr<GroupStructure> Create(
      int num_workers, std::vector<std::vector<int>> members_of_group,
      std::string kind = "custom") {
    if (num_workers < 1) {
      return absl::InvalidArgumentError("N must be positive");
    }
    if (members_of_group.empty()) {
      return absl::InvalidArgumentError("M must be positive");
    }
    GroupStructure s;
    s.kind_ = std::move(kind);
    s.num_workers_ = num_workers;
    s.groups_of_worker_.assign(num_workers, {});
    for (size_t m = 0; m < members_of_group.size(); ++m) {
      auto& members = members_of_group[m];
      std::sort(members.begin(), members.end());
      members.erase(std::unique(members.begin(), members.end()), members.end());
      if (members.empty()) {
        return absl::InvalidArgumentError(absl::StrCat("group ", m, " is empty"));
      }
      for (int n : members) {
        if (n < 0 || n >= num_workers) {
          return absl::InvalidArgumentError(
              absl::StrCat("group ", m, " has out-of-range worker ", n));
        }
        s.groups_of_worker_[n].push_back(static_cast<int>(m));
      }
    }
    for (int n = 0; n < num_workers; ++n) {
      if (s.groups_of_worker_[n].empty()) {
        return absl::InvalidArgumentError(
            absl::StrCat("worker ", n, " belongs to no group"));
      }
    }
    s.members_of_group_ = std::move(members_of_group);
    return s;
  }

  int num_workers() const { return num_workers_; }
  int num_groups() const { return static_cast<int>(members_of_group_.size()); }
  const std::string& kind() const { return kind_; }
  const std::vector<int>& members(int m) const { return members_of_group_[m]; }
  const std::vector<int>& groups_of(int n) const { return groups_of_worker_[n]; }
  const std::vector<std::vector<int>>& members_of_group() const {
    return members_of_group_;
  }

  bool InGroup(int n, int m) const {
    const auto& g = groups_of_worker_[n];
    return std::binary_search(g.begin(), g.end(), m);
  }

  // True when workers n and i have at least one group in common.
  bool ShareGroup(int n, int i) const {
    for (int m : groups_of_worker_[n]) {
      if (InGroup(i, m)) return true;
    }
    return false;
  }

  friend bool operator==(const GroupStructure& a, const GroupStructure& b) {
    return a.num_workers_ == b.num_workers_ &&
           a.members_of_group_ == b.members_of_group_;
  }

 private:
  std::string kind_ = "custom";
  int num_workers_ = 0;
  std::vector<std::vector<int>> members_of_group_;
  std::vector<std::vector<int>> groups_of_worker_;
};

// Hop count on the group overlap graph, or infinity.
struct GroupDistance {
  static constexpr int kInfinity = std::numeric_limits<int>::max();
  int hops = kInfinity;

  static constexpr GroupDistance Infinity() { return {}; }
  constexpr bool finite() const { return hops != kInfinity; }
  friend constexpr auto operator<=>(const GroupDistance&,
                                    const GroupDistance&) = default;
};

inline std::string ToString(GroupDistance d) {
  return d.finite() ? std::to_string(d.hops) : std::string("inf");
}

class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(int m = 0) : m_(m), a_(size_t(m) * m, 0) {}
  int size() const { return m_; }
  bool operator()(int i, int j) const { return a_[size_t(i) * m_ + j] != 0; }
  void Set(int i, int j, bool v) { a_[size_t(i) * m_ + j] = v ? 1 : 0; }

  std::vector<int> Neighbors(int i) const {
    std::vector<int> out;
    for (int j = 0; j < m_; ++j) {
      if (j != i && (*this)(i, j)) out.push_back(j);
    }
    return out;
  }

  friend bool operator==(const AdjacencyMatrix&, const AdjacencyMatrix&) =
      default;

 private:
  int m_;
  std::vector<unsigned char> a_;
};

inline AdjacencyMatrix BuildAdjacency(const GroupStructure& s) {
  const int m = s.num_groups();
  AdjacencyMatrix a(m);
  for (int g = 0; g < m; ++g) a.Set(g, g, true);
  for (int n = 0; n < s.num_workers(); ++n) {
    const auto& gs = s.groups_of(n);
    for (int x : gs) {
      for (int y : gs) a.Set(x, y, true);
    }
  }
  return a;
}

// BFS from one group; entry k is the hop distance to group k.
inline std::vector<GroupDistance> DistancesFrom(const AdjacencyMatrix& a,
                                                int src) {
  std::vector<GroupDistance> dist(a.size());
  std::deque<int> q;
  dist[src].hops = 0;
  q.push_back(src);
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (int v = 0; v < a.size(); ++v) {
      if (a(u, v) && !dist[v].finite()) {
        dist[v].hops = dist[u].hops + 1;
        q.push_back(v);
      }
    }
  }
  return dist;
}

inline GroupDistance GroupDistanceOf(const AdjacencyMatrix& a, int m,
                                     int m2) {
  return DistancesFrom(a, m)[m2];
}

inline std::vector<std::vector<GroupDistance>> AllPairsDistances(
    const AdjacencyMatrix& a) {
  std::vector<std::vector<GroupDistance>> d;
  d.reserve(a.size());
  for (int m = 0; m < a.size(); ++m) d.push_back(DistancesFrom(a, m));
  return d;
}

// Min over i's groups of the distance from source group m2.
inline GroupDistance GtoHDistance(const AdjacencyMatrix& a,
                                  const GroupStructure& s, int m2, int i) {
  auto dist = DistancesFrom(a, m2);
  GroupDistance best;
  for (int m : s.groups_of(i)) best = std::min(best, dist[m]);
  return best;
}

// One shortest path src -> dst inclusive, empty if unreachable. Ties go to
// the lowest-numbered predecessor, so the result is deterministic.
inline std::vector<int> ShortestPath(const AdjacencyMatrix& a, int src,
                                     int dst) {
  std::vector<int> parent(a.size(), -1);
  std::vector<char> seen(a.size(), 0);
  std::deque<int> q{src};
  seen[src] = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    if (u == dst) break;
    for (int v = 0; v < a.size(); ++v) {
      if (a(u, v) && !seen[v]) {
        seen[v] = 1;
        parent[v] = u;
        q.push_back(v);
      }
    }
  }
  if (!seen[dst]) return {};
  std::vector<int> path;
  for (int v = dst; v != -1; v = parent[v]) path.push_back(v);
  std::reverse(path.begin(), path.end());
  return path;
}

enum class StructureKind { kGL, kLB, kCL, kRI };

inline absl::StatusOr<StructureKind> ParseStructureKind(absl::string_view s) {
  if (s == "GL") return StructureKind::kGL;
  if (s == "LB") return StructureKind::kLB;
  if (s == "CL") return StructureKind::kCL;
  if (s == "RI") return StructureKind::kRI;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown structure kind '", s, "'"));
}

inline const char* KindName(StructureKind k) {
  switch (k) {
    case StructureKind::kGL: return "GL";
    case StructureKind::kLB: return "LB";
    case StructureKind::kCL: return "CL";
    case StructureKind::kRI: return "RI";
  }
  return "?";
}

// labels_of_worker: for LB, the set of labels present in each worker's data.
inline absl::StatusOr<GroupStructure> GenerateStructure(
    StructureKind kind, int n, int m,
    const std::optional<std::vector<std::vector<int>>>& labels_of_worker =
        std::nullopt) {
  if (n < 1 || m < 1) return absl::InvalidArgumentError("N and M must be >= 1");
  if (m > n) {
    return absl::InvalidArgumentError(
        absl::StrCat("M=", m, " exceeds N=", n));
  }
  std::vector<std::vector<int>> groups(m);
  switch (kind) {
    case StructureKind::kGL: {
      if (m != 1) return absl::InvalidArgumentError("GL needs M=1");
      for (int w = 0; w < n; ++w) groups[0].push_back(w);
      break;
    }
    case StructureKind::kLB: {
      if (!labels_of_worker.has_value()) {
        return absl::InvalidArgumentError("LB needs a label map");
      }
      if (static_cast<int>(labels_of_worker->size()) != n) {
        return absl::InvalidArgumentError("LB label map size != N");
      }
      for (int w = 0; w < n; ++w) {
        const auto& labels = (*labels_of_worker)[w];
        if (labels.empty()) {
          // no local data: park it somewhere deterministic
          groups[w % m].push_back(w);
          continue;
        }
        for (int y : labels) groups[((y % m) + m) % m].push_back(w);
      }
      break;
    }
    case StructureKind::kCL: {
      const int base = n / m, rem = n % m;
      int next = 0;
      for (int g = 0; g < m; ++g) {
        int size = base + (g >= m - rem ? 1 : 0);
        for (int k = 0; k < size; ++k) groups[g].push_back(next++);
      }
      break;
    }
    case StructureKind::kRI: {
      const int s = n / m;
      const int span = s * m;
      for (int g = 0; g < m; ++g) {
        for (int k = 0; k < s; ++k) groups[g].push_back(g * s + k);
        groups[g].push_back(((g + 1) * s) % span);
      }
      for (int w = span; w < n; ++w) groups[m - 1].push_back(w);
      break;
    }
  }
  return GroupStructure::Create(n, std::move(groups), KindName(kind));
}

// Band test under the identity group order.
inline bool IsStringInOrder(const GroupStructure& s) {
  for (int n = 0; n < s.num_workers(); ++n) {
    if (s.groups_of(n).size() > 2) return false;
  }
  auto a = BuildAdjacency(s);
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < a.size(); ++j) {
      if (i == j) continue;
      if (a(i, j) != (std::abs(i - j) == 1)) return false;
    }
  }
  return true;
}

// An ordering of the groups under which the structure is a string, if any.
// The group graph must be a simple path, which we can check directly.
inline std::optional<std::vector<int>> FindStringOrder(const GroupStructure& s) {
  for (int n = 0; n < s.num_workers(); ++n) {
    if (s.groups_of(n).size() > 2) return std::nullopt;
  }
  auto a = BuildAdjacency(s);
  const int m = a.size();
  if (m == 1) return std::vector<int>{0};
  int edges = 0, end = -1;
  for (int g = 0; g < m; ++g) {
    int deg = static_cast<int>(a.Neighbors(g).size());
    if (deg == 0 || deg > 2) return std::nullopt;
    if (deg == 1 && end < 0) end = g;
    edges += deg;
  }
  if (edges / 2 != m - 1 || end < 0) return std::nullopt;
  std::vector<int> order{end};
  int prev = -1, cur = end;
  while (static_cast<int>(order.size()) < m) {
    int next = -1;
    for (int v : a.Neighbors(cur)) {
      if (v != prev) next = v;
    }
    if (next < 0) return std::nullopt;  // disconnected
    order.push_back(next);
    prev = cur;
    cur = next;
  }
  return order;
}

inline bool IsString(const GroupStructure& s) {
  return FindStringOrder(s).has_value();
}

inline nlohmann::json StructureToJson(const GroupStructure& s) {
  return nlohmann::json{{"kind", s.kind()},
                        {"N", s.num_workers()},
                        {"M", s.num_groups()},
                        {"members_of_group", s.members_of_group()}};
}

inline absl::StatusOr<GroupStructure> StructureFromJson(
    const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("N") || !j.contains("members_of_group")) {
    return absl::InvalidArgumentError(
        "structure needs fields N and members_of_group");
  }
  try {
    int n = j.at("N").get<int>();
    auto groups = j.at("members_of_group").get<std::vector<std::vector<int>>>();
    if (j.contains("M") && j.at("M").get<int>() != static_cast<int>(groups.size())) {
      return absl::InvalidArgumentError("M does not match members_of_group");
    }
    return GroupStructure::Create(n, std::move(groups),
                                  j.value("kind", std::string("custom")));
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("structure: ", e.what()));
  }
}

}  // namespace ogl

#endif  // OGL_TOPOLOGY_HPP_
