#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sentinel/sim/types.hpp"

namespace sentinel::sim {

struct Placement {
  std::string id;
  Position position;
};

struct Topology {
  std::set<std::pair<std::string, std::string>> links;  // (smaller, larger) id
  std::map<std::string, std::string> routing;           // node -> parent
  std::map<std::string, int> hop_count;                 // sink -> 0
  std::set<std::string> disconnected;
};

/// Unit-disk connectivity graph over index-addressed nodes.
struct RadioGraph {
  std::vector<std::string> ids;
  std::vector<Position> positions;
  std::vector<std::vector<std::size_t>> neighbors;  // sorted by id
  std::size_t sink = 0;
  double radio_range_m = 0.0;

  std::size_t size() const { return ids.size(); }
  /// Adds a node after construction and links it to every node in range.
  std::size_t add_node(const Placement& placement);
};

/// Throws DuplicateId / MissingSink / InvalidArgument.
RadioGraph make_radio_graph(std::span<const Placement> placements, std::string_view sink_id,
                            double radio_range_m);

struct RouteTree {
  static constexpr int kUnreachable = -1;
  std::vector<std::optional<std::size_t>> parent;
  std::vector<int> hops;
};

/// Shortest-hop BFS tree rooted at the sink over the nodes with member[i].
/// Only members with relay_ok[i] forward traffic; other members are attached
/// as leaves. Among equal-hop candidates the lexicographically smallest id
/// becomes the parent. Empty masks mean "all nodes".
RouteTree route_tree(const RadioGraph& graph, const std::vector<bool>& member = {},
                     const std::vector<bool>& relay_ok = {});

Topology build_topology(std::span<const Placement> placements, std::string_view sink_id,
                        double radio_range_m);

}  // namespace sentinel::sim
