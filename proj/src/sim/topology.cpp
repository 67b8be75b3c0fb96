#include "sentinel/sim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_set>

#include "sentinel/common/error.hpp"

namespace sentinel::sim {

std::size_t RadioGraph::add_node(const Placement& placement) {
  const std::size_t idx = ids.size();
  ids.push_back(placement.id);
  positions.push_back(placement.position);
  neighbors.emplace_back();
  for (std::size_t j = 0; j < idx; ++j) {
    if (distance(positions[j], placement.position) <= radio_range_m) {
      neighbors[idx].push_back(j);
      auto& nj = neighbors[j];
      nj.insert(std::upper_bound(nj.begin(), nj.end(), idx,
                                 [this](std::size_t a, std::size_t b) { return ids[a] < ids[b]; }),
                idx);
    }
  }
  std::sort(neighbors[idx].begin(), neighbors[idx].end(),
            [this](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  return idx;
}

RadioGraph make_radio_graph(std::span<const Placement> placements, std::string_view sink_id,
                            double radio_range_m) {
  if (!std::isfinite(radio_range_m) || radio_range_m < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "radio_range_m must be finite and >= 0");
  }
  RadioGraph g;
  g.radio_range_m = radio_range_m;
  std::unordered_set<std::string> seen;
  bool have_sink = false;
  for (const auto& p : placements) {
    if (!std::isfinite(p.position.x) || !std::isfinite(p.position.y)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite position for node " + p.id);
    }
    if (!seen.insert(p.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate node id " + p.id);
    }
    if (p.id == sink_id) {
      g.sink = g.ids.size();
      have_sink = true;
    }
    g.ids.push_back(p.id);
    g.positions.push_back(p.position);
  }
  if (!have_sink) {
    throw Error(ErrorCode::MissingSink, "sink " + std::string(sink_id) + " not among placements");
  }

  const std::size_t n = g.ids.size();
  g.neighbors.assign(n, {});
  // Bucket by cell so large deployments avoid the all-pairs scan.
  const double cell = radio_range_m > 0.0 ? radio_range_m : 1.0;
  auto key = [cell](Position p) {
    return std::pair<long long, long long>{static_cast<long long>(std::floor(p.x / cell)),
                                           static_cast<long long>(std::floor(p.y / cell))};
  };
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < n; ++i) buckets[key(g.positions[i])].push_back(i);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = key(g.positions[i]);
    for (long long dx = -1; dx <= 1; ++dx) {
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = buckets.find({cx + dx, cy + dy});
        if (it == buckets.end()) continue;
        for (std::size_t j : it->second) {
          if (j != i && distance(g.positions[i], g.positions[j]) <= radio_range_m) {
            g.neighbors[i].push_back(j);
          }
        }
      }
    }
    std::sort(g.neighbors[i].begin(), g.neighbors[i].end(),
              [&g](std::size_t a, std::size_t b) { return g.ids[a] < g.ids[b]; });
  }
  return g;
}

RouteTree route_tree(const RadioGraph& graph, const std::vector<bool>& member,
                     const std::vector<bool>& relay_ok) {
  const std::size_t n = graph.size();
  auto is_member = [&](std::size_t i) { return member.empty() || member[i]; };
  auto can_relay = [&](std::size_t i) {
    return i == graph.sink || (is_member(i) && (relay_ok.empty() || relay_ok[i]));
  };

  RouteTree tree;
  tree.parent.assign(n, std::nullopt);
  tree.hops.assign(n, RouteTree::kUnreachable);
  tree.hops[graph.sink] = 0;

  // Layered BFS; only relays are expanded.
  std::deque<std::size_t> frontier{graph.sink};
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop_front();
    if (!can_relay(u)) continue;
    for (std::size_t v : graph.neighbors[u]) {
      if (!is_member(v) || tree.hops[v] != RouteTree::kUnreachable) continue;
      tree.hops[v] = tree.hops[u] + 1;
      frontier.push_back(v);
    }
  }
  // Parent = smallest-id relay neighbour one hop closer. Neighbour lists are
  // id-sorted, so the first match wins.
  for (std::size_t v = 0; v < n; ++v) {
    if (v == graph.sink || tree.hops[v] == RouteTree::kUnreachable) continue;
    for (std::size_t u : graph.neighbors[v]) {
      if (tree.hops[u] == tree.hops[v] - 1 && can_relay(u)) {
        tree.parent[v] = u;
        break;
      }
    }
  }
  return tree;
}

Topology build_topology(std::span<const Placement> placements, std::string_view sink_id,
                        double radio_range_m) {
  const RadioGraph g = make_radio_graph(placements, sink_id, radio_range_m);
  const RouteTree tree = route_tree(g);
  Topology topo;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j : g.neighbors[i]) {
      if (g.ids[i] < g.ids[j]) topo.links.emplace(g.ids[i], g.ids[j]);
    }
    if (i == g.sink) {
      topo.hop_count[g.ids[i]] = 0;
    } else if (tree.parent[i]) {
      topo.routing[g.ids[i]] = g.ids[*tree.parent[i]];
      topo.hop_count[g.ids[i]] = tree.hops[i];
    } else {
      topo.disconnected.insert(g.ids[i]);
    }
  }
  return topo;
}

}  // namespace sentinel::sim
