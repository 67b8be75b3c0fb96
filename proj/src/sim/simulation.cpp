#include "sentinel/sim/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "sentinel/common/error.hpp"

namespace sentinel::sim {

namespace {

struct ValueProfile {
  double base_lo;
  double base_hi;
  double noise;
};

ValueProfile profile_for(SensorKind kind) {
  switch (kind) {
    case SensorKind::Temperature: return {23.0, 27.0, 0.5};
    case SensorKind::Humidity: return {40.0, 50.0, 1.0};
    case SensorKind::Generic: return {0.4, 0.6, 0.05};
  }
  return {0.0, 0.0, 0.0};
}

std::int64_t seconds_to_ms(double s) { return static_cast<std::int64_t>(std::llround(s * 1000.0)); }

bool emits(NodeStatus s) {
  return s == NodeStatus::Active || s == NodeStatus::Compromised || s == NodeStatus::Quarantined;
}

}  // namespace

Simulation::Simulation(SimConfig config, std::vector<NodeSpec> specs, std::string sink_id)
    : config_(std::move(config)), queue_(StepAfter{this}) {
  config_.energy.validate();
  if (config_.energy_tick_ms <= 0) {
    throw Error(ErrorCode::InvalidArgument, "energy_tick_ms must be > 0");
  }
  std::vector<Placement> placements;
  placements.reserve(specs.size());
  for (const auto& s : specs) placements.push_back(s.placement);
  graph_ = make_radio_graph(placements, sink_id, config_.radio_range_m);

  const Energy initial = Energy::from_joules(config_.energy.initial_battery_j);
  nodes_.resize(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    if (!(spec.emit_period_s > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "emit_period_s must be > 0 for " + spec.placement.id);
    }
    Node& n = nodes_[i];
    n.state.id = spec.placement.id;
    n.state.position = spec.placement.position;
    n.state.battery = initial;
    n.state.emit_period_s = spec.emit_period_s;
    n.state.sensor_kind = spec.sensor_kind;
    n.rng = Rng(stream_seed(config_.seed, spec.placement.id));
    const auto prof = profile_for(spec.sensor_kind);
    n.base_value = spec.baseline_value.value_or(n.rng.uniform(prof.base_lo, prof.base_hi));
    n.base_period_ms = std::max<std::int64_t>(1, seconds_to_ms(spec.emit_period_s));
    n.is_sink = (i == graph_.sink);
    index_.emplace(n.state.id, i);
    if (!n.is_sink && n.state.battery == Energy{}) n.state.status = NodeStatus::Dead;
  }

  recompute_routes(0, "initial");
  pending_.deltas.clear();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_sink && nodes_[i].state.status != NodeStatus::Dead) {
      schedule_emit(i, next_interval_ms(i));
    }
  }
  schedule({.t_ms = config_.energy_tick_ms, .node = kNoNode, .kind = StepKind::EnergyTick});
}

bool Simulation::runs_before(const Step& a, const Step& b) const {
  if (a.t_ms != b.t_ms) return a.t_ms < b.t_ms;
  if (a.node != b.node) {
    if (a.node == kNoNode) return true;
    if (b.node == kNoNode) return false;
    const auto& ia = nodes_[a.node].state.id;
    const auto& ib = nodes_[b.node].state.id;
    if (ia != ib) return ia < ib;
  }
  if (a.kind != b.kind) return a.kind < b.kind;
  return a.order < b.order;
}

void Simulation::schedule(Step step) {
  step.order = next_order_++;
  queue_.push(std::move(step));
}

void Simulation::schedule_emit(std::size_t node, std::int64_t t_ms) {
  schedule({.t_ms = t_ms, .node = node, .kind = StepKind::Emit, .epoch = nodes_[node].epoch});
}

std::int64_t Simulation::next_interval_ms(std::size_t node) {
  Node& n = nodes_[node];
  double period = static_cast<double>(n.base_period_ms);
  if (flooding(node)) {
    for (const auto& a : attacks_) {
      if (a.active && a.spec.kind == AttackKind::Flood && a.target == node) {
        period /= a.spec.multiplier;
      }
    }
  }
  if (config_.jitter) period *= 1.0 + n.rng.uniform(-0.1, 0.1);
  return std::max<std::int64_t>(1, std::llround(period));
}

Batch Simulation::advance(std::int64_t until_ms) {
  if (until_ms < clock_ms_) {
    throw Error(ErrorCode::InvalidArgument, "advance target lies before the current clock");
  }
  while (!queue_.empty() && queue_.top().t_ms <= until_ms) {
    Step step = queue_.top();
    queue_.pop();
    clock_ms_ = step.t_ms;
    run_step(step);
    if (routes_dirty_) recompute_routes(step.t_ms, "status_change");
  }
  clock_ms_ = until_ms;
  Batch out;
  std::swap(out, pending_);
  return out;
}

void Simulation::run_step(const Step& step) {
  switch (step.kind) {
    case StepKind::EnergyTick: on_energy_tick(step.t_ms); break;
    case StepKind::AttackStart: on_attack_start(step.attack, step.t_ms); break;
    case StepKind::AttackEnd: on_attack_end(step.attack, step.t_ms); break;
    case StepKind::Emit: on_emit(step); break;
    case StepKind::Deliver: on_deliver(step); break;
  }
}

void Simulation::on_emit(const Step& step) {
  const std::size_t i = step.node;
  Node& n = nodes_[i];
  if (step.epoch != n.epoch || !emits(n.state.status)) return;

  settle_idle(i, step.t_ms);
  if (!emits(n.state.status) || !charge(i, EnergyOp::tx(), step.t_ms)) return;
  ++n.radio.tx_count;
  ++n.counters.emitted;

  Packet pkt;
  pkt.emitted_ms = step.t_ms;
  pkt.value = reading(i, step.t_ms);
  if (tamper_offset(i)) pkt.checksum_ok = !n.rng.bernoulli(0.5);
  pkt.energy = n.radio;
  pkt.energy.battery_nj = n.state.battery.nanojoules();

  schedule_emit(i, step.t_ms + next_interval_ms(i));

  if (n.state.status == NodeStatus::Quarantined) {
    ++n.counters.dropped_quarantine;
    return;
  }

  pkt.hop_count = routes_.hops[i];
  int hops = 0;
  std::size_t cur = i;
  while (cur != graph_.sink) {
    const auto parent = routes_.parent[cur];
    if (!parent) {
      ++n.counters.dropped_unrouted;
      return;
    }
    if (link_jammed(cur, *parent, step.t_ms)) {
      ++n.counters.dropped_jam;
      return;
    }
    ++hops;
    const std::size_t relay = *parent;
    if (relay != graph_.sink) {
      settle_idle(relay, step.t_ms);
      if (nodes_[relay].state.status == NodeStatus::Dead ||
          !charge(relay, EnergyOp::rx(), step.t_ms)) {
        ++n.counters.dropped_dead;
        return;
      }
      ++nodes_[relay].radio.rx_count;
      if (!charge(relay, EnergyOp::tx(), step.t_ms)) {
        ++n.counters.dropped_dead;
        return;
      }
      ++nodes_[relay].radio.tx_count;
    }
    cur = relay;
  }
  schedule({.t_ms = step.t_ms + hops * config_.hop_latency_ms,
            .node = i,
            .kind = StepKind::Deliver,
            .packet = pkt});
}

void Simulation::on_deliver(const Step& step) {
  Node& n = nodes_[step.node];
  switch (n.state.status) {
    case NodeStatus::Quarantined: ++n.counters.dropped_quarantine; return;
    case NodeStatus::Dead:
    case NodeStatus::PoweredOff: ++n.counters.dropped_dead; return;
    default: break;
  }
  ++n.counters.delivered;
  TelemetryRecord rec;
  rec.seq = ++next_seq_;
  rec.source_id = n.state.id;
  rec.emitted_ms = step.packet.emitted_ms;
  rec.sink_arrival_ms = step.t_ms;
  rec.sensor_kind = n.state.sensor_kind;
  rec.value = step.packet.value;
  rec.checksum_ok = step.packet.checksum_ok;
  rec.hop_count = step.packet.hop_count;
  rec.energy = step.packet.energy;
  pending_.telemetry.push_back(std::move(rec));
}

void Simulation::on_energy_tick(std::int64_t t_ms) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) settle_idle(i, t_ms);
  schedule({.t_ms = t_ms + config_.energy_tick_ms, .node = kNoNode, .kind = StepKind::EnergyTick});
}

void Simulation::on_attack_start(std::size_t idx, std::int64_t t_ms) {
  AttackRun& a = attacks_[idx];
  if (a.finished) return;
  if (a.spec.kind == AttackKind::RogueJoin) {
    const Position pos = a.spec.position.value_or(
        Position{graph_.positions[graph_.sink].x + config_.radio_range_m / 2.0,
                 graph_.positions[graph_.sink].y});
    const std::size_t i = graph_.add_node({a.spec.source_id, pos});
    nodes_.emplace_back();
    Node& n = nodes_[i];
    n.state.id = a.spec.source_id;
    n.state.position = pos;
    n.state.battery = Energy::from_joules(config_.energy.initial_battery_j);
    n.state.emit_period_s = a.spec.rogue_period_s;
    n.state.sensor_kind = SensorKind::Temperature;
    n.rng = Rng(stream_seed(config_.seed, a.spec.source_id));
    const auto prof = profile_for(n.state.sensor_kind);
    n.base_value = n.rng.uniform(prof.base_lo, prof.base_hi);
    n.base_period_ms = std::max<std::int64_t>(1, seconds_to_ms(a.spec.rogue_period_s));
    n.is_rogue = true;
    n.idle_settled_ms = t_ms;
    index_.emplace(n.state.id, i);
    a.target = i;
    a.active = true;
    pending_.deltas.push_back({t_ms, n.state.id, "node_joined",
                               {{"x", pos.x}, {"y", pos.y}, {"rogue", true}}});
    recompute_routes(t_ms, "node_joined");
    schedule_emit(i, t_ms);
  } else {
    if (a.target != kNoNode) settle_idle(a.target, t_ms);
    a.active = true;
    if (a.target != kNoNode && a.spec.kind != AttackKind::Jam &&
        nodes_[a.target].state.status == NodeStatus::Active) {
      set_status(a.target, NodeStatus::Compromised, t_ms, std::string(to_string(a.spec.kind)));
    }
    if (a.spec.kind == AttackKind::Flood && emits(nodes_[a.target].state.status)) {
      ++nodes_[a.target].epoch;
      schedule_emit(a.target, t_ms);
    }
  }
  pending_.deltas.push_back(
      {t_ms, a.target == kNoNode ? std::string{} : nodes_[a.target].state.id, "attack_started",
       to_json(a.spec)});
}

void Simulation::on_attack_end(std::size_t idx, std::int64_t t_ms) {
  AttackRun& a = attacks_[idx];
  if (a.finished) return;
  if (a.target != kNoNode) settle_idle(a.target, t_ms);
  a.active = false;
  a.finished = true;
  if (a.spec.kind == AttackKind::RogueJoin && a.target != kNoNode &&
      emits(nodes_[a.target].state.status)) {
    settle_idle(a.target, t_ms);
    set_status(a.target, NodeStatus::PoweredOff, t_ms, "rogue_left");
  }
  pending_.deltas.push_back(
      {t_ms, a.target == kNoNode ? std::string{} : nodes_[a.target].state.id, "attack_ended",
       {{"kind", to_string(a.spec.kind)}}});
}

bool Simulation::charge(std::size_t node, const EnergyOp& op, std::int64_t t_ms) {
  Node& n = nodes_[node];
  if (n.is_sink) return true;  // mains powered
  const NodeStatus before = n.state.status;
  const ConsumeResult r = consume_energy(n.state, op, config_.energy);
  if (r.on_dead) {
    pending_.deltas.push_back({t_ms, n.state.id, "op_on_dead", {{"op", static_cast<int>(op.kind)}}});
    return false;
  }
  n.ledger.record(op, r.charged);
  if (r.died) {
    // consume_energy already flipped the status; record the transition.
    n.state.status = before;
    set_status(node, NodeStatus::Dead, t_ms, "battery_depleted");
    return false;
  }
  return true;
}

void Simulation::settle_idle(std::size_t node, std::int64_t t_ms) {
  Node& n = nodes_[node];
  if (n.is_sink || n.state.status == NodeStatus::Dead || n.state.status == NodeStatus::PoweredOff) {
    return;
  }
  const std::int64_t dt = t_ms - n.idle_settled_ms;
  if (dt <= 0) return;
  n.idle_settled_ms = t_ms;
  charge(node, EnergyOp::idle(dt, idle_multiplier(node)), t_ms);
}

double Simulation::idle_multiplier(std::size_t node) const {
  double m = 1.0;
  for (const auto& a : attacks_) {
    if (a.active && a.spec.kind == AttackKind::Drain && a.target == node) m *= a.spec.idle_multiplier;
  }
  return m;
}

bool Simulation::flooding(std::size_t node) const {
  return std::any_of(attacks_.begin(), attacks_.end(), [node](const AttackRun& a) {
    return a.active && a.spec.kind == AttackKind::Flood && a.target == node;
  });
}

std::optional<double> Simulation::tamper_offset(std::size_t node) const {
  std::optional<double> offset;
  for (const auto& a : attacks_) {
    if (a.active && a.spec.kind == AttackKind::Tamper && a.target == node) {
      offset = offset.value_or(0.0) + a.spec.offset;
    }
  }
  return offset;
}

bool Simulation::link_jammed(std::size_t a, std::size_t b, std::int64_t) {
  for (auto& run : attacks_) {
    if (!run.active || run.spec.kind != AttackKind::Jam) continue;
    bool covered = false;
    if (run.spec.region) {
      const auto& r = *run.spec.region;
      covered = distance(graph_.positions[a], r.center) <= r.radius_m ||
                distance(graph_.positions[b], r.center) <= r.radius_m;
    } else {
      covered = run.target == a || run.target == b;
    }
    if (covered && run.rng.bernoulli(run.spec.drop_prob)) return true;
  }
  return false;
}

double Simulation::reading(std::size_t node, std::int64_t t_ms) {
  Node& n = nodes_[node];
  const auto prof = profile_for(n.state.sensor_kind);
  double v = n.base_value + n.rng.uniform(-prof.noise, prof.noise);
  if (n.ramp && t_ms > n.ramp->start_ms) {
    v += n.ramp->rate_per_s * static_cast<double>(t_ms - n.ramp->start_ms) / 1000.0;
  }
  if (auto off = tamper_offset(node)) v += *off;
  return quantize(v, 1e-3);
}

void Simulation::set_status(std::size_t node, NodeStatus status, std::int64_t t_ms,
                            std::string_view reason) {
  Node& n = nodes_[node];
  const NodeStatus from = n.state.status;
  if (from == status) return;
  n.state.status = status;
  if (status == NodeStatus::Dead || status == NodeStatus::PoweredOff) ++n.epoch;
  const bool relay_change = status == NodeStatus::Dead || status == NodeStatus::PoweredOff ||
                            status == NodeStatus::Quarantined || from == NodeStatus::Quarantined;
  if (relay_change) routes_dirty_ = true;
  pending_.deltas.push_back({t_ms, n.state.id, "status_changed",
                             {{"from", to_string(from)},
                              {"to", to_string(status)},
                              {"reason", reason},
                              {"battery_nj", n.state.battery.nanojoules()}}});
}

void Simulation::recompute_routes(std::int64_t t_ms, std::string_view reason) {
  const std::size_t n = nodes_.size();
  std::vector<bool> member(n), relay(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = nodes_[i].state.status;
    const bool alive = nodes_[i].is_sink || (s != NodeStatus::Dead && s != NodeStatus::PoweredOff);
    member[i] = alive && !nodes_[i].is_rogue;
    relay[i] = member[i] && s != NodeStatus::Quarantined;
  }
  routes_ = route_tree(graph_, member, relay);

  // Rogue nodes attach to the nearest in-range relay, else straight to the sink.
  for (std::size_t i = 0; i < n; ++i) {
    if (!nodes_[i].is_rogue || !emits(nodes_[i].state.status)) continue;
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (std::size_t j : graph_.neighbors[i]) {
      if (!relay[j] || routes_.hops[j] == RouteTree::kUnreachable) continue;
      const double d = distance(graph_.positions[i], graph_.positions[j]);
      if (!best || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    routes_.parent[i] = best.value_or(graph_.sink);
    routes_.hops[i] = best ? routes_.hops[*best] + 1 : 1;
  }

  int disconnected = 0;
  for (std::size_t i = 0; i < n; ++i) {
    nodes_[i].state.parent.reset();
    if (routes_.parent[i]) nodes_[i].state.parent = graph_.ids[*routes_.parent[i]];
    if (i != graph_.sink && member[i] && routes_.hops[i] == RouteTree::kUnreachable) ++disconnected;
  }
  routes_dirty_ = false;
  pending_.deltas.push_back(
      {t_ms, std::string{}, "routing_recomputed", {{"reason", reason}, {"disconnected", disconnected}}});
}

AttackHandle Simulation::inject_attack(const AttackSpec& spec) {
  spec.validate();
  if (spec.start_ms < clock_ms_) {
    throw Error(ErrorCode::InvalidArgument, "attack start lies before the current clock");
  }
  std::size_t target = kNoNode;
  if (spec.kind == AttackKind::RogueJoin) {
    if (has_node(spec.source_id)) {
      throw Error(ErrorCode::DuplicateId, "rogue source id already in use: " + spec.source_id);
    }
    for (const auto& a : attacks_) {
      if (a.spec.kind == AttackKind::RogueJoin && a.spec.source_id == spec.source_id) {
        throw Error(ErrorCode::OverlappingAttack, "rogue source already scheduled: " + spec.source_id);
      }
    }
  } else if (!spec.target.empty()) {
    target = index_of(spec.target);
    if (nodes_[target].is_sink && spec.kind != AttackKind::Jam) {
      throw Error(ErrorCode::InvalidArgument, "the sink cannot be an attack target");
    }
  }
  for (const auto& a : attacks_) {
    if (a.finished || a.spec.kind != spec.kind || spec.kind == AttackKind::RogueJoin) continue;
    const bool same_target = a.spec.target == spec.target &&
                             (!spec.target.empty() || (a.spec.region && spec.region &&
                                                       a.spec.region->center.x == spec.region->center.x &&
                                                       a.spec.region->center.y == spec.region->center.y));
    const bool overlaps = spec.start_ms < a.spec.end_ms() && a.spec.start_ms < spec.end_ms();
    if (same_target && overlaps) {
      throw Error(ErrorCode::OverlappingAttack,
                  std::string(to_string(spec.kind)) + " already scheduled on " + spec.target);
    }
  }
  const AttackHandle handle = attacks_.size();
  attacks_.push_back({spec, target,
                      Rng(stream_seed(config_.seed, "attack#" + std::to_string(handle))), false,
                      false});
  schedule({.t_ms = spec.start_ms, .node = target, .kind = StepKind::AttackStart, .attack = handle});
  schedule({.t_ms = spec.end_ms(), .node = target, .kind = StepKind::AttackEnd, .attack = handle});
  return handle;
}

void Simulation::add_ramp(const RampSpec& ramp) {
  Node& n = nodes_[index_of(ramp.target)];
  n.ramp = ramp;
}

StateDelta Simulation::apply_action(const ResponseAction& action) {
  if (action.action == ActionKind::AddException) {
    throw Error(ErrorCode::InvalidAction, "add_exception is applied by the CMDB, not the network");
  }
  const auto it = index_.find(action.target);
  if (it == index_.end()) throw Error(ErrorCode::UnknownTarget, "unknown node " + action.target);
  const std::size_t i = it->second;
  Node& n = nodes_[i];
  if (n.is_sink) throw Error(ErrorCode::InvalidAction, "actions cannot target the sink");
  const NodeStatus s = n.state.status;
  if (s == NodeStatus::Dead || s == NodeStatus::PoweredOff) {
    throw Error(ErrorCode::InvalidAction,
                action.target + " is " + std::string(to_string(s)) + "; nothing to act on");
  }
  const std::int64_t now = clock_ms_;
  switch (action.action) {
    case ActionKind::Quarantine:
      set_status(i, NodeStatus::Quarantined, now, "quarantine");
      break;
    case ActionKind::PowerOff:
      settle_idle(i, now);
      set_status(i, NodeStatus::PoweredOff, now, "power_off");
      break;
    case ActionKind::Patch:
      if (s != NodeStatus::Compromised) {
        throw Error(ErrorCode::InvalidAction, "patch requires a Compromised node; " + action.target +
                                                  " is " + std::string(to_string(s)));
      }
      settle_idle(i, now);
      for (auto& a : attacks_) {
        if (a.target == i && a.active && a.spec.kind != AttackKind::Jam) {
          a.active = false;
          a.finished = true;
          pending_.deltas.push_back({now, n.state.id, "attack_ended",
                                     {{"kind", to_string(a.spec.kind)}, {"reason", "patched"}}});
        }
      }
      set_status(i, NodeStatus::Active, now, "patch");
      ++n.epoch;
      schedule_emit(i, now + next_interval_ms(i));
      break;
    case ActionKind::AddException:
      break;
  }
  if (routes_dirty_) recompute_routes(now, std::string(to_string(action.action)));
  return {now, action.target, "action_applied",
          {{"action", to_string(action.action)},
           {"incident_ref", action.incident_ref},
           {"status", to_string(n.state.status)}}};
}

bool Simulation::has_node(std::string_view id) const { return index_.count(std::string(id)) != 0; }

std::size_t Simulation::index_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) throw Error(ErrorCode::UnknownTarget, "unknown node " + std::string(id));
  return it->second;
}

const NodeState& Simulation::node(std::string_view id) const { return nodes_[index_of(id)].state; }

std::vector<NodeState> Simulation::nodes() const {
  std::vector<NodeState> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.state);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

const EnergyLedger& Simulation::ledger(std::string_view id) const { return nodes_[index_of(id)].ledger; }

const DeliveryCounters& Simulation::counters(std::string_view id) const {
  return nodes_[index_of(id)].counters;
}

Topology Simulation::topology() const {
  Topology topo;
  for (std::size_t i = 0; i < graph_.size(); ++i) {
    for (std::size_t j : graph_.neighbors[i]) {
      if (graph_.ids[i] < graph_.ids[j]) topo.links.emplace(graph_.ids[i], graph_.ids[j]);
    }
    if (i == graph_.sink) {
      topo.hop_count[graph_.ids[i]] = 0;
    } else if (routes_.parent[i]) {
      topo.routing[graph_.ids[i]] = graph_.ids[*routes_.parent[i]];
      topo.hop_count[graph_.ids[i]] = routes_.hops[i];
    } else {
      topo.disconnected.insert(graph_.ids[i]);
    }
  }
  return topo;
}

}  // namespace sentinel::sim
