#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sentinel/common/action.hpp"
#include "sentinel/common/rng.hpp"
#include "sentinel/sim/energy.hpp"
#include "sentinel/sim/topology.hpp"
#include "sentinel/sim/types.hpp"

namespace sentinel::sim {

struct SimConfig {
  std::uint64_t seed = 1;
  double radio_range_m = 100.0;
  EnergyModel energy;
  bool jitter = false;                  // uniform +-10% of the emission period
  std::int64_t hop_latency_ms = 0;
  std::int64_t energy_tick_ms = 10'000; // periodic idle settlement
};

struct NodeSpec {
  Placement placement;
  double emit_period_s = 10.0;
  SensorKind sensor_kind = SensorKind::Temperature;
  std::optional<double> baseline_value;
};

/// Linear drift of a node's readings, e.g. an overheating unit.
struct RampSpec {
  std::string target;
  std::int64_t start_ms = 0;
  double rate_per_s = 0.0;
};

struct DeliveryCounters {
  std::uint64_t emitted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_quarantine = 0;
  std::uint64_t dropped_jam = 0;
  std::uint64_t dropped_unrouted = 0;
  std::uint64_t dropped_dead = 0;
};

using AttackHandle = std::size_t;

/// Deterministic discrete-event WSN simulation. Time is integer simulated
/// milliseconds; everything scheduled at or before an advance() target runs
/// in (time, node id) order. Single writer: not safe for concurrent mutation.
class Simulation {
 public:
  Simulation(SimConfig config, std::vector<NodeSpec> nodes, std::string sink_id);
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  std::int64_t clock_ms() const { return clock_ms_; }
  const SimConfig& config() const { return config_; }
  const std::string& sink_id() const { return graph_.ids[graph_.sink]; }

  /// Runs every scheduled step with timestamp <= until_ms. Throws
  /// InvalidArgument if until_ms lies in the past.
  Batch advance(std::int64_t until_ms);

  AttackHandle inject_attack(const AttackSpec& spec);
  void add_ramp(const RampSpec& ramp);

  /// Applies quarantine, power_off or patch at the current clock. Throws
  /// UnknownTarget or InvalidAction without changing any state.
  StateDelta apply_action(const ResponseAction& action);

  bool has_node(std::string_view id) const;
  const NodeState& node(std::string_view id) const;
  std::vector<NodeState> nodes() const;
  const EnergyLedger& ledger(std::string_view id) const;
  const DeliveryCounters& counters(std::string_view id) const;
  Topology topology() const;

 private:
  enum class StepKind : std::uint8_t { EnergyTick, AttackStart, AttackEnd, Emit, Deliver };

  struct Packet {
    std::int64_t emitted_ms = 0;
    double value = 0.0;
    bool checksum_ok = true;
    int hop_count = 0;
    BatteryReport energy;
  };

  struct Step {
    std::int64_t t_ms = 0;
    std::size_t node = 0;  // kNoNode for global steps
    StepKind kind = StepKind::EnergyTick;
    std::uint64_t order = 0;
    std::uint64_t epoch = 0;     // Emit: node epoch at scheduling
    std::size_t attack = 0;      // AttackStart / AttackEnd
    Packet packet;               // Deliver
  };

  struct StepAfter {
    const Simulation* sim;
    bool operator()(const Step& a, const Step& b) const { return sim->runs_before(b, a); }
  };

  struct Node {
    NodeState state;
    Rng rng;
    double base_value = 0.0;
    std::int64_t base_period_ms = 10'000;
    std::uint64_t epoch = 0;
    std::int64_t idle_settled_ms = 0;
    EnergyLedger ledger;
    BatteryReport radio;
    DeliveryCounters counters;
    bool is_sink = false;
    bool is_rogue = false;
    std::optional<RampSpec> ramp;
  };

  struct AttackRun {
    AttackSpec spec;
    std::size_t target = 0;  // kNoNode for regions and rogue joins before start
    Rng rng;
    bool active = false;
    bool finished = false;
  };

  static constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);

  bool runs_before(const Step& a, const Step& b) const;
  void schedule(Step step);
  void schedule_emit(std::size_t node, std::int64_t t_ms);
  std::int64_t next_interval_ms(std::size_t node);

  void run_step(const Step& step);
  void on_emit(const Step& step);
  void on_deliver(const Step& step);
  void on_energy_tick(std::int64_t t_ms);
  void on_attack_start(std::size_t attack, std::int64_t t_ms);
  void on_attack_end(std::size_t attack, std::int64_t t_ms);

  /// Returns false if the node died while paying for the op.
  bool charge(std::size_t node, const EnergyOp& op, std::int64_t t_ms);
  void settle_idle(std::size_t node, std::int64_t t_ms);
  double idle_multiplier(std::size_t node) const;
  bool flooding(std::size_t node) const;
  std::optional<double> tamper_offset(std::size_t node) const;
  bool link_jammed(std::size_t a, std::size_t b, std::int64_t t_ms);
  double reading(std::size_t node, std::int64_t t_ms);

  void set_status(std::size_t node, NodeStatus status, std::int64_t t_ms, std::string_view reason);
  void recompute_routes(std::int64_t t_ms, std::string_view reason);
  std::size_t index_of(std::string_view id) const;

  SimConfig config_;
  RadioGraph graph_;
  RouteTree routes_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<AttackRun> attacks_;
  std::priority_queue<Step, std::vector<Step>, StepAfter> queue_;
  std::uint64_t next_order_ = 0;
  std::uint64_t next_seq_ = 0;
  std::int64_t clock_ms_ = 0;
  bool routes_dirty_ = false;
  Batch pending_;
};

}  // namespace sentinel::sim
