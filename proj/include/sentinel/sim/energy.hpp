#pragma once

#include <cstdint>

#include "sentinel/sim/types.hpp"

namespace sentinel::sim {

enum class EnergyOpKind { Tx, Rx, Idle };

struct EnergyOp {
  EnergyOpKind kind = EnergyOpKind::Idle;
  std::int64_t dt_ms = 0;          // idle only
  double idle_multiplier = 1.0;    // idle only; > 1 under a drain attack

  static EnergyOp tx() { return {EnergyOpKind::Tx}; }
  static EnergyOp rx() { return {EnergyOpKind::Rx}; }
  static EnergyOp idle(std::int64_t dt_ms, double multiplier = 1.0) {
    return {EnergyOpKind::Idle, dt_ms, multiplier};
  }
};

struct ConsumeResult {
  Energy battery;       // after the op
  Energy charged;       // what was actually deducted (clamped at the floor)
  bool died = false;    // this op drove the battery to zero
  bool on_dead = false; // op hit an already-dead node and was ignored
};

/// Nominal cost of an op before clamping.
Energy op_cost(const EnergyOp& op, const EnergyModel& model);

/// Deducts the op's cost from node.battery, clamped at zero. Reaching zero
/// moves the node to Dead. Ops on a Dead node change nothing.
ConsumeResult consume_energy(NodeState& node, const EnergyOp& op, const EnergyModel& model);

/// Per-node charge ledger, split by op kind.
struct EnergyLedger {
  std::uint64_t tx_ops = 0;
  std::uint64_t rx_ops = 0;
  std::int64_t idle_ms = 0;
  Energy tx;
  Energy rx;
  Energy idle;

  Energy total() const { return tx + rx + idle; }
  void record(const EnergyOp& op, Energy charged);
};

}  // namespace sentinel::sim
