#include "sentinel/sim/energy.hpp"

#include <algorithm>

namespace sentinel::sim {

Energy op_cost(const EnergyOp& op, const EnergyModel& model) {
  switch (op.kind) {
    case EnergyOpKind::Tx: return model.tx_cost();
    case EnergyOpKind::Rx: return model.rx_cost();
    case EnergyOpKind::Idle: return model.idle_cost(op.dt_ms, op.idle_multiplier);
  }
  return {};
}

ConsumeResult consume_energy(NodeState& node, const EnergyOp& op, const EnergyModel& model) {
  ConsumeResult result;
  if (node.status == NodeStatus::Dead) {
    result.battery = node.battery;
    result.on_dead = true;
    return result;
  }
  const Energy charged = std::min(op_cost(op, model), node.battery);
  node.battery -= charged;
  result.charged = charged;
  result.battery = node.battery;
  if (node.battery == Energy{}) {
    node.status = NodeStatus::Dead;
    result.died = true;
  }
  return result;
}

void EnergyLedger::record(const EnergyOp& op, Energy charged) {
  switch (op.kind) {
    case EnergyOpKind::Tx:
      ++tx_ops;
      tx += charged;
      break;
    case EnergyOpKind::Rx:
      ++rx_ops;
      rx += charged;
      break;
    case EnergyOpKind::Idle:
      idle_ms += op.dt_ms;
      idle += charged;
      break;
  }
}

}  // namespace sentinel::sim
