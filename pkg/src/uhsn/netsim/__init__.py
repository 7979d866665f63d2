"""Deterministic network and energy simulator for the sensor-node scheme."""

from .costs import comparison_table, handshake_cost_report, node_to_node_cost_report
from .energy import REFERENCE_COSTS, EnergyLedger
from .frames import Frame, MsgType, fragment, reassemble
from .network import BaseStation, Network, NodeIdentity, Role, SensorNode, perform_handshake

__all__ = [
    "BaseStation", "EnergyLedger", "Frame", "MsgType", "Network", "NodeIdentity",
    "REFERENCE_COSTS", "Role", "SensorNode", "comparison_table", "fragment",
    "handshake_cost_report", "node_to_node_cost_report", "perform_handshake", "reassemble",
]
