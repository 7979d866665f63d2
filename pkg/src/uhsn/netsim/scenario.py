"""Scripted scenarios: JSON config in, deterministic JSON report out.

Config schema::

    {
      "field_modulus": 251,                 # prime q
      "dims": {"m": 2, "n": 3, "k": 2},
      "seed": 7,                            # 0 <= seed < 2**64
      "auth_tag": true,                     # optional, default true
      "cache_kd": false,                    # optional, receiver K_d cache
      "analysis": false,                    # optional, exhaustive ambiguity count per handshake
      "nodes": [{"name": "SBS", "id": 0, "role": "SBS"},
                {"name": "A", "id": 1, "role": "PT"}, ...],
      "script": [{"op": "handshake", "node": "A"},
                 {"op": "preprovision", "node": "B"},
                 {"op": "send", "from": "A", "to": "B", "message": "hi"},
                 {"op": "revoke", "node": "A"},
                 {"op": "send", "from": "A", "to": "B", "message": "x", "expect": "fail"}]
    }

``message`` is UTF-8 text; ``message_hex`` may be given instead. ``expect``
(``ok`` by default) states the intended outcome of a step; the report flags
any step whose outcome differs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .. import analysis
from ..errors import AttackSpaceTooLarge, ConfigError, FieldError
from ..gfmatrix import FieldSpec, derive_seed, mat_random
from ..handshake import HandshakeParams, preprovision_key
from .costs import comparison_dict, comparison_table
from .energy import CYCLES_PER_BIT
from .network import BaseStation, Network, NodeIdentity, Role, SensorNode, perform_handshake

OPS = ("handshake", "preprovision", "send", "revoke")


@dataclass(frozen=True)
class NodeSpec:
    name: str
    id: int
    role: Role


@dataclass(frozen=True)
class Step:
    op: str
    node: str | None = None
    src: str | None = None
    dst: str | None = None
    message: bytes = b""
    expect: str = "ok"


@dataclass(frozen=True)
class ScenarioConfig:
    field_modulus: int
    m: int
    n: int
    k: int
    seed: int
    nodes: tuple[NodeSpec, ...]
    script: tuple[Step, ...]
    auth_tag: bool = True
    cache_kd: bool = False
    analysis: bool = False

    @property
    def params(self) -> HandshakeParams:
        return HandshakeParams(self.m, self.n, self.k, FieldSpec(self.field_modulus))


def _int(obj: dict, key: str, path: str, lo: int, hi: int | None = None) -> int:
    if key not in obj:
        raise ConfigError(path + key, "missing")
    v = obj[key]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(path + key, f"expected an integer, got {v!r}")
    if v < lo or (hi is not None and v > hi):
        raise ConfigError(path + key, f"{v} outside [{lo}, {hi if hi is not None else 'inf'}]")
    return v


def _bool(obj: dict, key: str, default: bool) -> bool:
    v = obj.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(key, f"expected true/false, got {v!r}")
    return v


def parse_config(obj: Any) -> ScenarioConfig:
    if not isinstance(obj, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    q = _int(obj, "field_modulus", "", 2)
    try:
        FieldSpec(q)
    except FieldError as exc:
        raise ConfigError("field_modulus", str(exc)) from None
    dims = obj.get("dims")
    if not isinstance(dims, dict):
        raise ConfigError("dims", "expected an object with m, n, k")
    m, n, k = (_int(dims, d, "dims.", 1, 255) for d in "mnk")
    seed = _int(obj, "seed", "", 0, 2**64 - 1)

    raw_nodes = obj.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise ConfigError("nodes", "expected a non-empty list")
    nodes, names, ids = [], set(), set()
    for i, nd in enumerate(raw_nodes):
        path = f"nodes[{i}]."
        if not isinstance(nd, dict):
            raise ConfigError(f"nodes[{i}]", "expected an object")
        name = nd.get("name")
        if not isinstance(name, str) or not name:
            raise ConfigError(path + "name", "expected a non-empty string")
        if name in names:
            raise ConfigError(path + "name", f"duplicate name {name!r}")
        nid = _int(nd, "id", path, 0, 2**16 - 1)
        if nid in ids:
            raise ConfigError(path + "id", f"duplicate id {nid}")
        try:
            role = Role(nd.get("role"))
        except ValueError:
            raise ConfigError(path + "role", f"expected one of PT, HSS, SBS, got {nd.get('role')!r}") from None
        names.add(name)
        ids.add(nid)
        nodes.append(NodeSpec(name, nid, role))
    sbs = [nd for nd in nodes if nd.role is Role.SBS]
    if len(sbs) != 1:
        raise ConfigError("nodes", f"exactly one SBS required, found {len(sbs)}")
    sensors = {nd.name for nd in nodes if nd.role is not Role.SBS}

    raw_script = obj.get("script", [])
    if not isinstance(raw_script, list):
        raise ConfigError("script", "expected a list")
    steps = []
    for i, st in enumerate(raw_script):
        path = f"script[{i}]."
        if not isinstance(st, dict):
            raise ConfigError(f"script[{i}]", "expected an object")
        op = st.get("op")
        if op not in OPS:
            raise ConfigError(path + "op", f"expected one of {', '.join(OPS)}, got {op!r}")
        expect = st.get("expect", "ok")
        if expect not in ("ok", "fail"):
            raise ConfigError(path + "expect", f"expected 'ok' or 'fail', got {expect!r}")

        def ref(key: str) -> str:
            v = st.get(key)
            if v not in sensors:
                raise ConfigError(path + key, f"unknown sensor node {v!r}")
            return v

        if op == "send":
            if "message_hex" in st:
                try:
                    msg = bytes.fromhex(st["message_hex"])
                except (TypeError, ValueError):
                    raise ConfigError(path + "message_hex", "not valid hex") from None
            else:
                text = st.get("message", "")
                if not isinstance(text, str):
                    raise ConfigError(path + "message", "expected a string")
                msg = text.encode()
            steps.append(Step(op, src=ref("from"), dst=ref("to"), message=msg, expect=expect))
        else:
            steps.append(Step(op, node=ref("node"), expect=expect))

    return ScenarioConfig(
        q, m, n, k, seed, tuple(nodes), tuple(steps),
        auth_tag=_bool(obj, "auth_tag", True),
        cache_kd=_bool(obj, "cache_kd", False),
        analysis=_bool(obj, "analysis", False),
    )


def load_config(source: str | Path) -> ScenarioConfig:
    """Parse a config from a file path or from JSON text."""
    text = str(source)
    if not text.lstrip().startswith("{"):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError("scenario_path", str(exc)) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}", exc.msg) from None
    return parse_config(obj)


@dataclass
class SimulationReport:
    data: dict = field(default_factory=dict)

    @property
    def steps(self) -> list[dict]:
        return self.data["steps"]

    def flows(self) -> list[dict]:
        return [s for s in self.steps if s["op"] == "send"]

    @property
    def all_as_expected(self) -> bool:
        return all(s["as_expected"] for s in self.steps)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"


def build_network(cfg: ScenarioConfig) -> tuple[Network, dict[str, int]]:
    params = cfg.params
    net = Network(params, auth=cfg.auth_tag)
    for nd in cfg.nodes:
        ident = NodeIdentity(nd.id, nd.role, nd.name)
        if nd.role is Role.SBS:
            net.add(BaseStation(ident, params, cfg.seed, auth=cfg.auth_tag))
        else:
            net.add(SensorNode(ident, params, cfg.seed, auth=cfg.auth_tag, cache_kd=cfg.cache_kd))
    return net, {nd.name: nd.id for nd in cfg.nodes}


def _handshake_step(net: Network, cfg: ScenarioConfig, nid: int) -> dict:
    outcome = perform_handshake(net, nid)
    out = {
        "epoch": outcome.epoch,
        "attempts": outcome.attempts,
        "agreed": outcome.agreed,
        "weak": outcome.weak,
        "ok": outcome.agreed and not outcome.weak,
    }
    if outcome.key is not None:
        t = analysis.capture(net.wire, cfg.params, node_id=nid)
        out["key_leak"] = analysis.key_leak_scan(t, outcome.key.matrix)
        out["product_attack_recovers"] = analysis.product_attack(t) == outcome.key.matrix
        if cfg.analysis:
            try:
                out["analysis"] = analysis.count_consistent_keys(t, outcome.key.matrix).to_dict()
            except AttackSpaceTooLarge as exc:
                out["analysis"] = {"skipped": str(exc)}
    return out


def _send_step(net: Network, src: int, dst: int, message: bytes) -> dict:
    sender, receiver = net.node(src), net.node(dst)
    out: dict[str, Any] = {"plaintext_hex": message.hex()}
    if sender.key is None:
        return {**out, "ok": False, "reason": "sender_has_no_key"}
    if receiver.key is None:
        return {**out, "ok": False, "reason": "receiver_has_no_key"}
    seen = len(receiver.inbox)
    sender.send_data(net, dst, message)
    net.run()
    new = receiver.inbox[seen:]
    if len(new) != 1:
        return {**out, "ok": False, "reason": f"expected one delivery, got {len(new)}"}
    entry = new[0]
    if not entry.ok:
        return {**out, "ok": False, "reason": entry.reason}
    if entry.plaintext != message:
        return {**out, "ok": False, "reason": "plaintext_mismatch", "received_hex": entry.plaintext.hex()}
    return {**out, "ok": True, "reason": "", "received_hex": entry.plaintext.hex()}


def run_scenario(cfg: ScenarioConfig) -> SimulationReport:
    net, ids = build_network(cfg)
    names = {v: k for k, v in ids.items()}
    steps = []
    for i, st in enumerate(cfg.script):
        rec: dict[str, Any] = {"index": i, "op": st.op}
        if st.op == "handshake":
            rec.update(node=st.node, **_handshake_step(net, cfg, ids[st.node]))
        elif st.op == "preprovision":
            nid = ids[st.node]
            seed = derive_seed(cfg.seed, "preprovision", nid)
            key = preprovision_key(cfg.params, mat_random(seed, cfg.m, cfg.k, cfg.params.field))
            net.node(nid).install_key(key)
            net.sbs.preprovision(nid, key)
            rec.update(node=st.node, epoch=key.epoch, ok=not key.weak)
        elif st.op == "send":
            rec.update({"from": st.src, "to": st.dst}, **_send_step(net, ids[st.src], ids[st.dst], st.message))
        elif st.op == "revoke":
            nid = ids[st.node]
            rec.update(node=st.node)
            if nid in net.sbs.ckg.records:
                rec.update(ok=True, next_epoch=net.sbs.ckg.revoke_and_rekey(nid))
            else:
                rec.update(ok=False, reason="unknown_node")
        rec["expect"] = st.expect
        rec["as_expected"] = rec["ok"] == (st.expect == "ok")
        steps.append(rec)

    flows = [s for s in steps if s["op"] == "send"]
    data = {
        "config": {
            "field_modulus": cfg.field_modulus,
            "dims": {"m": cfg.m, "n": cfg.n, "k": cfg.k},
            "seed": cfg.seed,
            "auth_tag": cfg.auth_tag,
            "cache_kd": cfg.cache_kd,
        },
        "steps": steps,
        "ledgers": {names[nid]: e.to_dict() for nid, e in sorted(net.ledger.nodes.items())},
        "totals": {
            "frames": len(net.wire),
            "wire_bytes": sum(len(r) for r in net.wire),
            "energy_units_0p1uj": sum(e.total_units for e in net.ledger.nodes.values()),
        },
        "summary": {
            "flows_ok": sum(s["ok"] for s in flows),
            "flows_failed": sum(not s["ok"] for s in flows),
            "unexpected_steps": [s["index"] for s in steps if not s["as_expected"]],
        },
        "comparison": {
            "scheme_total": comparison_dict(comparison_table("scheme_total")),
            "per_message": comparison_dict(comparison_table("per_message")),
            "cycles_per_bit": CYCLES_PER_BIT,
        },
        "rejections": net.rejections,
    }
    return SimulationReport(data)
