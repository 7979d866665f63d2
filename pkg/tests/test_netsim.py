import copy
import itertools
import json
from decimal import Decimal
from importlib import resources

import pytest

from uhsn.errors import ConfigError, UnknownNodeError
from uhsn.gfmatrix import FieldSpec
from uhsn.handshake import HandshakeParams
from uhsn.netsim.costs import (
    comparison_csv,
    comparison_table,
    handshake_cost_report,
    node_to_node_cost_report,
)
from uhsn.netsim.energy import (
    CYCLES_PER_BIT,
    RX_UNITS_PER_FRAME,
    TX_UNITS_PER_FRAME,
    EnergyLedger,
    units_to_uj,
)
from uhsn.netsim.frames import FRAME_BYTES, MsgType
from uhsn.netsim.network import (
    BaseStation,
    Network,
    NodeIdentity,
    Role,
    SensorNode,
    perform_handshake,
    wire_messages,
)
from uhsn.netsim.scenario import load_config, parse_config, run_scenario

GF251 = FieldSpec(251)


def bundled(name):
    return json.loads(resources.files("uhsn.data").joinpath(name).read_text())


def small_net(params=HandshakeParams(2, 3, 2, GF251), seed=1, n=2, **kw):
    net = Network(params)
    net.add(BaseStation(NodeIdentity(0, Role.SBS, "SBS"), params, seed))
    for i in range(1, n + 1):
        net.add(SensorNode(NodeIdentity(i, Role.PT, f"N{i}"), params, seed, **kw))
    return net


class TestEnergyConstants:
    def test_per_frame(self):
        assert units_to_uj(TX_UNITS_PER_FRAME) == Decimal("2900.8")
        assert units_to_uj(RX_UNITS_PER_FRAME) == Decimal("1401.4")

    def test_per_byte(self):
        assert TX_UNITS_PER_FRAME == 592 * FRAME_BYTES
        assert RX_UNITS_PER_FRAME == 286 * FRAME_BYTES

    def test_cycles_constant(self):
        assert CYCLES_PER_BIT == 2090

    def test_unknown_node(self):
        with pytest.raises(UnknownNodeError):
            EnergyLedger()[5]


class TestHandshakeCost:
    def test_node_cost(self):
        r = handshake_cost_report(2, 3, 2, 251)
        assert (r.node_tx_messages, r.node_rx_messages) == (2, 1)
        assert (r.node_tx_frames, r.node_rx_frames) == (2, 1)
        assert r.rounded_mj == Decimal("7.2")
        assert r.exact_mj == Decimal("7.2030")
        assert r.agreed

    def test_bit_formula_gf2(self):
        for m, n, k in itertools.product(range(1, 9), repeat=3):
            r = handshake_cost_report(m, n, k, 2)
            assert r.transmitted_bits == r.transmitted_entries == n * (2 * n + k + m)

    def test_entries_vs_bits_gf5(self):
        r = handshake_cost_report(1, 1, 1, 5)
        assert r.transmitted_entries == 4
        assert r.transmitted_bits == 12  # 3 bits per element

    def test_fragmented_handshake_frames(self):
        # Msg2 at n=k=8 over GF(251) is 128 bytes, four frames
        r = handshake_cost_report(8, 8, 8, 251)
        assert (r.node_tx_messages, r.node_rx_messages) == (2, 1)
        assert r.node_rx_frames == 4 and r.node_tx_frames == 2 + 2


class TestNodeToNode:
    @pytest.mark.parametrize("mode,sender,receiver", [
        ("per_message", "2.9", "5.7"),
        ("scheme_total", "10.1", "5.7"),
    ])
    def test_rounded(self, mode, sender, receiver):
        r = node_to_node_cost_report(mode)
        assert r.delivered
        assert (r.sender_mj, r.receiver_mj) == (Decimal(sender), Decimal(receiver))

    def test_exact(self):
        pm = node_to_node_cost_report("per_message", exact=True)
        st = node_to_node_cost_report("scheme_total", exact=True)
        assert (pm.sender_mj, pm.receiver_mj) == (Decimal("2.9008"), Decimal("5.7036"))
        assert st.sender_mj == Decimal("10.1038")

    def test_message_counts(self):
        r = node_to_node_cost_report("per_message")
        assert (r.sender_tx, r.sender_rx, r.receiver_tx, r.receiver_rx) == (1, 0, 1, 2)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            node_to_node_cost_report("amortized")

    def test_table(self):
        rows = {r.scheme: (r.sender_mj, r.receiver_mj) for r in comparison_table()}
        assert rows == {
            "C4W": (Decimal("6.3"), Decimal("4.8")),
            "Our Scheme": (Decimal("10.1"), Decimal("5.7")),
            "SSSL": (Decimal("19.4"), Decimal("19.6")),
        }

    def test_csv(self):
        assert comparison_csv(comparison_table()) == (
            "scheme,sender_mj,receiver_mj\nC4W,6.3,4.8\nOur Scheme,10.1,5.7\nSSSL,19.4,19.6\n"
        )


class TestNetwork:
    def test_end_to_end(self):
        net = small_net()
        perform_handshake(net, 1)
        perform_handshake(net, 2)
        net.node(1).send_data(net, 2, b"ECG lead II")
        net.run()
        entry = net.node(2).inbox[-1]
        assert entry.ok and entry.plaintext == b"ECG lead II" and entry.sender == 1

    def test_long_message(self):
        net = small_net()
        perform_handshake(net, 1)
        perform_handshake(net, 2)
        msg = bytes(range(256)) * 10
        before = net.ledger.snapshot()
        net.node(1).send_data(net, 2, msg)
        net.run()
        assert net.node(2).inbox[-1].plaintext == msg
        sent = net.ledger.since(before)[1]
        # epoch(4) + nonce(12) + tag(16) + body
        assert sent.frames_sent == -(-(4 + 12 + 16 + len(msg)) // 32)

    def test_energy_conservation(self):
        net = small_net(n=3)
        for i in (1, 2, 3):
            perform_handshake(net, i)
        net.node(1).send_data(net, 3, b"temp 36.9")
        net.run()
        frames_sent = sum(e.frames_sent for e in net.ledger.nodes.values())
        frames_recv = sum(e.frames_received for e in net.ledger.nodes.values())
        assert frames_sent == frames_recv == len(net.wire)
        total = sum(e.total_units for e in net.ledger.nodes.values())
        assert total == frames_sent * TX_UNITS_PER_FRAME + frames_recv * RX_UNITS_PER_FRAME

    def test_eavesdropper_never_sees_raw_keys(self):
        net = small_net(n=3)
        for i in (1, 2, 3):
            perform_handshake(net, i)
        for a, b in itertools.permutations((1, 2, 3), 2):
            net.node(a).send_data(net, b, f"{a}->{b}".encode())
            net.run()
        assert all(e.ok for i in (1, 2, 3) for e in net.node(i).inbox)
        bodies = b"".join(m.body for m in wire_messages(net.wire))
        raw = b"".join(net.wire)
        for i in (1, 2, 3):
            key = net.node(i).key.sym_key.bytes
            assert key not in bodies and key not in raw

    def test_kd_cache(self):
        def kd_requests(net):
            return sum(m.msg_type == MsgType.KD_REQUEST for m in wire_messages(net.wire))

        for cache, expected in ((False, 3), (True, 1)):
            net = small_net(cache_kd=cache)
            perform_handshake(net, 1)
            perform_handshake(net, 2)
            for i in range(3):
                net.node(1).send_data(net, 2, bytes([i]))
                net.run()
            assert [e.plaintext for e in net.node(2).inbox] == [b"\x00", b"\x01", b"\x02"]
            assert kd_requests(net) == expected

    def test_cache_invalidated_by_new_epoch(self):
        net = small_net(cache_kd=True)
        perform_handshake(net, 1)
        perform_handshake(net, 2)
        net.node(1).send_data(net, 2, b"a")
        net.run()
        net.sbs.ckg.revoke_and_rekey(1)
        perform_handshake(net, 1)
        net.node(1).send_data(net, 2, b"b")
        net.run()
        assert [e.ok for e in net.node(2).inbox] == [True, True]
        assert len(net.node(2).kd_cache) == 1

    def test_revoked_sender_refused(self):
        net = small_net(n=3)
        for i in (1, 2, 3):
            perform_handshake(net, i)
        net.sbs.ckg.revoke_and_rekey(1)
        net.node(1).send_data(net, 2, b"x")
        net.node(3).send_data(net, 2, b"y")
        net.run()
        by_sender = {e.sender: e for e in net.node(2).inbox}
        assert not by_sender[1].ok and by_sender[1].reason == "ckg_refused:revoked_sender"
        assert by_sender[3].ok and by_sender[3].plaintext == b"y"

    def test_weak_key_retry(self):
        p = HandshakeParams(1, 1, 1, FieldSpec(2))
        retried = 0
        for seed in range(40):
            net = small_net(p, seed=seed, n=1)
            out = perform_handshake(net, 1)
            assert not out.weak and out.agreed
            assert out.key.matrix.entries == (1,)
            retried += out.attempts > 1
        assert retried > 0

    def test_one_sbs_only(self):
        net = small_net()
        with pytest.raises(ConfigError):
            net.add(BaseStation(NodeIdentity(9, Role.SBS, "S2"), net.params, 0))
        with pytest.raises(ConfigError):
            net.add(SensorNode(NodeIdentity(1, Role.PT, "dup"), net.params, 0))

    def test_identity_range(self):
        with pytest.raises(ValueError):
            NodeIdentity(70000, Role.PT, "big")


class TestScenario:
    def test_two_node(self):
        report = run_scenario(parse_config(bundled("two_node.json")))
        assert report.all_as_expected
        flow = report.flows()[0]
        assert flow["ok"] and bytes.fromhex(flow["received_hex"]) == b"SpO2 97%"

    def test_two_node_ledger(self):
        cfg = bundled("two_node.json")
        cfg["script"] = cfg["script"][:2]
        hs_only = run_scenario(parse_config(cfg)).data["ledgers"]
        full = run_scenario(parse_config(bundled("two_node.json"))).data["ledgers"]
        sender = {k: full["A"][k] - hs_only["A"][k] for k in ("messages_sent", "messages_received")}
        receiver = {k: full["B"][k] - hs_only["B"][k] for k in ("messages_sent", "messages_received")}
        cost = node_to_node_cost_report("per_message")
        assert (sender["messages_sent"], sender["messages_received"]) == (cost.sender_tx, cost.sender_rx)
        assert (receiver["messages_sent"], receiver["messages_received"]) == (cost.receiver_tx, cost.receiver_rx)
        # CKG side: one request in, one response out
        assert full["SBS"]["messages_received"] - hs_only["SBS"]["messages_received"] == 1
        assert full["SBS"]["messages_sent"] - hs_only["SBS"]["messages_sent"] == 1

    def test_revocation_script(self):
        report = run_scenario(parse_config(bundled("revocation.json")))
        assert report.all_as_expected, report.data["summary"]
        failed = [s for s in report.flows() if not s["ok"]]
        assert [(s["from"], s["to"]) for s in failed] == [("A", "B"), ("B", "A")]
        assert [s["reason"] for s in failed] == ["ckg_refused:revoked_sender", "ckg_refused:revoked_receiver"]
        others = [s for s in report.flows() if "A" not in (s["from"], s["to"])]
        assert len(others) >= 10 and all(s["ok"] for s in others)

    def test_deterministic(self):
        cfg = parse_config(bundled("revocation.json"))
        assert run_scenario(cfg).to_json() == run_scenario(cfg).to_json()

    def test_seed_changes_report(self):
        a = bundled("two_node.json")
        b = copy.deepcopy(a)
        b["seed"] = 8
        assert run_scenario(parse_config(a)).to_json() != run_scenario(parse_config(b)).to_json()

    def test_no_auth(self):
        cfg = bundled("two_node.json")
        cfg["auth_tag"] = False
        report = run_scenario(parse_config(cfg))
        assert report.all_as_expected

    def test_preprovision_and_analysis(self):
        cfg = {
            "field_modulus": 2, "dims": {"m": 1, "n": 2, "k": 1}, "seed": 3, "analysis": True,
            "nodes": [{"name": "S", "id": 0, "role": "SBS"}, {"name": "A", "id": 1, "role": "PT"},
                      {"name": "B", "id": 2, "role": "HSS"}],
            "script": [{"op": "handshake", "node": "A"}, {"op": "preprovision", "node": "B"},
                       {"op": "send", "from": "A", "to": "B", "message_hex": "00ff"}],
        }
        report = run_scenario(parse_config(cfg))
        hs = report.steps[0]
        assert hs["analysis"]["true_key_found"]
        assert report.steps[1]["epoch"] == 0
        # preprovisioned B may draw the zero key over GF(2); the step reports it
        assert report.steps[2]["ok"] == report.steps[1]["ok"]

    def test_send_without_key(self):
        cfg = bundled("two_node.json")
        cfg["script"] = [{"op": "send", "from": "A", "to": "B", "message": "x", "expect": "fail"}]
        report = run_scenario(parse_config(cfg))
        assert report.steps[0]["reason"] == "sender_has_no_key" and report.all_as_expected

    def test_unexpected_outcome_flagged(self):
        cfg = bundled("two_node.json")
        cfg["script"][-1]["expect"] = "fail"
        report = run_scenario(parse_config(cfg))
        assert not report.all_as_expected
        assert report.data["summary"]["unexpected_steps"] == [2]

    def test_report_sections(self):
        data = run_scenario(parse_config(bundled("two_node.json"))).data
        assert set(data) == {"config", "steps", "ledgers", "totals", "summary", "comparison", "rejections"}
        assert data["comparison"]["cycles_per_bit"] == 2090


@pytest.mark.parametrize("mutate,field", [
    (lambda c: c.update(field_modulus=4), "field_modulus"),
    (lambda c: c.pop("field_modulus"), "field_modulus"),
    (lambda c: c["dims"].update(m=0), "dims.m"),
    (lambda c: c["dims"].update(k="2"), "dims.k"),
    (lambda c: c.update(seed=-1), "seed"),
    (lambda c: c["nodes"][1].update(role="ROUTER"), "nodes[1].role"),
    (lambda c: c["nodes"][2].update(id=1), "nodes[2].id"),
    (lambda c: c["nodes"].pop(0), "nodes"),
    (lambda c: c["script"][2].update(to="Z"), "script[2].to"),
    (lambda c: c["script"][0].update(op="dance"), "script[0].op"),
    (lambda c: c["script"][0].update(expect="maybe"), "script[0].expect"),
    (lambda c: c["script"][2].update(message_hex="zz"), "script[2].message_hex"),
    (lambda c: c.update(auth_tag="yes"), "auth_tag"),
])
def test_config_errors_name_field(mutate, field):
    cfg = bundled("two_node.json")
    mutate(cfg)
    with pytest.raises(ConfigError) as exc:
        parse_config(cfg)
    assert exc.value.field == field
    assert str(exc.value).startswith(field)


def test_load_config_paths(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(bundled("two_node.json")))
    assert load_config(path) == load_config(path.read_text())
    with pytest.raises(ConfigError) as exc:
        load_config('{"field_modulus": 251,\n "dims": }')
    assert exc.value.field == "line 2"
    with pytest.raises(ConfigError) as exc:
        load_config(tmp_path / "missing.json")
    assert exc.value.field == "scenario_path"
