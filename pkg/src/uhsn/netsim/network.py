"""Discrete-event network of sensor nodes and one logical Secure Base Station.

The channel is a reliable FIFO queue: no loss, no reordering, no MAC
contention. Every message is fragmented into 49-byte frames, charged to the
sender on transmission and to the receiver on delivery, and appended to the
eavesdropper's wire log.
"""

from __future__ import annotations

import enum
import logging
import struct
from collections import deque
from dataclasses import dataclass, field

from ..crypto import (
    Ciphertext,
    CentralKeyGenerator,
    DecryptionKeyResponse,
    NonceRegistry,
    SymmetricKey,
    decrypt,
    encrypt,
    unwrap_kd,
)
from ..errors import AuthenticationError, CkgError, ConfigError, UhsnError, UnknownNodeError
from ..gfmatrix import derive_seed
from ..handshake import (
    HandshakeParams,
    Msg1,
    Msg2,
    Msg3,
    NodeSession,
    SbsSession,
    SharedKey,
    node_finalize,
    node_init,
    sbs_finalize,
    sbs_respond,
)
from .energy import EnergyLedger
from .frames import Frame, MsgType, decode, fragment, reassemble

log = logging.getLogger(__name__)

CKG_STATUS = {
    "ok": 0,
    "unknown_sender": 1,
    "unknown_receiver": 2,
    "revoked_sender": 3,
    "revoked_receiver": 4,
}
CKG_STATUS_NAME = {v: k for k, v in CKG_STATUS.items()}

_KD_REQ = struct.Struct(">HH")  # receiver id, sender id
_KD_RESP = struct.Struct(">BHHI")  # status, sender id, receiver id, sender epoch
_EPOCH = struct.Struct(">I")


class Role(enum.Enum):
    PT = "PT"
    HSS = "HSS"
    SBS = "SBS"


@dataclass(frozen=True)
class NodeIdentity:
    id: int
    role: Role
    name: str = ""
    station_id: int = 0

    def __post_init__(self):
        if not 0 <= self.id < 2**16:
            raise ConfigError("id", f"node id {self.id} does not fit in 16 bits")


@dataclass(frozen=True)
class Delivery:
    src: int
    dst: int
    msg_type: int
    session_id: int
    seq: int
    dims_hint: tuple[int, int]
    body: bytes


@dataclass(frozen=True)
class InboxEntry:
    sender: int
    ok: bool
    plaintext: bytes | None = None
    reason: str = ""


class Network:
    def __init__(self, params: HandshakeParams, *, auth: bool = True):
        self.params = params
        self.auth = auth
        self.ledger = EnergyLedger()
        self.wire: list[bytes] = []
        self.rejections: list[str] = []
        self.clock = 0
        self.agents: dict[int, SensorNode | BaseStation] = {}
        self.sbs_id: int | None = None
        self._queue: deque[tuple[int, list[bytes]]] = deque()
        self._packet_ids: dict[int, int] = {}
        self._seqs: dict[int, int] = {}

    def add(self, agent: SensorNode | BaseStation) -> None:
        nid = agent.identity.id
        if nid in self.agents:
            raise ConfigError("nodes", f"duplicate node id {nid}")
        if agent.identity.role is Role.SBS:
            if self.sbs_id is not None:
                raise ConfigError("nodes", "only one logical SBS is supported")
            self.sbs_id = nid
        self.agents[nid] = agent
        self.ledger.add_node(nid)

    @property
    def sbs(self) -> BaseStation:
        if self.sbs_id is None:
            raise UnknownNodeError("no SBS in network")
        return self.agents[self.sbs_id]

    def node(self, node_id: int) -> SensorNode:
        try:
            return self.agents[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def send(self, src: int, dst: int, msg_type: MsgType, body: bytes, *,
             session_id: int = 0, dims_hint: tuple[int, int] = (0, 0)) -> list[Frame]:
        if dst not in self.agents:
            raise UnknownNodeError(dst)
        seq = self._seqs.get(src, 0)
        frames = fragment(body, src=src, dst=dst, msg_type=msg_type, session_id=session_id,
                          seq=seq, dims_hint=dims_hint, packet_id=self._packet_ids.get(src, 0))
        self._seqs[src] = (seq + 1) % 2**16
        self._packet_ids[src] = (self._packet_ids.get(src, 0) + len(frames)) % 256
        raw = [f.encode() for f in frames]
        self.wire.extend(raw)
        self.ledger.charge_tx(src, frames)
        self._queue.append((dst, raw))
        return frames

    def run(self, max_messages: int = 1_000_000) -> int:
        """Deliver queued messages until the channel is idle; returns the count."""
        delivered = 0
        while self._queue:
            if delivered >= max_messages:
                raise RuntimeError("message budget exhausted; protocol loop?")
            dst, raw = self._queue.popleft()
            frames = [decode(r) for r in raw]
            self.ledger.charge_rx(dst, frames)
            self.clock += len(frames)
            head = frames[0]
            msg = Delivery(head.src, dst, head.msg_type, head.session_id, head.seq,
                           head.dims_hint, reassemble(frames))
            try:
                self.agents[dst].receive(self, msg)
            except UhsnError as exc:
                self.rejections.append(f"node {dst} rejected {MsgType(msg.msg_type).name} "
                                       f"from {msg.src}: {exc}")
                log.debug(self.rejections[-1])
            delivered += 1
        return delivered


def wire_messages(wire: list[bytes]) -> list[Delivery]:
    """Regroup a raw frame log into messages, as a passive eavesdropper would."""
    out, group = [], []
    for raw in wire:
        f = decode(raw)
        group.append(f)
        if f.frag_index == f.frag_total - 1:
            out.append(Delivery(f.src, f.dst, f.msg_type, f.session_id, f.seq, f.dims_hint,
                                reassemble(group)))
            group = []
    return out


class SensorNode:
    """A PT or HSS sensor: runs its side of the handshake and the CKG flow.

    With ``cache_kd`` the receiver keeps one decryption key per sender and
    epoch; otherwise every incoming message costs a CKG round trip, and a
    revocation takes effect on the very next message.
    """

    def __init__(self, identity: NodeIdentity, params: HandshakeParams, seed: int, *,
                 auth: bool = True, cache_kd: bool = False):
        self.identity = identity
        self.params = params
        self.seed = seed
        self.auth = auth
        self.cache_kd = cache_kd
        self.key: SharedKey | None = None
        self.last_weak: SharedKey | None = None
        self.session: NodeSession | None = None
        self.kd_cache: dict[tuple[int, int], SymmetricKey] = {}
        self.pending: dict[int, list[tuple[int, Ciphertext]]] = {}
        self.inbox: list[InboxEntry] = []
        self.nonces = NonceRegistry()
        self._handshakes = 0

    @property
    def id(self) -> int:
        return self.identity.id

    def install_key(self, key: SharedKey) -> None:
        self.key = key

    def start_handshake(self, net: Network) -> NodeSession:
        epoch = (self.key.epoch if self.key else 0) + 1
        session_id = self._handshakes % 2**16
        self._handshakes += 1
        seed = derive_seed(self.seed, "node", self.id, epoch, session_id)
        self.session, msg1 = node_init(self.params, seed, epoch=epoch)
        net.send(self.id, net.sbs_id, MsgType.HS_MSG1, msg1.to_bytes(),
                 session_id=session_id, dims_hint=(self.params.n, self.params.n))
        return self.session

    def send_data(self, net: Network, dst: int, plaintext: bytes) -> Ciphertext:
        if self.key is None:
            raise UhsnError(f"node {self.id} has no shared key")
        sym = self.key.sym_key
        ct = encrypt(sym, self.nonces.next_nonce(sym), plaintext, auth=self.auth, nonces=self.nonces)
        net.send(self.id, dst, MsgType.DATA, _EPOCH.pack(sym.source_epoch) + ct.to_bytes())
        return ct

    def receive(self, net: Network, msg: Delivery) -> None:
        if msg.msg_type == MsgType.HS_MSG2:
            self._on_msg2(net, msg)
        elif msg.msg_type == MsgType.DATA:
            self._on_data(net, msg)
        elif msg.msg_type == MsgType.KD_RESPONSE:
            self._on_kd_response(msg)
        else:
            raise UhsnError(f"unexpected message type {msg.msg_type}")

    def _on_msg2(self, net: Network, msg: Delivery) -> None:
        if self.session is None:
            raise UhsnError("Msg2 without an open handshake")
        key, msg3 = node_finalize(self.session, Msg2.from_bytes(msg.body, self.params))
        net.send(self.id, msg.src, MsgType.HS_MSG3, msg3.to_bytes(),
                 session_id=msg.session_id, dims_hint=(self.params.m, self.params.n))
        if key.weak:
            self.last_weak = key
        else:
            self.key = key

    def _on_data(self, net: Network, msg: Delivery) -> None:
        epoch = _EPOCH.unpack_from(msg.body)[0]
        ct = Ciphertext.from_bytes(msg.body[_EPOCH.size:], auth=self.auth)
        kd = self.kd_cache.get((msg.src, epoch)) if self.cache_kd else None
        if kd is not None:
            self._open(msg.src, kd, ct)
            return
        queue = self.pending.setdefault(msg.src, [])
        queue.append((epoch, ct))
        if len(queue) == 1:
            net.send(self.id, net.sbs_id, MsgType.KD_REQUEST, _KD_REQ.pack(self.id, msg.src))

    def _open(self, sender: int, kd: SymmetricKey, ct: Ciphertext) -> None:
        try:
            self.inbox.append(InboxEntry(sender, True, decrypt(kd, ct, auth=self.auth)))
        except AuthenticationError:
            self.inbox.append(InboxEntry(sender, False, reason="authentication_failure"))

    def _on_kd_response(self, msg: Delivery) -> None:
        status, sender, receiver, sender_epoch = _KD_RESP.unpack_from(msg.body)
        waiting = self.pending.pop(sender, [])
        if status != CKG_STATUS["ok"]:
            reason = "ckg_refused:" + CKG_STATUS_NAME.get(status, str(status))
            self.inbox.extend(InboxEntry(sender, False, reason=reason) for _ in waiting)
            return
        resp = DecryptionKeyResponse(
            Ciphertext.from_bytes(msg.body[_KD_RESP.size:], auth=self.auth),
            sender, receiver, sender_epoch,
        )
        try:
            kd = unwrap_kd(self.key.sym_key, resp, auth=self.auth)
        except AuthenticationError:
            self.inbox.extend(InboxEntry(sender, False, reason="kd_unwrap_failure") for _ in waiting)
            return
        if self.cache_kd:
            for cached in [c for c in self.kd_cache if c[0] == sender]:
                del self.kd_cache[cached]
            self.kd_cache[(sender, sender_epoch)] = kd
        for _, ct in waiting:
            self._open(sender, kd, ct)


@dataclass
class _SbsPeer:
    session: SbsSession
    session_id: int


class BaseStation:
    """The SBS: answers handshakes and hosts the central key generator."""

    def __init__(self, identity: NodeIdentity, params: HandshakeParams, seed: int, *, auth: bool = True):
        self.identity = identity
        self.params = params
        self.seed = seed
        self.ckg = CentralKeyGenerator(auth=auth)
        self.peers: dict[int, _SbsPeer] = {}
        self.weak_keys: list[tuple[int, int]] = []

    @property
    def id(self) -> int:
        return self.identity.id

    def receive(self, net: Network, msg: Delivery) -> None:
        if msg.msg_type == MsgType.HS_MSG1:
            epoch = self.ckg.next_epoch(msg.src)
            seed = derive_seed(self.seed, "sbs", msg.src, epoch, msg.session_id)
            session, msg2 = sbs_respond(seed, self.params, Msg1.from_bytes(msg.body, self.params), epoch=epoch)
            self.peers[msg.src] = _SbsPeer(session, msg.session_id)
            net.send(self.id, msg.src, MsgType.HS_MSG2, msg2.to_bytes(),
                     session_id=msg.session_id, dims_hint=(self.params.n, self.params.k))
        elif msg.msg_type == MsgType.HS_MSG3:
            peer = self.peers.get(msg.src)
            if peer is None or peer.session_id != msg.session_id:
                raise UhsnError(f"Msg3 for unknown session {msg.session_id}")
            key = sbs_finalize(peer.session, Msg3.from_bytes(msg.body, self.params))
            if key.weak:
                self.weak_keys.append((msg.src, msg.session_id))
            else:
                self.ckg.register(msg.src, key)
        elif msg.msg_type == MsgType.KD_REQUEST:
            receiver, sender = _KD_REQ.unpack(msg.body)
            if receiver != msg.src:
                raise UhsnError(f"node {msg.src} asked for a key addressed to {receiver}")
            try:
                resp = self.ckg.issue(sender, receiver)
            except CkgError as exc:
                body = _KD_RESP.pack(CKG_STATUS[exc.code], sender, receiver, 0)
            else:
                body = _KD_RESP.pack(0, sender, receiver, resp.sender_epoch) + resp.wrapped.to_bytes()
            net.send(self.id, msg.src, MsgType.KD_RESPONSE, body)
        else:
            raise UhsnError(f"unexpected message type {msg.msg_type}")

    def preprovision(self, node_id: int, key: SharedKey) -> None:
        self.ckg.register(node_id, key)


@dataclass
class HandshakeOutcome:
    node_id: int
    epoch: int
    attempts: int
    agreed: bool
    weak: bool
    key: SharedKey | None = field(default=None, repr=False)


def perform_handshake(net: Network, node_id: int, max_attempts: int = 32) -> HandshakeOutcome:
    """Run the exchange to completion, retrying with fresh seeds on a zero key."""
    node = net.node(node_id)
    for attempt in range(1, max_attempts + 1):
        node.last_weak = None
        session = node.start_handshake(net)
        net.run()
        sbs_session = net.sbs.peers[node_id].session
        agreed = (session.key is not None and sbs_session.key is not None
                  and session.key.matrix == sbs_session.key.matrix)
        if session.key is not None and not session.key.weak:
            return HandshakeOutcome(node_id, session.epoch, attempt, agreed, False, session.key)
    return HandshakeOutcome(node_id, session.epoch, max_attempts, agreed, True, session.key)
