"""Panini sender and receiver state machines.

A run has three phases. Init: the sender broadcasts a key request carrying
fresh signature parameters; every candidate receiver generates a signing
keypair and returns its verification key, and once all keys are in the
sender announces the assembled ring. Key submit: each receiver whose key
is in the ring draws an ephemeral symmetric key, ring-signs it, and sends
it through the mix, so the sender ends up holding l keys it cannot
attribute. Distribution: after checking that every signature verifies, no
key repeats, and no two signatures link, the sender encrypts the message
under n keys drawn uniformly without replacement and multicasts each
ciphertext to all candidates. Receivers that can strip the plaintext tag
are the chosen ones; everyone else sees noise and stays silent.

Any check failure aborts the run before a single ciphertext leaves the
sender.
"""

import enum
from dataclasses import dataclass, field

from . import cipher, lrs
from .channels import ANON, AUTH, Network
from .util import ByteReader, WireError, new_rng, pack_chunk

MSG_KEY_REQUEST = 1
MSG_VK_SUBMIT = 2
MSG_RING_ANNOUNCE = 3
MSG_KEY_SUBMIT = 4
MSG_CIPHERTEXT = 5

RUN_ID_BYTES = 16

# The sender waits this many mix windows for the signed keys. One window is
# the mix's own batching delay; the second absorbs adversarial delays the
# mix still unlinks. Anything slower times the run out.
KEY_WAIT_WINDOWS = 2


class AbortReason(str, enum.Enum):
    INVALID_SIGNATURE = "invalid-signature"
    DUPLICATE_KEY = "duplicate-key"
    LINKED_KEYS = "linked-keys"
    TIMEOUT = "timeout"
    DUPLICATE_VK = "duplicate-vk"


class SenderPhase(str, enum.Enum):
    INIT = "init"
    COLLECT_VKS = "collect-vks"
    COLLECT_KEYS = "collect-keys"
    DONE = "done"
    ABORTED = "aborted"


@dataclass(frozen=True)
class AnycastRequest:
    sender: int
    message: bytes
    n: int
    possible: tuple

    def __post_init__(self):
        object.__setattr__(self, "possible", tuple(self.possible))
        if len(set(self.possible)) != len(self.possible):
            raise ValueError("possible receivers must be distinct")
        if not 1 <= self.n <= len(self.possible):
            raise ValueError("need 1 <= n <= number of possible receivers")
        if self.sender in self.possible:
            raise ValueError("sender cannot be a possible receiver")


# -- wire format: 1-byte kind tag, then length-prefixed fields ---------------

def pack_key_request(run_id: bytes, params: lrs.PublicParams) -> bytes:
    return bytes([MSG_KEY_REQUEST]) + run_id + pack_chunk(params.to_bytes())


def pack_vk_submit(run_id: bytes, vk: bytes) -> bytes:
    return bytes([MSG_VK_SUBMIT]) + run_id + pack_chunk(vk)


def pack_ring_announce(run_id: bytes, ring: lrs.Ring) -> bytes:
    return bytes([MSG_RING_ANNOUNCE]) + run_id + pack_chunk(ring.to_bytes())


def pack_key_submit(key: bytes, sig: lrs.RingSignature) -> bytes:
    return bytes([MSG_KEY_SUBMIT]) + pack_chunk(key) + pack_chunk(sig.to_bytes())


def pack_ciphertext(run_id: bytes, ct: cipher.Ciphertext) -> bytes:
    return bytes([MSG_CIPHERTEXT]) + run_id + pack_chunk(ct.to_bytes())


def parse_message(payload: bytes):
    """Parse a protocol message into (kind, fields). Raises WireError."""
    if not payload:
        raise WireError("empty message")
    kind = payload[0]
    reader = ByteReader(payload[1:])
    if kind == MSG_KEY_REQUEST:
        fields = {"run_id": reader.take(RUN_ID_BYTES), "params": reader.take_chunk()}
    elif kind == MSG_VK_SUBMIT:
        fields = {"run_id": reader.take(RUN_ID_BYTES), "vk": reader.take_chunk()}
    elif kind == MSG_RING_ANNOUNCE:
        fields = {"run_id": reader.take(RUN_ID_BYTES), "ring": reader.take_chunk()}
    elif kind == MSG_KEY_SUBMIT:
        fields = {"key": reader.take_chunk(), "sig": reader.take_chunk()}
    elif kind == MSG_CIPHERTEXT:
        fields = {"run_id": reader.take(RUN_ID_BYTES), "ciphertext": reader.take_chunk()}
    else:
        raise WireError(f"unknown message kind {kind}")
    reader.expect_done()
    return kind, fields


class Sender:
    """Event-driven sender side of one anycast run."""

    def __init__(self, uid: int, request: AnycastRequest, network: Network, rng,
                 key_picker=None):
        self.uid = uid
        self.request = request
        self.network = network
        self.rng = rng
        # key_picker(remaining_keys) -> index; None means uniform draw.
        # Used by leaky test fixtures that override the selection rule.
        self.key_picker = key_picker
        self.phase = SenderPhase.INIT
        self.params = None
        self.run_id = None
        self.ring = None
        self.abort_reason = None
        self.keys = []        # ephemeral keys, arrival order
        self.signatures = []  # matching ring signatures, same order
        self.timer_start = None
        self.finished_tick = None
        self.ciphertexts_sent = 0
        self._vks = {}
        self._ready = False
        network.on_tick_end(self._on_tick_end)

    @property
    def deadline_ticks(self) -> int:
        return KEY_WAIT_WINDOWS * self.network.mix_window

    def start(self) -> None:
        self.params = lrs.setup()
        self.run_id = self.rng.randbytes(RUN_ID_BYTES)
        payload = pack_key_request(self.run_id, self.params)
        for uid in self.request.possible:
            self.network.auth_send(self.uid, payload, uid)
        self.phase = SenderPhase.COLLECT_VKS

    def handle(self, origin, payload: bytes) -> None:
        try:
            kind, fields = parse_message(payload)
        except WireError:
            return
        if kind == MSG_VK_SUBMIT and origin is not None:
            self._on_vk(origin, fields["run_id"], fields["vk"])
        elif kind == MSG_KEY_SUBMIT:
            self._on_key(fields["key"], fields["sig"])

    def _on_vk(self, origin: int, run_id: bytes, vk: bytes) -> None:
        if self.phase is not SenderPhase.COLLECT_VKS or run_id != self.run_id:
            return
        if origin not in self.request.possible:
            return
        if origin in self._vks:
            # A second key from the same peer means a fault or an attack;
            # repairing silently would blunt the later link check.
            self._abort(AbortReason.DUPLICATE_VK)
            return
        self._vks[origin] = vk
        if len(self._vks) == len(self.request.possible):
            try:
                self.ring = lrs.Ring(self._vks.values())
            except ValueError:
                self._abort(AbortReason.DUPLICATE_VK)
                return
            payload = pack_ring_announce(self.run_id, self.ring)
            for uid in self.request.possible:
                self.network.auth_send(self.uid, payload, uid)
            self.phase = SenderPhase.COLLECT_KEYS
            self.timer_start = self.network.now
            self.network.call_at(self.timer_start + self.deadline_ticks, self._on_deadline)

    def _on_key(self, key: bytes, sig_bytes: bytes) -> None:
        if self.phase is not SenderPhase.COLLECT_KEYS:
            return
        if self.network.now - self.timer_start >= self.deadline_ticks:
            self._abort(AbortReason.TIMEOUT)
            return
        if lrs.verify(sig_bytes, key, self.ring) != 1:
            self._abort(AbortReason.INVALID_SIGNATURE)
            return
        if key in self.keys:
            self._abort(AbortReason.DUPLICATE_KEY)
            return
        self.keys.append(key)
        self.signatures.append(lrs.RingSignature.from_bytes(sig_bytes))
        if len(self.keys) == len(self.request.possible):
            # Distribute only after the whole batch has drained, so that a
            # same-batch duplicate or forgery still aborts the run.
            self._ready = True

    def _on_deadline(self) -> None:
        if self.phase is SenderPhase.COLLECT_KEYS:
            self._abort(AbortReason.TIMEOUT)

    def _on_tick_end(self, tick: int) -> None:
        if self.phase is SenderPhase.COLLECT_KEYS and self._ready:
            self._distribute()

    def _distribute(self) -> None:
        sigs = self.signatures
        for i in range(len(sigs)):
            for j in range(i + 1, len(sigs)):
                if lrs.link(sigs[i], sigs[j]) != 0:
                    self._abort(AbortReason.LINKED_KEYS)
                    return
        for _ in range(self.request.n):
            if self.key_picker is not None:
                index = self.key_picker(self.keys)
            else:
                index = self.rng.randrange(len(self.keys))
            chosen_key = self.keys.pop(index)
            ct = cipher.encrypt(cipher.TaggedPlaintext.tagged(self.request.message),
                                chosen_key, self.rng)
            payload = pack_ciphertext(self.run_id, ct)
            for uid in self.request.possible:
                self.network.auth_send(self.uid, payload, uid)
                self.ciphertexts_sent += 1
        self.phase = SenderPhase.DONE
        self.finished_tick = self.network.now

    def _abort(self, reason: AbortReason) -> None:
        self.phase = SenderPhase.ABORTED
        self.abort_reason = reason
        self.finished_tick = self.network.now

    def state_dump(self) -> dict:
        """Internal state as exposed to the adversary on corruption."""
        return {
            "role": "sender",
            "phase": self.phase.value,
            "run_id": self.run_id.hex() if self.run_id else None,
            "ring": [vk.hex() for vk in self.ring.members] if self.ring else None,
            "keys": [k.hex() for k in self.keys],
            "signatures": [s.to_bytes().hex() for s in self.signatures],
        }


@dataclass
class ReceiverRun:
    sender: int
    keypair: lrs.Keypair
    ring: "lrs.Ring | None" = None
    ephemeral: "bytes | None" = None
    delivered: "bytes | None" = None
    dropped_out: bool = False


class Receiver:
    """Event-driven receiver side; tracks one state record per run id."""

    def __init__(self, uid: int, network: Network, rng):
        self.uid = uid
        self.network = network
        self.rng = rng
        self.runs = {}

    def handle(self, origin, payload: bytes) -> None:
        try:
            kind, fields = parse_message(payload)
        except WireError:
            return
        if origin is None:
            return
        if kind == MSG_KEY_REQUEST:
            self._on_key_request(origin, fields["run_id"], fields["params"])
        elif kind == MSG_RING_ANNOUNCE:
            self._on_ring(fields["run_id"], fields["ring"])
        elif kind == MSG_CIPHERTEXT:
            self._on_ciphertext(fields["run_id"], fields["ciphertext"])

    def _on_key_request(self, origin: int, run_id: bytes, params_bytes: bytes) -> None:
        if run_id in self.runs:
            return  # replayed request, discard the extra copy
        try:
            params = lrs.PublicParams.from_bytes(params_bytes)
        except WireError:
            return
        keypair = lrs.keygen(params, self.rng)
        self.runs[run_id] = ReceiverRun(sender=origin, keypair=keypair)
        self.network.auth_send(self.uid, pack_vk_submit(run_id, keypair.vk), origin)

    def _on_ring(self, run_id: bytes, ring_bytes: bytes) -> None:
        run = self.runs.get(run_id)
        if run is None or run.ring is not None or run.dropped_out:
            return
        try:
            ring = lrs.Ring.from_bytes(ring_bytes)
        except WireError:
            run.dropped_out = True
            return
        if run.keypair.vk not in ring:
            # The sender presented a ring without us: treat it as malicious
            # and walk away from this run.
            run.dropped_out = True
            return
        run.ring = ring
        run.ephemeral = cipher.keygen(self.rng)
        sig = lrs.sign(run.keypair.sk, run.ephemeral, ring, self.rng)
        self.network.anon_send(self.uid, pack_key_submit(run.ephemeral, sig), run.sender)

    def _on_ciphertext(self, run_id: bytes, ct_bytes: bytes) -> None:
        run = self.runs.get(run_id)
        if run is None or run.ephemeral is None:
            return
        try:
            ct = cipher.Ciphertext.from_bytes(ct_bytes)
        except WireError:
            return
        candidate = cipher.decrypt(ct, run.ephemeral)
        if candidate.accepted and run.delivered is None:
            run.delivered = candidate.message
        # A tag mismatch means the message was for someone else; no reaction.

    def delivered_message(self):
        for run in self.runs.values():
            if run.delivered is not None:
                return run.delivered
        return None

    def state_dump(self) -> dict:
        runs = {}
        for run_id, run in self.runs.items():
            runs[run_id.hex()] = {
                "vk": run.keypair.vk.hex(),
                "sk": run.keypair.sk.hex(),
                "ring": [vk.hex() for vk in run.ring.members] if run.ring else None,
                "ephemeral": run.ephemeral.hex() if run.ephemeral else None,
                "delivered": run.delivered.hex() if run.delivered is not None else None,
                "dropped_out": run.dropped_out,
            }
        return {"role": "receiver", "runs": runs}


@dataclass
class RunResult:
    outcome: str                 # "delivered" | "aborted" | "stalled"
    reason: "AbortReason | None"
    chosen: frozenset
    ticks: int
    transcript: list
    integrity_violations: int
    audit: dict
    sender: Sender = field(repr=False, default=None)
    receivers: dict = field(repr=False, default=None)

    def to_record(self) -> dict:
        return {
            "outcome": self.outcome,
            "reason": self.reason.value if self.reason else None,
            "chosen": sorted(self.chosen),
            "ticks": self.ticks,
            "integrity_violations": self.integrity_violations,
        }


def run_anycast(request: AnycastRequest, seed, *, mix_window=100, corrupted=frozenset(),
                adversary=None, record_transcript=True, key_picker_factory=None) -> RunResult:
    """Simulate one full anycast run and report what happened.

    ``key_picker_factory(receivers) -> picker`` lets test fixtures replace
    the sender's uniform key draw; honest runs leave it unset.
    """
    network = Network(seed, mix_window=mix_window, adversary=adversary,
                      corrupted=corrupted, record_transcript=record_transcript)
    receivers = {}
    for uid in request.possible:
        receiver = Receiver(uid, network, new_rng(seed, "receiver", uid))
        receivers[uid] = receiver
        network.add_user(uid, receiver.handle, receiver.state_dump)
    picker = key_picker_factory(receivers) if key_picker_factory else None
    sender = Sender(request.sender, request, network, new_rng(seed, "sender"),
                    key_picker=picker)
    network.add_user(request.sender, sender.handle, sender.state_dump)

    sender.start()
    horizon = sender.deadline_ticks + 10 * mix_window + 10
    network.run_until_idle(horizon)

    if sender.phase is SenderPhase.DONE:
        outcome = "delivered"
    elif sender.phase is SenderPhase.ABORTED:
        outcome = "aborted"
    else:
        outcome = "stalled"
    chosen = frozenset(uid for uid, receiver in receivers.items()
                       if receiver.delivered_message() is not None)
    return RunResult(
        outcome=outcome,
        reason=sender.abort_reason,
        chosen=chosen,
        ticks=sender.finished_tick if sender.finished_tick is not None else network.now,
        transcript=network.observe() if record_transcript else [],
        integrity_violations=network.counters["integrity_violations"],
        audit=network.audit(),
        sender=sender,
        receivers=receivers,
    )
