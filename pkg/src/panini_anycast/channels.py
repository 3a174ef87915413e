"""Deterministic discrete-event network with two channel types.

``auth`` is an authenticated, confidential unicast: the receiver learns the
origin, a keyed-hash token protects integrity, and a global observer sees
endpoints, sizes, and timing but never payload bytes.

``anon`` is a threshold mix: submissions are batched into a window that
opens on first submission and closes ``mix_window`` ticks later, then the
batch is uniformly shuffled and delivered with origins stripped. The
observer sees who submits into the mix and what comes out of a batch, but
not the mapping between the two.

An adversary program can be interposed at every submission point. It sees
the same metadata the observer would and may drop, delay, modify, or
replay envelopes, and inject new ones. Corrupted users keep following the
protocol but their internal state is exposed through the observer view.

All randomness comes from the seed, so identical (seed, scenario,
adversary) triples produce byte-identical transcripts.
"""

import heapq
import hmac
import hashlib
import json
from dataclasses import dataclass, field

from .util import derive_seed, new_rng

AUTH = "auth"
ANON = "anon"

TOKEN_BYTES = 16

DEFAULT_MIX_WINDOW = 100
DEFAULT_AUTH_LATENCY = 1

# Event-queue priorities within a tick: mix arrivals settle before the
# window closes so a delay of exactly the window length still lands in
# the batch; deliveries and timers come between; closes run last.
_PRI_MIX_ENTRY = 0
_PRI_DELIVER = 1
_PRI_MIX_CLOSE = 2


class UnknownUserError(ValueError):
    pass


@dataclass
class Envelope:
    origin: int
    destination: int
    payload: bytes
    submit_tick: int
    channel: str
    token: bytes = b""


@dataclass(frozen=True)
class SubmitView:
    """Metadata an interposing adversary sees when an envelope is submitted.

    ``destination`` is withheld on the anon channel (the mix hides it) and
    ``kind`` exposes the message-type byte as a modeling convenience; in a
    real deployment phases and sizes identify message types anyway.
    """

    channel: str
    origin: int
    destination: "int | None"
    size: int
    tick: int
    kind: "int | None"


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class Delay:
    ticks: int


@dataclass(frozen=True)
class Modify:
    pass


@dataclass(frozen=True)
class Replay:
    copies: int = 1


class Adversary:
    """Base adversary: observes submissions and does nothing."""

    def intercept(self, view: SubmitView, control: "AdversaryControl"):
        return []


class AdversaryControl:
    """Active capabilities handed to the adversary at interposition points."""

    def __init__(self, network: "Network"):
        self._network = network

    @property
    def tick(self) -> int:
        return self._network.now

    def corrupted_state(self, uid: int):
        """Live internal state of a corrupted user, or None."""
        return self._network.corrupted_snapshot(uid)

    def inject_anon(self, destination: int, payload: bytes) -> None:
        """Slip a fabricated payload into the mix as if submitted now."""
        self._network._submit_anon_envelope(
            Envelope(-1, destination, payload, self._network.now, ANON),
            log_kind="adv-insert",
        )

    def inject_auth(self, claimed_origin: int, destination: int, payload: bytes) -> None:
        """Submit a forged auth envelope. Lacking the pair key, its token
        will not pass the integrity check at delivery."""
        env = Envelope(claimed_origin, destination, payload, self._network.now, AUTH,
                       token=bytes(TOKEN_BYTES))
        self._network._log("adv-insert", {"channel": AUTH, "to": destination})
        self._network.counters["inserted"] += 1
        self._network._schedule_auth_delivery(env, self._network.now)


class Network:
    """Single-threaded event loop owning users, channels, and the transcript."""

    def __init__(self, seed, *, mix_window: int = DEFAULT_MIX_WINDOW,
                 auth_latency: int = DEFAULT_AUTH_LATENCY, adversary: "Adversary | None" = None,
                 corrupted=frozenset(), record_transcript: bool = True):
        self.now = 0
        self.mix_window = mix_window
        self.auth_latency = auth_latency
        self.adversary = adversary
        self.corrupted = frozenset(corrupted)
        self._rng = new_rng(seed, "network")
        self._mac_root = derive_seed(seed, "mac").to_bytes(16, "big")
        self._pair_keys = {}
        self._queue = []  # (tick, priority, seq, fn)
        self._seq = 0
        self._handlers = {}
        self._state_providers = {}
        self._tick_end_listeners = []
        self._record = record_transcript
        self._events = []
        self._control = AdversaryControl(self)
        # Open mix window: (close_tick, entries); None when no window open.
        self._mix_open = None
        self.counters = {
            "submitted": 0, "delivered": 0, "dropped_by_adversary": 0,
            "integrity_violations": 0, "replayed_copies": 0, "inserted": 0,
        }

    # -- registration ------------------------------------------------------

    def add_user(self, uid: int, handler=None, state_provider=None) -> None:
        self._handlers[uid] = handler
        if state_provider is not None:
            self._state_providers[uid] = state_provider

    def set_handler(self, uid: int, handler) -> None:
        if uid not in self._handlers:
            raise UnknownUserError(f"user {uid} not registered")
        self._handlers[uid] = handler

    def on_tick_end(self, listener) -> None:
        self._tick_end_listeners.append(listener)

    def _require_user(self, uid: int) -> None:
        if uid not in self._handlers:
            raise UnknownUserError(f"user {uid} not registered")

    # -- transcript --------------------------------------------------------

    def _log(self, event: str, fields: dict) -> None:
        if self._record:
            entry = {"tick": self.now, "event": event}
            entry.update(fields)
            self._events.append(entry)

    def corrupted_snapshot(self, uid: int):
        if uid not in self.corrupted:
            return None
        provider = self._state_providers.get(uid)
        return provider() if provider else {}

    def observe(self) -> list:
        """Everything the global observer is entitled to: the metadata
        timeline plus state snapshots of corrupted users."""
        out = list(self._events)
        for uid in sorted(self.corrupted):
            provider = self._state_providers.get(uid)
            if provider:
                out.append({"event": "corrupt-state", "user": uid, "state": provider()})
        return out

    def audit(self) -> dict:
        counts = dict(self.counters)
        counts["pending"] = len(self._queue)
        return counts

    # -- integrity tokens ----------------------------------------------------

    def _pair_key(self, a: int, b: int) -> bytes:
        cached = self._pair_keys.get((a, b))
        if cached is None:
            cached = hashlib.sha256(self._mac_root + b"pair" + a.to_bytes(8, "big", signed=True)
                                    + b.to_bytes(8, "big", signed=True)).digest()
            self._pair_keys[(a, b)] = cached
        return cached

    def _token(self, origin: int, destination: int, payload: bytes) -> bytes:
        mac = hmac.new(self._pair_key(origin, destination), payload, hashlib.sha256)
        return mac.digest()[:TOKEN_BYTES]

    # -- submission ----------------------------------------------------------

    def _adversary_pass(self, env: Envelope, kind_hint):
        """Run the interposition hook; returns the surviving envelope list."""
        if self.adversary is None:
            return [env]
        view = SubmitView(
            channel=env.channel, origin=env.origin,
            destination=env.destination if env.channel == AUTH else None,
            size=len(env.payload), tick=self.now, kind=kind_hint,
        )
        survivors = [env]
        for action in self.adversary.intercept(view, self._control):
            if isinstance(action, Drop):
                self._log("adv-drop", {"channel": env.channel})
                self.counters["dropped_by_adversary"] += 1
                return []
            if isinstance(action, Delay):
                self._log("adv-delay", {"channel": env.channel, "ticks": action.ticks})
                for e in survivors:
                    e.submit_tick += action.ticks
            elif isinstance(action, Modify):
                self._log("adv-modify", {"channel": env.channel})
                for e in survivors:
                    mutated = bytearray(e.payload)
                    mutated[0] ^= 0xFF
                    e.payload = bytes(mutated)
            elif isinstance(action, Replay):
                self._log("adv-replay", {"channel": env.channel, "copies": action.copies})
                self.counters["replayed_copies"] += action.copies
                clones = [
                    Envelope(env.origin, env.destination, env.payload,
                             env.submit_tick, env.channel, env.token)
                    for _ in range(action.copies)
                ]
                survivors.extend(clones)
            else:
                raise TypeError(f"unknown adversary action {action!r}")
        return survivors

    def auth_send(self, origin: int, payload: bytes, destination: int) -> None:
        """Queue an authenticated unicast envelope for delivery."""
        self._require_user(origin)
        self._require_user(destination)
        token = self._token(origin, destination, payload)
        env = Envelope(origin, destination, payload, self.now, AUTH, token)
        self._log("auth-submit", {"from": origin, "to": destination, "size": len(payload)})
        self.counters["submitted"] += 1
        for survivor in self._adversary_pass(env, payload[0] if payload else None):
            self._schedule_auth_delivery(survivor, survivor.submit_tick)

    def _schedule_auth_delivery(self, env: Envelope, submit_tick: int) -> None:
        due = submit_tick + self.auth_latency
        self._push(due, _PRI_DELIVER, lambda: self._deliver_auth(env))

    def _deliver_auth(self, env: Envelope) -> None:
        expected = self._token(env.origin, env.destination, env.payload)
        if not hmac.compare_digest(expected, env.token):
            self._log("integrity-violation", {"to": env.destination})
            self.counters["integrity_violations"] += 1
            return
        self._log("auth-deliver", {"from": env.origin, "to": env.destination,
                                   "size": len(env.payload)})
        self.counters["delivered"] += 1
        handler = self._handlers.get(env.destination)
        if handler:
            handler(env.origin, env.payload)

    def anon_send(self, origin: int, payload: bytes, destination: int) -> None:
        """Submit a payload to the mix; origin is stripped before delivery."""
        self._require_user(origin)
        self._require_user(destination)
        env = Envelope(origin, destination, payload, self.now, ANON)
        self._log("anon-submit", {"from": origin, "size": len(payload)})
        self.counters["submitted"] += 1
        for survivor in self._adversary_pass(env, payload[0] if payload else None):
            self._submit_anon_envelope(survivor)

    def _submit_anon_envelope(self, env: Envelope, log_kind=None) -> None:
        if log_kind:
            self._log(log_kind, {"channel": ANON})
            self.counters["inserted"] += 1
        self._push(env.submit_tick, _PRI_MIX_ENTRY, lambda: self._mix_admit(env))

    def _mix_admit(self, env: Envelope) -> None:
        if self._mix_open is None:
            close_tick = self.now + self.mix_window
            self._mix_open = (close_tick, [])
            self._push(close_tick, _PRI_MIX_CLOSE, self._mix_close)
        self._mix_open[1].append(env)

    def _mix_close(self) -> None:
        _, entries = self._mix_open
        self._mix_open = None
        self._rng.shuffle(entries)
        self._log("mix-batch", {"size": len(entries),
                                "to": [e.destination for e in entries]})
        for env in entries:
            self._log("anon-deliver", {"to": env.destination, "size": len(env.payload)})
            self.counters["delivered"] += 1
            handler = self._handlers.get(env.destination)
            if handler:
                handler(None, env.payload)

    # -- event loop ----------------------------------------------------------

    def _push(self, tick: int, priority: int, fn) -> None:
        if tick < self.now:
            tick = self.now
        self._seq += 1
        heapq.heappush(self._queue, (tick, priority, self._seq, fn))

    def call_at(self, tick: int, fn) -> None:
        """Schedule a callback (protocol timers and the like)."""
        self._push(tick, _PRI_DELIVER, fn)

    def pending(self) -> bool:
        return bool(self._queue)

    def advance(self, until: int) -> list:
        """Process every event due at or before ``until`` in tick order.

        Events sharing a (tick, priority) slot run in an order drawn from
        the network RNG. Returns the transcript entries generated by this
        call; a second advance to the same tick returns nothing.
        """
        if until < self.now:
            raise ValueError("cannot advance into the past")
        start = len(self._events)
        while self._queue and self._queue[0][0] <= until:
            tick = self._queue[0][0]
            self.now = tick
            while self._queue and self._queue[0][0] == tick:
                priority = self._queue[0][1]
                group = []
                while (self._queue and self._queue[0][0] == tick
                       and self._queue[0][1] == priority):
                    group.append(heapq.heappop(self._queue)[3])
                self._rng.shuffle(group)
                for fn in group:
                    fn()
            for listener in self._tick_end_listeners:
                listener(tick)
        self.now = until
        return self._events[start:]

    def run_until_idle(self, horizon: int) -> None:
        while self._queue and self._queue[0][0] <= horizon:
            self.advance(self._queue[0][0])


def transcript_lines(events: list) -> str:
    """Render observer events as line-delimited JSON, stable byte-for-byte."""
    return "".join(json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n"
                   for event in events)
