"""Config-driven simulation scenarios.

A scenario file is JSON: the user population, the anycast parameters, the
corruption set, the mix window, seeds, and an adversary action script.
Actions target envelope submissions by channel, message kind, and
endpoints, and apply one of the interference primitives (drop, delay,
modify, replay) or inject a fabricated envelope. Injection payloads cover
the interesting attack surfaces: a signed key from outside the ring, a
second validly-signed key built from a corrupted receiver's leaked state,
and a forged authenticated envelope.
"""

import json
from dataclasses import dataclass, field

from . import cipher, lrs
from .channels import ANON, AUTH, Adversary, Delay, Drop, Modify, Replay, SubmitView
from .protocol import (MSG_CIPHERTEXT, MSG_KEY_REQUEST, MSG_KEY_SUBMIT,
                       MSG_RING_ANNOUNCE, MSG_VK_SUBMIT, AnycastRequest,
                       RunResult, pack_key_submit, run_anycast)
from .util import new_rng


class ConfigError(ValueError):
    """A scenario configuration could not be understood."""


_MSG_KINDS = {
    "key-request": MSG_KEY_REQUEST,
    "vk-submit": MSG_VK_SUBMIT,
    "ring-announce": MSG_RING_ANNOUNCE,
    "key-submit": MSG_KEY_SUBMIT,
    "ciphertext": MSG_CIPHERTEXT,
}

_ACTION_KINDS = ("drop", "delay", "modify", "replay", "insert")
_INSERT_PAYLOADS = ("invalid-key", "linked-key", "forged-auth")


@dataclass
class ActionSpec:
    kind: str
    channel: "str | None" = None
    msg: "int | None" = None
    origin: "int | None" = None
    destination: "int | None" = None
    count: "int | None" = None      # None = every matching submission
    ticks: int = 0                  # delay amount
    copies: int = 1                 # replay copies
    payload: "str | None" = None    # insert payload template
    user: "int | None" = None       # insert: impersonated / claimed origin
    applied: int = field(default=0, compare=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "ActionSpec":
        if not isinstance(raw, dict):
            raise ConfigError("adversary action must be an object")
        kind = raw.get("kind")
        if kind not in _ACTION_KINDS:
            raise ConfigError(f"unknown adversary action: {kind!r}")
        target = raw.get("target", {})
        if not isinstance(target, dict):
            raise ConfigError("action target must be an object")
        channel = target.get("channel")
        if channel not in (None, AUTH, ANON):
            raise ConfigError(f"unknown channel: {channel!r}")
        msg = target.get("msg")
        if msg is not None:
            if msg not in _MSG_KINDS:
                raise ConfigError(f"unknown message kind: {msg!r}")
            msg = _MSG_KINDS[msg]
        count = raw.get("count")
        if count is not None and (not isinstance(count, int) or count < 1):
            raise ConfigError("count must be a positive integer")
        spec = cls(
            kind=kind, channel=channel, msg=msg,
            origin=target.get("origin"), destination=target.get("destination"),
            count=count, ticks=raw.get("ticks", 0), copies=raw.get("copies", 1),
            payload=raw.get("payload"), user=raw.get("user"),
        )
        if kind == "insert":
            if spec.payload not in _INSERT_PAYLOADS:
                raise ConfigError(f"unknown insert payload: {spec.payload!r}")
            if spec.count is None:
                spec.count = 1
        if kind == "delay" and spec.ticks <= 0:
            raise ConfigError("delay needs a positive ticks value")
        return spec

    def matches(self, view: SubmitView) -> bool:
        if self.count is not None and self.applied >= self.count:
            return False
        if self.channel is not None and view.channel != self.channel:
            return False
        if self.msg is not None and view.kind != self.msg:
            return False
        if self.origin is not None and view.origin != self.origin:
            return False
        if self.destination is not None and view.destination != self.destination:
            return False
        return True


class ScriptedAdversary(Adversary):
    """Interprets an action script at the channel interposition points."""

    def __init__(self, actions, seed=0):
        self.actions = list(actions)
        self.rng = new_rng(seed, "scripted-adversary")

    def intercept(self, view: SubmitView, control):
        decisions = []
        for spec in self.actions:
            if not spec.matches(view):
                continue
            spec.applied += 1
            if spec.kind == "drop":
                decisions.append(Drop())
            elif spec.kind == "delay":
                decisions.append(Delay(spec.ticks))
            elif spec.kind == "modify":
                decisions.append(Modify())
            elif spec.kind == "replay":
                decisions.append(Replay(spec.copies))
            elif spec.kind == "insert":
                self._inject(spec, view, control)
        return decisions

    def _inject(self, spec: ActionSpec, view: SubmitView, control) -> None:
        destination = spec.destination
        if spec.payload == "forged-auth":
            control.inject_auth(spec.user if spec.user is not None else -1,
                                destination, b"forged payload")
            return
        if spec.payload == "invalid-key":
            # A well-formed submission signed against a ring of the
            # adversary's own making; the sender's ring will reject it.
            params = lrs.setup()
            keypair = lrs.keygen(params, self.rng)
            own_ring = lrs.Ring([keypair.vk])
            key = cipher.keygen(self.rng)
            sig = lrs.sign(keypair.sk, key, own_ring, self.rng)
            control.inject_anon(destination, pack_key_submit(key, sig))
            return
        # linked-key: replay a corrupted receiver's leaked signing key on a
        # fresh ephemeral key, so the submission verifies but links.
        state = control.corrupted_state(spec.user)
        if not state or state.get("role") != "receiver":
            raise ConfigError("linked-key insert needs a corrupted receiver")
        for run_state in state.get("runs", {}).values():
            if run_state.get("ring"):
                sk = bytes.fromhex(run_state["sk"])
                ring = lrs.Ring([bytes.fromhex(vk) for vk in run_state["ring"]])
                key = cipher.keygen(self.rng)
                sig = lrs.sign(sk, key, ring, self.rng)
                control.inject_anon(destination, pack_key_submit(key, sig))
                return
        raise ConfigError("corrupted receiver has no ring yet")


@dataclass(frozen=True)
class Scenario:
    users: int
    request: AnycastRequest
    corrupted: frozenset
    mix_window: int
    seed: int
    adversary_actions: tuple
    adversary_seed: int

    def build_adversary(self) -> "ScriptedAdversary | None":
        if not self.adversary_actions:
            return None
        specs = [ActionSpec.from_dict(raw) for raw in self.adversary_actions]
        return ScriptedAdversary(specs, self.adversary_seed)


def parse_scenario(config: dict) -> Scenario:
    if not isinstance(config, dict):
        raise ConfigError("scenario config must be a JSON object")
    users = config.get("users")
    if not isinstance(users, int) or users < 2:
        raise ConfigError("users must be an integer >= 2")
    sender = config.get("sender", 0)
    possible = tuple(config.get("possible",
                                [uid for uid in range(users) if uid != sender]))
    n = config.get("n", 1)
    if "message" in config:
        try:
            message = bytes.fromhex(config["message"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("message must be a hex string") from exc
    else:
        message = config.get("message_text", "hello").encode()
    for uid in (sender, *possible):
        if not isinstance(uid, int) or not 0 <= uid < users:
            raise ConfigError(f"user id out of range: {uid}")
    try:
        request = AnycastRequest(sender, message, n, possible)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    corrupted = frozenset(config.get("corrupted", []))
    if not corrupted <= set(range(users)):
        raise ConfigError("corrupted users must exist")
    mix_window = config.get("T", 100)
    if not isinstance(mix_window, int) or mix_window < 1:
        raise ConfigError("T must be a positive integer")
    adversary = config.get("adversary", {})
    if not isinstance(adversary, dict):
        raise ConfigError("adversary must be an object")
    actions = tuple(adversary.get("actions", []))
    for raw in actions:
        ActionSpec.from_dict(raw)  # validate early, fail before running
    return Scenario(
        users=users, request=request, corrupted=corrupted,
        mix_window=mix_window, seed=config.get("seed", 0),
        adversary_actions=actions,
        adversary_seed=adversary.get("seed", config.get("seed", 0)),
    )


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            config = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_scenario(config)


def run_scenario(scenario: Scenario, seed=None) -> RunResult:
    """Execute one configured anycast run."""
    effective_seed = scenario.seed if seed is None else seed
    return run_anycast(
        scenario.request, effective_seed,
        mix_window=scenario.mix_window,
        corrupted=scenario.corrupted,
        adversary=scenario.build_adversary(),
    )
