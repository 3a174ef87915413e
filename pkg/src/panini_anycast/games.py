"""Executable privacy games for anonymous anycast.

Three games, each played between a challenger that simulates a protocol
and a pluggable adversary strategy:

* message confidentiality: the adversary names two equal-length messages,
  the challenger anycasts one of them at random, and the adversary must
  tell which from the observer transcript. Baseline 1/2.
* receiver anonymity: the adversary names one message and must point at an
  actual receiver after seeing the transcript. Baseline n/l.
* fairness: like receiver anonymity, but the guess is committed together
  with the challenge, before any output exists. Baseline n/l.

Corruption is a query: corrupted users keep following the protocol but
their internal state shows up in the transcript. Rounds the adversary
would win trivially through corruption (a corrupted user was chosen, or
everyone not chosen is corrupted, or for confidentiality a corrupted
sender) are withheld.

Alongside the real protocol there are deliberately leaky wrappers used to
validate that the games can detect their leaks, plus a trusted-third-party
reference that draws receivers uniformly and emits no traffic at all.
Win counts are compared against the baseline with a 3-sigma binomial
radius; rounds are independent given the seed, so they can be fanned out
across worker processes and merged.
"""

import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import sqrt

from .channels import transcript_lines
from .protocol import AnycastRequest, run_anycast
from .util import derive_seed, new_rng

DEFAULT_BUDGET = 16


class BudgetExceededError(RuntimeError):
    """The adversary used more challenger interactions than allowed."""


@dataclass(frozen=True)
class Challenge:
    """Adversary-chosen game input: who anycasts what to which candidates."""

    sender: int
    messages: tuple
    n: int
    possible: tuple

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        object.__setattr__(self, "possible", tuple(self.possible))
        if len(self.messages) not in (1, 2):
            raise ValueError("a challenge carries one message or a pair")
        if len(self.messages) == 2 and len(self.messages[0]) != len(self.messages[1]):
            raise ValueError("challenge message pair must have equal length")
        if len(set(self.possible)) != len(self.possible):
            raise ValueError("possible receivers must be distinct")
        if not 1 <= self.n <= len(self.possible):
            raise ValueError("need 1 <= n <= number of possible receivers")
        if self.sender in self.possible:
            raise ValueError("sender cannot be a possible receiver")

    @property
    def baseline(self) -> Fraction:
        return Fraction(self.n, len(self.possible))


def ideal_functionality(request: AnycastRequest, rng) -> frozenset:
    """Trusted-third-party reference: a uniform n-subset of the candidates."""
    return frozenset(rng.sample(sorted(request.possible), request.n))


@dataclass(frozen=True)
class GameTranscript:
    """What the challenger hands the adversary for one protocol run."""

    events: tuple
    withheld: bool


@dataclass(frozen=True)
class ProtocolRun:
    actual: frozenset
    events: tuple
    outcome: str


class PaniniProtocol:
    """The real protocol, executed over the simulated channels."""

    name = "panini"

    def execute(self, sender, message, n, possible, corrupted, seed, record=True) -> ProtocolRun:
        request = AnycastRequest(sender, message, n, possible)
        result = run_anycast(request, seed, corrupted=corrupted,
                             record_transcript=record)
        actual = result.chosen if result.outcome == "delivered" else frozenset()
        return ProtocolRun(actual, tuple(result.transcript), result.outcome)


class IdealProtocol:
    """The reference draw itself, wrapped as a transcript-free protocol."""

    name = "ideal"

    def execute(self, sender, message, n, possible, corrupted, seed, record=True) -> ProtocolRun:
        request = AnycastRequest(sender, message, n, possible)
        actual = ideal_functionality(request, new_rng(seed, "ideal-draw"))
        return ProtocolRun(actual, (), "delivered")


def _first_members_picker_factory(order):
    """Sender key picker that consumes the keys of the earliest candidates.

    Only a test fixture can do this: it peeks at the harness ground truth
    (which receiver generated which key), information the real sender never
    has.
    """
    def factory(receivers):
        rank = {uid: position for position, uid in enumerate(order)}

        def owner_of(key):
            for uid, receiver in receivers.items():
                for state in receiver.runs.values():
                    if state.ephemeral == key:
                        return uid
            return None

        def picker(remaining):
            best_index, best_rank = 0, len(order) + 1
            for index, key in enumerate(remaining):
                owner_rank = rank.get(owner_of(key), len(order))
                if owner_rank < best_rank:
                    best_index, best_rank = index, owner_rank
            return best_index

        return picker

    return factory


class ToyProtocol:
    """The real protocol plus one deliberate leak, for harness validation.

    Variants: ``p1`` appends the anycast plaintext to the transcript,
    ``p2`` replaces the uniform draw with "always the first n candidates",
    and ``p5`` appends the chosen receiver set to the transcript.
    """

    def __init__(self, variant: str):
        if variant not in ("p1", "p2", "p5"):
            raise ValueError(f"unknown toy protocol variant: {variant}")
        self.variant = variant
        self.name = variant

    def execute(self, sender, message, n, possible, corrupted, seed, record=True) -> ProtocolRun:
        request = AnycastRequest(sender, message, n, possible)
        picker_factory = None
        if self.variant == "p2":
            picker_factory = _first_members_picker_factory(tuple(possible))
        result = run_anycast(request, seed, corrupted=corrupted,
                             record_transcript=record,
                             key_picker_factory=picker_factory)
        actual = result.chosen if result.outcome == "delivered" else frozenset()
        events = list(result.transcript)
        if record:
            if self.variant == "p1":
                events.append({"tick": result.ticks, "event": "leak-message",
                               "message": message.hex()})
            elif self.variant == "p5":
                events.append({"tick": result.ticks, "event": "leak-receivers",
                               "chosen": sorted(actual)})
        return ProtocolRun(actual, tuple(events), result.outcome)


_TOY_ALIASES = {
    "p1": "p1", "p1-publish-message": "p1",
    "p2": "p2", "p2-deterministic-first-k": "p2",
    "p5": "p5", "p5-publish-receivers": "p5",
}


def make_toy_protocol(variant: str) -> ToyProtocol:
    key = _TOY_ALIASES.get(str(variant).lower())
    if key is None:
        raise ValueError(f"unknown toy protocol variant: {variant}")
    return ToyProtocol(key)


def get_protocol(spec):
    """Resolve a protocol handle from a name; handles pass through."""
    if hasattr(spec, "execute"):
        return spec
    name = str(spec).lower()
    if name == "panini":
        return PaniniProtocol()
    if name == "ideal":
        return IdealProtocol()
    return make_toy_protocol(name)


# -- challenger sessions -----------------------------------------------------

class _Session:
    """Challenger-side state for one game instance.

    Every interaction (corruption query, challenge, unveil, guess
    submission) charges one unit of a fixed action budget. Parties hold no
    state between protocol runs, so a corruption query answers with empty
    states; the actual disclosure happens inside subsequent transcripts.
    """

    def __init__(self, protocol, seed, budget=DEFAULT_BUDGET):
        self._protocol = protocol
        self._seed = seed
        self._budget = budget
        self._round = 0
        self.rng = new_rng(seed, "challenger")
        self.corrupted = frozenset()
        self.log = []

    def _charge(self):
        self._budget -= 1
        if self._budget < 0:
            raise BudgetExceededError("adversary action budget exhausted")

    def corrupt(self, users) -> dict:
        self._charge()
        self.corrupted = self.corrupted | frozenset(users)
        return {uid: {} for uid in users}

    def _execute(self, ch: Challenge, message: bytes) -> ProtocolRun:
        self._round += 1
        return self._protocol.execute(ch.sender, message, ch.n, ch.possible,
                                      self.corrupted,
                                      derive_seed(self._seed, "round", self._round))

    def _receiver_trivial_win(self, ch: Challenge, run: ProtocolRun) -> bool:
        if run.actual & self.corrupted:
            return True
        return frozenset(ch.possible) - run.actual <= self.corrupted


class McSession(_Session):
    """Message confidentiality: hidden bit picks one of two messages."""

    def __init__(self, protocol, seed, budget=DEFAULT_BUDGET):
        super().__init__(protocol, seed, budget)
        self.bit = self.rng.getrandbits(1)

    def challenge(self, ch: Challenge) -> GameTranscript:
        self._charge()
        if len(ch.messages) != 2:
            raise ValueError("confidentiality challenges need a message pair")
        run = self._execute(ch, ch.messages[self.bit])
        withheld = ch.sender in self.corrupted or bool(run.actual & self.corrupted)
        self.log.append({"withheld": withheld, "actual": run.actual})
        return GameTranscript((), True) if withheld else GameTranscript(run.events, False)


class RaSession(_Session):
    """Receiver anonymity: guess a chosen receiver, or unveil and retry."""

    def __init__(self, protocol, seed, budget=DEFAULT_BUDGET):
        super().__init__(protocol, seed, budget)
        self.last_actual = None

    def challenge(self, ch: Challenge) -> GameTranscript:
        self._charge()
        if len(ch.messages) != 1:
            raise ValueError("anonymity challenges carry a single message")
        run = self._execute(ch, ch.messages[0])
        self.last_actual = run.actual
        withheld = self._receiver_trivial_win(ch, run)
        self.log.append({"withheld": withheld, "actual": run.actual})
        return GameTranscript((), True) if withheld else GameTranscript(run.events, False)

    def unveil(self) -> frozenset:
        """Reveal the last challenge's chosen set; that round can no longer
        be guessed on."""
        self._charge()
        if self.last_actual is None:
            raise ValueError("no open challenge to unveil")
        actual, self.last_actual = self.last_actual, None
        return actual


class FSession(_Session):
    """Fairness: the guess must accompany the challenge."""

    def __init__(self, protocol, seed, budget=DEFAULT_BUDGET):
        super().__init__(protocol, seed, budget)
        self.won = None

    def submit(self, ch: Challenge, guess: int) -> GameTranscript:
        self._charge()
        if len(ch.messages) != 1:
            raise ValueError("fairness challenges carry a single message")
        if self.won is not None:
            raise ValueError("guess already submitted")
        run = self._execute(ch, ch.messages[0])
        self.won = guess in run.actual
        withheld = self._receiver_trivial_win(ch, run)
        self.log.append({"withheld": withheld, "actual": run.actual, "guess": guess})
        return GameTranscript((), True) if withheld else GameTranscript(run.events, False)


# -- adversary strategies ----------------------------------------------------

class UniformGuessMc:
    """Baseline sanity: look, then flip a coin."""

    name = "uniform-guess"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: McSession, rng) -> int:
        session.challenge(self.challenge)
        return rng.getrandbits(1)


class ReadOffMc:
    """Wins iff the transcript leaks the plaintext outright."""

    name = "read-off"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: McSession, rng) -> int:
        transcript = session.challenge(self.challenge)
        hexes = [m.hex() for m in self.challenge.messages]
        for event in transcript.events:
            if event.get("event") == "leak-message":
                if event.get("message") == hexes[0]:
                    return 0
                if event.get("message") == hexes[1]:
                    return 1
        return rng.getrandbits(1)


class ByteFrequencyMc:
    """Guesses from the byte histogram of the rendered transcript."""

    name = "byte-frequency"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: McSession, rng) -> int:
        transcript = session.challenge(self.challenge)
        blob = transcript_lines(list(transcript.events)).encode()
        histogram = Counter(blob)
        scores = []
        for message in self.challenge.messages:
            alphabet = set(message.hex().encode())
            scores.append(sum(histogram[b] for b in alphabet) / max(len(alphabet), 1))
        if scores[0] == scores[1]:
            return rng.getrandbits(1)
        return 0 if scores[0] > scores[1] else 1


class CorruptEverythingMc:
    """Corrupts sender and all candidates; every transcript gets withheld."""

    name = "corrupt-everything"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: McSession, rng) -> int:
        session.corrupt((self.challenge.sender,) + self.challenge.possible)
        session.challenge(self.challenge)
        return rng.getrandbits(1)


class UniformGuessRa:
    name = "uniform-guess"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: RaSession, rng) -> int:
        session.challenge(self.challenge)
        return rng.choice(self.challenge.possible)


class TranscriptRa:
    """Best effort from the transcript: read a leaked receiver set if one
    is there, otherwise bet on the protocol favoring the first candidate."""

    name = "transcript"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: RaSession, rng) -> int:
        transcript = session.challenge(self.challenge)
        for event in transcript.events:
            if event.get("event") == "leak-receivers" and event.get("chosen"):
                return event["chosen"][0]
        return self.challenge.possible[0]


class UnveilOnceRa:
    """Exercises the unveil path: reveal one round, then guess on a fresh
    one. The revealed set is independent of the next draw, so this stays
    at baseline."""

    name = "unveil-once"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: RaSession, rng) -> int:
        session.challenge(self.challenge)
        revealed = session.unveil()
        session.challenge(self.challenge)
        return sorted(revealed)[0]


class UniformGuessF:
    name = "uniform-guess"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: FSession, rng) -> None:
        session.submit(self.challenge, rng.choice(self.challenge.possible))


class FirstMemberF:
    """Always bets on the first candidate, before seeing any output."""

    name = "first-member"

    def __init__(self, challenge: Challenge):
        self.challenge = challenge

    def play(self, session: FSession, rng) -> None:
        session.submit(self.challenge, self.challenge.possible[0])


# -- estimates and game runners ----------------------------------------------

@dataclass(frozen=True)
class AdvantageEstimate:
    """Win count against a baseline with a 3-sigma binomial radius."""

    game: str
    protocol: str
    adversary: str
    wins: int
    trials: int
    baseline: Fraction
    history: "tuple | None" = None

    @property
    def win_rate(self) -> float:
        return self.wins / self.trials

    @property
    def advantage(self) -> float:
        return self.win_rate - float(self.baseline)

    @property
    def sigma(self) -> float:
        p = float(self.baseline)
        return sqrt(p * (1.0 - p) / self.trials)

    @property
    def radius(self) -> float:
        return 3.0 * self.sigma

    @property
    def passed(self) -> bool:
        """True when the adversary shows no significant advantage."""
        return self.advantage < self.radius

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json_dict(self) -> dict:
        return {
            "game": self.game,
            "protocol": self.protocol,
            "adversary": self.adversary,
            "rounds": self.trials,
            "wins": self.wins,
            "baseline": float(self.baseline),
            "baseline_exact": str(self.baseline),
            "advantage": self.advantage,
            "sigma": self.sigma,
            "verdict": self.verdict,
        }


def _mc_trial(protocol, adversary, seed):
    session = McSession(protocol, seed)
    guess = adversary.play(session, new_rng(seed, "adversary"))
    return int(guess) == session.bit, session.log


def _ra_trial(protocol, adversary, seed):
    session = RaSession(protocol, seed)
    guess = adversary.play(session, new_rng(seed, "adversary"))
    actual = session.last_actual
    return actual is not None and guess in actual, session.log


def _f_trial(protocol, adversary, seed):
    session = FSession(protocol, seed)
    adversary.play(session, new_rng(seed, "adversary"))
    return bool(session.won), session.log


_TRIALS = {"mc": _mc_trial, "ra": _ra_trial, "f": _f_trial}


def _trial_chunk(args):
    game, protocol, adversary, seed, start, count = args
    trial = _TRIALS[game]
    wins = 0
    for index in range(start, start + count):
        won, _ = trial(protocol, adversary, derive_seed(seed, game, index))
        wins += won
    return wins


def _fan_out(worker, jobs, workers):
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, jobs))


def _run_game(game, protocol, adversary, rounds, seed, workers, keep_history):
    protocol = get_protocol(protocol)
    if rounds < 1:
        raise ValueError("need at least one round")
    if keep_history or not workers or workers <= 1 or rounds < 32:
        wins = 0
        history = []
        trial = _TRIALS[game]
        for index in range(rounds):
            won, log = trial(protocol, adversary, derive_seed(seed, game, index))
            wins += won
            if keep_history:
                history.append({"win": won, "log": log})
        history = tuple(history) if keep_history else None
    else:
        chunk = max(16, rounds // (workers * 8))
        jobs = [(game, protocol, adversary, seed, start, min(chunk, rounds - start))
                for start in range(0, rounds, chunk)]
        wins = sum(_fan_out(_trial_chunk, jobs, workers))
        history = None
    baseline = Fraction(1, 2) if game == "mc" else adversary.challenge.baseline
    return AdvantageEstimate(game, protocol.name, adversary.name, wins, rounds,
                             baseline, history)


def run_mc_game(protocol, adversary, rounds, seed, *, workers=None, keep_history=False):
    """Play the confidentiality game ``rounds`` independent times."""
    return _run_game("mc", protocol, adversary, rounds, seed, workers, keep_history)


def run_ra_game(protocol, adversary, rounds, seed, *, workers=None, keep_history=False):
    """Play the receiver-anonymity game ``rounds`` independent times."""
    return _run_game("ra", protocol, adversary, rounds, seed, workers, keep_history)


def run_f_game(protocol, adversary, rounds, seed, *, workers=None, keep_history=False):
    """Play the fairness game ``rounds`` independent times."""
    return _run_game("f", protocol, adversary, rounds, seed, workers, keep_history)


# -- implication matrix --------------------------------------------------------

# Expected verdicts (True = PASS) for the leak-detecting adversary of each
# game. Cells not listed are informational.
EXPECTED_PATTERN = {
    ("panini", "mc"): True, ("panini", "ra"): True, ("panini", "f"): True,
    ("p1", "mc"): False, ("p1", "f"): True,
    ("p2", "mc"): True, ("p2", "f"): False, ("p2", "ra"): False,
    ("p5", "f"): True, ("p5", "ra"): False,
}

MATRIX_FIXTURES = ("panini", "p1", "p2", "p5")
DEFAULT_MATRIX_ROUNDS = {"mc": 1000, "ra": 600, "f": 600}


@dataclass(frozen=True)
class MatrixReport:
    estimates: dict
    expected: dict

    @property
    def pattern_ok(self) -> bool:
        return all(self.estimates[cell].passed == want
                   for cell, want in self.expected.items())

    @property
    def implication_ok(self) -> bool:
        """Anonymity-passing fixtures must also pass fairness."""
        for fixture in MATRIX_FIXTURES:
            if self.estimates[(fixture, "ra")].passed and not self.estimates[(fixture, "f")].passed:
                return False
        return True

    @property
    def ok(self) -> bool:
        return self.pattern_ok and self.implication_ok

    def to_json_dict(self) -> dict:
        cells = {}
        for (fixture, game), estimate in sorted(self.estimates.items()):
            cells[f"{fixture}/{game}"] = estimate.to_json_dict()
        return {
            "cells": cells,
            "expected": {f"{fixture}/{game}": want
                         for (fixture, game), want in sorted(self.expected.items())},
            "pattern_ok": self.pattern_ok,
            "implication_ok": self.implication_ok,
            "verdict": "PASS" if self.ok else "FAIL",
        }


def default_challenge(game: str, receivers: int = 4, n: int = 1) -> Challenge:
    possible = tuple(range(1, receivers + 1))
    if game == "mc":
        return Challenge(0, (b"\x00" * 32, b"\xff" * 32), n, possible)
    return Challenge(0, (b"anycast-probe",), n, possible)


def check_implication_matrix(seed=0, rounds=None, workers=None, receivers=4):
    """Run every game against every fixture and compare verdicts with the
    expected leak pattern."""
    if rounds is None:
        rounds = dict(DEFAULT_MATRIX_ROUNDS)
    elif isinstance(rounds, int):
        rounds = {"mc": rounds, "ra": rounds, "f": rounds}
    adversaries = {
        "mc": ReadOffMc(default_challenge("mc", receivers)),
        "ra": TranscriptRa(default_challenge("ra", receivers)),
        "f": FirstMemberF(default_challenge("f", receivers)),
    }
    runners = {"mc": run_mc_game, "ra": run_ra_game, "f": run_f_game}
    estimates = {}
    for fixture in MATRIX_FIXTURES:
        for game in ("mc", "ra", "f"):
            estimates[(fixture, game)] = runners[game](
                fixture, adversaries[game], rounds[game],
                derive_seed(seed, "matrix", fixture, game), workers=workers)
    return MatrixReport(estimates, dict(EXPECTED_PATTERN))


# -- mass selection sampling ---------------------------------------------------

def _selection_chunk(args):
    protocol, l, n, message, seed, start, count = args
    possible = tuple(range(1, l + 1))
    counts = {}
    for index in range(start, start + count):
        run = protocol.execute(0, message, n, possible, frozenset(),
                               derive_seed(seed, "select", index), record=False)
        key = tuple(sorted(run.actual))
        counts[key] = counts.get(key, 0) + 1
    return counts


def selection_counts(protocol, l, n, runs, seed, *, workers=None,
                     message=b"selection-probe") -> Counter:
    """Empirical distribution of the chosen receiver subset over many
    independent honest runs."""
    protocol = get_protocol(protocol)
    totals = Counter()
    if not workers or workers <= 1 or runs < 64:
        totals.update(_selection_chunk((protocol, l, n, message, seed, 0, runs)))
        return totals
    chunk = max(32, runs // (workers * 8))
    jobs = [(protocol, l, n, message, seed, start, min(chunk, runs - start))
            for start in range(0, runs, chunk)]
    for part in _fan_out(_selection_chunk, jobs, workers):
        totals.update(part)
    return totals


def auto_workers() -> int:
    return os.cpu_count() or 1
