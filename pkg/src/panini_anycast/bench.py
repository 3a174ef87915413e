"""Microbenchmarks for the per-step computational cost of a run.

Six steps, measured in isolation around the step body only (setup material
is prepared beforehand, and ten warm-up iterations are discarded):

* KG: one receiver generates a ring-signature keypair.
* SIG: one receiver draws a 32-byte key and ring-signs it.
* VER: the sender verifies all l received signatures.
* LINK: the sender link-checks every unordered signature pair.
* S&E: the sender picks one key and encrypts the message under it.
* D&C: one receiver decrypts a ciphertext and compares the tag.

Absolute times are hardware noise; the interesting output is how the mean
scales when the candidate count doubles. The report carries both the raw
rows and those scaling ratios.
"""

import json
import time
from dataclasses import dataclass

import numpy as np

from . import cipher, lrs
from .util import new_rng

STEP_NAMES = ("KG", "SIG", "VER", "LINK", "S&E", "D&C")

DEFAULT_RECEIVER_COUNTS = (10, 20, 40)
DEFAULT_REPETITIONS = 100
DEFAULT_MESSAGE_SIZE = 1024
WARMUP = 10

CSV_HEADER = "step,l,mean_ns,stddev_ns,repetitions"


@dataclass(frozen=True)
class StepStats:
    step: str
    receivers: int
    repetitions: int
    mean_ns: float
    stddev_ns: float

    def csv_row(self) -> str:
        return f"{self.step},{self.receivers},{self.mean_ns:.1f},{self.stddev_ns:.1f},{self.repetitions}"


@dataclass(frozen=True)
class BenchReport:
    rows: tuple
    message_size: int

    def mean(self, step: str, receivers: int) -> float:
        for row in self.rows:
            if row.step == step and row.receivers == receivers:
                return row.mean_ns
        raise KeyError((step, receivers))

    def scaling_ratios(self) -> dict:
        """mean(2l) / mean(l) for each step and consecutive receiver count."""
        counts = sorted({row.receivers for row in self.rows})
        steps = []
        for row in self.rows:
            if row.step not in steps:
                steps.append(row.step)
        ratios = {}
        for step in steps:
            for small, large in zip(counts, counts[1:]):
                ratios[(step, small, large)] = self.mean(step, large) / self.mean(step, small)
        return ratios

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        lines.extend(row.csv_row() for row in self.rows)
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "message_size": self.message_size,
            "rows": [
                {"step": row.step, "l": row.receivers, "mean_ns": row.mean_ns,
                 "stddev_ns": row.stddev_ns, "repetitions": row.repetitions}
                for row in self.rows
            ],
            "scaling_ratios": {
                f"{step}:{small}->{large}": value
                for (step, small, large), value in sorted(self.scaling_ratios().items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"


def _prepare(receivers: int, message_size: int, seed):
    """Everything a step body needs, built outside the timed region."""
    rng = new_rng(seed, "bench", receivers)
    params = lrs.setup()
    keypairs = [lrs.keygen(params, rng) for _ in range(receivers)]
    ring = lrs.Ring([kp.vk for kp in keypairs])
    submissions = []
    for kp in keypairs:
        key = cipher.keygen(rng)
        submissions.append((key, lrs.sign(kp.sk, key, ring, rng)))
    message = rng.randbytes(message_size)
    chosen_key = submissions[0][0]
    ciphertext = cipher.encrypt(cipher.TaggedPlaintext.tagged(message), chosen_key, rng)
    return {
        "rng": rng,
        "params": params,
        "keypairs": keypairs,
        "ring": ring,
        "submissions": submissions,
        "message": message,
        "chosen_key": chosen_key,
        "ciphertext": ciphertext,
    }


def _step_body(step: str, ctx):
    rng = ctx["rng"]
    if step == "KG":
        return lambda: lrs.keygen(ctx["params"], rng)
    if step == "SIG":
        sk = ctx["keypairs"][0].sk
        ring = ctx["ring"]
        return lambda: lrs.sign(sk, cipher.keygen(rng), ring, rng)
    if step == "VER":
        ring = ctx["ring"]
        submissions = ctx["submissions"]

        def verify_all():
            for key, sig in submissions:
                if lrs.verify(sig, key, ring) != 1:
                    raise AssertionError("benchmark signature failed to verify")
        return verify_all
    if step == "LINK":
        sigs = [sig for _, sig in ctx["submissions"]]

        def link_all_pairs():
            for i in range(len(sigs)):
                for j in range(i + 1, len(sigs)):
                    if lrs.link(sigs[i], sigs[j]) != 0:
                        raise AssertionError("benchmark signatures must not link")
        return link_all_pairs
    if step == "S&E":
        keys = [key for key, _ in ctx["submissions"]]
        message = ctx["message"]

        def select_and_encrypt():
            chosen = keys[rng.randrange(len(keys))]
            cipher.encrypt(cipher.TaggedPlaintext.tagged(message), chosen, rng)
        return select_and_encrypt
    if step == "D&C":
        ciphertext = ctx["ciphertext"]
        key = ctx["chosen_key"]

        def decrypt_and_compare():
            if not cipher.decrypt(ciphertext, key).accepted:
                raise AssertionError("benchmark ciphertext must decrypt")
        return decrypt_and_compare
    raise ValueError(f"unknown benchmark step: {step}")


def run_benchmarks(steps=STEP_NAMES, receiver_counts=DEFAULT_RECEIVER_COUNTS,
                   repetitions=DEFAULT_REPETITIONS, seed=0,
                   message_size=DEFAULT_MESSAGE_SIZE, warmup=WARMUP) -> BenchReport:
    """Time each step body for each candidate count on a monotonic clock."""
    if not receiver_counts:
        raise ValueError("need at least one receiver count")
    unknown = [s for s in steps if s not in STEP_NAMES]
    if unknown:
        raise ValueError(f"unknown benchmark steps: {unknown}")
    rows = []
    for receivers in receiver_counts:
        ctx = _prepare(receivers, message_size, seed)
        for step in steps:
            body = _step_body(step, ctx)
            for _ in range(warmup):
                body()
            samples = np.empty(repetitions)
            for i in range(repetitions):
                start = time.perf_counter_ns()
                body()
                samples[i] = time.perf_counter_ns() - start
            rows.append(StepStats(
                step=step, receivers=receivers, repetitions=repetitions,
                mean_ns=float(samples.mean()),
                stddev_ns=float(samples.std(ddof=1)) if repetitions > 1 else 0.0,
            ))
    return BenchReport(tuple(rows), message_size)
