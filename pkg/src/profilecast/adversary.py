"""Malicious-node model: who misbehaves, how often, and below what similarity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np


class AdversaryConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AdversaryConfig:
    p1: float = 0.0  # fraction of malicious nodes
    p2: float = 0.5  # lower bound of the per-node misbehave probability
    p3: float = 0.2  # similarity below which a malicious node drops
    seed: int = 0

    def validate(self, delta: float | None = None) -> None:
        for name in ("p1", "p2", "p3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise AdversaryConfigError(f"{name}={v} outside [0, 1]")
        if delta is not None and self.p3 > delta:
            raise AdversaryConfigError(f"p3={self.p3} exceeds the flooding threshold {delta}")


@dataclass
class MaliciousAssignment:
    malicious: dict[int, bool] = field(default_factory=dict)
    probability: dict[int, float] = field(default_factory=dict)
    p3: float = 0.2

    def is_malicious(self, node: int) -> bool:
        return self.malicious.get(node, False)

    @property
    def malicious_nodes(self) -> list[int]:
        return sorted(n for n, flag in self.malicious.items() if flag)

    def dump(self, stream: TextIO) -> None:
        stream.write(f"# p3={self.p3!r}\n")
        for node in sorted(self.malicious):
            stream.write(f"{node},{int(self.malicious[node])},{self.probability[node]!r}\n")

    @classmethod
    def load(cls, stream: TextIO) -> "MaliciousAssignment":
        out = cls()
        for line in stream:
            line = line.strip()
            if line.startswith("# p3="):
                out.p3 = float(line[5:])
                continue
            if not line or line.startswith("#"):
                continue
            node, flag, p = line.split(",")
            out.malicious[int(node)] = bool(int(flag))
            out.probability[int(node)] = float(p)
        return out


def malicious_count(p1: float, n: int) -> int:
    # round half up; Python's round() would send 2.5 to 2
    return min(n, int(math.floor(p1 * n + 0.5)))


def assign_malicious(node_ids: Iterable[int], config: AdversaryConfig) -> MaliciousAssignment:
    """Flag ``round(p1 * n)`` nodes and draw each one's misbehave probability.

    The node permutation and the per-node uniform draws depend only on the
    seed, so raising ``p1`` grows the malicious set and raising ``p2`` raises
    every drawn probability. Sweeps therefore compare like with like.
    """
    nodes = sorted(node_ids)
    if not nodes:
        raise AdversaryConfigError("no nodes to assign")
    rng = np.random.default_rng([config.seed, 0xAD7E])
    order = rng.permutation(len(nodes))
    u = rng.random(len(nodes))
    chosen = set(order[: malicious_count(config.p1, len(nodes))].tolist())
    out = MaliciousAssignment(p3=config.p3)
    for i, node in enumerate(nodes):
        flag = i in chosen
        out.malicious[node] = flag
        out.probability[node] = config.p2 + (1.0 - config.p2) * float(u[i]) if flag else 0.0
    return out


def decide_drop(
    node: int,
    similarity_to_target: float,
    assignment: MaliciousAssignment,
    rng: np.random.Generator,
    probability: float | None = None,
) -> bool:
    """True when ``node`` silently drops the packet it is handed.

    ``probability`` overrides the node's drawn misbehave probability (the game
    policy evolves it). The stream is only touched on the random branch.
    """
    if not assignment.is_malicious(node):
        return False
    if similarity_to_target >= assignment.p3:
        return False
    p = assignment.probability[node] if probability is None else probability
    return bool(rng.random() < p)
