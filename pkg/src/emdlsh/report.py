"""Statistical report records: one line per checked quantity.

Every record carries the estimate, its standard error, the declared bound,
the comparison direction, and the verdict, so a report is both machine
parseable (key=value pairs) and auditable by eye.  Reruns with identical
seeds reproduce estimates bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class StatsRecord:
    name: str
    estimate: float
    sigma: float                 # standard error of the estimate
    bound: float
    op: str                      # "<=", ">=", or "=="
    trials: int
    slack: Optional[float] = None   # tolerance; defaults to 3 sigma
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.op not in ("<=", ">=", "=="):
            raise ValueError(f"unknown comparison {self.op!r}")
        if self.slack is None:
            self.slack = 3.0 * self.sigma

    @property
    def passed(self) -> bool:
        if self.op == "<=":
            return self.estimate <= self.bound + self.slack
        if self.op == ">=":
            return self.estimate >= self.bound - self.slack
        return abs(self.estimate - self.bound) <= self.slack

    def to_line(self) -> str:
        parts = [
            f"record={self.name}",
            f"estimate={self.estimate:.10g}",
            f"sigma={self.sigma:.6g}",
            f"bound={self.bound:.10g}",
            f"op={self.op}",
            f"slack={self.slack:.6g}",
            f"trials={self.trials}",
            f"verdict={'pass' if self.passed else 'fail'}",
        ]
        for k, v in sorted(self.extras.items()):
            parts.append(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
        return " ".join(parts)


def binomial_sigma(p_hat: float, trials: int) -> float:
    p = min(max(p_hat, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / trials) if trials else 0.0


@dataclass
class Report:
    seed: int
    config: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def add(self, record: StatsRecord):
        self.records.append(record)

    def extend(self, records):
        self.records.extend(records)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def config_digest(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, default=str).encode()
        return hashlib.blake2b(blob, digest_size=8).hexdigest()

    def to_text(self) -> str:
        lines = [
            "# emd-lsh report",
            f"# seed={self.seed}",
            f"# config_digest={self.config_digest}",
            f"# records={len(self.records)} "
            f"passed={sum(r.passed for r in self.records)}",
        ]
        lines += [r.to_line() for r in self.records]
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())


def parse_report(text: str) -> list:
    """Records of a serialized report, as dictionaries of parsed fields."""
    out = []
    for line in text.splitlines():
        if not line.startswith("record="):
            continue
        rec = {}
        for tok in line.split():
            key, _, value = tok.partition("=")
            rec[key] = value
        for numeric in ("estimate", "sigma", "bound", "slack"):
            if numeric in rec:
                rec[numeric] = float(rec[numeric])
        if "trials" in rec:
            rec["trials"] = int(rec["trials"])
        out.append(rec)
    return out
