"""Query log shared by every optimizer, with regret accounting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

TRACE_VERSION = 1


@dataclass(frozen=True)
class Query:
    t: int
    x: tuple
    fidelity: int
    y: float  # reward, -inf when infeasible
    cost: float
    feasible: bool = True


def regret_series(fidelities, rewards, f_op: float, top: int) -> np.ndarray:
    """Running minimum of f_op - y over top-fidelity queries, +inf before the first."""
    out = np.empty(len(rewards))
    best = math.inf
    for i, (m, y) in enumerate(zip(fidelities, rewards)):
        if m == top:
            best = min(best, f_op - y)
        out[i] = best
    return out


def hits_to_target(fidelities, regret, target: float, top: int) -> float:
    """Top-fidelity query count at which regret first drops to target (inf if never)."""
    count = 0
    for m, r in zip(fidelities, regret):
        if m == top:
            count += 1
            if r <= target:
                return float(count)
    return math.inf


@dataclass
class OptimizationTrace:
    method: str
    n_fidelities: int
    budget: float
    names: tuple
    f_op: float | None = None
    seed: int | None = None
    queries: list = field(default_factory=list)
    status: str = "ok"

    def record(self, x, fidelity: int, y: float, cost: float, feasible: bool = True) -> Query:
        q = Query(len(self.queries) + 1, tuple(float(v) for v in x), int(fidelity), float(y), float(cost), bool(feasible))
        self.queries.append(q)
        return q

    def __len__(self) -> int:
        return len(self.queries)

    @property
    def spent(self) -> float:
        return float(sum(q.cost for q in self.queries))

    @property
    def cumulative_cost(self) -> np.ndarray:
        return np.cumsum([q.cost for q in self.queries])

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([q.fidelity for q in self.queries], dtype=int)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([q.y for q in self.queries], dtype=float)

    @property
    def X(self) -> np.ndarray:
        return np.array([q.x for q in self.queries], dtype=float).reshape(len(self.queries), len(self.names))

    @property
    def top_count(self) -> int:
        return int(np.sum(self.fidelities == self.n_fidelities))

    def reference(self) -> float:
        """f_op if known, else the best top-fidelity reward seen (self-referential)."""
        if self.f_op is not None:
            return self.f_op
        top = [q.y for q in self.queries if q.fidelity == self.n_fidelities and np.isfinite(q.y)]
        return max(top) if top else math.inf

    def regret(self, f_op: float | None = None) -> np.ndarray:
        ref = self.reference() if f_op is None else f_op
        return regret_series(self.fidelities, self.rewards, ref, self.n_fidelities)

    def incumbent(self) -> Query | None:
        """Best top-fidelity query; earliest wins ties."""
        best = None
        for q in self.queries:
            if q.fidelity == self.n_fidelities and np.isfinite(q.y) and (best is None or q.y > best.y):
                best = q
        return best

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "m_t", *self.names, "y_t", "cost", "regret"])
        for q, r in zip(self.queries, self.regret()):
            w.writerow([q.t, q.fidelity, *map(repr, q.x), repr(q.y), repr(q.cost), repr(float(r))])
        return buf.getvalue()

    def summary(self) -> dict:
        inc = self.incumbent()
        return {
            "version": TRACE_VERSION,
            "method": self.method,
            "seed": self.seed,
            "n_fidelities": self.n_fidelities,
            "budget": self.budget,
            "spent": self.spent,
            "queries": len(self.queries),
            "top_fidelity_queries": self.top_count,
            "f_op": self.f_op,
            "regret_reference": "known optimum" if self.f_op is not None else "best observed (self-referential)",
            "incumbent": None if inc is None else {"t": inc.t, "x": list(inc.x), "y": inc.y},
            "names": list(self.names),
            "status": self.status,
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)

    @classmethod
    def from_csv(cls, text: str, summary: dict | None = None) -> OptimizationTrace:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty trace file")
        head = rows[0]
        if head[:2] != ["t", "m_t"] or head[-3:] != ["y_t", "cost", "regret"]:
            raise ValueError(f"not a trace file: header {head!r}")
        names = tuple(head[2:-3])
        s = summary or {}
        fids = [int(r[1]) for r in rows[1:]]
        tr = cls(
            method=s.get("method", "unknown"),
            n_fidelities=s.get("n_fidelities", max(fids, default=1)),
            budget=s.get("budget", math.inf),
            names=names,
            f_op=s.get("f_op"),
            seed=s.get("seed"),
            status=s.get("status", "ok"),
        )
        for r in rows[1:]:
            y = float(r[-3])
            tr.queries.append(Query(int(r[0]), tuple(float(v) for v in r[2:-3]), int(r[1]), y, float(r[-2]), bool(np.isfinite(y))))
        return tr
