"""Maximum profit strategy for one contract traded in hindsight.

The position after every tick is -1, 0 or +1. Buying or selling one
contract costs ``cost`` and a reversal trades two contracts, so it
costs twice as much. Profit is kept in integer cents.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from decimal import Decimal
from typing import Sequence

import numpy as np

from .moments import OlsFit, ols

__all__ = ["CostModel", "Strategy", "mps0", "cost_sweep", "mp_volume_table", "total_variation"]


def _cents(x) -> int:
    c = Decimal(str(x)) * 100
    if c != c.to_integral_value():
        raise ValueError(f"{x} is not a whole number of cents")
    return int(c)


@dataclass(frozen=True)
class CostModel:
    """Cost per contract per transaction and dollar value of one lattice step."""

    cost_cents: int
    step_cents: int = 1250

    def __post_init__(self):
        if self.cost_cents < 0:
            raise ValueError(f"cost must be non-negative, got {self.cost_cents}")
        if self.step_cents <= 0:
            raise ValueError(f"step value must be positive, got {self.step_cents}")

    @classmethod
    def from_dollars(cls, cost, step_value="12.50") -> "CostModel":
        return cls(_cents(cost), _cents(step_value))


@dataclass(frozen=True)
class Strategy:
    actions: tuple[int, ...]
    mp_cents: int
    transactions: int  # contracts traded, a reversal counts two
    cost: CostModel
    single_episode: bool = False

    @property
    def mp(self) -> float:
        return self.mp_cents / 100

    @property
    def entry(self) -> int | None:
        nz = [i for i, a in enumerate(self.actions) if a]
        return nz[0] if nz else None

    @property
    def exit(self) -> int | None:
        nz = [i for i, a in enumerate(self.actions) if a]
        return nz[-1] if nz else None

    def segments(self) -> list[tuple[int, int]]:
        """(tick index, action) for every nonzero action."""
        return [(i, a) for i, a in enumerate(self.actions) if a]

    def summary(self) -> dict:
        return {
            "cost": self.cost.cost_cents / 100,
            "mp": self.mp,
            "transactions": self.transactions,
            "entry": self.entry,
            "exit": self.exit,
        }


def cash_flow(m: Sequence[int], actions: Sequence[int], cost: CostModel) -> int:
    """Realized profit in cents of an action sequence."""
    return sum(-a * p * cost.step_cents - abs(a) * cost.cost_cents for a, p in zip(actions, m))


def _check_actions(actions: Sequence[int]) -> None:
    pos = 0
    for a in actions:
        pos += a
        if pos not in (-1, 0, 1):
            raise AssertionError(f"position {pos} out of range")
    if pos != 0:
        raise AssertionError("strategy does not end flat")


# single-episode states
_PRE, _LONG, _SHORT, _POST = 0, 1, 2, 3
_POSITION = {_PRE: 0, _LONG: 1, _SHORT: -1, _POST: 0}
_MOVES = {
    _PRE: (_PRE, _LONG, _SHORT),
    _LONG: (_LONG, _SHORT, _POST),
    _SHORT: (_SHORT, _LONG, _POST),
    _POST: (_POST,),
}


def mps0(m: Sequence[int], cost: CostModel, single_episode: bool = False) -> Strategy:
    """Best strategy by dynamic programming over position states.

    By default the position may go flat and re-enter any number of
    times. With ``single_episode`` the strategy enters at most once,
    may reverse while in the market and exits at most once.
    Among equally profitable strategies the one with fewer contracts
    traded wins, then the one whose last action is earlier.
    """
    m = [int(x) for x in m]
    if not m:
        raise ValueError("need at least one tick")
    if single_episode:
        states = (_PRE, _LONG, _SHORT, _POST)
        moves = _MOVES
        pos = _POSITION
        start, finals = _PRE, (_PRE, _POST)
    else:
        states = (0, 1, 2)  # index of position -1, 0, +1
        moves = {s: states for s in states}
        pos = {0: -1, 1: 0, 2: 1}
        start, finals = 1, (1,)

    # key = (profit, -contracts, -last action index); larger is better
    NEG = None
    best = {s: NEG for s in states}
    best[start] = (0, 0, 1)  # last index -(-1)
    back: list[dict] = []
    for t, price in enumerate(m):
        new = {s: NEG for s in states}
        choice = {}
        for s, key in best.items():
            if key is None:
                continue
            for q in moves[s]:
                a = pos[q] - pos[s]
                if a:
                    cand = (key[0] - a * price * cost.step_cents - abs(a) * cost.cost_cents,
                            key[1] - abs(a), -t)
                else:
                    cand = key
                if new[q] is None or cand > new[q]:
                    new[q] = cand
                    choice[q] = s
        back.append(choice)
        best = new

    final = max((s for s in finals if best[s] is not None), key=lambda s: best[s])
    actions = [0] * len(m)
    s = final
    for t in range(len(m) - 1, -1, -1):
        prev = back[t][s]
        actions[t] = pos[s] - pos[prev]
        s = prev
    mp_cents = best[final][0]
    strat = Strategy(tuple(actions), mp_cents, -best[final][1], cost, single_episode)
    _check_actions(strat.actions)
    assert cash_flow(m, strat.actions, cost) == mp_cents
    return strat


def total_variation(m: Sequence[int]) -> int:
    """Sum of absolute lattice moves."""
    return int(np.abs(np.diff(np.asarray(m, dtype=np.int64))).sum())


def cost_sweep(m: Sequence[int], costs: Sequence[int], step_cents: int = 1250,
               single_episode: bool = False) -> list[Strategy]:
    """MPS0 at each cost (in cents), ascending; profit never increases with cost."""
    if list(costs) != sorted(costs):
        raise ValueError("costs must be sorted ascending")
    out = [mps0(m, CostModel(int(c), step_cents), single_episode) for c in costs]
    for s0, s1 in zip(out, out[1:]):
        assert s1.mp_cents <= s0.mp_cents
    return out


@dataclass
class MpVolumeTable:
    rows: list[tuple[float, int]]  # (MP in dollars, volume)
    zero_intercept: OlsFit
    free_intercept: OlsFit

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "zero_intercept": self.zero_intercept.to_dict(),
            "free_intercept": self.free_intercept.to_dict(),
        }


def mp_volume_table(sessions: Sequence[tuple[Sequence[int], int]], cost: CostModel,
                    confidence: float = 0.95) -> MpVolumeTable:
    """Session MPS0 profit against traded volume, with V regressed on MP."""
    if len(sessions) < 3:
        raise ValueError(f"need at least 3 sessions, got {len(sessions)}")
    rows = [(mps0(m, cost).mp, int(v)) for m, v in sessions]
    x = [r[0] for r in rows]
    y = [r[1] for r in rows]
    return MpVolumeTable(rows, ols(x, y, True, confidence), ols(x, y, False, confidence))
