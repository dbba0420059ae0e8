"""Classical Chinese restaurant process read off the spatial process.

Covers arrival-ordered seating extraction, superposition of independent
processes and the nested-window monotone coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .measure_core import (
    SEP,
    BaseMeasure,
    Location,
    PointConfiguration,
    Trajectory,
    Window,
    count,
    difference,
    superpose,
)
from .polya_sum import fresh_location
from .rand_kit import RngStream
from .scrp import TimePair, forward_step


class ArrivalEvent(NamedTuple):
    time: float
    atom: Location
    fresh: bool


@dataclass(frozen=True)
class SeatingSequence:
    """``table_of[i]`` is the table of customer i+1; tables labelled 1, 2, ...
    in order of first use."""

    table_of: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "table_of", tuple(int(x) for x in self.table_of))
        top = 0
        for t in self.table_of:
            if t > top + 1 or t < 1:
                raise ValueError(f"seating {self.table_of} is not in first-use order")
            top = max(top, t)

    def __len__(self) -> int:
        return len(self.table_of)

    @property
    def n_tables(self) -> int:
        return max(self.table_of, default=0)

    def table_sizes(self) -> list[int]:
        sizes = [0] * self.n_tables
        for t in self.table_of:
            sizes[t - 1] += 1
        return sizes

    def prefix(self, n: int) -> "SeatingSequence":
        return SeatingSequence(self.table_of[:n])

    def partition(self) -> "Partition":
        blocks: dict[int, set[int]] = {}
        for i, t in enumerate(self.table_of, start=1):
            blocks.setdefault(t, set()).add(i)
        return Partition(tuple(frozenset(blocks[k]) for k in sorted(blocks)))


@dataclass(frozen=True)
class Partition:
    blocks: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        blocks = tuple(frozenset(b) for b in self.blocks)
        if any(not b for b in blocks):
            raise ValueError("empty block")
        union = set().union(*blocks) if blocks else set()
        if sum(len(b) for b in blocks) != len(union) or union != set(range(1, len(union) + 1)):
            raise ValueError("blocks must partition {1..n}")
        object.__setattr__(self, "blocks", tuple(sorted(blocks, key=min)))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def key(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(b)) for b in self.blocks)

    def export(self) -> str:
        return "".join(",".join(map(str, b)) + "\n" for b in self.key())


def extract_seating(events: Sequence[ArrivalEvent]) -> SeatingSequence:
    """Customer m opens a table iff arrival m created a fresh atom."""
    tables: dict[Location, int] = {}
    out = []
    last = -math.inf
    for ev in events:
        if not ev.time > last:
            raise ValueError("arrival times must be strictly increasing")
        last = ev.time
        if ev.fresh:
            if ev.atom in tables:
                raise ValueError(f"fresh arrival at an occupied atom {ev.atom}")
            tables[ev.atom] = len(tables) + 1
        elif ev.atom not in tables:
            raise ValueError(f"join of an unseen atom {ev.atom}")
        out.append(tables[ev.atom])
    return SeatingSequence(tuple(out))


def crp_reference_step(seating: SeatingSequence, theta: float, rng: RngStream) -> SeatingSequence:
    """One more customer of CRP(theta): new table w.p. theta/(theta+n), else
    table of size y w.p. y/(theta+n)."""
    n = len(seating)
    x = rng.gen.random() * (theta + n)
    if x < theta or n == 0:
        return SeatingSequence(seating.table_of + (seating.n_tables + 1,))
    # customer index chosen uniformly: picks a table proportionally to its size
    return SeatingSequence(seating.table_of + (seating.table_of[min(int(x - theta), n - 1)],))


def crp_reference(n: int, theta: float, rng: RngStream) -> SeatingSequence:
    seating = SeatingSequence(())
    for _ in range(n):
        seating = crp_reference_step(seating, theta, rng)
    return seating


def crp_partition_law(n: int, theta: float) -> dict[tuple, Fraction | float]:
    """Exact law of the CRP(theta) partition of {1..n} by enumerating every
    seating sequence and multiplying its step probabilities."""
    exact = isinstance(theta, (int, Fraction))
    th = Fraction(theta) if exact else float(theta)
    law: dict[tuple, object] = {}

    def rec(seq: tuple[int, ...], sizes: list[int], prob):
        k = len(seq)
        if k == n:
            key = SeatingSequence(seq).partition().key()
            law[key] = law.get(key, 0) + prob
            return
        for t, y in enumerate(sizes, start=1):
            sizes[t - 1] += 1
            rec(seq + (t,), sizes, prob * y / (th + k))
            sizes[t - 1] -= 1
        sizes.append(1)
        rec(seq + (len(sizes),), sizes, prob * th / (th + k))
        sizes.pop()

    rec((), [], Fraction(1) if exact else 1.0)
    return law


def expected_tables(n: int, theta: float) -> float:
    return sum(theta / (theta + k) for k in range(n))


def sample_arrival_events(
    base: BaseMeasure,
    window: Window | None,
    n_events: int,
    rng: RngStream,
) -> list[ArrivalEvent]:
    """First ``n_events`` arrivals in the window, event by event.

    From state nu at time s the next arrival satisfies
    (tau - s)/(1 - s) ~ Beta(1, rho(B) + nu(B)); the arriving point is a
    single-point Polya sum draw, i.e. fresh with weight rho(B) and on atom x
    with weight nu({x}).
    """
    rho_b = base.mass(window)
    region = base.region(window)
    weights = None if len(region) == 1 else np.array([w.mass for w in region]) / rho_b
    nu: dict[Location, int] = {}
    units: list[Location] = []
    s = 0.0
    out = []
    for m in range(n_events):
        s = s + (1.0 - s) * float(rng.gen.beta(1.0, rho_b + m))
        x = rng.gen.random() * (rho_b + m)
        if x < rho_b:
            loc, fresh = fresh_location(region, rng, weights), True
        else:
            loc, fresh = units[min(int(x - rho_b), m - 1)], False
        units.append(loc)
        nu[loc] = nu.get(loc, 0) + 1
        out.append(ArrivalEvent(s, loc, fresh))
    return out


def arrival_events_refined(
    base: BaseMeasure,
    window: Window | None,
    n_events: int,
    rng: RngStream,
    *,
    target_rate: float = 0.5,
    max_halvings: int = 40,
) -> list[ArrivalEvent]:
    """Arrival order recovered from grid steps of the forward kernel.

    Each step from s proposes a grid cell whose expected number of arrivals
    is ``target_rate``; a cell with two or more arrivals is discarded and the
    cell halved, at most ``max_halvings`` times.  Which atom receives a
    lone arrival is exact under the kernel; the recorded times are the cell
    right ends.
    """
    rho_b = base.mass(window)
    state = PointConfiguration()
    s = 0.0
    out: list[ArrivalEvent] = []
    while len(out) < n_events:
        n_now = count_region(state, base, window)
        width = target_rate * (1.0 - s) / (rho_b + n_now)
        for _ in range(max_halvings + 1):
            t = s + width
            if t >= 1.0 or t == s:
                raise RuntimeError("grid refinement reached the end of the time interval")
            nxt = forward_step(state, TimePair(s, t), base, window, rng)
            inc = difference(nxt, state)
            if inc.total <= 1:
                break
            width /= 2
        else:
            raise RuntimeError(f"more than one arrival after {max_halvings} halvings")
        if inc.total == 1:
            (loc,) = list(inc)
            out.append(ArrivalEvent(t, loc, loc not in state))
        state, s = nxt, t
    return out


def count_region(config: PointConfiguration, base: BaseMeasure, window: Window | None) -> int:
    if window is None:
        return config.total
    return count(config, window)


def superpose_processes(a: Trajectory, b: Trajectory) -> Trajectory:
    if a.times != b.times:
        raise ValueError("trajectories must share the same time grid")
    return Trajectory(a.times, tuple(superpose(x, y) for x, y in zip(a.states, b.states)))


def nest_windows(outer: Window, inner_mass: float, inner_name: str = "inner") -> BaseMeasure:
    """Split ``outer`` into an inner sub-window and the remaining ring."""
    if inner_mass > outer.mass:
        raise ValueError("inner mass exceeds outer mass")
    return BaseMeasure(
        (
            Window(outer.id + SEP + inner_name, inner_mass),
            Window(outer.id + SEP + "ring", outer.mass - inner_mass),
        )
    )


@dataclass(frozen=True)
class CouplingReport:
    violations: int
    inner_counts: tuple[int, ...]
    outer_counts: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.violations == 0


def nested_coupling_check(traj: Trajectory, inner: Window, outer: Window) -> CouplingReport:
    """Every inner table is an outer table of the same size, at every time."""
    if inner.mass > outer.mass:
        raise ValueError("inner mass exceeds outer mass")
    violations = 0
    ic, oc = [], []
    for state in traj.states:
        ins, out = state.restrict(inner), state.restrict(outer)
        for loc, m in ins.items():
            if out[loc] != m:
                violations += 1
        n_in, n_out = count(state, inner), count(state, outer)
        if n_in > n_out:
            violations += 1
        ic.append(n_in)
        oc.append(n_out)
    return CouplingReport(violations, tuple(ic), tuple(oc))
