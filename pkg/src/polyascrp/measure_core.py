"""State types: windows, base measures, point configurations and profiles.

The state space is a finite union of labelled windows.  Window ids are
hierarchical: ``"outer/inner"`` is a sub-window of ``"outer"``, and every
count or profile taken over a window includes its sub-windows.  Atoms are
keyed by a fresh tag drawn from the owning random stream, so a new table
can never coincide with an existing one.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence, TextIO

import numpy as np

SEP = "/"


@dataclass(frozen=True)
class Window:
    """A bounded observation set, known to the simulator only by its mass."""

    id: str
    mass: float

    def __post_init__(self) -> None:
        if not self.mass >= 0.0:
            raise ValueError(f"window {self.id!r}: mass must be >= 0, got {self.mass}")

    def contains(self, window_id: str) -> bool:
        return window_id == self.id or window_id.startswith(self.id + SEP)


@dataclass(frozen=True)
class BaseMeasure:
    """Diffuse intensity given as masses on pairwise disjoint windows."""

    windows: tuple[Window, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "windows", tuple(self.windows))
        ids = [w.id for w in self.windows]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate window ids in {ids}")
        for a in self.windows:
            for b in self.windows:
                if a is not b and a.contains(b.id):
                    raise ValueError(f"windows {a.id!r} and {b.id!r} overlap")

    @classmethod
    def single(cls, mass: float, id: str = "B") -> "BaseMeasure":
        return cls((Window(id, mass),))

    @property
    def total_mass(self) -> float:
        return float(sum(w.mass for w in self.windows))

    def window(self, window_id: str) -> Window:
        for w in self.windows:
            if w.id == window_id:
                return w
        raise KeyError(window_id)

    def region(self, window: Window | None = None) -> tuple[Window, ...]:
        """Base windows lying inside ``window`` (all of them for ``None``)."""
        if window is None:
            return self.windows
        inside = tuple(w for w in self.windows if window.contains(w.id))
        if not inside:
            raise ValueError(f"window {window.id!r} does not belong to the base measure")
        return inside

    def mass(self, window: Window | None = None) -> float:
        return float(sum(w.mass for w in self.region(window)))


class Location(NamedTuple):
    window_id: str
    tag: tuple[int, ...]
    coord: float


def _sort_key(loc: Location) -> tuple:
    return (loc.window_id, loc.tag)


class PointConfiguration:
    """Finite point measure: locations with positive integer multiplicities.

    Instances are immutable; every operation returns a new configuration.
    """

    __slots__ = ("_atoms",)

    def __init__(self, atoms: Mapping[Location, int] | Iterable[tuple[Location, int]] = ()):
        items = atoms.items() if isinstance(atoms, Mapping) else atoms
        clean: dict[Location, int] = {}
        for loc, m in items:
            m = int(m)
            if m < 0:
                raise ValueError(f"negative multiplicity {m} at {loc}")
            if m:
                clean[loc] = clean.get(loc, 0) + m
        self._atoms = {loc: clean[loc] for loc in sorted(clean, key=_sort_key)}

    @classmethod
    def _trusted(cls, atoms: dict[Location, int]) -> "PointConfiguration":
        obj = cls.__new__(cls)
        obj._atoms = {loc: atoms[loc] for loc in sorted(atoms, key=_sort_key)}
        return obj

    def __len__(self) -> int:
        return len(self._atoms)

    def __iter__(self) -> Iterator[Location]:
        return iter(self._atoms)

    def __contains__(self, loc: object) -> bool:
        return loc in self._atoms

    def __getitem__(self, loc: Location) -> int:
        return self._atoms.get(loc, 0)

    def items(self):
        return self._atoms.items()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointConfiguration):
            return NotImplemented
        return self._atoms == other._atoms

    def __hash__(self) -> int:
        return hash(tuple(self._atoms.items()))

    def __add__(self, other: "PointConfiguration") -> "PointConfiguration":
        return superpose(self, other)

    def __repr__(self) -> str:
        body = ", ".join(f"{l.window_id}:{_format_tag(l.tag)}->{m}" for l, m in self.items())
        return f"PointConfiguration({{{body}}})"

    @property
    def total(self) -> int:
        return sum(self._atoms.values())

    def restrict(self, window: Window | None) -> "PointConfiguration":
        if window is None:
            return self
        return PointConfiguration._trusted(
            {loc: m for loc, m in self._atoms.items() if window.contains(loc.window_id)}
        )


EMPTY = PointConfiguration()


def count(config: PointConfiguration, window: Window) -> int:
    return sum(m for loc, m in config.items() if window.contains(loc.window_id))


def superpose(a: PointConfiguration, b: PointConfiguration) -> PointConfiguration:
    if not len(b):
        return a
    if not len(a):
        return b
    out = dict(a.items())
    for loc, m in b.items():
        out[loc] = out.get(loc, 0) + m
    return PointConfiguration._trusted(out)


def dominates(hi: PointConfiguration, lo: PointConfiguration) -> bool:
    """True iff ``hi - lo`` is again a point measure."""
    return all(hi[loc] >= m for loc, m in lo.items())


def difference(hi: PointConfiguration, lo: PointConfiguration) -> PointConfiguration:
    if not dominates(hi, lo):
        raise ValueError("difference requires hi to dominate lo")
    return PointConfiguration((loc, m - lo[loc]) for loc, m in hi.items())


class MultiplicityProfile:
    """Finite measure on {1, 2, ...}: ``counts[j]`` tables of size ``j``."""

    __slots__ = ("_counts",)

    def __init__(self, counts: Mapping[int, int] | None = None):
        clean = {}
        for j, c in (counts or {}).items():
            j, c = int(j), int(c)
            if j < 1:
                raise ValueError(f"profile site must be >= 1, got {j}")
            if c < 0:
                raise ValueError(f"negative count {c} at site {j}")
            if c:
                clean[j] = c
        self._counts = dict(sorted(clean.items()))

    def __getitem__(self, j: int) -> int:
        return self._counts.get(j, 0)

    def items(self):
        return self._counts.items()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiplicityProfile):
            return NotImplemented
        return self._counts == other._counts

    def __hash__(self) -> int:
        return hash(tuple(self._counts.items()))

    def __repr__(self) -> str:
        return f"MultiplicityProfile({self._counts})"

    def __add__(self, other: "MultiplicityProfile") -> "MultiplicityProfile":
        out = Counter(self._counts)
        out.update(other._counts)
        return MultiplicityProfile(out)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self._counts)

    @property
    def total(self) -> int:
        """Number of tables, eta(N)."""
        return sum(self._counts.values())

    @property
    def max_site(self) -> int:
        return max(self._counts, default=0)

    def birth(self) -> "MultiplicityProfile":
        """eta + delta_1."""
        out = dict(self._counts)
        out[1] = out.get(1, 0) + 1
        return MultiplicityProfile(out)

    def hop(self, j: int) -> "MultiplicityProfile":
        """eta - delta_j + delta_{j+1}."""
        if self[j] < 1:
            raise ValueError(f"no table of size {j} to move")
        out = dict(self._counts)
        out[j] -= 1
        out[j + 1] = out.get(j + 1, 0) + 1
        return MultiplicityProfile(out)

    def as_array(self, j_max: int | None = None) -> np.ndarray:
        """Dense counts for sites 1..j_max (index 0 is site 1)."""
        j_max = self.max_site if j_max is None else j_max
        arr = np.zeros(j_max, dtype=np.int64)
        for j, c in self._counts.items():
            if j <= j_max:
                arr[j - 1] = c
        return arr


def profile(config: PointConfiguration, window: Window | None = None) -> MultiplicityProfile:
    sizes = (m for loc, m in config.items() if window is None or window.contains(loc.window_id))
    return MultiplicityProfile(Counter(sizes))


def first_moment(eta: MultiplicityProfile) -> int:
    return sum(j * c for j, c in eta.items())


@dataclass(frozen=True, eq=False)
class SignedProfile:
    """Real-valued function on sites 1..len(values), zero beyond."""

    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("SignedProfile values must be one-dimensional")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, j_max: int) -> "SignedProfile":
        return cls(np.zeros(j_max))

    @classmethod
    def delta(cls, j: int, weight: float = 1.0) -> "SignedProfile":
        arr = np.zeros(j)
        arr[j - 1] = weight
        return cls(arr)

    @classmethod
    def from_mapping(cls, values: Mapping[int, float]) -> "SignedProfile":
        arr = np.zeros(max(values, default=0))
        for j, v in values.items():
            arr[j - 1] = v
        return cls(arr)

    @classmethod
    def from_profile(cls, eta: MultiplicityProfile, j_max: int | None = None) -> "SignedProfile":
        return cls(eta.as_array(j_max).astype(float))

    @property
    def j_max(self) -> int:
        return len(self.values)

    def __getitem__(self, j: int) -> float:
        return float(self.values[j - 1]) if 1 <= j <= len(self.values) else 0.0

    def padded(self, j_max: int) -> np.ndarray:
        out = np.zeros(max(j_max, len(self.values)))
        out[: len(self.values)] = self.values
        return out

    def __add__(self, other: "SignedProfile") -> "SignedProfile":
        n = max(self.j_max, other.j_max)
        return SignedProfile(self.padded(n) + other.padded(n))

    def __sub__(self, other: "SignedProfile") -> "SignedProfile":
        n = max(self.j_max, other.j_max)
        return SignedProfile(self.padded(n) - other.padded(n))

    def __mul__(self, c: float) -> "SignedProfile":
        return SignedProfile(self.values * c)

    __rmul__ = __mul__

    def shifted(self, j: int, amount: float) -> "SignedProfile":
        """Returns self + amount * delta_j."""
        arr = self.padded(j)
        arr[j - 1] += amount
        return SignedProfile(arr)

    def hop(self, j: int, amount: float = 1.0) -> "SignedProfile":
        """Returns self - amount * delta_j + amount * delta_{j+1}."""
        arr = self.padded(j + 1)
        arr[j - 1] -= amount
        arr[j] += amount
        return SignedProfile(arr)

    def pair(self, g: Sequence[float] | np.ndarray) -> float:
        """xi(g) = sum_j g(j) xi(j) with ``g[0]`` the value at site 1."""
        g = np.asarray(g, dtype=float)
        n = min(len(g), len(self.values))
        return float(np.dot(self.values[:n], g[:n]))

    def allclose(self, other: "SignedProfile", atol: float = 0.0) -> bool:
        n = max(self.j_max, other.j_max)
        return bool(np.allclose(self.padded(n), other.padded(n), rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f"SignedProfile({self.values.tolist()})"


@dataclass(frozen=True)
class Trajectory:
    """Monotone path of configurations observed at increasing times in [0, 1)."""

    times: tuple[float, ...]
    states: tuple[PointConfiguration, ...]

    def __post_init__(self) -> None:
        times = tuple(float(t) for t in self.times)
        states = tuple(self.states)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if len(times) != len(states):
            raise ValueError("times and states differ in length")
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise ValueError("trajectory times must be strictly increasing")
        if times and not (0.0 <= times[0] and times[-1] < 1.0):
            raise ValueError("trajectory times must lie in [0, 1)")
        for lo, hi in zip(states, states[1:]):
            if not dominates(hi, lo):
                raise ValueError("trajectory states must be increasing")

    def __len__(self) -> int:
        return len(self.times)

    def at(self, t: float) -> PointConfiguration:
        return self.states[self.times.index(t)]

    def counts(self, window: Window) -> list[int]:
        return [count(s, window) for s in self.states]


# -- CSV ----------------------------------------------------------------------

CONFIG_HEADER = ("window_id", "tag", "coord", "multiplicity")
PROFILE_HEADER = ("j", "count")


def _format_tag(tag: tuple[int, ...]) -> str:
    return ":".join(map(str, tag))


def _parse_tag(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(":"))


def write_configuration_csv(config: PointConfiguration, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CONFIG_HEADER)
    for loc, m in config.items():
        w.writerow((loc.window_id, _format_tag(loc.tag), repr(loc.coord), m))


def read_configuration_csv(fh: TextIO) -> PointConfiguration:
    rows = csv.DictReader(fh)
    return PointConfiguration(
        (Location(r["window_id"], _parse_tag(r["tag"]), float(r["coord"])), int(r["multiplicity"]))
        for r in rows
    )


def write_profile_csv(eta: MultiplicityProfile, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    for j, c in eta.items():
        w.writerow((j, c))


def read_profile_csv(fh: TextIO) -> MultiplicityProfile:
    return MultiplicityProfile({int(r["j"]): int(r["count"]) for r in csv.DictReader(fh)})


def configuration_to_csv(config: PointConfiguration) -> str:
    buf = io.StringIO()
    write_configuration_csv(config, buf)
    return buf.getvalue()
