"""Exponent-space regions and their Type I / Type II lifts.

A point alpha = (alpha_1, ..., alpha_j) stands for primes p_i = x**alpha_i. Regions are
conjunctions of affine inequalities c0 + sum c_i alpha_i {>=, >} 0, combined into sets
through union, intersection and difference. Membership is vectorized over rows of an
(n, dim) array and always accumulates coordinates in index order, so a point gets the
same answer whatever batch it is evaluated in.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .const import LOGGER, MAX_LIFT_COORDS
from .exceptions import ComplexityGuardError, ParameterError
from .model import RegionSpec

# Lifted membership materializes (rows, assignments, blocks) arrays in slices of this size.
_LIFT_BATCH = 1 << 21
# Above this many labelings a lift is tested point by point on reachable block sums.
_MAX_ASSIGNMENTS = 1 << 16


def _as_rows(alpha, dim: int | None = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(alpha, dtype=float))
    if dim is not None and X.shape[1] != dim:
        raise ParameterError(f"expected {dim} coordinates, got {X.shape[1]}")
    return X


@dataclass(frozen=True, eq=False)
class Region:
    """Convex polytope {c0 + C alpha >= 0 (or > 0 where strict)} inside an optional box."""

    dim: int
    coeffs: np.ndarray
    constants: np.ndarray
    strict: np.ndarray
    bounds: np.ndarray | None = None
    name: str = ""

    @classmethod
    def build(
        cls,
        dim: int,
        constraints: list[tuple[list[float], float, bool]] = (),
        bounds: list[list[float]] | None = None,
        name: str = "",
    ) -> Region:
        """Build a region from (coeffs, constant, strict) triples."""
        rows = list(constraints)
        for coeffs, _, _ in rows:
            if len(coeffs) != dim:
                raise ParameterError(f"constraint {coeffs} does not match dim {dim}")
        return cls(
            dim=dim,
            coeffs=np.array([c for c, _, _ in rows], dtype=float).reshape(len(rows), dim),
            constants=np.array([k for _, k, _ in rows], dtype=float),
            strict=np.array([s for _, _, s in rows], dtype=bool),
            bounds=None if bounds is None else np.array(bounds, dtype=float).reshape(dim, 2),
            name=name,
        )

    @classmethod
    def from_spec(cls, spec: RegionSpec) -> Region:
        """Build from a catalog entry."""
        return cls.build(
            spec.dim,
            [(c.coeffs, c.constant, c.strict) for c in spec.constraints],
            spec.bounds,
            spec.name,
        )

    def constrain(
        self, coeffs: list[float], constant: float, strict: bool = False, name: str | None = None
    ) -> Region:
        """Return a copy with one more inequality."""
        if len(coeffs) != self.dim:
            raise ParameterError(f"constraint {coeffs} does not match dim {self.dim}")
        return Region(
            dim=self.dim,
            coeffs=np.vstack([self.coeffs, np.asarray(coeffs, dtype=float)[None, :]]),
            constants=np.append(self.constants, constant),
            strict=np.append(self.strict, strict),
            bounds=self.bounds,
            name=self.name if name is None else name,
        )

    def named(self, name: str) -> Region:
        """Return a renamed copy."""
        return Region(self.dim, self.coeffs, self.constants, self.strict, self.bounds, name)

    def contains_many(self, X: np.ndarray) -> np.ndarray:
        """Membership of every row of X."""
        X = _as_rows(X, self.dim)
        inside = np.ones(X.shape[0], dtype=bool)
        if self.bounds is not None:
            inside &= np.all((X >= self.bounds[:, 0]) & (X <= self.bounds[:, 1]), axis=1)
        for row, constant, strict in zip(self.coeffs, self.constants, self.strict):
            value = np.full(X.shape[0], constant)
            for i in np.flatnonzero(row):
                value = value + row[i] * X[:, i]
            inside &= (value > 0) if strict else (value >= 0)
        return inside

    def bounding_box(
        self, start: tuple[np.ndarray, np.ndarray] | None = None
    ) -> tuple[np.ndarray, np.ndarray] | None:
        """Interval bounds implied by the constraints, or None when they are infeasible."""
        if start is not None:
            lo, hi = start[0].copy(), start[1].copy()
        else:
            lo, hi = np.zeros(self.dim), np.ones(self.dim)
        if self.bounds is not None:
            lo, hi = np.maximum(lo, self.bounds[:, 0]), np.minimum(hi, self.bounds[:, 1])
        for _ in range(4 * self.dim + 4):
            changed = False
            for row, constant in zip(self.coeffs, self.constants):
                # largest value each term can reach inside the current box
                reach = np.where(row > 0, row * hi, row * lo)
                total = constant + reach.sum()
                for i in np.flatnonzero(row):
                    others = total - reach[i]
                    if row[i] > 0:
                        bound = -others / row[i]
                        if bound > lo[i] + 1e-15:
                            lo[i], changed = bound, True
                    else:
                        bound = others / -row[i]
                        if bound < hi[i] - 1e-15:
                            hi[i], changed = bound, True
            if np.any(lo > hi + 1e-12):
                return None
            if not changed:
                break
        return lo, np.maximum(hi, lo)

    @property
    def is_empty(self) -> bool:
        """Return True when the bound propagation proves infeasibility."""
        return self.bounding_box() is None

    def embed(self, dim: int) -> Region:
        """Lift to dim coordinates, the new ones unconstrained."""
        if dim < self.dim:
            raise ParameterError(f"cannot embed dim {self.dim} into {dim}")
        pad = dim - self.dim
        bounds = None
        if self.bounds is not None:
            bounds = np.vstack([self.bounds, np.tile([0.0, 1.0], (pad, 1))])
        return Region(
            dim=dim,
            coeffs=np.hstack([self.coeffs, np.zeros((self.coeffs.shape[0], pad))]),
            constants=self.constants,
            strict=self.strict,
            bounds=bounds,
            name=self.name,
        )

    def __and__(self, other: Shape) -> Shape:
        return intersect(self, other)

    def __or__(self, other: Shape) -> RegionSet:
        return union(self, other)

    def __sub__(self, other: Shape) -> RegionSet:
        return difference(self, other)


class LiftKind(Enum):  # type: ignore
    """How coordinates are grouped before testing the base region."""

    TYPE_I = 1
    TYPE_II = 2


def _check_coords(t: int) -> None:
    if t > MAX_LIFT_COORDS:
        raise ComplexityGuardError(f"{t} coordinates exceed the partition guard {MAX_LIFT_COORDS}")


@lru_cache(maxsize=None)
def lift_assignments(t: int, j: int, kind: LiftKind) -> np.ndarray:
    """0/1 block matrices of shape (m, t, j) for every admissible grouping."""
    _check_coords(t)
    labels = j if kind is LiftKind.TYPE_I else j + 1
    mats = []
    for assignment in itertools.product(range(labels), repeat=t):
        if not set(range(j)) <= set(assignment):
            continue
        mat = np.zeros((t, j))
        for coord, label in enumerate(assignment):
            if label < j:
                mat[coord, label] = 1.0
        mats.append(mat)
    if not mats:
        return np.zeros((0, t, j))
    return np.array(mats)


def block_sum_vectors(alpha, j: int, kind: LiftKind, ceiling: np.ndarray | None = None) -> np.ndarray:
    """Distinct block-sum vectors of one point, grown one coordinate at a time.

    Partial sums above ceiling are dropped (coordinates are nonnegative, sums only grow),
    as are states with more empty blocks than coordinates left to fill them.
    """
    x = np.asarray(alpha, dtype=float).ravel()
    t = x.shape[0]
    _check_coords(t)
    top = np.full(j, np.inf) if ceiling is None else np.asarray(ceiling, dtype=float)
    bits = 1 << np.arange(j)
    sums = np.zeros((1, j))
    used = np.zeros(1, dtype=np.int64)
    for i, value in enumerate(x):
        grown, marks = ([sums], [used]) if kind is LiftKind.TYPE_II else ([], [])
        for label in range(j):
            step = sums.copy()
            step[:, label] += value
            grown.append(step)
            marks.append(used | bits[label])
        sums, used = np.vstack(grown), np.concatenate(marks)
        empty = j - ((used[:, None] & bits) > 0).sum(axis=1)
        keep = np.all(sums <= top + 1e-12, axis=1) & (empty <= t - i - 1)
        sums, used = sums[keep], used[keep]
        if sums.shape[0] == 0:
            break
        key = np.column_stack([np.round(sums, 12), used])
        _, first = np.unique(key, axis=0, return_index=True)
        sums, used = sums[first], used[first]
    return sums[used == (1 << j) - 1]


@dataclass(frozen=True, eq=False)
class LiftedRegion:
    """Points whose coordinates can be grouped into block sums lying in base.

    Type I groups all coordinates into exactly base.dim nonempty blocks. Type II groups
    them into base.dim nonempty blocks plus one leftover block that may be empty. Block
    order is free since every labelling is enumerated. With fewer coordinates than blocks
    the missing blocks are the empty product, exponent 0.
    """

    base: Region | RegionSet
    kind: LiftKind
    width: int | None = None
    name: str = ""

    def contains_many(self, X: np.ndarray) -> np.ndarray:
        """Membership of every row of X (first width coordinates)."""
        X = _as_rows(X)
        if self.width is not None:
            if X.shape[1] < self.width:
                raise ParameterError(f"need {self.width} coordinates, got {X.shape[1]}")
            X = X[:, : self.width]
        j = self.base.dim
        t = X.shape[1]
        if t < j:
            if self.kind is LiftKind.TYPE_II:
                return np.zeros(X.shape[0], dtype=bool)
            X = np.hstack([X, np.zeros((X.shape[0], j - t))])
            t = j
        labels = j if self.kind is LiftKind.TYPE_I else j + 1
        if labels**t > _MAX_ASSIGNMENTS:
            return self._contains_by_blocks(X)
        mats = lift_assignments(t, j, self.kind)
        out = np.zeros(X.shape[0], dtype=bool)
        if mats.shape[0] == 0 or X.shape[0] == 0:
            return out
        step = max(1, _LIFT_BATCH // (mats.shape[0] * j))
        for start in range(0, X.shape[0], step):
            chunk = X[start : start + step]
            sums = np.zeros((chunk.shape[0], mats.shape[0], j))
            for i in range(t):
                sums = sums + chunk[:, i, None, None] * mats[None, :, i, :]
            hits = self.base.contains_many(sums.reshape(-1, j)).reshape(chunk.shape[0], -1)
            out[start : start + step] = hits.any(axis=1)
        return out

    def _contains_by_blocks(self, X: np.ndarray) -> np.ndarray:
        _check_coords(X.shape[1])
        box = self.base.bounding_box()
        out = np.zeros(X.shape[0], dtype=bool)
        if box is None:
            return out
        for n, row in enumerate(X):
            sums = block_sum_vectors(row, self.base.dim, self.kind, ceiling=box[1])
            out[n] = sums.shape[0] > 0 and bool(self.base.contains_many(sums).any())
        return out

    def bounding_box(self) -> None:
        """Lifts do not bound the sampling box."""
        return None

    def embed(self, dim: int) -> LiftedRegion:
        """Lifts act on any number of coordinates."""
        return self

    def __and__(self, other: LiftedRegion | LiftedMeet) -> LiftedMeet:
        return LiftedMeet(parts=(self, other))


@dataclass(frozen=True, eq=False)
class LiftedMeet:
    """Points lying in every one of several lifts."""

    parts: tuple[LiftedRegion | LiftedMeet, ...]
    name: str = ""

    def contains_many(self, X: np.ndarray) -> np.ndarray:
        """Membership of every row of X."""
        X = _as_rows(X)
        inside = np.ones(X.shape[0], dtype=bool)
        for part in self.parts:
            if inside.any():
                inside[inside] = part.contains_many(X[inside])
        return inside

    def bounding_box(self) -> None:
        """Lifts do not bound the sampling box."""
        return None

    def embed(self, dim: int) -> LiftedMeet:
        """Lifts act on any number of coordinates."""
        return self

    def __and__(self, other: LiftedRegion | LiftedMeet) -> LiftedMeet:
        return LiftedMeet(parts=(self, other))


@dataclass(frozen=True, eq=False)
class RegionSet:
    """(union of parts, each also in every required shape) minus the union of excluded."""

    dim: int
    parts: tuple[Shape, ...] = ()
    required: tuple[Shape, ...] = ()
    excluded: tuple[Shape, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        """Check dimensions agree."""
        for shape in (*self.parts, *self.required, *self.excluded):
            shape_dim = getattr(shape, "dim", None)
            if isinstance(shape, (Region, RegionSet)) and shape_dim != self.dim:
                raise ParameterError(f"dim {shape_dim} part in dim {self.dim} set {self.name}")

    def named(self, name: str) -> RegionSet:
        """Return a renamed copy."""
        return RegionSet(self.dim, self.parts, self.required, self.excluded, name)

    def contains_many(self, X: np.ndarray) -> np.ndarray:
        """Membership of every row of X."""
        X = _as_rows(X, self.dim)
        inside = np.zeros(X.shape[0], dtype=bool)
        for part in self.parts:
            rest = ~inside
            if rest.any():
                inside[rest] = part.contains_many(X[rest])
        for shape in self.required:
            if inside.any():
                inside[inside] = shape.contains_many(X[inside])
        for shape in self.excluded:
            if inside.any():
                inside[inside] = ~shape.contains_many(X[inside])
        return inside

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Box around the parts, tightened by the required shapes."""
        boxes = []
        for part in self.parts:
            box = part.bounding_box()
            if box is not None:
                boxes.append(box)
            elif isinstance(part, (LiftedRegion, LiftedMeet)):
                boxes.append((np.zeros(self.dim), np.ones(self.dim)))
        if not boxes:
            return None
        lo = np.min([b[0] for b in boxes], axis=0)
        hi = np.max([b[1] for b in boxes], axis=0)
        # two sweeps so constraints of one required region tighten through another
        for _ in range(2):
            for shape in self.required:
                if isinstance(shape, Region):
                    box = shape.bounding_box(start=(lo, hi))
                elif isinstance(shape, RegionSet):
                    box = shape.bounding_box()
                else:
                    continue
                if box is None:
                    return None
                lo, hi = np.maximum(lo, box[0]), np.minimum(hi, box[1])
                if np.any(lo > hi + 1e-12):
                    return None
        return lo, np.maximum(hi, lo)

    @property
    def is_empty(self) -> bool:
        """Return True when no part survives bound propagation."""
        return self.bounding_box() is None

    def embed(self, dim: int) -> RegionSet:
        """Lift to dim coordinates, the new ones unconstrained."""
        return RegionSet(
            dim,
            tuple(p.embed(dim) for p in self.parts),
            tuple(r.embed(dim) for r in self.required),
            tuple(e.embed(dim) for e in self.excluded),
            self.name,
        )

    def __and__(self, other: Shape) -> Shape:
        return intersect(self, other)

    def __or__(self, other: Shape) -> RegionSet:
        return union(self, other)

    def __sub__(self, other: Shape) -> RegionSet:
        return difference(self, other)


Shape = Union[Region, RegionSet, LiftedRegion, LiftedMeet]


def _dim_of(a: Shape, b: Shape) -> int:
    dims = {s.dim for s in (a, b) if isinstance(s, (Region, RegionSet))}
    if len(dims) != 1:
        raise ParameterError(f"dimension mismatch {dims}")
    return dims.pop()


def union(*shapes: Shape, name: str = "") -> RegionSet:
    """Union of regions of a common dimension."""
    dim = None
    for shape in shapes:
        if isinstance(shape, (Region, RegionSet)):
            if dim is not None and shape.dim != dim:
                raise ParameterError(f"dimension mismatch {dim} vs {shape.dim}")
            dim = shape.dim
    if dim is None:
        raise ParameterError("union needs at least one dimensioned region")
    return RegionSet(dim, parts=tuple(shapes), name=name)


def intersect(a: Shape, b: Shape, name: str = "") -> Shape:
    """Intersection; two polytopes merge their constraint lists."""
    dim = _dim_of(a, b)
    if isinstance(a, Region) and isinstance(b, Region):
        bounds = None
        if a.bounds is not None or b.bounds is not None:
            full = np.tile([0.0, 1.0], (dim, 1))
            ab = a.bounds if a.bounds is not None else full
            bb = b.bounds if b.bounds is not None else full
            bounds = np.column_stack([np.maximum(ab[:, 0], bb[:, 0]), np.minimum(ab[:, 1], bb[:, 1])])
        return Region(
            dim=dim,
            coeffs=np.vstack([a.coeffs, b.coeffs]),
            constants=np.concatenate([a.constants, b.constants]),
            strict=np.concatenate([a.strict, b.strict]),
            bounds=bounds,
            name=name or a.name,
        )
    if isinstance(a, (LiftedRegion, LiftedMeet)):
        a, b = b, a
    return RegionSet(dim, parts=(a,), required=(b,), name=name or getattr(a, "name", ""))


def difference(a: Shape, b: Shape, name: str = "") -> RegionSet:
    """Points of a not in b."""
    dim = _dim_of(a, b) if not isinstance(a, (LiftedRegion, LiftedMeet)) else None
    if dim is None:
        raise ParameterError("difference needs a dimensioned left operand")
    if isinstance(a, RegionSet):
        return RegionSet(dim, a.parts, a.required, (*a.excluded, b), name or a.name)
    return RegionSet(dim, parts=(a,), excluded=(b,), name=name or a.name)


def halfspace(
    dim: int, coeffs: dict[int, float], constant: float, strict: bool = False, name: str = ""
) -> Region:
    """Single inequality constant + sum coeffs[i] alpha_i {>=, >} 0 (0-based indices)."""
    row = [0.0] * dim
    for index, value in coeffs.items():
        if not 0 <= index < dim:
            raise ParameterError(f"coordinate {index} outside dim {dim}")
        row[index] = value
    return Region.build(dim, [(row, constant, strict)], name=name)


def whole(dim: int, name: str = "") -> Region:
    """The unit cube."""
    return Region.build(dim, [], name=name)


def E_region(j: int, zeta: float) -> Region:
    """alpha_i >= zeta for all i, sum alpha <= 1."""
    rows = []
    for i in range(j):
        row = [0.0] * j
        row[i] = 1.0
        rows.append((row, -zeta, False))
    rows.append(([-1.0] * j, 1.0, False))
    return Region.build(j, rows, name=f"E{j}")


def H_region(j: int) -> Region:
    """Decreasing coordinates with 2 alpha_r + alpha_1 + ... + alpha_{r-1} < 1 for r >= 2."""
    rows = []
    for r in range(1, j):
        order = [0.0] * j
        order[r - 1], order[r] = 1.0, -1.0
        rows.append((order, 0.0, True))
        square = [-1.0] * r + [-2.0] + [0.0] * (j - r - 1)
        rows.append((square, 1.0, True))
    return Region.build(j, rows, name=f"H{j}")


def in_E(alpha, zeta: float) -> bool:
    """Every coordinate >= zeta and coordinate sum <= 1."""
    if zeta <= 0:
        raise ParameterError(f"zeta must be positive, got {zeta}")
    X = _as_rows(alpha)
    return bool(E_region(X.shape[1], zeta).contains_many(X)[0])


def in_H(alpha) -> bool:
    """Strictly decreasing coordinates with the square conditions."""
    X = _as_rows(alpha)
    if X.shape[1] < 1:
        raise ParameterError("in_H needs at least one coordinate")
    return bool(H_region(X.shape[1]).contains_many(X)[0])


def contains(r: Region | RegionSet, alpha) -> bool:
    """Exact membership of one point."""
    return bool(r.contains_many(_as_rows(alpha, r.dim))[0])


def contains_many(r: Shape, X) -> np.ndarray:
    """Vectorized membership."""
    return r.contains_many(X)


def lifted_contains(lift: LiftedRegion, alpha) -> bool:
    """Membership of one point in a Type I / Type II lift."""
    X = _as_rows(alpha)
    if X.shape[1] < lift.base.dim:
        raise ParameterError(f"need at least {lift.base.dim} coordinates, got {X.shape[1]}")
    return bool(lift.contains_many(X)[0])


def _region_from_entry(entry: RegionSpec, entries: dict[str, RegionSpec]) -> Region | RegionSet:
    if entry.union_of:
        parts = []
        for ref in entry.union_of:
            if ref not in entries:
                raise ParameterError(f"{entry.name} references unknown region {ref}")
            parts.append(_region_from_entry(entries[ref], entries))
        return RegionSet(entry.dim, parts=tuple(parts), name=entry.name)
    return Region.from_spec(entry)


def load_catalog(path: str | Path | None = None) -> dict[str, Region | RegionSet]:
    """Read the named region catalog."""
    if path is None:
        text = resources.files(__package__).joinpath("data/regions.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    entries = {e["name"]: RegionSpec(**e) for e in raw["regions"]}
    regions = {name: _region_from_entry(entry, entries) for name, entry in entries.items()}
    LOGGER.debug("Loaded %d catalog regions", len(regions))
    return regions


@lru_cache(maxsize=1)
def catalog() -> dict[str, Region | RegionSet]:
    """Return the packaged catalog."""
    return load_catalog()


def region(name: str) -> Region | RegionSet:
    """Look up a catalog region by name."""
    regions = catalog()
    if name not in regions:
        raise ParameterError(f"unknown region {name}")
    return regions[name]


def type_ii_lift(base: Region | RegionSet, width: int | None = None, name: str = "") -> LiftedRegion:
    """Type II lift of base."""
    return LiftedRegion(base=base, kind=LiftKind.TYPE_II, width=width, name=name or f"{base.name}*")


def type_i_lift(base: Region | RegionSet, width: int | None = None, name: str = "") -> LiftedRegion:
    """Type I lift of base."""
    return LiftedRegion(base=base, kind=LiftKind.TYPE_I, width=width, name=name or f"{base.name}*")


def with_width(shape: LiftedRegion | LiftedMeet, width: int) -> LiftedRegion | LiftedMeet:
    """Pin a lift to the first width coordinates so it survives embedding."""
    if isinstance(shape, LiftedMeet):
        return LiftedMeet(parts=tuple(with_width(p, width) for p in shape.parts), name=shape.name)
    return LiftedRegion(base=shape.base, kind=shape.kind, width=width, name=shape.name)
