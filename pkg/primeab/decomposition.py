"""Buchstab decompositions, their intersection and the sieve weight they define.

A term of depth j sums psi(l, cutoff) over k = p_1 ... p_j l with p_1 > ... > p_j distinct
primes whose exponents alpha_i = log p_i / log x lie in the term's region. Splitting a term
with Buchstab's identity replaces it by the same sum at a lower cutoff minus a depth j + 1
term. The weight lambda is the signed sum of every leaf except the discarded ones, so
lambda = rho - (sum of discarded leaves) holds pointwise.
"""

from __future__ import annotations

import itertools
import json
import math
from collections.abc import Iterator
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .arith import Factorization, factor_range
from .buchstab import BuchstabEvaluator
from .const import (
    DEFAULT_REGULARITY_SAMPLES,
    DEFAULT_SEED,
    EXPONENT_TOLERANCE,
    IMPORTED_D2_DEFICIT,
    LOGGER,
    ROOT_CUTOFF,
    ZETA,
)
from .coordinator import ChunkCoordinator, split_range
from .deficit import integrate_deficit
from .exceptions import (
    ParameterError,
    UndeterminedError,
    UnsupportedStructureError,
)
from .model import DecompositionPlan, DeficitResult, LambdaProfile, McParams, TermSpec
from .regions import (
    H_region,
    LiftedMeet,
    LiftedRegion,
    Region,
    RegionSet,
    Shape,
    difference,
    halfspace,
    intersect,
    region,
    type_i_lift,
    type_ii_lift,
    union,
    whole,
    with_width,
)

LAMBDA_CHUNK = 20_000


class Classification(Enum):  # type: ignore
    """What happens to a term."""

    REGULAR = "regular"
    DISCARD = "discard"
    DECOMPOSE = "decompose"
    FINAL = "final"


class CutoffKind(Enum):  # type: ignore
    """Sieving limit of the remaining variable."""

    CONSTANT = "constant"
    PREVIOUS_PRIME = "previous_prime"
    PIECEWISE = "piecewise"


@dataclass(frozen=True)
class PiecewiseLinear:
    """z(alpha_1) = a_i + s_i alpha_1 on [b_i, b_{i+1}); pieces are (b_i, a_i, s_i)."""

    pieces: tuple[tuple[float, float, float], ...]

    @classmethod
    def constant(cls, value: float) -> PiecewiseLinear:
        """The constant function."""
        return cls(pieces=((0.0, value, 0.0),))

    def __call__(self, a1) -> np.ndarray:
        a1 = np.asarray(a1, dtype=float)
        out = np.full(a1.shape, np.nan)
        for i, (start, a, s) in enumerate(self.pieces):
            end = self.pieces[i + 1][0] if i + 1 < len(self.pieces) else np.inf
            mask = (a1 >= start) & (a1 < end)
            out[mask] = a + s * a1[mask]
        return out

    def bounds(self) -> tuple[float, float]:
        """Smallest and largest value on [0, 1]."""
        values = []
        for i, (start, a, s) in enumerate(self.pieces):
            end = self.pieces[i + 1][0] if i + 1 < len(self.pieces) else 1.0
            values += [a + s * start, a + s * end]
        return min(values), max(values)

    def minimum(self, other: PiecewiseLinear) -> PiecewiseLinear:
        """Pointwise minimum on the merged breakpoints, splitting a piece where the two lines cross."""
        starts = sorted({p[0] for p in self.pieces} | {p[0] for p in other.pieces})
        merged = []
        for i, start in enumerate(starts):
            end = starts[i + 1] if i + 1 < len(starts) else 1.0
            mid = 0.5 * (start + end)
            mine, theirs = self._piece_at(mid), other._piece_at(mid)
            cross = None
            if mine[1] != theirs[1]:
                cross = (theirs[0] - mine[0]) / (mine[1] - theirs[1])
            if cross is not None and start < cross < end:
                lower_first = mine if mine[0] + mine[1] * start <= theirs[0] + theirs[1] * start else theirs
                lower_second = theirs if lower_first is mine else mine
                merged += [(start, *lower_first), (cross, *lower_second)]
            else:
                lower = mine if mine[0] + mine[1] * mid <= theirs[0] + theirs[1] * mid else theirs
                merged.append((start, *lower))
        return PiecewiseLinear(pieces=tuple(merged))

    def _piece_at(self, a1: float) -> tuple[float, float]:
        chosen = self.pieces[0]
        for piece in self.pieces:
            if piece[0] <= a1:
                chosen = piece
        return chosen[1], chosen[2]

    def at_least(self, dim: int, index: int) -> RegionSet:
        """Region alpha_index >= z(alpha_1) in dim coordinates (0-based index)."""
        parts = []
        for i, (start, a, s) in enumerate(self.pieces):
            end = self.pieces[i + 1][0] if i + 1 < len(self.pieces) else None
            rows = [_row(dim, {index: 1.0, 0: -s} if index != 0 else {0: 1.0 - s}, -a, False)]
            rows.append(_row(dim, {0: 1.0}, -start, False))
            if end is not None:
                rows.append(_row(dim, {0: -1.0}, end, True))
            parts.append(Region.build(dim, rows))
        return RegionSet(dim, parts=tuple(parts))

    def below(self, dim: int, index: int) -> RegionSet:
        """Region alpha_index < z(alpha_1)."""
        return difference(whole(dim), self.at_least(dim, index))


def _row(dim: int, coeffs: dict[int, float], constant: float, strict: bool):
    row = [0.0] * dim
    for i, v in coeffs.items():
        row[i] += v
    return (row, constant, strict)


@dataclass(frozen=True)
class Cutoff:
    """Sieving limit psi(l, x**z) of a term."""

    kind: CutoffKind
    exponent: float = 0.0
    fn: PiecewiseLinear | None = None
    # sieve by primes up to and including x**exponent
    inclusive: bool = False

    @classmethod
    def constant(cls, exponent: float, inclusive: bool = False) -> Cutoff:
        """x**exponent."""
        return cls(kind=CutoffKind.CONSTANT, exponent=exponent, inclusive=inclusive)

    @classmethod
    def previous_prime(cls) -> Cutoff:
        """The last prime variable."""
        return cls(kind=CutoffKind.PREVIOUS_PRIME)

    @classmethod
    def piecewise(cls, fn: PiecewiseLinear) -> Cutoff:
        """x**z(alpha_1)."""
        if len(fn.pieces) == 1 and fn.pieces[0][2] == 0.0:
            return cls.constant(fn.pieces[0][1])
        return cls(kind=CutoffKind.PIECEWISE, fn=fn)

    def as_function(self) -> PiecewiseLinear:
        """Cutoff exponent as a function of alpha_1."""
        if self.kind is CutoffKind.CONSTANT:
            return PiecewiseLinear.constant(self.exponent)
        if self.kind is CutoffKind.PIECEWISE:
            return self.fn
        raise ParameterError("previous-prime cutoff has no closed form")

    def to_text(self) -> str:
        """Serialized tag."""
        if self.kind is CutoffKind.CONSTANT:
            return f"constant:{self.exponent!r}"
        if self.kind is CutoffKind.PIECEWISE:
            return "piecewise"
        return "previous_prime"


@dataclass(frozen=True, eq=False)
class Term:
    """Signed sieve sum of a given depth over a region."""

    depth: int
    region: Shape
    cutoff: Cutoff
    sign: int
    classification: Classification = Classification.FINAL
    children: tuple[Term, ...] = ()
    name: str = ""

    def leaves(self) -> Iterator[Term]:
        """Terms that are not decomposed further."""
        if self.classification is Classification.DECOMPOSE and self.children:
            for child in self.children:
                yield from child.leaves()
        else:
            yield self


@dataclass(frozen=True, eq=False)
class Layout:
    """Parameters from which a decomposition is built."""

    z0: float
    z1: PiecewiseLinear
    zeta: float
    K: int
    typeI: LiftedRegion | LiftedMeet
    typeII: LiftedRegion | LiftedMeet
    continue_region: Shape | None
    discard_region: Shape | None
    typeI_exponent: float = ZETA


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Tree of Buchstab applications with classified leaves."""

    z0_exponent: float
    z1_exponent_fn: PiecewiseLinear
    K: int
    zeta: float
    root: Term
    typeI_domain: LiftedRegion | LiftedMeet
    typeII_domain: LiftedRegion | LiftedMeet
    role_reversal: bool = False
    imported_deficit: float = 0.0
    regular_regions: tuple[Shape, ...] = ()
    rr_free_region: Shape | None = None
    depth2: dict[str, Shape] = field(default_factory=dict)
    name: str = ""
    typeI_exponent: float = ZETA

    def __post_init__(self) -> None:
        """Check K is even."""
        if self.K % 2:
            raise ParameterError(f"K must be even, got {self.K}")

    @property
    def terms(self) -> list[Term]:
        """All leaves in tree order."""
        return list(self.root.leaves())

    def discards(self) -> list[Term]:
        """Leaves dropped from lambda."""
        return [t for t in self.terms if t.classification is Classification.DISCARD]


def root_term() -> Term:
    """psi(k, x^(1/2)) sieving p <= x^(1/2), the prime indicator on (x/2, x]."""
    return Term(
        depth=0,
        region=Region.build(0, []),
        cutoff=Cutoff.constant(ROOT_CUTOFF, inclusive=True),
        sign=1,
        classification=Classification.DECOMPOSE,
        name="root",
    )


def _cutoff_below(cutoff: Cutoff, dim: int) -> Shape:
    """alpha_dim < cutoff, in dim coordinates (1-based new coordinate)."""
    index = dim - 1
    if cutoff.kind is CutoffKind.PREVIOUS_PRIME:
        if dim < 2:
            raise ParameterError("previous-prime cutoff needs a previous prime")
        return halfspace(dim, {index - 1: 1.0, index: -1.0}, 0.0, strict=True)
    if cutoff.kind is CutoffKind.CONSTANT:
        if cutoff.inclusive:
            return halfspace(dim, {index: -1.0}, cutoff.exponent + EXPONENT_TOLERANCE)
        return halfspace(dim, {index: -1.0}, cutoff.exponent, strict=True)
    return cutoff.fn.below(dim, index)


def _cutoff_at_least(cutoff: Cutoff, dim: int) -> Shape:
    index = dim - 1
    if cutoff.kind is CutoffKind.CONSTANT:
        return halfspace(dim, {index: 1.0}, -cutoff.exponent)
    if cutoff.kind is CutoffKind.PIECEWISE:
        return cutoff.fn.at_least(dim, index)
    raise ParameterError("lower cutoff must be constant or piecewise")


def _embed(shape: Shape, dim: int) -> Shape:
    if isinstance(shape, Region) and shape.dim == 0:
        return whole(dim)
    return shape.embed(dim)


def buchstab_split(t: Term, z_lo: Cutoff, z_hi: Cutoff | None = None) -> tuple[Term, Term]:
    """psi(l, z_hi) = psi(l, z_lo) - sum over z_lo <= p < z_hi of psi(l / p, p).

    The new prime is always kept below the previous one, so a constant or piecewise z_hi
    at depth >= 1 must not exceed the previous prime.
    """
    if z_hi is None:
        z_hi = t.cutoff
    if z_lo.kind is CutoffKind.PREVIOUS_PRIME:
        raise ParameterError("lower cutoff must be constant or piecewise")
    lo_min, lo_max = z_lo.as_function().bounds()
    if z_hi.kind is not CutoffKind.PREVIOUS_PRIME:
        hi_min, hi_max = z_hi.as_function().bounds()
        if z_lo.kind is CutoffKind.CONSTANT and z_hi.kind is CutoffKind.CONSTANT:
            if z_lo.exponent > z_hi.exponent:
                raise ParameterError(f"cutoff order violated: {z_lo.exponent} > {z_hi.exponent}")
        elif lo_min > hi_max:
            raise ParameterError("cutoff order violated everywhere")
    else:
        box = t.region.bounding_box() if t.depth else None
        if box is not None and lo_min > box[1][t.depth - 1]:
            raise ParameterError(f"cutoff {lo_min} above every previous prime")

    dim = t.depth + 1
    new_region = intersect(
        intersect(_embed(t.region, dim), _cutoff_at_least(z_lo, dim)),
        _cutoff_below(z_hi, dim),
        name=f"{t.name}>",
    )
    if dim >= 2 and z_hi.kind is not CutoffKind.PREVIOUS_PRIME:
        new_region = intersect(
            new_region, _cutoff_below(Cutoff.previous_prime(), dim), name=new_region.name
        )
    same = Term(t.depth, t.region, z_lo, t.sign, Classification.FINAL, name=f"{t.name}@")
    deeper = Term(dim, new_region, Cutoff.previous_prime(), -t.sign, Classification.FINAL, name=f"{t.name}>")
    return same, deeper


def _with(
    term: Term,
    classification: Classification,
    name: str,
    children: tuple[Term, ...] = (),
    region: Shape | None = None,
) -> Term:
    return replace(
        term,
        classification=classification,
        name=name,
        children=children,
        region=term.region if region is None else region,
    )


def _named(shape: Shape, name: str) -> Shape:
    if isinstance(shape, (Region, RegionSet)):
        return shape.named(name)
    return shape


def _partition(
    parent: Shape, regular: Shape | None, pieces: list[tuple[str, Shape | None]]
) -> list[tuple[str, Shape]]:
    """Split parent into regular, then each named piece minus what came before, then the rest."""
    out = []
    taken: list[Shape] = []
    if regular is not None:
        out.append(("regular", intersect(parent, regular)))
        taken.append(regular)
    for label, shape in pieces:
        if shape is None:
            continue
        piece = intersect(parent, shape)
        for prior in taken:
            piece = difference(piece, prior)
        out.append((label, piece))
        taken.append(shape)
    rest = parent
    for prior in taken:
        rest = difference(rest, prior)
    out.append(("final", rest))
    return out


def build_decomposition(layout: Layout, name: str = "") -> Decomposition:
    """Build the tree: split at z0, at z1, classify depth 2, split twice more where continuing."""
    if layout.K not in (2, 4):
        raise ParameterError(f"layouts support K in (2, 4), got {layout.K}")
    root = root_term()
    const0, f1 = buchstab_split(root, Cutoff.constant(layout.z0))
    const1, f2 = buchstab_split(f1, Cutoff.piecewise(layout.z1))
    const0 = _with(const0, Classification.REGULAR, "Z0")
    const1 = _with(const1, Classification.REGULAR, "Z1")

    pieces = _partition(
        f2.region,
        with_width(layout.typeII, 2),
        [("proceed", layout.continue_region if layout.K == 4 else None), ("discard", layout.discard_region)],
    )
    by_label = dict(pieces)
    f2_children = [
        _with(f2, Classification.REGULAR, "F1", region=_named(by_label["regular"], "F1")),
    ]
    depth2 = {"F": f2.region, "regular": by_label["regular"], "final": by_label["final"]}
    if "discard" in by_label:
        f2_children.append(_with(f2, Classification.DISCARD, "F2", region=_named(by_label["discard"], "F2")))
        depth2["discard"] = by_label["discard"]
    if "proceed" in by_label:
        proceed = _with(f2, Classification.DECOMPOSE, "F3", region=_named(by_label["proceed"], "F3"))
        proceed = _decompose_twice(proceed, layout.zeta, with_width(layout.typeII, 4))
        f2_children.append(proceed)
        depth2["proceed"] = by_label["proceed"]
    f2_children.append(_with(f2, Classification.FINAL, "FINAL2", region=_named(by_label["final"], "FINAL2")))

    f2 = _with(f2, Classification.DECOMPOSE, "f2", tuple(f2_children))
    f1 = _with(f1, Classification.DECOMPOSE, "f1", (const1, f2))
    root = _with(root, Classification.DECOMPOSE, "root", (const0, f1))
    d = Decomposition(
        z0_exponent=layout.z0,
        z1_exponent_fn=layout.z1,
        K=layout.K,
        zeta=layout.zeta,
        root=root,
        typeI_domain=layout.typeI,
        typeII_domain=layout.typeII,
        depth2=depth2,
        name=name,
        typeI_exponent=layout.typeI_exponent,
    )
    LOGGER.debug("Built decomposition %s with %d leaves", name, len(d.terms))
    return d


def _decompose_twice(term: Term, zeta: float, regular: Shape | None) -> Term:
    """Two more Buchstab steps at zeta; depth 4 split into regular, discard (inside H_4) and final."""
    const2, t3 = buchstab_split(term, Cutoff.constant(zeta))
    const3, t4 = buchstab_split(t3, Cutoff.constant(zeta))
    reg = intersect(t4.region, regular) if regular is not None else None
    unsettled = t4.region if regular is None else difference(t4.region, regular)
    discard = intersect(unsettled, H_region(4), name="G")
    final = difference(unsettled, H_region(4), name="FINAL4")
    children4 = []
    if reg is not None:
        children4.append(_with(t4, Classification.REGULAR, "G_REG", region=_named(reg, "G_REG")))
    children4.append(_with(t4, Classification.DISCARD, "G", region=_named(discard, "G")))
    children4.append(_with(t4, Classification.FINAL, "FINAL4", region=_named(final, "FINAL4")))
    t4 = _with(t4, Classification.DECOMPOSE, "f4", tuple(children4))
    t3 = _with(t3, Classification.DECOMPOSE, "f3", (_with(const3, Classification.REGULAR, "F3x"), t4))
    return _with(term, Classification.DECOMPOSE, term.name, (_with(const2, Classification.REGULAR, "F3@"), t3))


def d1_layout() -> Layout:
    """z0 = z1 = zeta = 1/10, Type I region R2, Type II window S1, F3 continued, F2 discarded."""
    return Layout(
        z0=ZETA,
        z1=PiecewiseLinear.constant(ZETA),
        zeta=ZETA,
        K=4,
        typeI=type_i_lift(region("R2")),
        typeII=type_ii_lift(region("S1")),
        continue_region=region("F3"),
        discard_region=region("F2"),
    )


def build_d1() -> Decomposition:
    """The decomposition for the first family of functionals."""
    return build_decomposition(d1_layout(), name="D1")


def stub_decomposition(
    deficit: float = IMPORTED_D2_DEFICIT,
    regular: Shape | None = None,
    rr_free: Shape | None = None,
    role_reversal: bool = True,
    name: str = "D2",
) -> Decomposition:
    """Imported decomposition known only through its deficit and regularity regions."""
    root = root_term()
    return Decomposition(
        z0_exponent=ZETA,
        z1_exponent_fn=PiecewiseLinear.constant(ZETA),
        K=0,
        zeta=ZETA,
        root=_with(root, Classification.FINAL, "root"),
        typeI_domain=type_i_lift(region("R2")),
        typeII_domain=type_ii_lift(region("S1")),
        role_reversal=role_reversal,
        imported_deficit=deficit,
        regular_regions=(region("PHI2_REGULAR") if regular is None else regular,),
        rr_free_region=region("RR_FREE") if rr_free is None else rr_free,
        name=name,
    )


def _sample_box(shape: Shape, dim: int, samples: int, seed: int) -> np.ndarray:
    box = shape.bounding_box()
    if box is None:
        return np.zeros((0, dim))
    rng = np.random.Generator(np.random.Philox(key=seed))
    X = box[0] + rng.random((samples, dim)) * (box[1] - box[0])
    return X[shape.contains_many(X)]


def classify(
    t: Term,
    typeI: LiftedRegion | LiftedMeet,
    typeII: LiftedRegion | LiftedMeet,
    samples: int = DEFAULT_REGULARITY_SAMPLES,
    seed: int = DEFAULT_SEED,
    zeta: float = ZETA,
    typeI_exponent: float = ZETA,
    fiber_points: int = 16,
) -> Classification:
    """Regular, Decompose or Discard by sampling the term's region with a zero-failure rule."""
    dim = t.depth
    X = _sample_box(t.region, dim, samples, seed)
    if X.shape[0] == 0:
        raise UndeterminedError(f"no sample of {samples} landed in {t.name or 'region'}")
    regular = typeII.contains_many(X)
    if t.cutoff.kind is CutoffKind.CONSTANT and t.cutoff.exponent <= typeI_exponent:
        regular |= typeI.contains_many(X)
    share = regular.mean()
    if share == 1.0:
        return Classification.REGULAR
    if share > 0.0:
        raise UndeterminedError(f"{t.name or 'region'} is {share:.3%} regular, split it first")
    # two more steps stay of Type I when every alpha_{j+1} in [zeta, alpha_j) keeps the lift
    ok = typeI.contains_many(X)
    for frac in np.linspace(0.0, 1.0, fiber_points):
        nxt = zeta + frac * (X[:, -1] - zeta)
        ok &= typeI.contains_many(np.column_stack([X, nxt]))
    if ok.all():
        return Classification.DECOMPOSE
    LOGGER.debug("%s: %.3f decomposable share, discarding", t.name, ok.mean())
    return Classification.DISCARD


def _check_rr_scope(d1: Decomposition, d2: Decomposition, samples: int, seed: int) -> None:
    """The continued region outside d2's reversal-free zone must be regular for d2."""
    if d1.K > 4:
        raise UnsupportedStructureError(f"{d1.name} applies Buchstab {d1.K} > 4 times")
    proceed = d1.depth2.get("proceed")
    if proceed is None:
        return
    outside = proceed if d2.rr_free_region is None else difference(proceed, d2.rr_free_region)
    X = _sample_box(outside, 2, samples, seed)
    if X.shape[0] == 0:
        return
    covered = np.zeros(X.shape[0], dtype=bool)
    for shape in d2.regular_regions:
        covered |= shape.contains_many(X)
    if not covered.all():
        bad = X[~covered][0].tolist()
        raise UnsupportedStructureError(f"role-reversal region reaches {bad}, not regular for {d2.name}")


def intersect_decompositions(
    d1: Decomposition,
    d2: Decomposition,
    samples: int = DEFAULT_REGULARITY_SAMPLES,
    seed: int = DEFAULT_SEED,
) -> Decomposition:
    """Decomposition permissible for both families with deficit at most the sum."""
    if d1.zeta != d2.zeta:
        raise ParameterError(f"zeta differs: {d1.zeta} vs {d2.zeta}")
    if d1.role_reversal:
        raise UnsupportedStructureError(f"{d1.name} uses role-reversals")
    if d2.role_reversal:
        _check_rr_scope(d1, d2, samples, seed)
        LOGGER.info("Combining %s with imported %s", d1.name, d2.name)
        return replace(
            d1,
            imported_deficit=d1.imported_deficit + d2.imported_deficit,
            name=f"{d1.name}&{d2.name}",
        )
    for d in (d1, d2):
        if "F" not in d.depth2:
            raise UnsupportedStructureError(f"{d.name} has no explicit depth-2 layout")

    z0 = min(d1.z0_exponent, d2.z0_exponent)
    z1 = d1.z1_exponent_fn.minimum(d2.z1_exponent_fn)
    K = max(d1.K, d2.K)
    root = root_term()
    const0, f1 = buchstab_split(root, Cutoff.constant(z0))
    const1, f2 = buchstab_split(f1, Cutoff.piecewise(z1))
    full = f2.region

    def widened(d: Decomposition) -> Shape:
        # points outside d's own F sit in its constant-cutoff terms
        return union(d.depth2["regular"], difference(full, d.depth2["F"]))

    wide1, wide2 = widened(d1), widened(d2)
    regular = intersect(wide1, wide2, name="F1")
    discards = [d.depth2["discard"] for d in (d1, d2) if "discard" in d.depth2]
    discard = difference(union(*discards), regular, name="F2") if discards else None
    finals = union(d1.depth2["final"], d2.depth2["final"])
    taken = [regular] + ([discard] if discard is not None else [])
    proceeds = [d.depth2["proceed"] for d in (d1, d2) if "proceed" in d.depth2]
    proceed = None
    if K == 4 and proceeds:
        # a point left over by both splits lies in one of the continued regions
        proceed = intersect(full, union(*proceeds))
        for prior in (*taken, finals):
            proceed = difference(proceed, prior)
    final = full
    for prior in taken + ([proceed] if proceed is not None else []):
        final = difference(final, prior)

    children = [_with(f2, Classification.REGULAR, "F1", region=_named(intersect(full, regular), "F1"))]
    depth2 = {"F": full, "regular": intersect(full, regular), "final": final}
    if discard is not None:
        children.append(_with(f2, Classification.DISCARD, "F2", region=_named(intersect(full, discard), "F2")))
        depth2["discard"] = intersect(full, discard)
    if proceed is not None:
        deep_regular = intersect(
            union(wide1.embed(4), with_width(d1.typeII_domain, 4)),
            union(wide2.embed(4), with_width(d2.typeII_domain, 4)),
        )
        step = _with(f2, Classification.DECOMPOSE, "F3", region=_named(proceed, "F3"))
        children.append(_decompose_twice(step, d1.zeta, deep_regular))
        depth2["proceed"] = proceed
    children.append(_with(f2, Classification.FINAL, "FINAL2", region=_named(final, "FINAL2")))

    f2 = _with(f2, Classification.DECOMPOSE, "f2", tuple(children))
    f1 = _with(f1, Classification.DECOMPOSE, "f1", (_with(const1, Classification.REGULAR, "Z1"), f2))
    root = _with(root, Classification.DECOMPOSE, "root", (_with(const0, Classification.REGULAR, "Z0"), f1))
    LOGGER.info("Intersected %s and %s", d1.name, d2.name)
    return Decomposition(
        z0_exponent=z0,
        z1_exponent_fn=z1,
        K=K,
        zeta=d1.zeta,
        root=root,
        typeI_domain=d1.typeI_domain & d2.typeI_domain,
        typeII_domain=d1.typeII_domain & d2.typeII_domain,
        imported_deficit=d1.imported_deficit + d2.imported_deficit,
        depth2=depth2,
        name=f"{d1.name}&{d2.name}",
        typeI_exponent=min(d1.typeI_exponent, d2.typeI_exponent),
    )


def deficit_of(
    d: Decomposition, ev: BuchstabEvaluator, p: McParams, threads: int | None = None
) -> DeficitResult:
    """Sum of the deficit integrals over the discarded leaves, plus any imported deficit."""
    total = DeficitResult(value=0.0, std_error=0.0, samples=0, region_name=d.name)
    components: dict[str, float] = {}
    for term in d.discards():
        if term.sign != 1:
            raise ParameterError(f"discarded term {term.name} enters with sign {term.sign}")
        shape = intersect(term.region, H_region(term.depth), name=term.name)
        part = integrate_deficit(shape, term.depth, ev, p, threads)
        components[term.name] = components.get(term.name, 0.0) + part.value
        total = total + part
    if d.imported_deficit:
        components["imported"] = d.imported_deficit
    return DeficitResult(
        value=total.value + d.imported_deficit,
        std_error=total.std_error,
        samples=total.samples,
        region_name=d.name,
        components=components,
    )


# pointwise evaluation


def exponent(values, x: int) -> np.ndarray:
    """log p / log x, the one conversion used everywhere."""
    return np.log(np.asarray(values, dtype=float)) / math.log(x)


@dataclass
class _Candidates:
    """Prime tuples of one depth across a batch of integers."""

    owner: list[int] = field(default_factory=list)
    primes: list[tuple[int, ...]] = field(default_factory=list)
    lpf: list[int] = field(default_factory=list)


def _least_prime(rest: int, fac: Factorization) -> int:
    if rest == 1:
        return 0
    for p in fac.primes:
        if rest % p == 0:
            return p
    raise ParameterError(f"factorization of {fac.n} is incomplete")


def _candidates(facs: list[Factorization], max_depth: int, floor: float, x: int) -> list[_Candidates]:
    out = [_Candidates() for _ in range(max_depth + 1)]
    for owner, fac in enumerate(facs):
        if math.prod(p**e for p, e in fac.factors) != fac.n:
            raise ParameterError(f"factorization of {fac.n} is incomplete")
        big = [p for p in reversed(fac.primes) if math.log(p) / math.log(x) >= floor - EXPONENT_TOLERANCE]
        out[0].owner.append(owner)
        out[0].primes.append(())
        out[0].lpf.append(_least_prime(fac.n, fac))
        for depth in range(1, max_depth + 1):
            for combo in itertools.combinations(big, depth):
                rest = fac.n // math.prod(combo)
                out[depth].owner.append(owner)
                out[depth].primes.append(combo)
                out[depth].lpf.append(_least_prime(rest, fac))
    return out


def _term_values(term: Term, cands: _Candidates, x: int, count: int) -> np.ndarray:
    values = np.zeros(count)
    if not cands.owner:
        return values
    owner = np.asarray(cands.owner)
    lpf = np.asarray(cands.lpf, dtype=np.int64)
    j = term.depth
    if j:
        primes = np.asarray(cands.primes, dtype=np.int64).reshape(-1, j)
        alphas = exponent(primes, x)
        inside = term.region.contains_many(alphas)
        last = primes[:, -1]
    else:
        primes = np.zeros((len(cands.owner), 0), dtype=np.int64)
        alphas = np.zeros((len(cands.owner), 0))
        inside = np.ones(len(cands.owner), dtype=bool)
        last = np.zeros(len(cands.owner), dtype=np.int64)
    if inside.any():
        lpf_in = lpf[inside]
        if term.cutoff.kind is CutoffKind.PREVIOUS_PRIME:
            ok = (lpf_in == 0) | (lpf_in >= last[inside])
        else:
            unit = lpf_in == 0
            lpf_alpha = exponent(np.where(unit, 2, lpf_in), x)
            point = np.column_stack([alphas[inside], lpf_alpha])
            if term.cutoff.kind is CutoffKind.CONSTANT and term.cutoff.inclusive:
                ok = unit | (lpf_alpha > term.cutoff.exponent + EXPONENT_TOLERANCE)
            elif term.cutoff.kind is CutoffKind.CONSTANT:
                ok = unit | (lpf_alpha >= term.cutoff.exponent)
            else:
                ok = unit | term.cutoff.fn.at_least(j + 1, j).contains_many(point)
        np.add.at(values, owner[inside][ok], term.sign)
    return values


def _floor(d: Decomposition) -> float:
    lows = [d.zeta, d.z0_exponent, d.z1_exponent_fn.bounds()[0]]
    return min(lows)


def lambda_values(d: Decomposition, facs: list[Factorization], x: int, terms: list[Term] | None = None) -> np.ndarray:
    """Signed sum of the given terms (default: every kept leaf) for each factorization."""
    if terms is None:
        terms = [t for t in d.terms if t.classification is not Classification.DISCARD]
    max_depth = max((t.depth for t in terms), default=0)
    cands = _candidates(facs, max_depth, _floor(d), x)
    values = np.zeros(len(facs))
    for term in terms:
        values += _term_values(term, cands[term.depth], x, len(facs))
    return values


def evaluate_lambda(d: Decomposition, k: int, fac: Factorization, x: int) -> float:
    """lambda(k) for x/2 < k <= x."""
    if not x // 2 < k <= x:
        raise ParameterError(f"k={k} outside (x/2, x] for x={x}")
    if fac.n != k:
        raise ParameterError(f"factorization of {fac.n} given for {k}")
    return float(lambda_values(d, [fac], x)[0])


def term_value(t: Term, d: Decomposition, fac: Factorization, x: int) -> float:
    """Pointwise value of a single term."""
    return float(lambda_values(d, [fac], x, [t])[0])


def default_h0(x: int) -> int:
    """x / log^2 x, the desk-scale window."""
    return max(1, int(x / math.log(x) ** 2))


def lambda_profile(
    d: Decomposition,
    x: int,
    y: int | None = None,
    h0: int | None = None,
    threads: int | None = None,
) -> LambdaProfile:
    """Sum lambda and rho over (y - h0, y]."""
    if h0 is None:
        h0 = default_h0(x)
    if y is None:
        y = x
    lo = y - h0
    if not (x / 2 <= lo < y <= x):
        raise ParameterError(f"window ({lo}, {y}] not inside (x/2, x]")

    def run(chunk: tuple[int, int]) -> tuple[float, int, int]:
        facs = factor_range(chunk[0], chunk[1] - 1)
        lam = lambda_values(d, facs, x)
        rho = np.array([1 if len(f.factors) == 1 and f.factors[0][1] == 1 else 0 for f in facs])
        return float(lam.sum()), int(rho.sum()), int(np.count_nonzero(lam > rho))

    chunks = list(split_range(lo + 1, y + 1, LAMBDA_CHUNK))
    sum_lambda, sum_rho, violations = 0.0, 0, 0
    for lam, rho, bad in ChunkCoordinator(threads).map(run, chunks):
        sum_lambda += lam
        sum_rho += rho
        violations += bad
    if violations:
        LOGGER.warning("%d integers with lambda > rho in (%d, %d]", violations, lo, y)
    empirical = 1.0 - sum_lambda / sum_rho if sum_rho else 0.0
    LOGGER.info("Lambda profile x=%d window (%d, %d]: deficit %.4f", x, lo, y, empirical)
    return LambdaProfile(
        x=x,
        window_lo=lo,
        window_hi=y,
        sum_lambda=sum_lambda,
        sum_rho=sum_rho,
        empirical_deficit=empirical,
        violations=violations,
    )


def profile_over(d: Decomposition, ks: list[int], facs: list[Factorization], x: int) -> LambdaProfile:
    """Profile over an explicit list of integers."""
    lam = lambda_values(d, facs, x)
    rho = np.array([1 if len(f.factors) == 1 and f.factors[0][1] == 1 else 0 for f in facs])
    sum_rho = int(rho.sum())
    return LambdaProfile(
        x=x,
        window_lo=min(ks) - 1,
        window_hi=max(ks),
        sum_lambda=float(lam.sum()),
        sum_rho=sum_rho,
        empirical_deficit=1.0 - float(lam.sum()) / sum_rho if sum_rho else 0.0,
        violations=int(np.count_nonzero(lam > rho)),
    )


# serialization


def dump_plan(
    d: Decomposition,
    typeI_ref: str = "R2",
    typeII_ref: str = "S1",
    continue_ref: str | None = "F3",
    discard_ref: str | None = "F2",
) -> DecompositionPlan:
    """Catalog-referencing description of a layout-built decomposition."""
    return DecompositionPlan(
        name=d.name,
        z0=d.z0_exponent,
        z1_pieces=[list(p) for p in d.z1_exponent_fn.pieces],
        K=d.K,
        zeta=d.zeta,
        typeI_ref=typeI_ref,
        typeII_ref=typeII_ref,
        continue_ref=continue_ref,
        discard_ref=discard_ref,
        role_reversal=d.role_reversal,
        imported_deficit=d.imported_deficit,
        terms=[
            TermSpec(
                depth=t.depth,
                sign=t.sign,
                classification=t.classification.value,
                region_ref=t.name,
                cutoff=t.cutoff.to_text(),
            )
            for t in d.terms
        ],
    )


def load_plan(plan: DecompositionPlan) -> Decomposition:
    """Rebuild a decomposition from its plan and check the leaves match."""
    layout = Layout(
        z0=plan.z0,
        z1=PiecewiseLinear(pieces=tuple(tuple(p) for p in plan.z1_pieces)),
        zeta=plan.zeta,
        K=plan.K,
        typeI=type_i_lift(region(plan.typeI_ref)),
        typeII=type_ii_lift(region(plan.typeII_ref)),
        continue_region=region(plan.continue_ref) if plan.continue_ref else None,
        discard_region=region(plan.discard_ref) if plan.discard_ref else None,
    )
    d = build_decomposition(layout, name=plan.name)
    built = [(t.depth, t.sign, t.classification.value, t.name) for t in d.terms]
    listed = [(t.depth, t.sign, t.classification, t.region_ref) for t in plan.terms]
    if plan.terms and built != listed:
        raise ParameterError(f"plan {plan.name} terms do not match its layout: {listed} vs {built}")
    if plan.imported_deficit:
        d = replace(d, imported_deficit=plan.imported_deficit)
    return d


def read_plan(path: str | Path | None = None) -> Decomposition:
    """Load a decomposition file (default: the packaged first decomposition)."""
    if path is None:
        text = resources.files(__package__).joinpath("data/d1.json").read_text()
    else:
        text = Path(path).read_text()
    return load_plan(DecompositionPlan(**json.loads(text)))
