"""Stratified Monte-Carlo estimates of the sieve deficit integrals."""

from __future__ import annotations

import math

import numpy as np

from .buchstab import BuchstabEvaluator, omega_many
from .const import (
    IMPORTED_D2_DEFICIT,
    LOGGER,
    MAX_STRATA,
    MIN_SAMPLES,
    TOTAL_DEFICIT_BOUND,
)
from .coordinator import ChunkCoordinator
from .exceptions import DomainError, IntegrandDomainError, ParameterError, ReproductionFailureError
from .model import DeficitResult, McParams
from .regions import Region, RegionSet, Shape, halfspace, intersect, region, type_ii_lift

STRATA_PER_CHUNK = 64

LIMIT_CUBE = "cube"
LIMIT_H2 = "h2"


def integrand(ev: BuchstabEvaluator, X: np.ndarray) -> np.ndarray:
    """omega((1 - sum alpha) / alpha_j) / (alpha_1 ... alpha_{j-1} alpha_j^2) for every row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    last = X[:, -1]
    u = (1.0 - X.sum(axis=1)) / last
    bad = u < 1.0
    if bad.any():
        sample = X[bad][0]
        raise IntegrandDomainError(
            f"omega argument {u[bad][0]:.6g} < 1 at alpha={sample.tolist()}", sample=sample
        )
    if (u > ev.u_max).any():
        sample = X[u > ev.u_max][0]
        raise DomainError(f"omega argument {u.max():.6g} exceeds u_max={ev.u_max} at {sample.tolist()}")
    return omega_many(ev, u) / (np.prod(X[:, :-1], axis=1) * last * last)


def _strata(lo: np.ndarray, hi: np.ndarray, per_dim: int) -> tuple[np.ndarray, np.ndarray]:
    widths = (hi - lo) / per_dim
    grid = np.array(list(np.ndindex(*([per_dim] * lo.size))), dtype=float).reshape(-1, lo.size)
    return lo + grid * widths, widths


def integrate_deficit(
    rs: Shape,
    j: int,
    ev: BuchstabEvaluator,
    p: McParams,
    threads: int | None = None,
) -> DeficitResult:
    """Estimate the deficit integral of depth j over rs by stratified sampling of its box."""
    dim = getattr(rs, "dim", None)
    if dim != j:
        raise ParameterError(f"region dimension {dim} does not match depth {j}")
    if p.samples < MIN_SAMPLES:
        raise ParameterError(f"at least {MIN_SAMPLES} samples required, got {p.samples}")
    name = getattr(rs, "name", "")
    box = rs.bounding_box()
    if box is None or np.any(box[1] - box[0] <= 0):
        LOGGER.debug("Region %s is empty", name)
        return DeficitResult(value=0.0, std_error=0.0, samples=0, region_name=name)

    per_dim = p.strata_per_dim
    while per_dim > 1 and per_dim**j > MAX_STRATA:
        per_dim -= 1
    corners, widths = _strata(box[0], box[1], per_dim)
    cells = corners.shape[0]
    per_cell = max(2, math.ceil(p.samples / cells))
    volume = float(np.prod(widths))

    def run(chunk: range) -> list[tuple[float, float]]:
        out = []
        for index in chunk:
            key = np.array([p.seed, index], dtype=np.uint64)
            rng = np.random.Generator(np.random.Philox(key=key))
            X = corners[index] + rng.random((per_cell, j)) * widths
            values = np.zeros(per_cell)
            inside = rs.contains_many(X)
            if inside.any():
                values[inside] = integrand(ev, X[inside])
            out.append((volume * values.mean(), volume**2 * values.var(ddof=1) / per_cell))
        return out

    chunks = [range(a, min(a + STRATA_PER_CHUNK, cells)) for a in range(0, cells, STRATA_PER_CHUNK)]
    estimate = 0.0
    variance = 0.0
    for chunk_result in ChunkCoordinator(threads).map(run, chunks):
        for mean, var in chunk_result:
            estimate += mean
            variance += var
    result = DeficitResult(
        value=max(estimate, 0.0),
        std_error=math.sqrt(variance),
        samples=per_cell * cells,
        region_name=name,
    )
    LOGGER.info(
        "Deficit %s (j=%d): %.6f +/- %.6f over %d samples",
        name,
        j,
        result.value,
        result.std_error,
        result.samples,
    )
    return result


def first_region(alpha1_range: tuple[float, float] | None = None, limit: str = LIMIT_CUBE) -> Shape:
    """Region of the first integral, optionally cut to a slice of alpha_1."""
    if limit == LIMIT_CUBE:
        shape: Shape = region("F2")
    elif limit == LIMIT_H2:
        shape = region("F2_WIDE")
    else:
        raise ParameterError(f"unknown limit {limit}")
    if alpha1_range is not None:
        a, b = alpha1_range
        if not a <= b:
            raise ParameterError(f"empty alpha_1 range {alpha1_range}")
        name = f"{shape.name}[{a},{b}]"
        shape = intersect(shape, Region.build(2, [], bounds=[[a, b], [0.0, 1.0]]), name=name)
    return shape


def first_integral(
    ev: BuchstabEvaluator,
    p: McParams,
    alpha1_range: tuple[float, float] | None = None,
    limit: str = LIMIT_CUBE,
    threads: int | None = None,
) -> DeficitResult:
    """Deficit over alpha_1 in [0.275, 0.45], alpha_2 from 0.55 - alpha_1 to the upper limit.

    limit="cube" stops alpha_2 at (1 - alpha_1) / 3, limit="h2" at (1 - alpha_1) / 2.
    """
    result = integrate_deficit(first_region(alpha1_range, limit), 2, ev, p, threads)
    return result.model_copy(update={"limit": limit})


def second_region(apply_typeII_removal: bool = True) -> Shape:
    """Region G, optionally without points where a sum of coordinates lies in S1."""
    g = region("G")
    if not apply_typeII_removal:
        return g
    # inside G single coordinates and pairs stay below 0.45, so only triples and the full sum matter
    return RegionSet(4, parts=(g,), excluded=(type_ii_lift(region("S1"), width=4),), name="G-S1*")


def second_integral(
    ev: BuchstabEvaluator,
    p: McParams,
    apply_typeII_removal: bool = True,
    threads: int | None = None,
) -> DeficitResult:
    """Four-dimensional deficit over G."""
    return integrate_deficit(second_region(apply_typeII_removal), 4, ev, p, threads)


def total_deficit(
    ev: BuchstabEvaluator,
    p: McParams,
    imported: float = IMPORTED_D2_DEFICIT,
    threads: int | None = None,
    limit: str = LIMIT_CUBE,
) -> DeficitResult:
    """First plus second integral plus the imported deficit; raises when not below 3/4."""
    first = first_integral(ev, p, limit=limit, threads=threads)
    second = second_integral(ev, p, apply_typeII_removal=True, threads=threads)
    components = {"first": first.value, "second": second.value, "imported": imported}
    value = first.value + second.value + imported
    result = DeficitResult(
        value=value,
        std_error=math.hypot(first.std_error, second.std_error),
        samples=first.samples + second.samples,
        region_name="total",
        components=components,
        limit=limit,
    )
    if not value < TOTAL_DEFICIT_BOUND:
        raise ReproductionFailureError(
            f"total deficit {value:.6f} not below {TOTAL_DEFICIT_BOUND}", components
        )
    return result


def slice_region(alpha1: tuple[float, float], alpha2: tuple[float, float]) -> Region:
    """Axis-aligned box used for oracle comparisons."""
    return Region.build(2, [], bounds=[list(alpha1), list(alpha2)], name="box")


def half_plane(dim: int, index: int, threshold: float, above: bool = True) -> Region:
    """alpha_index >= threshold (or < threshold)."""
    if above:
        return halfspace(dim, {index: 1.0}, -threshold)
    return halfspace(dim, {index: -1.0}, threshold, strict=True)
