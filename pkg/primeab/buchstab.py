"""Buchstab's function.

omega(u) = 1/u on [1, 2] and (u omega(u))' = omega(u - 1) beyond. With F(u) = u omega(u)
the delay equation is a quadrature, F(b) = F(a) + integral of omega(t - 1) over [a, b],
so each unit interval is stepped with classical fourth-order stepping (Simpson weights,
since the right-hand side does not depend on F) using values from the previous interval.
Nodes are stored with their derivatives and evaluated through cubic Hermite pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .const import (
    CONTINUITY_TOLERANCE,
    DEFAULT_GRID_STEP,
    DEFAULT_U_MAX,
    LOGGER,
    MAX_GRID_STEP,
    MIN_U_MAX,
)
from .exceptions import DomainError, ParameterError

EXP_MINUS_GAMMA = math.exp(-np.euler_gamma)


@dataclass(frozen=True)
class BuchstabEvaluator:
    """Piecewise representation of omega on [1, u_max]."""

    u_max: float
    grid_step: float
    pieces: tuple[CubicHermiteSpline, ...]

    def piece_for(self, u: float) -> CubicHermiteSpline:
        """Return the approximant covering u in [2, u_max]."""
        index = min(int(math.floor(u)) - 2, len(self.pieces) - 1)
        return self.pieces[index]


def _steps_per_unit(grid_step: float) -> int:
    """Whole cells per unit interval, refining a step that does not divide 1."""
    steps = max(1, math.ceil(1.0 / grid_step - 1e-9))
    if abs(steps * grid_step - 1.0) > 1e-9:
        LOGGER.debug("grid_step %s refined to 1/%d", grid_step, steps)
    return steps


def build_evaluator(
    u_max: float = DEFAULT_U_MAX, grid_step: float = DEFAULT_GRID_STEP
) -> BuchstabEvaluator:
    """Integrate the delay equation unit interval by unit interval."""
    if not u_max >= MIN_U_MAX:
        raise ParameterError(f"u_max must be at least {MIN_U_MAX}, got {u_max}")
    if not 0 < grid_step <= MAX_GRID_STEP:
        raise ParameterError(f"grid_step must lie in (0, {MAX_GRID_STEP}], got {grid_step}")
    steps = _steps_per_unit(grid_step)

    def previous(t: np.ndarray, pieces: list[CubicHermiteSpline]) -> np.ndarray:
        # omega on the preceding unit interval
        if not pieces:
            return 1.0 / t
        return pieces[-1](t)

    pieces: list[CubicHermiteSpline] = []
    start = 2.0
    F_start = 1.0  # 2 * omega(2)
    while start < u_max:
        nodes = start + np.arange(steps + 1) / steps
        g_nodes = previous(nodes - 1.0, pieces)
        g_mid = previous(nodes[:-1] + 0.5 / steps - 1.0, pieces)
        h = 1.0 / steps
        increments = h / 6.0 * (g_nodes[:-1] + 4.0 * g_mid + g_nodes[1:])
        F = F_start + np.concatenate(([0.0], np.cumsum(increments)))
        values = F / nodes
        derivs = (g_nodes - values) / nodes
        piece = CubicHermiteSpline(nodes, values, derivs, extrapolate=False)
        if pieces:
            join = abs(float(pieces[-1](start)) - float(values[0]))
            if join > CONTINUITY_TOLERANCE:
                LOGGER.warning("Discontinuity %.3e at u=%s", join, start)
        pieces.append(piece)
        F_start = float(F[-1])
        start += 1.0

    LOGGER.debug(
        "Built Buchstab evaluator u_max=%s step=1/%d pieces=%d", u_max, steps, len(pieces)
    )
    return BuchstabEvaluator(u_max=float(u_max), grid_step=1.0 / steps, pieces=tuple(pieces))


def omega_many(ev: BuchstabEvaluator, us) -> np.ndarray:
    """Evaluate omega on an array of arguments."""
    us = np.asarray(us, dtype=float)
    if us.size and (np.nanmin(us) < 1.0 or np.nanmax(us) > ev.u_max or np.isnan(us).any()):
        bad = us[(us < 1.0) | (us > ev.u_max) | np.isnan(us)].ravel()[0]
        raise DomainError(f"omega({bad}) outside [1, {ev.u_max}]")
    out = np.empty_like(us)
    closed = us <= 2.0
    out[closed] = 1.0 / us[closed]
    rest = ~closed
    if rest.any():
        index = np.minimum(np.floor(us[rest]).astype(int) - 2, len(ev.pieces) - 1)
        values = np.empty(index.shape)
        for i in np.unique(index):
            mask = index == i
            values[mask] = ev.pieces[i](us[rest][mask])
        out[rest] = values
    return out


def omega(ev: BuchstabEvaluator, u: float) -> float:
    """Return omega(u) for 1 <= u <= u_max."""
    if not 1.0 <= u <= ev.u_max:
        raise DomainError(f"omega({u}) outside [1, {ev.u_max}]")
    if u <= 2.0:
        return 1.0 / u
    return float(ev.piece_for(u)(u))


def domega(ev: BuchstabEvaluator, u: float) -> float:
    """Return omega'(u) from the delay equation."""
    if u <= 2.0:
        return -1.0 / (u * u)
    return (omega(ev, u - 1.0) - omega(ev, u)) / u


def table(ev: BuchstabEvaluator, u0: float, u1: float, step: float) -> list[tuple[float, float]]:
    """Return (u, omega(u)) rows from u0 to u1 inclusive."""
    if step <= 0 or u1 < u0:
        raise ParameterError(f"bad table range {u0}..{u1} step {step}")
    count = int(math.floor((u1 - u0) / step + 1e-9)) + 1
    us = u0 + step * np.arange(count)
    return list(zip(us.tolist(), omega_many(ev, us).tolist()))
