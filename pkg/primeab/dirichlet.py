"""Dirichlet characters and the discrepancy statistics of an arithmetic function.

A character mod q is stored through discrete logarithms: every unit a mod q has logs
(l_1, ..., l_r) with respect to generators of the prime-power components, and the
character sends a to exp(2 pi i (w . l) / order) for integer weights w. Odd prime powers
use a primitive root; 4 uses -1; higher powers of two use -1 and 5.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .arith import factorize, totient
from .const import (
    DEFAULT_DRAWS,
    DEFAULT_LOG_POWER,
    DEFAULT_SEED,
    DEFAULT_T,
    LOGGER,
    MAX_LARGE_SIEVE_N,
    MAX_LARGE_SIEVE_Q,
    MAX_MODULUS,
    MAX_ORTHOGONALITY_Q,
    THETA,
)
from .coordinator import ChunkCoordinator
from .exceptions import ParameterError, ResourceError
from .model import DiscrepancyReport


@dataclass(frozen=True, eq=False)
class Character:
    """Dirichlet character mod q."""

    q: int
    order: int
    logs: np.ndarray
    weights: tuple[int, ...]
    index: int = 0

    @cached_property
    def coprime(self) -> np.ndarray:
        """Residues a with (a, q) = 1."""
        return np.gcd(np.arange(self.q), self.q) == 1

    @cached_property
    def exponents(self) -> np.ndarray:
        """chi(a) = exp(2 pi i e(a) / order); -1 off the units."""
        if self.weights:
            exps = (self.logs @ np.asarray(self.weights, dtype=np.int64)) % self.order
        else:
            exps = np.zeros(self.q, dtype=np.int64)
        return np.where(self.coprime, exps, -1)

    @cached_property
    def values(self) -> np.ndarray:
        """chi(0), ..., chi(q - 1)."""
        phase = np.exp(2j * np.pi * self.exponents / self.order)
        return np.where(self.coprime, phase, 0.0)

    def __call__(self, a: int) -> complex:
        return complex(self.values[a % self.q])

    @property
    def is_principal(self) -> bool:
        """Return True if chi is 1 on every unit."""
        return bool(np.all(self.exponents[self.coprime] == 0))

    @cached_property
    def conductor(self) -> int:
        """Smallest d | q with chi trivial on the units congruent to 1 mod d."""
        for d in _divisors(self.q):
            units = self.coprime[1 :: d]
            if np.all(self.exponents[1 :: d][units] == 0):
                return d
        return self.q

    @property
    def is_primitive(self) -> bool:
        """Return True if the conductor equals the modulus."""
        return self.conductor == self.q

    def primitive_core(self) -> Character:
        """The primitive character mod the conductor inducing chi."""
        f = self.conductor
        core = np.full(f, -1, dtype=np.int64)
        units = np.flatnonzero(self.coprime)
        core[units % f] = self.exponents[units]
        return Character(q=f, order=self.order, logs=core[:, None], weights=(1,))

    def induced(self, modulus: int) -> Character:
        """The character mod a multiple of q agreeing with chi on units."""
        if modulus % self.q:
            raise ParameterError(f"{modulus} is not a multiple of {self.q}")
        residues = np.arange(modulus) % self.q
        return Character(
            q=modulus, order=self.order, logs=self.exponents[residues][:, None], weights=(1,)
        )


def _divisors(n: int) -> list[int]:
    divs = [1]
    for p, e in factorize(n).factors:
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def _primitive_root(p: int, e: int) -> int:
    """Primitive root mod p**e for odd p."""
    order = p - 1
    factors = factorize(order).primes if order > 1 else ()
    g = 2 if p > 2 else 1
    while not all(pow(g, order // r, p) != 1 for r in factors):
        g += 1
    if e > 1 and pow(g, p - 1, p * p) == 1:
        g += p
    return g


def _component_logs(p: int, e: int) -> tuple[list[int], list[np.ndarray]]:
    """Generator orders and log tables (length p**e, -1 off the units) of one component."""
    pe = p**e
    if p != 2:
        g = _primitive_root(p, e)
        order = pe - pe // p
        table = np.full(pe, -1, dtype=np.int64)
        x = 1
        for k in range(order):
            table[x] = k
            x = x * g % pe
        return [order], [table]
    if e == 1:
        return [], []
    sign = np.full(pe, -1, dtype=np.int64)
    if e == 2:
        sign[1], sign[3] = 0, 1
        return [2], [sign]
    five = np.full(pe, -1, dtype=np.int64)
    x = 1
    for k in range(pe // 4):
        five[x], five[(-x) % pe] = k, k
        sign[x], sign[(-x) % pe] = 0, 1
        x = x * 5 % pe
    return [2, pe // 4], [sign, five]


@lru_cache(maxsize=128)
def characters_mod(q: int) -> tuple[Character, ...]:
    """All phi(q) characters mod q, the principal one first."""
    if not 2 <= q <= MAX_MODULUS:
        raise ParameterError(f"modulus must lie in [2, {MAX_MODULUS}], got {q}")
    residues = np.arange(q)
    orders: list[int] = []
    columns: list[np.ndarray] = []
    for p, e in factorize(q).factors:
        comp_orders, tables = _component_logs(p, e)
        orders += comp_orders
        columns += [table[residues % p**e] for table in tables]
    logs = np.column_stack(columns) if columns else np.zeros((q, 0), dtype=np.int64)
    phi = totient(q)
    chars = []
    for index, ks in enumerate(itertools.product(*(range(n) for n in orders))):
        weights = tuple(k * (phi // n) for k, n in zip(ks, orders))
        chars.append(Character(q=q, order=phi, logs=logs, weights=weights, index=index))
    LOGGER.debug("Built %d characters mod %d", len(chars), q)
    return tuple(chars)


def orthogonality_defect(q: int) -> float:
    """Largest deviation of both orthogonality relations from phi(q) times the identity."""
    if q > MAX_ORTHOGONALITY_Q:
        raise ResourceError(f"orthogonality check limited to q <= {MAX_ORTHOGONALITY_Q}")
    chars = characters_mod(q)
    V = np.array([chi.values for chi in chars])[:, chars[0].coprime]
    phi = V.shape[0]
    over_chars = V.conj().T @ V
    over_residues = V @ V.conj().T
    identity = phi * np.eye(phi)
    return float(max(np.abs(over_chars - identity).max(), np.abs(over_residues - identity).max()))


@dataclass(frozen=True)
class SampledFunction:
    """Values f(start), f(start + 1), ... of an arithmetic function."""

    start: int
    values: np.ndarray

    def window(self, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        """Arguments and values for lo < n <= hi."""
        first, last = lo + 1 - self.start, hi + 1 - self.start
        if first < 0 or last > len(self.values) or hi < lo:
            raise ParameterError(
                f"window ({lo}, {hi}] outside [{self.start}, {self.start + len(self.values) - 1}]"
            )
        return np.arange(lo + 1, hi + 1), np.asarray(self.values[first:last])


def _sampled(f) -> SampledFunction:
    if isinstance(f, SampledFunction):
        return f
    return SampledFunction(start=0, values=np.asarray(f))


def _check_window(h: int, h0: int) -> None:
    if h < 1 or h0 < 1:
        raise ParameterError(f"window lengths must be positive, got h={h}, h0={h0}")


def E_chi(f, y: int, h: int, h0: int, chi: Character) -> complex:
    """sum over y - h < k <= y of f(k) chi(k), minus (h / h0) sum f over (y - h0, y] if chi is principal."""
    _check_window(h, h0)
    F = _sampled(f)
    ns, vals = F.window(y - h, y)
    total = complex(np.sum(vals * chi.values[ns % chi.q]))
    if chi.is_principal:
        total -= h / h0 * float(np.sum(F.window(y - h0, y)[1]))
    return total


def E_progression(f, y: int, h: int, h0: int, q: int, a: int) -> float:
    """sum over y - h < n <= y, n = a mod q of f(n), minus h / (phi(q) h0) sum f over (y - h0, y]."""
    if math.gcd(a, q) != 1:
        raise ParameterError(f"({a}, {q}) != 1")
    _check_window(h, h0)
    F = _sampled(f)
    ns, vals = F.window(y - h, y)
    hit = float(np.sum(vals[ns % q == a % q]))
    return hit - h / (totient(q) * h0) * float(np.sum(F.window(y - h0, y)[1]))


def progression_from_characters(f, y: int, h: int, h0: int, q: int, a: int) -> complex:
    """E_progression recombined from the E_chi of every character mod q."""
    if math.gcd(a, q) != 1:
        raise ParameterError(f"({a}, {q}) != 1")
    chars = characters_mod(q)
    total = sum(np.conj(chi(a)) * E_chi(f, y, h, h0, chi) for chi in chars)
    return complex(total) / len(chars)


def primitive_characters(q_lo: int, q_hi: int) -> list[Character]:
    """Primitive characters with q_lo <= q <= q_hi."""
    return [chi for q in range(max(q_lo, 2), q_hi + 1) for chi in characters_mod(q) if chi.is_primitive]


def large_sieve_ratio(
    Q: int,
    T_count: int,
    N: int,
    seed: int = DEFAULT_SEED,
    T: float = DEFAULT_T,
    draws: int = DEFAULT_DRAWS,
    coeffs=None,
) -> float:
    """Largest ||N||_2^2 / ((N + Q^2 T) sum |b_n|^2 / n) over coefficient draws.

    The t integral over [(T - 1) / 2, T] uses T_count midpoints; characters run over the
    primitive ones with Q < q <= 2Q and n over N < n <= 2N. Without coeffs, the draws are
    random signs from the seeded generator.
    """
    if not 1 <= Q <= MAX_LARGE_SIEVE_Q or not 1 <= N <= MAX_LARGE_SIEVE_N:
        raise ParameterError(f"need Q <= {MAX_LARGE_SIEVE_Q} and N <= {MAX_LARGE_SIEVE_N}")
    if T_count < 1 or T < 1:
        raise ParameterError(f"need T_count >= 1 and T >= 1, got {T_count}, {T}")
    chars = primitive_characters(Q + 1, 2 * Q)
    if not chars:
        raise ParameterError(f"no primitive characters with {Q} < q <= {2 * Q}")
    ns = np.arange(N + 1, 2 * N + 1)
    C = np.array([chi.values[ns % chi.q] for chi in chars])
    start = (T - 1.0) / 2.0
    dt = (T - start) / T_count
    ts = start + (np.arange(T_count) + 0.5) * dt
    M = np.exp(-(0.5 + 1j * ts[:, None]) * np.log(ns)[None, :])

    if coeffs is not None:
        batches = [np.asarray(coeffs, dtype=complex)]
        if batches[0].shape != (N,):
            raise ParameterError(f"need {N} coefficients, got {batches[0].shape}")
    else:
        rng = np.random.Generator(np.random.Philox(key=seed))
        batches = [rng.integers(0, 2, N) * 2.0 - 1.0 for _ in range(draws)]

    best = 0.0
    for b in batches:
        weight = float(np.sum(np.abs(b) ** 2 / ns))
        if weight == 0:
            continue
        norm = float(np.sum(np.abs((C * b) @ M.T) ** 2) * dt)
        best = max(best, norm / ((N + Q * Q * T) * weight))
    LOGGER.debug("Large sieve Q=%d N=%d over %d characters: %.4f", Q, N, len(chars), best)
    return best


def discrepancy_scan(
    f,
    x: int,
    q_max: int,
    h: int,
    h0: int,
    y: int | None = None,
    q_min: int = 2,
    theta: float = THETA,
    log_power: float = DEFAULT_LOG_POWER,
    threads: int | None = None,
) -> list[DiscrepancyReport]:
    """Per-modulus maxima of |E_chi| over primitive chi and |E_progression| over units a."""
    if y is None:
        y = x
    _check_window(h, h0)
    if h > x**theta:
        raise ParameterError(f"h={h} exceeds x^theta={x**theta:.6g}")
    if not 2 <= q_min <= q_max <= MAX_MODULUS:
        raise ParameterError(f"bad modulus range [{q_min}, {q_max}]")
    F = _sampled(f)
    ns, vals = F.window(y - h, y)
    base = float(np.sum(F.window(y - h0, y)[1]))
    log_x = math.log(x)

    def run(qs: range) -> list[DiscrepancyReport]:
        out = []
        for q in qs:
            sums = np.bincount(ns % q, weights=vals, minlength=q)
            units = np.gcd(np.arange(q), q) == 1
            progression = sums[units] - h / (totient(q) * h0) * base
            chars = [chi for chi in characters_mod(q) if chi.is_primitive]
            if chars:
                per_chi = np.abs(np.array([chi.values for chi in chars]) @ sums)
            else:
                per_chi = np.zeros(0)
            eta = x ** (-theta) / q * log_x**log_power
            out.append(
                DiscrepancyReport(
                    q=q,
                    y=y,
                    h=h,
                    h0=h0,
                    max_abs_chi=float(per_chi.max()) if per_chi.size else 0.0,
                    max_abs_progression=float(np.abs(progression).max()),
                    eta=eta,
                    normalized=eta * float(per_chi.sum()),
                )
            )
        return out

    moduli = list(range(q_min, q_max + 1))
    chunks = [range(moduli[i], moduli[min(i + 16, len(moduli)) - 1] + 1) for i in range(0, len(moduli), 16)]
    reports = [r for part in ChunkCoordinator(threads).map(run, chunks) for r in part]
    LOGGER.info("Discrepancy scan x=%d q <= %d h=%d done", x, q_max, h)
    return reports
