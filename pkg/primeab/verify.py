"""Desk-scale checks of representations n = p + ab and of the counting lemmas behind them."""

from __future__ import annotations

import math

import numpy as np

from .arith import (
    PrimeTable,
    constant_c,
    divisor_count,
    factorize,
    mult_f,
    mult_omega,
    segmented_sieve,
    small_primes,
    totient,
    totients,
)
from .const import (
    DEFAULT_BUDGET,
    DEFAULT_DELTA,
    DEFAULT_PRIME_LIMIT,
    HISTOGRAM_BINS,
    LOGGER,
    MAX_LEMMA_E,
    MAX_SCAN_HI,
    MIN_REPRESENTED_N,
    SCAN_CHUNK,
    SCAN_REACH,
    SEARCH_BLOCK,
    SEARCH_EXPONENT,
)
from .coordinator import ChunkCoordinator, split_range
from .exceptions import ParameterError, ResourceError, SearchExhaustedError
from .model import Lemma72Check, RepresentationRecord, ScanSummary


def _divisors(m: int) -> list[int]:
    divs = [1]
    for p, e in factorize(m).factors:
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def _balanced_pair(m: int, limit: float) -> tuple[int, int] | None:
    """Most balanced a * b = m, if it keeps both factors within limit."""
    if m > limit * limit:
        return None
    root = math.isqrt(m)
    a = max(d for d in _divisors(m) if d <= root)
    b = m // a
    if b > limit:
        return None
    return a, b


def _record(n: int, p: int, a: int, b: int) -> RepresentationRecord:
    m = a * b
    return RepresentationRecord(
        n=n,
        p=p,
        a=a,
        b=b,
        theta_n=math.log(m) / math.log(n) if m > 1 else 0.0,
        balance=max(math.log(a), math.log(b)) / math.log(p),
    )


def min_theta(n: int, delta: float = DEFAULT_DELTA, primes: PrimeTable | None = None) -> RepresentationRecord:
    """Smallest ab with n - ab prime and max(a, b) <= p**(1/2 - delta), searching ab = 1, 2, ..."""
    if n < MIN_REPRESENTED_N:
        raise ParameterError(f"n must be at least {MIN_REPRESENTED_N}, got {n}")
    if not 0 < delta < 0.1:
        raise ParameterError(f"delta must lie in (0, 0.1), got {delta}")
    bound = int(n**SEARCH_EXPONENT)
    for m_lo in range(1, bound + 1, SEARCH_BLOCK):
        m_hi = min(m_lo + SEARCH_BLOCK - 1, bound, n - 2)
        if m_hi < m_lo:
            break
        p_lo, p_hi = n - m_hi, n - m_lo
        if primes is not None and primes.lo <= p_lo and p_hi <= primes.limit:
            table = primes
        else:
            table = segmented_sieve(max(2, p_lo), p_hi + 1)
        for m in range(m_lo, m_hi + 1):
            p = n - m
            if not table.is_prime(p):
                continue
            pair = _balanced_pair(m, p ** (0.5 - delta))
            if pair is not None:
                return _record(n, p, *pair)
    raise SearchExhaustedError(f"no representation of {n} with ab <= {bound}", n, bound)


def recheck(record: RepresentationRecord, delta: float | None = None) -> bool:
    """Return True if the record satisfies n = p + ab, p prime and, given delta, the balance bound."""
    if record.p + record.a * record.b != record.n or record.a < 1 or record.b < 1:
        return False
    if record.p < 2 or factorize(record.p).factors != ((record.p, 1),):
        return False
    if delta is not None and max(record.a, record.b) > record.p ** (0.5 - delta):
        return False
    return True


def scan_range(
    lo: int,
    hi: int,
    delta: float = DEFAULT_DELTA,
    theta_budget: float = DEFAULT_BUDGET,
    threads: int | None = None,
) -> ScanSummary:
    """Find theta(n) for every lo <= n <= hi and list the n above the budget."""
    if not MIN_REPRESENTED_N <= lo <= hi:
        raise ParameterError(f"need {MIN_REPRESENTED_N} <= lo <= hi, got [{lo}, {hi}]")
    if hi > MAX_SCAN_HI:
        raise ResourceError(f"hi={hi} exceeds the scan guard {MAX_SCAN_HI}")
    if not 0 <= theta_budget < 1:
        raise ParameterError(f"theta_budget must lie in [0, 1), got {theta_budget}")
    primes = segmented_sieve(max(2, lo - SCAN_REACH), hi)

    def run(chunk: tuple[int, int]) -> list[RepresentationRecord | int]:
        out: list[RepresentationRecord | int] = []
        for n in range(*chunk):
            try:
                out.append(min_theta(n, delta, primes))
            except SearchExhaustedError as err:
                LOGGER.warning("Search exhausted for n=%d up to ab=%d", err.n, err.bound)
                out.append(n)
        return out

    chunks = list(split_range(lo, hi + 1, SCAN_CHUNK))
    results = [r for part in ChunkCoordinator(threads).map(run, chunks) for r in part]
    records = [r for r in results if isinstance(r, RepresentationRecord)]
    exhausted = [r for r in results if isinstance(r, int)]
    for record in records:
        if not recheck(record, delta):
            raise ParameterError(f"record for {record.n} fails its recheck")
    failures = sorted([r.n for r in records if r.theta_n > theta_budget] + exhausted)
    thetas = np.array([r.theta_n for r in records])
    histogram, edges = np.histogram(thetas, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
    worst = max(records, key=lambda r: r.theta_n, default=None)
    LOGGER.info(
        "Scanned [%d, %d]: %d failures, worst theta %.4f",
        lo,
        hi,
        len(failures),
        worst.theta_n if worst else 0.0,
    )
    return ScanSummary(
        lo=lo,
        hi=hi,
        delta=delta,
        theta_budget=theta_budget,
        worst_n=worst.n if worst else 0,
        worst_theta=worst.theta_n if worst else 0.0,
        histogram=histogram.tolist(),
        bin_edges=edges.tolist(),
        failures=failures,
        exhausted=exhausted,
        records=records,
    )


def lemma71_ratio(n: int, y: int, v: int) -> float:
    """Primes p in (n - 2y, n - y] with v | n - p, over y / (phi(v) log(y / v))."""
    if v < 1 or y < 3 * v or n < 2 * y:
        raise ParameterError(f"need y >= 3v and n >= 2y, got n={n}, y={y}, v={v}")
    lo, hi = n - 2 * y, n - y
    count = 0
    if hi >= 2:
        table = segmented_sieve(max(2, lo + 1), hi + 1)
        count = int(np.count_nonzero((n - table.primes) % v == 0))
    scale = y / (totient(v) * math.log(y / v))
    return count / scale


def lemma72_check(E: int, d: int, n: int, prime_limit: int = DEFAULT_PRIME_LIMIT) -> Lemma72Check:
    """Sum of u / phi(u) over u <= E with d | u and (u, n) = 1 against C E omega(d) f(n) / d."""
    if E < 0 or d < 1 or n < 1:
        raise ParameterError(f"need E >= 0, d >= 1, n >= 1, got {E}, {d}, {n}")
    if math.gcd(n, d) != 1:
        raise ParameterError(f"(n, d) = ({n}, {d}) != 1")
    if E > MAX_LEMMA_E:
        raise ResourceError(f"E={E} exceeds {MAX_LEMMA_E}")
    lhs = 0.0
    if E >= d:
        phi = totients(E)
        us = np.arange(d, E + 1, d)
        us = us[np.gcd(us, n) == 1]
        lhs = math.fsum((us / phi[us]).tolist())
    C, _ = constant_c(prime_limit)
    main = C * E * float(mult_omega(d)) / d * float(mult_f(n))
    error_bound = math.sqrt(E * d) * divisor_count(factorize(n)) / totient(d)
    empirical = abs(lhs - main) / error_bound if error_bound else 0.0
    LOGGER.debug("Divisor sum E=%d d=%d n=%d: lhs=%.6f main=%.6f", E, d, n, lhs, main)
    return Lemma72Check(
        E=E, d=d, n=n, lhs=lhs, main=main, error_bound=error_bound, empirical_c=empirical
    )


def selberg_G(n: int, C: float, delta: float = DEFAULT_DELTA) -> float:
    """Sum of g(p) = 1 / (p - omega(p)) over q1 <= p < n**(1/6), p not dividing n.

    q1 = 2 (log n)**(2C) n**delta; the sum is compared with -log(6 delta) in diagnostics.
    """
    if n < 2 or C < 0 or not 0 < delta < 0.5:
        raise ParameterError(f"bad selberg_G arguments n={n}, C={C}, delta={delta}")
    q1 = 2.0 * math.log(n) ** (2.0 * C) * n**delta
    top = n ** (1.0 / 6.0)
    if q1 >= top:
        return 0.0
    total = 0.0
    for p in small_primes(math.ceil(top)).tolist():
        if q1 <= p < top and n % p:
            total += 1.0 / (p - float(mult_omega(p)))
    return total
