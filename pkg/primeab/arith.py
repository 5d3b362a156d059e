"""Prime sieving, factorization and the multiplicative functions of the count."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .const import LOGGER, MAX_SEGMENT, MAX_SIEVE_HI, MIN_PRIME_LIMIT
from .exceptions import ParameterError, ResourceError


@dataclass(frozen=True)
class PrimeTable:
    """Primality of the integers lo <= n <= limit."""

    lo: int
    limit: int
    bitset: np.ndarray
    primes: np.ndarray

    def is_prime(self, n: int) -> bool:
        """Return True if n is prime (n within the table)."""
        if not self.lo <= n <= self.limit:
            raise ParameterError(f"{n} outside table [{self.lo}, {self.limit}]")
        return bool(self.bitset[n - self.lo])

    def is_prime_many(self, ns) -> np.ndarray:
        """Vectorized is_prime."""
        ns = np.asarray(ns, dtype=np.int64)
        if ns.size and (ns.min() < self.lo or ns.max() > self.limit):
            raise ParameterError(f"values outside table [{self.lo}, {self.limit}]")
        return self.bitset[ns - self.lo]

    def count_between(self, lo: int, hi: int) -> int:
        """Return the number of primes p with lo < p <= hi."""
        return int(
            np.searchsorted(self.primes, hi, side="right")
            - np.searchsorted(self.primes, lo, side="right")
        )

    def count(self) -> int:
        """Return the number of primes in the table."""
        return int(self.primes.size)


@dataclass(frozen=True)
class Factorization:
    """Prime factorization n = prod p**e, primes increasing."""

    n: int
    factors: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        """Check the factorization reconstructs n."""
        product = 1
        last = 1
        for p, e in self.factors:
            if p <= last or e < 1:
                raise ParameterError(f"bad factorization of {self.n}: {self.factors}")
            product *= p**e
            last = p
        if product != self.n:
            raise ParameterError(f"factorization {self.factors} does not reconstruct {self.n}")

    @property
    def primes(self) -> tuple[int, ...]:
        """Return the distinct prime divisors."""
        return tuple(p for p, _ in self.factors)


@lru_cache(maxsize=8)
def small_primes(limit: int) -> np.ndarray:
    """Return all primes <= limit by a plain sieve."""
    if limit < 2:
        return np.array([], dtype=np.int64)
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for i in range(2, math.isqrt(limit) + 1):
        if sieve[i]:
            sieve[i * i :: i] = False
    return np.flatnonzero(sieve).astype(np.int64)


def base_primes(bound: int) -> np.ndarray:
    """Return the primes <= bound, sieving up to the next power of two."""
    primes = small_primes(1 << max(4, int(bound).bit_length()))
    return primes[: np.searchsorted(primes, bound, side="right")]


def segmented_sieve(lo: int, hi: int) -> PrimeTable:
    """Sieve the half-open segment [lo, hi) with the base primes up to sqrt(hi)."""
    if not 2 <= lo < hi:
        raise ParameterError(f"need 2 <= lo < hi, got [{lo}, {hi})")
    if hi > MAX_SIEVE_HI or hi - lo > MAX_SEGMENT:
        raise ResourceError(f"segment [{lo}, {hi}) exceeds the sieve guards")
    last = hi - 1
    bitset = np.ones(hi - lo, dtype=bool)
    for p in base_primes(math.isqrt(last)).tolist():
        start = max(p * p, ((lo + p - 1) // p) * p)
        if start > last:
            continue
        bitset[start - lo :: p] = False
    primes = np.flatnonzero(bitset).astype(np.int64) + lo
    LOGGER.debug("Sieved [%d, %d): %d primes", lo, hi, primes.size)
    return PrimeTable(lo=lo, limit=last, bitset=bitset, primes=primes)


def prime_count(limit: int) -> int:
    """Return pi(limit)."""
    if limit < 2:
        return 0
    return segmented_sieve(2, limit + 1).count()


def factorize(n: int) -> Factorization:
    """Factor n by trial division against the sieved primes."""
    if n < 1:
        raise ParameterError(f"cannot factor {n}")
    if n > MAX_SIEVE_HI:
        raise ResourceError(f"{n} exceeds the factoring range")
    factors: list[tuple[int, int]] = []
    rest = n
    for p in base_primes(math.isqrt(n)).tolist():
        if p * p > rest:
            break
        if rest % p == 0:
            e = 0
            while rest % p == 0:
                rest //= p
                e += 1
            factors.append((p, e))
    if rest > 1:
        factors.append((rest, 1))
    return Factorization(n=n, factors=tuple(factors))


def factor_range(lo: int, hi: int) -> list[Factorization]:
    """Factor every integer in [lo, hi] by dividing out the base primes in bulk."""
    if not 1 <= lo <= hi:
        raise ParameterError(f"need 1 <= lo <= hi, got [{lo}, {hi}]")
    if hi > MAX_SIEVE_HI or hi - lo > MAX_SEGMENT:
        raise ResourceError(f"window [{lo}, {hi}] exceeds the sieve guards")
    rest = np.arange(lo, hi + 1, dtype=np.int64)
    found: list[list[tuple[int, int]]] = [[] for _ in range(rest.size)]
    for p in base_primes(math.isqrt(hi)).tolist():
        first = ((lo + p - 1) // p) * p
        if first > hi:
            continue
        idx = np.arange(first - lo, rest.size, p)
        exps = np.zeros(idx.size, dtype=np.int64)
        sub = rest[idx]
        while True:
            divisible = sub % p == 0
            if not divisible.any():
                break
            sub = np.where(divisible, sub // p, sub)
            exps += divisible
        rest[idx] = sub
        for i, e in zip(idx.tolist(), exps.tolist()):
            found[i].append((p, e))
    out = []
    for i, leftover in enumerate(rest.tolist()):
        factors = found[i]
        if leftover > 1:
            factors.append((leftover, 1))
        out.append(Factorization(n=lo + i, factors=tuple(factors)))
    return out


def psi(n: int, z: int, fac: Factorization | None = None) -> int:
    """Return 1 if n has no prime factor below z."""
    if fac is None:
        fac = factorize(n)
    if fac.n != n:
        raise ParameterError(f"factorization of {fac.n} given for {n}")
    return int(all(p >= z for p in fac.primes))


def mult_omega(d: int) -> Fraction:
    """Return omega(d) = prod over p | d of p^2 / (p^2 - p + 1)."""
    if d < 1:
        raise ParameterError(f"mult_omega needs d >= 1, got {d}")
    value = Fraction(1)
    for p in factorize(d).primes:
        value *= Fraction(p * p, p * p - p + 1)
    return value


def mult_f(n: int) -> Fraction:
    """Return f(n) = prod over p | n of (p - 1)^2 / (p^2 - p + 1)."""
    if n < 1:
        raise ParameterError(f"mult_f needs n >= 1, got {n}")
    value = Fraction(1)
    for p in factorize(n).primes:
        value *= Fraction((p - 1) ** 2, p * p - p + 1)
    return value


def constant_c(prime_limit: int) -> tuple[float, float]:
    """Return the truncated product of (1 + 1/(p(p-1))) over p <= prime_limit and its tail bound."""
    if prime_limit < MIN_PRIME_LIMIT:
        raise ParameterError(f"prime_limit must be at least {MIN_PRIME_LIMIT}")
    primes = small_primes(prime_limit).astype(float)
    value = math.exp(float(np.sum(np.log1p(1.0 / (primes * (primes - 1.0))))))
    # Remaining factors multiply by at most exp(sum_{n > L} 1/(n(n-1))) = exp(1/L).
    tail = value * math.expm1(1.0 / prime_limit)
    return value, tail


def totients(limit: int) -> np.ndarray:
    """Return phi(0..limit) by the sieve of totients."""
    phi = np.arange(limit + 1, dtype=np.int64)
    for p in small_primes(limit).tolist():
        phi[p::p] -= phi[p::p] // p
    return phi


def totient(n: int) -> int:
    """Return phi(n)."""
    result = n
    for p in factorize(n).primes:
        result -= result // p
    return result


def divisor_count(fac: Factorization) -> int:
    """Return d(n)."""
    return math.prod(e + 1 for _, e in fac.factors)
