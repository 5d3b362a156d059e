"""Model definitions."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .const import (
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_STRATA_PER_DIM,
    DEFAULT_THREADS,
    FORMAT_JSON,
)


class McParams(BaseModel):
    """Monte-Carlo parameters."""

    model_config = ConfigDict(frozen=True)

    samples: int = Field(default=DEFAULT_SAMPLES, ge=1)
    seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64)
    strata_per_dim: int = Field(default=DEFAULT_STRATA_PER_DIM, ge=1)


class DeficitResult(BaseModel):
    """Integral estimate with its statistical error."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(default=0.0, ge=0.0)
    std_error: float = Field(default=0.0, ge=0.0)
    samples: int = Field(default=0, ge=0)
    region_name: str = Field(default="")
    components: dict[str, float] = Field(default={})
    # upper limit of the first integral when it contributes
    limit: str | None = Field(default=None)

    @property
    def variance(self) -> float:
        """Return the squared standard error."""
        return self.std_error**2

    def __add__(self, other: DeficitResult) -> DeficitResult:
        """Sum two independent estimates."""
        return DeficitResult(
            value=self.value + other.value,
            std_error=(self.variance + other.variance) ** 0.5,
            samples=self.samples + other.samples,
            region_name="+".join(n for n in (self.region_name, other.region_name) if n),
        )


class ConstraintSpec(BaseModel):
    """One affine inequality constant + coeffs . alpha {>=, >} 0."""

    coeffs: list[float]
    constant: float = Field(default=0.0)
    strict: bool = Field(default=False)


class RegionSpec(BaseModel):
    """Catalog entry for a named region."""

    name: str
    dim: int = Field(ge=1)
    constraints: list[ConstraintSpec] = Field(default=[])
    bounds: list[list[float]] | None = Field(default=None)
    union_of: list[str] | None = Field(default=None)
    note: str = Field(default="")

    @model_validator(mode="after")
    def _check_dims(self) -> RegionSpec:
        for constraint in self.constraints:
            if len(constraint.coeffs) != self.dim:
                raise ValueError(
                    f"{self.name}: constraint has {len(constraint.coeffs)} coefficients"
                )
        if self.bounds is not None and len(self.bounds) != self.dim:
            raise ValueError(f"{self.name}: bounds do not match dim {self.dim}")
        return self


class TermSpec(BaseModel):
    """Serialized decomposition term."""

    depth: int = Field(ge=0)
    sign: int
    classification: str
    region_ref: str
    cutoff: str = Field(default="previous_prime")


class DecompositionPlan(BaseModel):
    """Serialized decomposition, regions referenced by catalog name."""

    name: str = Field(default="")
    z0: float
    z1_pieces: list[list[float]]
    K: int = Field(ge=0)
    zeta: float
    typeI_ref: str
    typeII_ref: str
    continue_ref: str | None = Field(default=None)
    discard_ref: str | None = Field(default=None)
    role_reversal: bool = Field(default=False)
    imported_deficit: float = Field(default=0.0, ge=0.0)
    terms: list[TermSpec] = Field(default=[])


class RepresentationRecord(BaseModel):
    """Best representation n = p + ab found for one n."""

    n: int
    p: int
    a: int = Field(ge=1)
    b: int = Field(ge=1)
    theta_n: float
    balance: float

    @model_validator(mode="after")
    def _check_sum(self) -> RepresentationRecord:
        if self.p + self.a * self.b != self.n:
            raise ValueError(f"{self.p} + {self.a}*{self.b} != {self.n}")
        return self


class ScanSummary(BaseModel):
    """Outcome of a representation scan."""

    lo: int
    hi: int
    delta: float
    theta_budget: float
    worst_n: int = Field(default=0)
    worst_theta: float = Field(default=0.0)
    histogram: list[int] = Field(default=[])
    bin_edges: list[float] = Field(default=[])
    failures: list[int] = Field(default=[])
    exhausted: list[int] = Field(default=[])
    records: list[RepresentationRecord] = Field(default=[])


class LambdaProfile(BaseModel):
    """Window sums of the sieve weight against the prime indicator."""

    x: int
    window_lo: int
    window_hi: int
    sum_lambda: float
    sum_rho: int = Field(ge=0)
    empirical_deficit: float = Field(default=0.0)
    violations: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_bound(self) -> LambdaProfile:
        if self.sum_lambda > self.sum_rho + 1e-9:
            raise ValueError("sum_lambda exceeds sum_rho")
        return self


class DiscrepancyReport(BaseModel):
    """Maximal discrepancies for one modulus."""

    q: int
    y: int
    h: int
    h0: int
    max_abs_chi: float = Field(default=0.0, ge=0.0)
    max_abs_progression: float = Field(default=0.0, ge=0.0)
    eta: float = Field(default=0.0, ge=0.0)
    normalized: float = Field(default=0.0, ge=0.0)


class Lemma72Check(BaseModel):
    """Divisor-restricted u/phi(u) sum against its main term."""

    E: int
    d: int
    n: int
    lhs: float
    main: float
    error_bound: float
    empirical_c: float

    @property
    def relative_error(self) -> float:
        """Return |lhs - main| / main."""
        if self.main == 0:
            return 0.0
        return abs(self.lhs - self.main) / self.main


class RunConfig(BaseModel):
    """Effective configuration of one CLI run."""

    command: str
    params: dict[str, object] = Field(default={})
    seed: int = Field(default=DEFAULT_SEED)
    threads: int = Field(default=DEFAULT_THREADS, ge=1)
    out: str | None = Field(default=None)
    format: str = Field(default=FORMAT_JSON)
