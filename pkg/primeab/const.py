"""Constants for the primeab toolkit."""

from __future__ import annotations

import logging

# Base component constants
NAME = "primeab"
VERSION = "1.0.0"
ISSUE_URL = "https://github.com/primeab/primeab/issues"

LOGGER = logging.getLogger(__package__)

# Environment
ENV_THREADS = "PRIMEAB_THREADS"

# Configuration keys
CONF_THREADS = "threads"
CONF_SEED = "seed"
CONF_SAMPLES = "samples"
CONF_STRATA = "strata_per_dim"
CONF_OUT = "out"
CONF_FORMAT = "format"
CONF_LOG_LEVEL = "log_level"
CONF_GRID_STEP = "grid_step"
CONF_U_MAX = "u_max"
CONF_DELTA = "delta"
CONF_BUDGET = "budget"

FORMAT_JSON = "json"
FORMAT_CSV = "csv"
FORMATS = [FORMAT_JSON, FORMAT_CSV]

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

# Buchstab evaluator
DEFAULT_U_MAX = 10.0
DEFAULT_GRID_STEP = 0.001
MIN_U_MAX = 3.0
MAX_GRID_STEP = 0.01
CONTINUITY_TOLERANCE = 1e-12

# Exponent regions
ZETA = 0.1
MAX_LIFT_COORDS = 12

# Monte-Carlo integration
DEFAULT_SAMPLES = 2_000_000
DEFAULT_TEST_SAMPLES = 200_000
MIN_SAMPLES = 10_000
DEFAULT_SEED = 42
DEFAULT_STRATA_PER_DIM = 8
MAX_STRATA = 1 << 16

# Published bounds
FIRST_INTEGRAL_BOUND = 0.71
SECOND_INTEGRAL_BOUND = 0.02
SECOND_INTEGRAL_RAW_BOUND = 0.16
TOTAL_DEFICIT_BOUND = 0.75
# Deficit of the second decomposition, imported as a citation, never computed.
IMPORTED_D2_DEFICIT = 0.01

# Type II window used for the removals
S1_LOW = 0.45
S1_HIGH = 0.55

# Decompositions
DEFAULT_REGULARITY_SAMPLES = 100_000
ROOT_CUTOFF = 0.5
# log p / log x comparisons at a boundary exponent
EXPONENT_TOLERANCE = 1e-12

# Arithmetic
MAX_SIEVE_HI = 10**12
MAX_SEGMENT = 10**8
MIN_PRIME_LIMIT = 1_000
DEFAULT_PRIME_LIMIT = 1_000_000
MAX_LEMMA_E = 10**8

# Characters
MAX_MODULUS = 100_000
MAX_LARGE_SIEVE_Q = 50
MAX_LARGE_SIEVE_N = 10_000
DEFAULT_T = 100.0
THETA = 0.55
DEFAULT_LOG_POWER = 1.0
DEFAULT_DRAWS = 100
MAX_ORTHOGONALITY_Q = 2_000

# Representation scans
DEFAULT_DELTA = 0.01
DEFAULT_BUDGET = 0.56
MIN_REPRESENTED_N = 100
MAX_SCAN_HI = 10**9
SEARCH_EXPONENT = 0.9
HISTOGRAM_BINS = 20
SEARCH_BLOCK = 4096
SCAN_REACH = 1 << 16
SCAN_CHUNK = 1000

# Threads
DEFAULT_THREADS = 1
MAX_THREADS = 64

# Output
SIGNIFICANT_DIGITS = 12

STARTUP_MESSAGE = f"""
-------------------------------------------------------------------
{NAME}
Version: {VERSION}
Sieve toolkit for n = p + ab
If you have any issues with this you need to open an issue here:
{ISSUE_URL}
-------------------------------------------------------------------
"""
