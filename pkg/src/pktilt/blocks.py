"""Block counts and alpha diversity.

The number of blocks K_n has pmf

    Pr(K_n = k) = V_{n,k} S_alpha(n, k)

where S_alpha are generalized Stirling numbers,

    S_alpha(n+1, k) = S_alpha(n, k-1) + (n - k alpha) S_alpha(n, k),
    S_alpha(1, 1) = 1,

all positive for alpha in (0, 1), so the recurrence runs cleanly in log
scale. The explicit alternating sum

    S_alpha(n, k) = (1 / alpha^k k!) sum_{j=1}^{k} (-1)^j C(k, j) (-j alpha)_n

is kept as an independent audit route, evaluated in exact rational
arithmetic because the float version cancels badly for large n. At
alpha = 1/2 there is also the closed product form

    S_{1/2}(n, k) = C(2n - k - 1, n - 1) Gamma(n) / Gamma(k) 2^(2k - 2n).

K_n / n^alpha converges a.s. to the alpha diversity S = delta 2^alpha T^(-alpha),
where T is the tilted total mass (the constant delta 2^alpha is the scale of
the jump measure; it makes the gamma = 0 limit law independent of delta, as
it must be since the gamma = 0 partition law is). The density of S is the
change of variables t(s) = 2 delta^(1/alpha) s^(-1/alpha) of the tilted
stable density:

    f_S(s) = exp(delta gamma - (delta gamma / s)^(1/alpha))
             f_stable(2 delta^(1/alpha) s^(-1/alpha))
             (2 delta^(1/alpha) / alpha) s^(-1/alpha - 1),

with a closed form at alpha = 1/2, gamma = 1:

    f_S(s) = (1 / sqrt(pi)) exp(delta - delta^2 / s^2 - s^2 / 4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .specfun import LogValue, QuadratureSpec, log_binomial
from .tempered_stable import GGParams, StableSeriesConfig, stable_density
from .eppf import EtaMemo, _log_vnk_prefactor

__all__ = [
    "StirlingTable",
    "stirling_table",
    "stirling_explicit",
    "bell_polynomial_half",
    "BlockCountPmf",
    "blocks_pmf",
    "diversity_density",
    "diversity_density_half",
]

@dataclass(frozen=True, eq=False)
class StirlingTable:
    """Triangle of log S_alpha(n, k) for 1 <= k <= n <= n_max."""

    alpha: float
    n_max: int
    _rows: tuple[np.ndarray, ...] = field(repr=False)

    def log_value(self, n: int, k: int) -> float:
        if not (1 <= k <= n <= self.n_max):
            raise ValueError(f"need 1 <= k <= n <= {self.n_max}, got n={n}, k={k}")
        return float(self._rows[n][k])

    def value(self, n: int, k: int) -> LogValue:
        return LogValue.from_log(self.log_value(n, k))


def stirling_table(alpha: float, n_max: int) -> StirlingTable:
    """Build the log-scale Stirling triangle by the forward recurrence."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    rows: list[np.ndarray] = [np.array([-np.inf])]  # row 0 placeholder
    row1 = np.full(3, -np.inf)
    row1[1] = 0.0
    rows.append(row1)
    for n in range(1, n_max):
        prev = rows[n]
        k_arr = np.arange(1, n + 2, dtype=float)
        shift = prev[0:n + 1]          # S(n, k-1) for k = 1..n+1
        stay = prev[1:n + 2]           # S(n, k), -inf at k = n+1
        with np.errstate(divide="ignore", invalid="ignore"):
            stay_term = np.where(
                np.isneginf(stay), -np.inf, np.log(np.maximum(n - alpha * k_arr, 0.0)) + stay
            )
        row = np.full(n + 3, -np.inf)
        row[1:n + 2] = np.logaddexp(shift, stay_term)
        rows.append(row)
    return StirlingTable(alpha=alpha, n_max=n_max, _rows=tuple(rows))


def stirling_explicit(alpha: float, n: int, k: int) -> float:
    """Audit route: the explicit alternating sum for S_alpha(n, k).

    The sum cancels catastrophically in floating point (the largest term can
    exceed the result by many orders of magnitude), so it is evaluated in
    exact rational arithmetic instead: every float alpha is a dyadic
    rational, making each term C(k, j) (-j alpha)_n an exact Fraction. The
    only rounding is the final conversion to float. Cost grows quickly with
    n; intended as a small-to-moderate-n oracle, not a production path.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    a = Fraction(alpha)
    total = Fraction(0)
    for j in range(1, k + 1):
        # rising factorial (-j alpha)_n = prod_{i=0}^{n-1} (i - j alpha)
        rf = Fraction(1)
        for i in range(n):
            rf *= i - j * a
        if j % 2 == 1:
            rf = -rf
        total += math.comb(k, j) * rf
    return float(total / (a**k * math.factorial(k)))


def bell_polynomial_half(n: int, k: int) -> float:
    """Closed product form of S_{1/2}(n, k)."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")
    return math.exp(
        log_binomial(2 * n - k - 1, n - 1)
        + math.lgamma(n)
        - math.lgamma(k)
        + (2 * k - 2 * n) * math.log(2.0)
    )


@dataclass(frozen=True)
class BlockCountPmf:
    """Distribution of the number of blocks K_n; probabilities[k-1] = Pr(K_n = k)."""

    n: int
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.probabilities) != self.n:
            raise ValueError("probabilities must have length n")

    @property
    def total(self) -> float:
        return math.fsum(self.probabilities)

    def mean(self) -> float:
        return math.fsum((k + 1) * p for k, p in enumerate(self.probabilities))


def blocks_pmf(
    n: int,
    params: GGParams,
    spec: QuadratureSpec | None = None,
    *,
    eta: EtaMemo | None = None,
    stirling: StirlingTable | None = None,
) -> BlockCountPmf:
    """Exact pmf of K_n via V_{n,k} and the Stirling recurrence.

    The probabilities are not renormalized; summing to one is a nontrivial
    identity and is left visible to tests.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if eta is None:
        eta = EtaMemo(params, spec)
    eta.ensure_rows(n)
    if stirling is None or stirling.n_max < n or stirling.alpha != params.alpha:
        stirling = stirling_table(params.alpha, n)
    probs = []
    for k in range(1, n + 1):
        log_p = (
            _log_vnk_prefactor(n, k, params)
            + eta.log_eta(n, k)
            + stirling.log_value(n, k)
        )
        probs.append(math.exp(log_p))
    return BlockCountPmf(n=n, probabilities=tuple(probs))


def diversity_density(
    params: GGParams,
    s: float,
    config: StableSeriesConfig | None = None,
) -> float:
    """Density of the alpha diversity S = lim K_n / n^alpha at s > 0.

    Exact change of variables of the tilted stable density. For alpha != 1/2
    large s maps to the small-t region where the stable series cancels, so
    the call raises CancellationError outside the reliable region instead of
    returning noise; alpha = 1/2 has full-domain closed forms.
    """
    if not s > 0.0:
        raise ValueError(f"s must be positive, got {s!r}")
    alpha, delta, gamma = params.alpha, params.delta, params.gamma
    t = 2.0 * delta ** (1.0 / alpha) * s ** (-1.0 / alpha)
    f = stable_density(alpha, delta, t, config)
    tilt = delta * gamma - (delta * gamma / s) ** (1.0 / alpha)
    jac = 2.0 * delta ** (1.0 / alpha) / (alpha * s ** (1.0 / alpha + 1.0))
    return math.exp(tilt) * f * jac


def diversity_density_half(delta: float, s: float) -> float:
    """Closed form of the diversity density at alpha = 1/2, gamma = 1."""
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    if not s > 0.0:
        raise ValueError(f"s must be positive, got {s!r}")
    return math.exp(delta - delta * delta / (s * s) - 0.25 * s * s) / math.sqrt(math.pi)
