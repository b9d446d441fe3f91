"""Exchangeable partition probabilities for the tilted stable family.

The EPPF has Gibbs form

    p(n_1, ..., n_k) = V_{n,k} prod_j (1 - alpha)_{n_j - 1}

with

    V_{n,k} = e^(delta gamma) delta^k alpha^k 2^n / Gamma(n) * eta(n, k),
    eta(n, k) = int_0^inf lam^(n-1) e^(-delta w^alpha) w^(k alpha - n) dlam,
    w = gamma^(1/alpha) + 2 lam.

Two evaluation routes for eta:

  * quadrature after the substitution u = delta w^alpha, which maps the
    domain to (delta gamma, inf) and makes the integrand exponentially
    decaying (handled by integrate_decaying);
  * at alpha = 1/2, gamma > 0, a finite sum of upper incomplete gamma
    functions obtained from the substitution t = delta sqrt(gamma^2 + 2 lam)
    and a binomial expansion; alternating, so it carries a cancellation
    guard and falls back to quadrature when digits run out.

One-customer predictive weights are eta ratios:

    p_j = (2/n) (eta(n+1, k) / eta(n, k)) (n_j - alpha),
    q   = (2/n) (eta(n+1, k+1) / eta(n, k)) alpha delta.

eta also satisfies an exact downward recurrence (integrate the total
derivative of lam^n e^(-delta w^alpha) w^(k alpha - n) over (0, inf)):

    n eta(n, k) = 2 delta alpha eta(n+1, k+1) + 2 (n - k alpha) eta(n+1, k)

whose coefficients are positive for k <= n. EtaMemo exploits it: one
quadrature row at the top index seeds the whole triangle, which is both
faster and more accurate than quadrature per cell.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .specfun import (
    CancellationError,
    DEFAULT_QUADRATURE,
    LogValue,
    QuadratureSpec,
    integrate_decaying,
    log_binomial,
    log_rising_factorial,
    sum_logvalues,
    upper_incomplete_gamma,
)
from .tempered_stable import GGParams

__all__ = [
    "Composition",
    "PredictiveDistribution",
    "EtaMemo",
    "CLOSED_FORM_MAX_N",
    "closed_form_fallbacks",
    "log_eta",
    "log_vnk",
    "log_eppf",
    "predictive",
]

_LN2 = math.log(2.0)

# beyond this n the alternating closed-form sum at alpha = 1/2 reliably loses
# more than the guard's 6 digits, so don't bother attempting it
CLOSED_FORM_MAX_N = 32

_MAX_DIGIT_LOSS = 6.0


class _FallbackCounter:
    """Counts closed-form evaluations that tripped the cancellation guard
    and fell back to quadrature."""

    def __init__(self):
        self._lock = threading.Lock()
        self.count = 0

    def bump(self) -> None:
        with self._lock:
            self.count += 1

    def reset(self) -> None:
        with self._lock:
            self.count = 0


closed_form_fallbacks = _FallbackCounter()


@dataclass(frozen=True)
class Composition:
    """An ordered composition (n_1, ..., n_k) of block sizes, all >= 1."""

    block_sizes: tuple[int, ...]

    def __post_init__(self):
        raw = tuple(self.block_sizes)
        if any(s != int(s) for s in raw):
            raise ValueError(f"block sizes must be integers, got {raw}")
        sizes = tuple(int(s) for s in raw)
        if len(sizes) == 0:
            raise ValueError("composition must have at least one block")
        if any(s < 1 for s in sizes):
            raise ValueError(f"block sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "block_sizes", sizes)

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @property
    def k(self) -> int:
        return len(self.block_sizes)

    def with_increment(self, j: int) -> "Composition":
        """The composition after adding one element to block j (0-based)."""
        if not 0 <= j < self.k:
            raise ValueError(f"block index {j} out of range")
        sizes = list(self.block_sizes)
        sizes[j] += 1
        return Composition(tuple(sizes))

    def with_new_block(self) -> "Composition":
        """The composition after opening a new singleton block."""
        return Composition(self.block_sizes + (1,))


@dataclass(frozen=True)
class PredictiveDistribution:
    """One-step seating weights: one per existing block plus the new-block mass."""

    existing: tuple[float, ...]
    new_block: float

    @property
    def total(self) -> float:
        return math.fsum(self.existing) + self.new_block


def _log_eta_quadrature(n: int, k: int, params: GGParams, spec: QuadratureSpec) -> float:
    alpha, delta = params.alpha, params.delta
    gr = params.gamma_root
    u0 = delta * params.gamma
    c = k * alpha - n + 1.0 - alpha
    log_norm = math.log(2.0 * alpha * delta)
    log_delta = math.log(delta)

    def log_f(u: np.ndarray) -> np.ndarray:
        logw = (np.log(u) - log_delta) / alpha
        out = -u + c * logw - log_norm
        if n > 1:
            w = np.exp(logw)
            lam = np.maximum(0.5 * (w - gr), 0.0)
            with np.errstate(divide="ignore"):
                out = out + (n - 1) * np.log(lam)
        return out

    return integrate_decaying(log_f, u0, spec).log_magnitude


def _log_eta_half_closed(n: int, k: int, params: GGParams) -> float:
    # alpha = 1/2, gamma > 0: eta(n,k) = 2^(1-n) delta^(-k) *
    #   sum_i C(n-1, i) (-1)^(n-1-i) (delta gamma)^(2(n-1-i)) Gamma(k-2n+2+2i; delta gamma)
    delta = params.delta
    x = delta * params.gamma
    log_x = math.log(x)
    terms = []
    for i in range(n):
        a_i = k - 2 * n + 2 + 2 * i
        g = upper_incomplete_gamma(float(a_i), x)
        lv = g.shifted(log_binomial(n - 1, i) + 2.0 * (n - 1 - i) * log_x)
        if (n - 1 - i) % 2 == 1:
            lv = -lv
        terms.append(lv)
    total = sum_logvalues(terms)
    max_log = max(t.log_magnitude for t in terms)
    if total.sign != 1:
        raise CancellationError(
            f"closed-form eta sum destroyed by cancellation at n={n}, k={k}"
        )
    loss = (max_log - total.log_magnitude) / math.log(10.0)
    if loss > _MAX_DIGIT_LOSS:
        raise CancellationError(
            f"closed-form eta lost {loss:.1f} digits at n={n}, k={k}"
        )
    return (1 - n) * _LN2 - k * math.log(delta) + total.log_magnitude


def _validate_nk(n: int, k: int) -> None:
    if not isinstance(n, (int, np.integer)) or not isinstance(k, (int, np.integer)):
        raise ValueError("n and k must be integers")
    if n < 1 or k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got n={n}, k={k}")


def log_eta(
    n: int,
    k: int,
    params: GGParams,
    spec: QuadratureSpec | None = None,
    method: str = "auto",
) -> LogValue:
    """log of eta(n, k) as a LogValue (eta is strictly positive).

    method: "auto" tries the alpha = 1/2 closed form when available (gamma > 0,
    n <= CLOSED_FORM_MAX_N) and falls back to quadrature on cancellation,
    bumping the module-level closed_form_fallbacks counter; "closed" forces
    the closed form (errors if unavailable or cancelled); "quadrature" forces
    numerical integration.
    """
    _validate_nk(n, k)
    if spec is None:
        spec = DEFAULT_QUADRATURE
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed":
        if params.alpha != 0.5 or params.gamma <= 0.0:
            raise ValueError("closed form requires alpha = 1/2 and gamma > 0")
        return LogValue.from_log(_log_eta_half_closed(n, k, params))
    if (
        method == "auto"
        and params.alpha == 0.5
        and params.gamma > 0.0
        and n <= CLOSED_FORM_MAX_N
    ):
        try:
            return LogValue.from_log(_log_eta_half_closed(n, k, params))
        except CancellationError:
            closed_form_fallbacks.bump()
    return LogValue.from_log(_log_eta_quadrature(n, k, params, spec))


def log_vnk(
    n: int,
    k: int,
    params: GGParams,
    spec: QuadratureSpec | None = None,
    method: str = "auto",
) -> LogValue:
    """log of the Gibbs coefficient V_{n,k} as a LogValue."""
    le = log_eta(n, k, params, spec, method)
    return le.shifted(_log_vnk_prefactor(n, k, params))


def _log_vnk_prefactor(n: int, k: int, params: GGParams) -> float:
    return (
        params.delta * params.gamma
        + k * (math.log(params.delta) + math.log(params.alpha))
        + n * _LN2
        - math.lgamma(n)
    )


def log_eppf(
    composition: Composition,
    params: GGParams,
    spec: QuadratureSpec | None = None,
    method: str = "auto",
) -> LogValue:
    """log EPPF value of an ordered composition of block sizes."""
    n, k = composition.n, composition.k
    lv = log_vnk(n, k, params, spec, method)
    w = math.fsum(
        log_rising_factorial(1.0 - params.alpha, s - 1) for s in composition.block_sizes
    )
    return lv.shifted(w)


class EtaMemo:
    """Memoized log eta(n, k) values for one parameter set.

    ensure_rows(n_top) computes the top row by quadrature (n_top integrals)
    and fills every row below through the exact downward recurrence, giving
    the whole triangle for O(n_top) quadratures. Cells outside the table are
    computed on demand through the usual dispatch and cached. Thread-safe.
    """

    def __init__(self, params: GGParams, spec: QuadratureSpec | None = None):
        self.params = params
        self.spec = spec if spec is not None else DEFAULT_QUADRATURE
        self._rows: dict[int, np.ndarray] = {}
        self._top = 0
        self._cells: dict[tuple[int, int], float] = {}
        self._lock = threading.RLock()
        self.quadrature_cells = 0

    def ensure_rows(self, n_top: int) -> None:
        """Guarantee table coverage of every (n, k) with n <= n_top."""
        if n_top < 1:
            raise ValueError("n_top must be >= 1")
        with self._lock:
            if self._top >= n_top:
                return
            alpha, delta = self.params.alpha, self.params.delta
            top = np.full(n_top + 2, -np.inf)
            for k in range(1, n_top + 1):
                top[k] = _log_eta_quadrature(n_top, k, self.params, self.spec)
                self.quadrature_cells += 1
            rows = {n_top: top}
            log_2ad = math.log(2.0 * alpha * delta)
            for n in range(n_top - 1, 0, -1):
                nxt = rows[n + 1]
                k_arr = np.arange(1, n + 1, dtype=float)
                new_part = log_2ad + nxt[2:n + 2]
                old_part = _LN2 + np.log(n - alpha * k_arr) + nxt[1:n + 1]
                row = np.full(n + 2, -np.inf)
                row[1:n + 1] = np.logaddexp(new_part, old_part) - math.log(n)
                rows[n] = row
            self._rows = rows
            self._top = n_top

    def log_eta(self, n: int, k: int) -> float:
        _validate_nk(n, k)
        with self._lock:
            if n <= self._top:
                return float(self._rows[n][k])
            key = (n, k)
            if key not in self._cells:
                self._cells[key] = log_eta(n, k, self.params, self.spec).log_magnitude
                self.quadrature_cells += 1
            return self._cells[key]

    def log_row(self, n: int) -> np.ndarray:
        """Direct row access (index k, valid 1..n); table rows only."""
        with self._lock:
            if n > self._top:
                raise KeyError(f"row {n} not in table (top is {self._top})")
            return self._rows[n]


def predictive(
    composition: Composition | None,
    params: GGParams,
    spec: QuadratureSpec | None = None,
    eta: EtaMemo | None = None,
) -> PredictiveDistribution:
    """Seating weights for the next element given the current composition.

    For the empty state (composition None) the first element opens a new
    block with probability one. Weights are eta ratios computed as log
    differences; they sum to one up to quadrature tolerance.
    """
    if composition is None:
        return PredictiveDistribution(existing=(), new_block=1.0)
    if eta is None:
        eta = EtaMemo(params, spec)
    n, k = composition.n, composition.k
    le = eta.log_eta(n, k)
    le_same = eta.log_eta(n + 1, k)
    le_up = eta.log_eta(n + 1, k + 1)
    base = (2.0 / n) * math.exp(le_same - le)
    existing = tuple(base * (s - params.alpha) for s in composition.block_sizes)
    new_block = (2.0 / n) * math.exp(le_up - le) * params.alpha * params.delta
    return PredictiveDistribution(existing=existing, new_block=new_block)
