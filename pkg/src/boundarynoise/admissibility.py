"""Criteria deciding whether the boundary-noise problem has a state-space solution.

Three interchangeable routes are implemented for diagonal models:

* the time-domain integral ``gamma(T) = sum_n w_n int_0^T exp(2 lambda_n t) dt``
  (:func:`gamma_time`, with :func:`gamma_infinite` for stable models),
* the frequency-domain series over ``omega + 2 pi i n / T`` (:func:`frequency_series`),
* the resolvent bound scan (:func:`weiss_scan`) and the dyadic diagnostic
  (:func:`dyadic_diagnostic`), which probe the same quantity from the real axis.

Every series-valued answer is a :class:`SeriesVerdict`: a materialized partial
sum, a certified remainder bracket, and a verdict.  Divergence is never
inferred from partial-sum growth; it requires an analytic witness derived from
the declared tail rules (a constant lower bound on infinitely many terms, an
integral-comparison divergence, or a term that is itself infinite).

Per-mode and per-frequency terms are accumulated in a fixed order (ascending
``|n|``, then mode index), so results are bitwise deterministic for a given
configuration.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._tails import (
    frequency_line_tail,
    frequency_mode_tail,
    gamma_power_tail,
    line_sum_exact,
)
from .errors import (
    PreconditionError,
    SingularResolventError,
    TruncationMismatchError,
    UnsupportedRepresentationError,
)
from .spectral import Coefficients, DiagonalModel, exp_integral, growth_bound

#: Default relative width target for certified remainder brackets.
REL_TAIL_TARGET = 1e-10
#: Weights at or below this floor are too small to witness divergence soundly.
DIVERGENCE_FLOOR = 1e-12

UNBOUNDED = math.inf


class Verdict(enum.Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SeriesVerdict:
    """Outcome of a convergence test.

    ``partial_value`` is the sum over materialized terms.  The remainder is
    enclosed in ``[tail_value, tail_value + tail_bound]``; ``tail_bound`` is
    ``math.inf`` for a certified divergence and ``None`` when the remainder is
    unknown (Inconclusive).  The certified total therefore lies in
    ``[value, value + tail_bound]`` with ``value = partial_value + tail_value``.
    """

    partial_value: float
    tail_value: float
    tail_bound: float | None
    verdict: Verdict
    evidence: str

    def __post_init__(self):
        if self.verdict is Verdict.CONVERGED:
            if self.tail_bound is None or not math.isfinite(self.tail_bound):
                raise PreconditionError("a Converged verdict requires a finite tail bound")
        if self.verdict is Verdict.DIVERGED:
            if not self.evidence:
                raise PreconditionError("a Diverged verdict requires a witness in evidence")
        if self.verdict is Verdict.INCONCLUSIVE and self.tail_bound is not None:
            raise PreconditionError("an Inconclusive verdict carries an unknown tail bound")

    @property
    def value(self) -> float:
        """Best certified value (lower end of the enclosure)."""
        return self.partial_value + self.tail_value

    @property
    def upper(self) -> float:
        if self.tail_bound is None:
            raise PreconditionError("no certified upper value for an Inconclusive verdict")
        return self.value + self.tail_bound

    @property
    def relative_tail(self) -> float:
        if self.tail_bound is None:
            return math.inf
        scale = abs(self.value)
        if scale == 0.0:
            return 0.0 if self.tail_bound == 0.0 else math.inf
        return self.tail_bound / scale


def _converged(partial: float, tail_value: float, tail_width: float, evidence: str) -> SeriesVerdict:
    return SeriesVerdict(partial, tail_value, tail_width, Verdict.CONVERGED, evidence)


def _diverged(partial: float, evidence: str) -> SeriesVerdict:
    return SeriesVerdict(partial, 0.0, UNBOUNDED, Verdict.DIVERGED, evidence)


def _inconclusive(partial: float, evidence: str) -> SeriesVerdict:
    return SeriesVerdict(partial, 0.0, None, Verdict.INCONCLUSIVE, evidence)


@dataclass(frozen=True)
class FrequencyGrid:
    """Evaluation points ``omega + 2 pi i n / T`` for ``|n| <= n_max``."""

    omega: float
    T: float
    n_max: int

    def __post_init__(self):
        if self.T <= 0:
            raise PreconditionError("frequency grid horizon must be positive")
        if self.n_max < 1:
            raise PreconditionError("frequency grid needs n_max >= 1")


def _require_diagonal(model) -> DiagonalModel:
    if not isinstance(model, DiagonalModel):
        raise UnsupportedRepresentationError(
            f"{type(model).__name__} has no spectral representation; "
            "only the closed-form Dirichlet route applies to it"
        )
    return model


def _require_paired(model: DiagonalModel, coeffs: Coefficients) -> None:
    if coeffs.mode_count != model.mode_count:
        raise TruncationMismatchError(
            f"coefficient table has {coeffs.mode_count} modes, model has {model.mode_count}"
        )


def gamma_time(
    model: DiagonalModel,
    coeffs: Coefficients,
    T: float,
    *,
    rel_tail_target: float = REL_TAIL_TARGET,
    divergence_floor: float = DIVERGENCE_FLOOR,
    max_tail_terms: int = 400_000,
) -> SeriesVerdict:
    """Time-domain criterion ``gamma(T) = sum_n w_n (exp(2 lambda_n T) - 1) / (2 lambda_n)``.

    The ``lambda = 0`` mode contributes ``w * T`` (exact limit).  The remainder
    beyond the materialized modes is certified from the coefficient tail rule;
    without one the verdict is Inconclusive, never silently Converged.
    """
    model = _require_diagonal(model)
    _require_paired(model, coeffs)
    if T <= 0:
        raise PreconditionError(f"horizon must be positive, got {T}")
    w = coeffs.weights
    terms = w * exp_integral(model.eigenvalues, T)
    partial = float(np.sum(terms))

    if model.tail is None:
        return _converged(partial, 0.0, 0.0, "finite model; per-mode closed-form integrals")
    rule = coeffs.tail
    if rule is None:
        return _inconclusive(partial, "no coefficient tail rule declared; remainder unknown")
    if rule.kind == "zero":
        return _converged(partial, 0.0, 0.0, "coefficient tail vanishes beyond materialized range")
    tail = model.tail
    if rule.kind == "ell2":
        sup = float(tail.eigenvalue(tail.next_index))
        cap = T * math.exp(2.0 * max(sup, 0.0) * T)
        return _converged(
            partial,
            0.0,
            cap * float(rule.value),
            f"ell2 tail: per-mode integrals <= {cap:.6g}, remainder <= bound * that",
        )
    w_tail = coeffs.tail_weight()
    if w_tail == 0.0:
        return _converged(partial, 0.0, 0.0, "constant tail weight is zero")
    if tail.p <= 1:
        if w_tail <= divergence_floor:
            return _inconclusive(partial, "tail weight below divergence threshold")
        return _diverged(
            partial,
            f"constant-weight tail with p={tail.p:g} <= 1: terms ~ w/(2 c n^p) "
            "diverge by integral comparison",
        )
    scale = partial if partial > 0 else 1.0
    bracket = gamma_power_tail(
        tail.c, tail.p, tail.offset, w_tail, T, tail.next_index,
        abs_target=rel_tail_target * scale, max_terms=max_tail_terms,
    )
    return _converged(
        partial,
        bracket.lower,
        bracket.width,
        f"constant-weight tail: integral-comparison bracket after {bracket.terms_used} analytic terms",
    )


def gamma_infinite(
    model: DiagonalModel,
    coeffs: Coefficients,
    t0: float = 1.0,
    *,
    rel_tail_target: float = REL_TAIL_TARGET,
    divergence_floor: float = DIVERGENCE_FLOOR,
    max_tail_terms: int = 400_000,
) -> SeriesVerdict:
    """Infinite-horizon value ``sum_n w_n / (2 |lambda_n|)`` for exponentially stable models.

    Requires a certified negative growth bound.  The evidence also records the
    geometric cross-bound ``gamma(t0) / (1 - q^2)`` with ``q = exp(g t0)``, which
    the exact value can never exceed.
    """
    model = _require_diagonal(model)
    _require_paired(model, coeffs)
    g = growth_bound(model)
    if g >= 0:
        raise PreconditionError(
            f"infinite-horizon criterion requires exponential stability; growth bound {g:g} >= 0"
        )
    if t0 <= 0:
        raise PreconditionError("t0 must be positive")
    w = coeffs.weights
    partial = float(np.sum(w / (2.0 * np.abs(model.eigenvalues))))

    geo_note = ""
    finite_t = gamma_time(
        model, coeffs, t0,
        rel_tail_target=rel_tail_target, divergence_floor=divergence_floor,
        max_tail_terms=max_tail_terms,
    )
    if finite_t.verdict is Verdict.CONVERGED:
        q = math.exp(g * t0)
        geo = finite_t.upper / (1.0 - q * q)
        geo_note = f"; geometric cross-bound {geo:.17g} from horizon {t0:g}"

    if model.tail is None:
        return _converged(partial, 0.0, 0.0, "finite model; per-mode closed forms" + geo_note)
    rule = coeffs.tail
    if rule is None:
        return _inconclusive(partial, "no coefficient tail rule declared; remainder unknown")
    if rule.kind == "zero":
        return _converged(partial, 0.0, 0.0, "coefficient tail vanishes" + geo_note)
    tail = model.tail
    if rule.kind == "ell2":
        a_next = -float(tail.eigenvalue(tail.next_index))
        return _converged(
            partial, 0.0, float(rule.value) / (2.0 * a_next),
            f"ell2 tail: remainder <= bound / (2*{a_next:.6g})" + geo_note,
        )
    w_tail = coeffs.tail_weight()
    if w_tail == 0.0:
        return _converged(partial, 0.0, 0.0, "constant tail weight is zero" + geo_note)
    if tail.p <= 1:
        if w_tail <= divergence_floor:
            return _inconclusive(partial, "tail weight below divergence threshold")
        return _diverged(
            partial,
            f"constant-weight tail with p={tail.p:g} <= 1: terms ~ w/(2 c n^p) "
            "diverge by integral comparison",
        )
    scale = partial if partial > 0 else 1.0
    bracket = gamma_power_tail(
        tail.c, tail.p, tail.offset, w_tail, None, tail.next_index,
        abs_target=rel_tail_target * scale, max_terms=max_tail_terms,
    )
    return _converged(
        partial,
        bracket.lower,
        bracket.width,
        f"constant-weight tail bracket after {bracket.terms_used} analytic terms" + geo_note,
    )


def frequency_series(
    model: DiagonalModel,
    coeffs: Coefficients,
    grid: FrequencyGrid,
    *,
    rel_tail_target: float = REL_TAIL_TARGET,
    divergence_floor: float = DIVERGENCE_FLOOR,
    max_tail_terms: int = 400_000,
) -> SeriesVerdict:
    """Frequency-domain criterion: ``sum_n sum_m w_m / ((omega - lambda_m)^2 + (2 pi n / T)^2)``.

    Sums the grid terms for ``|n| <= n_max`` (ascending ``|n|``), certifies the
    ``n``-remainder by the arctangent integral comparison per materialized mode,
    and the mode remainder from the tail rules (each non-materialized mode
    contributes its full frequency line, see :func:`.line_sum_exact`).
    """
    model = _require_diagonal(model)
    _require_paired(model, coeffs)
    omega, T, n_max = grid.omega, grid.T, grid.n_max
    g = growth_bound(model)
    if omega <= g:
        raise PreconditionError(f"omega={omega:g} must exceed the growth bound {g:g}")
    w = coeffs.weights
    a = omega - model.eigenvalues  # all positive

    kappa = 2.0 * math.pi * np.arange(1, n_max + 1) / T
    partial = float(np.sum(w / a**2))
    per_n = np.sum(w[None, :] / (a[None, :] ** 2 + kappa[:, None] ** 2), axis=1)
    partial += float(np.sum(2.0 * per_n))

    line_lower, line_width = frequency_line_tail(a, T, n_max)
    tail_value = float(np.sum(w * line_lower))
    tail_width = float(np.sum(w * line_width))

    if model.tail is None:
        return _converged(partial, tail_value, tail_width,
                          "finite model; frequency remainder by arctan integral comparison")
    rule = coeffs.tail
    if rule is None:
        return _inconclusive(partial, "no coefficient tail rule declared; mode remainder unknown")
    tail = model.tail
    if rule.kind == "zero":
        return _converged(partial, tail_value, tail_width,
                          "coefficient tail vanishes; frequency remainder by integral comparison")
    if rule.kind == "ell2":
        a_next = omega + tail.offset + tail.c * float(tail.next_index) ** tail.p
        cap = float(line_sum_exact(np.array([a_next]), T)[0])
        return _converged(
            partial, tail_value, tail_width + cap * float(rule.value),
            f"ell2 tail: each tail mode line-sums to <= {cap:.6g}",
        )
    w_tail = coeffs.tail_weight()
    if w_tail == 0.0:
        return _converged(partial, tail_value, tail_width, "constant tail weight is zero")
    if tail.p <= 1:
        if w_tail <= divergence_floor:
            return _inconclusive(partial, "tail weight below divergence threshold")
        return _diverged(
            partial,
            f"mode tail diverges: per-mode frequency lines >= w T / (2 (omega - lambda_n)) "
            f"with p={tail.p:g} <= 1, divergent by integral comparison",
        )
    scale = partial if partial > 0 else 1.0
    bracket = frequency_mode_tail(
        tail.c, tail.p, omega + tail.offset, w_tail, T, tail.next_index,
        abs_target=rel_tail_target * scale, max_terms=max_tail_terms,
    )
    return _converged(
        partial,
        tail_value + bracket.lower,
        tail_width + bracket.width,
        f"constant-weight mode tail bracketed after {bracket.terms_used} analytic line sums",
    )


def parseval_identity_check(
    model: DiagonalModel,
    obs: Coefficients,
    omega: float,
    T: float,
    n_terms: int = 2000,
) -> float:
    """Relative residual of the exact discounted-output identity.

    LHS: ``sum_m w_m (1 - exp(-2 a_m T)) / (2 a_m)`` with ``a_m = omega - lambda_m``.
    RHS: ``(1/T) sum_{n in Z} sum_m w_m J_m^2 / (a_m^2 + (2 pi n / T)^2)`` with
    ``J_m = 1 - exp(-a_m T)`` (the endpoint-correction factor); the ``1/T``
    normalizes the exponential frequency basis on ``[0, T]``.  The ``n``-tail is
    certified by integral comparison and entered at its midpoint.
    """
    model = _require_diagonal(model)
    _require_paired(model, obs)
    if model.tail is not None:
        raise PreconditionError("identity check requires a finite (explicit-spectrum) model")
    if T <= 0:
        raise PreconditionError("horizon must be positive")
    g = growth_bound(model)
    if omega <= g:
        raise PreconditionError(
            f"omega={omega:g} must exceed the growth bound {g:g} "
            "(the discounted endpoint map must be a strict contraction)"
        )
    if n_terms < 1:
        raise PreconditionError("need at least one frequency term")
    w = obs.weights
    a = omega - model.eigenvalues
    lhs = float(np.sum(w * (-np.expm1(-2.0 * a * T)) / (2.0 * a)))
    if lhs == 0.0:
        return 0.0
    j_sq = np.expm1(-a * T) ** 2
    kappa = 2.0 * math.pi * np.arange(1, n_terms + 1) / T
    partial = float(np.sum(w * j_sq / a**2))
    per_n = np.sum((w * j_sq)[None, :] / (a[None, :] ** 2 + kappa[:, None] ** 2), axis=1)
    partial += float(np.sum(2.0 * per_n))
    lower, width = frequency_line_tail(a, T, n_terms)
    tail_mid = float(np.sum(w * j_sq * (lower + 0.5 * width)))
    rhs = (partial + tail_mid) / T
    return abs(lhs - rhs) / lhs


@dataclass(frozen=True)
class WeissScan:
    """Resolvent-bound scan: ``sqrt(Re lam - omega) * ||resolvent row sums||`` per point."""

    statistic: float
    arg_max: complex
    points: np.ndarray
    values: np.ndarray


def weiss_scan(model: DiagonalModel, obs: Coefficients, omega: float, lam_grid) -> WeissScan:
    """Scan ``sqrt(Re lam - omega) * (sum_m w_m / |lam - lambda_m|^2)^(1/2)`` over a grid.

    For any model whose infinite-horizon criterion converges, the statistic is
    bounded (the scan never blows up under grid refinement).
    """
    model = _require_diagonal(model)
    _require_paired(model, obs)
    g = growth_bound(model)
    if omega <= g:
        raise PreconditionError(f"omega={omega:g} must exceed the growth bound {g:g}")
    pts = np.asarray(lam_grid, dtype=complex).ravel()
    if pts.size == 0:
        raise PreconditionError("empty scan grid")
    if np.any(pts.real <= omega):
        bad = pts[pts.real <= omega][0]
        raise PreconditionError(f"grid point {bad} has Re(lambda) <= omega={omega:g}")
    w = obs.weights
    gaps = pts[:, None] - model.eigenvalues[None, :]
    sums = np.sum(w[None, :] / np.abs(gaps) ** 2, axis=1)
    values = np.sqrt(pts.real - omega) * np.sqrt(sums)
    k = int(np.argmax(values))
    return WeissScan(float(values[k]), complex(pts[k]), pts, values)


def dyadic_diagnostic(
    model: DiagonalModel,
    ctrl: Coefficients,
    n_range: int = 10,
    *,
    divergence_floor: float = DIVERGENCE_FLOOR,
) -> SeriesVerdict:
    """Dyadic sum ``sum_n 2^n sum_m w_m / (2^n - lambda_m)^2`` over ``|n| <= n_range``.

    Diagnostic only: no existence claim is attached.  Negative exponents are
    included only while ``2^n`` exceeds the growth bound (the point must stay
    on the resolvent ray); hitting an eigenvalue exactly is an error.  Terms
    are symmetric under ``n -> -n`` for a single mode at ``lambda = -1``; the
    per-exponent table is accumulated ascending ``|n|``.
    """
    model = _require_diagonal(model)
    _require_paired(model, ctrl)
    if n_range < 1:
        raise PreconditionError("n_range must be >= 1")
    w = ctrl.weights
    lam = model.eigenvalues
    g = growth_bound(model)

    # nonnegative exponents always enter; negative ones only while 2^n > growth bound
    order = [0]
    for k in range(1, n_range + 1):
        order.extend([-k, k])
    exponents = [n for n in order if n >= 0 or g < 0 or 2.0**n > g]
    partial = 0.0
    for n in exponents:
        point = 2.0**n
        gaps = point - lam
        hit = np.nonzero(gaps == 0.0)[0]
        if hit.size:
            raise SingularResolventError(point, int(hit[0]))
        partial += float(point * np.sum(w / gaps**2))

    zero_modes = np.nonzero((lam == 0.0) & (w > divergence_floor))[0]
    if zero_modes.size:
        return _diverged(
            partial,
            f"zero eigenvalue (mode {int(zero_modes[0])}): negative-side terms grow like 2^|n|",
        )
    if model.tail is not None:
        return _inconclusive(partial, "materialized modes only; mode tail not certified (diagnostic)")
    lam_max = float(np.max(lam))
    if lam_max >= 0.0:
        return _inconclusive(partial, "growth bound >= 0: dyadic remainder not certified (diagnostic)")
    # n > K: (2^n - lam)^2 >= 2^(2n); n < -K: (2^n - lam)^2 >= lam^2
    scale = 2.0 ** (-n_range)
    bound = scale * float(np.sum(w)) + scale * float(np.sum(w / lam**2))
    return _converged(partial, 0.0, bound, "geometric remainder bounds on both dyadic sides")


def duality_residual(
    model: DiagonalModel,
    ctrl: Coefficients,
    T: float,
    u_values: np.ndarray,
    x: np.ndarray,
    subdiv: int = 8,
) -> float:
    """Relative gap between the two accumulation orders of the input-map pairing.

    Route one integrates the control exactly against each mode (piecewise
    closed forms, modes outer); route two forms the time signal
    ``t -> sum_m beta_m exp(lambda_m (T - t)) x_m`` and integrates it against
    ``u`` by composite Simpson quadrature (``subdiv`` panels per piece).
    ``u_values`` holds one row of channel values per piece of a uniform
    partition of ``[0, T]``.
    """
    model = _require_diagonal(model)
    _require_paired(model, ctrl)
    if T <= 0:
        raise PreconditionError("horizon must be positive")
    u = np.asarray(u_values, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] < 1:
        raise PreconditionError("empty control grid")
    if u.shape[1] != ctrl.channel_count:
        raise TruncationMismatchError("control values do not match the channel count")
    if subdiv < 2 or subdiv % 2:
        raise PreconditionError("subdiv must be an even integer >= 2")
    x = np.asarray(x, dtype=float)
    pieces = u.shape[0]
    edges = np.linspace(0.0, T, pieces + 1)
    lam = model.eigenvalues
    beta = ctrl.array

    # route one: exact piece integrals of exp(lambda (T - s)), modes outer
    upper = np.exp(np.multiply.outer(T - edges[:-1], lam))
    lower = np.exp(np.multiply.outer(T - edges[1:], lam))
    h = T / pieces
    piece_int = np.where(lam[None, :] == 0.0, h, (upper - lower) / np.where(lam == 0.0, 1.0, lam)[None, :])
    ub = u @ beta.T  # (pieces, modes)
    lhs = float(np.sum(x * np.sum(piece_int * ub, axis=0)))

    # route two: Simpson quadrature of u(t) . (B* orbit of x), pieces outer
    offs = np.linspace(0.0, h, subdiv + 1)
    nodes = edges[:-1][:, None] + offs[None, :]  # (pieces, subdiv+1)
    decay = np.exp(np.multiply.outer(T - nodes, lam))  # (pieces, subdiv+1, modes)
    v = decay @ (beta * x[:, None])  # (pieces, subdiv+1, channels)
    integrand = np.einsum("pk,pjk->pj", u, v)
    wts = np.ones(subdiv + 1)
    wts[1:-1:2] = 4.0
    wts[2:-1:2] = 2.0
    wts *= h / (3.0 * subdiv)
    rhs = float(np.sum(integrand @ wts))

    scale = max(abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale if scale > 0.0 else 0.0


def adjoint_duality_check(
    model: DiagonalModel,
    ctrl: Coefficients,
    T: float,
    pieces: int = 64,
    trials: int = 100,
    seed: int = 0,
    subdiv: int = 8,
) -> float:
    """Max :func:`duality_residual` over random piecewise-constant controls and states."""
    if pieces < 1:
        raise PreconditionError("empty time partition")
    if trials < 1:
        raise PreconditionError("need at least one trial")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(model.mode_count)
        u = rng.standard_normal((pieces, ctrl.channel_count))
        worst = max(worst, duality_residual(model, ctrl, T, u, x, subdiv=subdiv))
    return worst
