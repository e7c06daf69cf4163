"""Concrete boundary-noise systems with closed-form cross-oracles.

Two systems are materialized:

* the 1-D heat equation on ``(0, pi)`` with zero-flux walls and white-noise
  flux injected at one endpoint -- diagonalized by the cosine basis, so every
  spectral routine applies and the stationary-problem solution gives an
  independent quadrature oracle;
* the left-shift (transport) system on ``[-r, 0]`` with noise entering at
  ``theta = 0`` -- not diagonalizable, carried entirely by closed forms.  Its
  frequency criterion has constant terms, which certifies divergence.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Literal, Union

import numpy as np
from scipy import integrate

from ._tails import power_envelope_tail
from .admissibility import (
    FrequencyGrid,
    SeriesVerdict,
    _converged,
    _diverged,
    frequency_series,
)
from .errors import PreconditionError, SingularResolventError
from .spectral import COUNTABLE, Coefficients, DiagonalModel, TailRule

Side = Literal["left", "right"]


@dataclass(frozen=True, eq=False)
class HeatNeumannModel:
    """Heat equation on ``(0, pi)`` with flux noise at one endpoint.

    Wraps the cosine-basis diagonal model (``lambda_n = -n^2``) together with
    the endpoint-trace control coefficients.  ``feedback`` optionally carries
    the mode coefficients of a mean functional applied at the opposite
    endpoint's flux condition.
    """

    side: Side
    model: DiagonalModel
    control: Coefficients
    feedback: np.ndarray | None = None


def build_heat_neumann(side: Side, modes: int, feedback: np.ndarray | None = None) -> HeatNeumannModel:
    """Materialize the heat model with ``modes`` cosine modes.

    Basis: ``phi_0 = 1/sqrt(pi)``, ``phi_n = sqrt(2/pi) cos(n x)`` for
    ``n >= 1`` (orthonormal, including the constant mode).  Right-side noise
    couples through ``phi_n(pi)``, left-side through ``-phi_n(0)``.  The tail
    weight is the constant ``2/pi`` regardless of truncation.
    """
    if side not in ("left", "right"):
        raise PreconditionError(f"side must be 'left' or 'right', got {side!r}")
    if modes < 1:
        raise PreconditionError("need at least one mode")
    model = DiagonalModel.from_power(c=1.0, p=2.0, modes=modes, include_zero_mode=True)
    beta = np.empty(modes)
    beta[0] = 1.0 / math.sqrt(math.pi)
    if modes > 1:
        n = np.arange(1, modes)
        signs = (-1.0) ** n if side == "right" else np.ones(modes - 1)
        beta[1:] = math.sqrt(2.0 / math.pi) * signs
    if side == "left":
        beta = -beta
    control = Coefficients(beta[:, None], tail=TailRule("constant", 2.0 / math.pi))
    if feedback is not None:
        feedback = np.asarray(feedback, dtype=float)
        if feedback.shape != (modes,):
            raise PreconditionError("feedback coefficients must match the mode count")
    return HeatNeumannModel(side=side, model=model, control=control, feedback=feedback)


def constant_one_feedback(modes: int) -> np.ndarray:
    """Mode coefficients of the mean functional ``phi -> int_0^pi phi``.

    Only the constant mode is seen: ``<1, phi_0> = sqrt(pi)``, all higher
    cosine modes integrate to zero.
    """
    m = np.zeros(modes)
    m[0] = math.sqrt(math.pi)
    return m


def heat_field(x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_n x_n phi_n(xi)`` on a spatial grid for the heat basis."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    out = np.full(xi.shape, x[0] / math.sqrt(math.pi))
    for n in range(1, x.size):
        out += x[n] * math.sqrt(2.0 / math.pi) * np.cos(n * xi)
    return out


def _heat_singular_mode(lam: complex) -> int | None:
    """Index ``k`` with ``lam == -k**2`` (the stationary problem's spectrum), else None."""
    if lam == 0:
        return 0
    if lam.imag == 0 and lam.real < 0:
        r = math.sqrt(-lam.real)
        k = round(r)
        if k >= 1 and r == float(k):
            return k
    return None


def heat_dirichlet_closed_form(lam: complex, xi: float, side: Side = "right", alpha: float = 1.0) -> complex:
    """Solution of ``lam phi = phi''`` with unit flux at the noisy endpoint, at ``xi``.

    Right side: ``phi'(0) = 0``, ``phi'(pi) = alpha`` gives
    ``phi(xi) = alpha cosh(sqrt(lam) xi) / (sqrt(lam) sinh(sqrt(lam) pi))``;
    the left side is the mirror image ``xi -> pi - xi`` with opposite sign.
    Evaluated through decaying exponentials, so large ``|sqrt(lam)|`` is safe.
    """
    lam = complex(lam)
    if not 0.0 <= xi <= math.pi:
        raise PreconditionError("xi must lie in [0, pi]")
    k = _heat_singular_mode(lam)
    if k is not None:
        raise SingularResolventError(lam, k)
    if side not in ("left", "right"):
        raise PreconditionError(f"side must be 'left' or 'right', got {side!r}")
    sign = 1.0
    if side == "left":
        xi = math.pi - xi
        sign = -1.0
    a = cmath.sqrt(lam)  # principal branch, Re a >= 0
    # cosh(a xi)/sinh(a pi) = (e^{a(xi-pi)} + e^{-a(xi+pi)}) / (1 - e^{-2 a pi})
    num = cmath.exp(a * (xi - math.pi)) + cmath.exp(-a * (xi + math.pi))
    den = 1.0 - cmath.exp(-2.0 * a * math.pi)
    return sign * alpha * num / (a * den)


def heat_dirichlet_hs_norm_quadrature(
    lam: complex, side: Side = "right", rel_tol: float = 1e-10
) -> float:
    """Squared Hilbert-Schmidt norm of the stationary solution map, by quadrature.

    Integrates ``|phi(xi)|^2`` of :func:`heat_dirichlet_closed_form` over
    ``[0, pi]`` -- an oracle independent of the spectral route.
    """
    f = lambda s: abs(heat_dirichlet_closed_form(lam, s, side)) ** 2
    value, _ = integrate.quad(f, 0.0, math.pi, epsabs=0.0, epsrel=rel_tol, limit=200)
    return float(value)


def dirichlet_hs_norm_spectral(
    model: DiagonalModel,
    ctrl: Coefficients,
    lam: complex,
    *,
    rel_tail_target: float = 1e-10,
    max_tail_terms: int = 400_000,
) -> float:
    """Squared Hilbert-Schmidt norm ``sum_n w_n / |lam - lambda_n|^2`` with certified tail.

    The stationary solution map factors through the resolvent, so its squared
    norm is the resolvent-weighted coefficient sum.  For power-tail models the
    remainder is summed analytically and bracketed; the returned value is the
    certified lower end (the bracket width sits below ``rel_tail_target``
    relative whenever the budget allows).
    """
    if ctrl.mode_count != model.mode_count:
        raise PreconditionError("coefficient table does not match the model truncation")
    lam = complex(lam)
    gaps = lam - model.eigenvalues
    hits = np.nonzero(gaps == 0)[0]
    if hits.size:
        raise SingularResolventError(lam, int(hits[0]))
    w = ctrl.weights
    partial = float(np.sum(w / np.abs(gaps) ** 2))
    tail = model.tail
    if tail is None:
        return partial
    w_tail = ctrl.tail_weight()
    if w_tail is None:
        if ctrl.tail is not None and ctrl.tail.kind == "zero":
            return partial
        raise PreconditionError("tail rule required to certify the spectral norm remainder")
    if w_tail == 0.0:
        return partial
    a_off = lam.real + tail.offset
    if a_off + tail.c * float(tail.next_index) ** tail.p <= 0:
        raise PreconditionError("lambda too far left to certify the remainder")
    bracket = power_envelope_tail(
        tail.c, tail.p, 2.0, a_off, w_tail, tail.next_index,
        abs_target=rel_tail_target * max(partial, 1e-300),
        extra_sq=lam.imag**2, max_terms=max_tail_terms,
    )
    return partial + bracket.lower


@dataclass(frozen=True)
class TransportModel:
    """Left-shift system on ``[-r, 0]`` with noise entering at ``theta = 0``.

    The semigroup is nilpotent at time ``r``; the stationary solution map has
    the closed form ``(theta, v) -> exp(lam theta) v``, whose squared
    Hilbert-Schmidt norm is ``d (1 - exp(-2 Re(lam) r)) / (2 Re lam)``
    (limit ``d r`` on the imaginary axis) -- constant along every vertical
    line, which is what certifies divergence of the frequency criterion.
    """

    delay: float
    noise_dim: Union[int, str] = 1

    def __post_init__(self):
        if self.delay <= 0:
            raise PreconditionError("delay must be positive")
        if self.noise_dim != COUNTABLE and (not isinstance(self.noise_dim, int) or self.noise_dim < 1):
            raise PreconditionError("noise_dim must be a positive integer or 'countable'")

    def dirichlet_hs_norm_sq(self, lam: complex) -> float:
        """``d * int_{-r}^0 exp(2 Re(lam) theta) dtheta``; infinite for countable noise."""
        if self.noise_dim == COUNTABLE:
            return math.inf
        re = complex(lam).real
        if re == 0.0:
            return float(self.noise_dim) * self.delay
        return float(self.noise_dim) * (-math.expm1(-2.0 * re * self.delay)) / (2.0 * re)

    def apply_shift(self, t: float, phi: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
        """The shift orbit: ``(S(t) phi)(theta) = phi(t + theta)`` for ``theta < -t``, else 0."""
        if t < 0:
            raise PreconditionError("time must be nonnegative")

        def shifted(theta: np.ndarray) -> np.ndarray:
            theta = np.asarray(theta, dtype=float)
            out = np.zeros(theta.shape)
            live = theta < -t
            if np.any(live):
                out[live] = np.asarray(phi(theta[live] + t), dtype=float)
            return out

        return shifted


def build_transport(r: float, d: Union[int, str] = 1) -> TransportModel:
    """Transport model with delay ``r > 0`` and ``d`` noise channels."""
    return TransportModel(delay=float(r), noise_dim=d)


def dirichlet_frequency_criterion(
    model,
    omega: float,
    T: float,
    n_max: int,
    ctrl: Coefficients | None = None,
    *,
    rel_tail_target: float = 1e-10,
    divergence_floor: float = 1e-12,
) -> SeriesVerdict:
    """Frequency criterion on the stationary solution map itself.

    For diagonal models this is the coefficient frequency series (the solution
    map factors through the resolvent).  For the transport model the closed
    form is constant in ``n``: divergent for every ``d >= 1``, and already
    infinite per term for countable noise.
    """
    if isinstance(model, TransportModel):
        if T <= 0:
            raise PreconditionError("horizon must be positive")
        if n_max < 1:
            raise PreconditionError("n_max must be >= 1")
        if model.noise_dim == COUNTABLE:
            return _diverged(math.inf, "single term infinite: countable noise channels")
        term = model.dirichlet_hs_norm_sq(omega)
        partial = (2 * n_max + 1) * term
        if term <= divergence_floor:
            return _converged(partial, 0.0, 0.0, "terms below divergence threshold")
        return _diverged(partial, "terms constant in n")
    if isinstance(model, HeatNeumannModel):
        ctrl = model.control if ctrl is None else ctrl
        model = model.model
    if ctrl is None:
        raise PreconditionError("diagonal models need control coefficients")
    return frequency_series(
        model, ctrl, FrequencyGrid(omega, T, n_max),
        rel_tail_target=rel_tail_target, divergence_floor=divergence_floor,
    )
