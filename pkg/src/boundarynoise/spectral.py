"""Diagonal generators and the operators living on them.

A model is a finite truncation of a (possibly infinite) family of real
eigenvalues, together with an optional analytic rule for the modes beyond the
truncation.  Everything downstream (admissibility checks, covariances,
perturbations) computes on these truncations and certifies the remainder
through the tail rules declared here.

All values are immutable after construction and all operations are pure, so
models and coefficient tables are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence, Union

import numpy as np

from .errors import PreconditionError, SingularResolventError, TruncationMismatchError

NoiseDim = Union[int, Literal["countable"]]

COUNTABLE = "countable"


@dataclass(frozen=True)
class SpectrumTail:
    """Eigenvalue rule ``lambda_i = -(offset + c * i**p)`` for mode indices ``i >= next_index``.

    ``next_index`` is the global index of the first mode that is *not*
    materialized; ``offset`` supports shifted families (A - omega constructions).
    """

    c: float
    p: float
    next_index: int
    offset: float = 0.0

    def __post_init__(self):
        if not (self.c > 0 and self.p > 0):
            raise PreconditionError("power spectrum rule needs c > 0 and p > 0")
        if self.next_index < 1:
            raise PreconditionError("tail must start after at least one materialized mode")

    def eigenvalue(self, index):
        return -(self.offset + self.c * np.asarray(index, dtype=float) ** self.p)

    def shifted(self, omega: float) -> "SpectrumTail":
        return SpectrumTail(self.c, self.p, self.next_index, self.offset + omega)


@dataclass(frozen=True, eq=False)
class DiagonalModel:
    """A generator given by real eigenvalues on an abstract orthonormal mode basis.

    ``eigenvalues`` holds the materialized modes.  ``tail`` is ``None`` for a
    genuinely finite model and a :class:`SpectrumTail` when the materialized
    modes truncate an infinite power family.  ``noise_dim`` is the number of
    noise channels, or ``"countable"``.
    """

    eigenvalues: np.ndarray
    tail: SpectrumTail | None = None
    noise_dim: NoiseDim = 1

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise PreconditionError("eigenvalues must be a non-empty 1-D array")
        if not np.all(np.isfinite(lam)):
            raise PreconditionError("eigenvalues must be finite")
        object.__setattr__(self, "eigenvalues", lam)
        if self.noise_dim != COUNTABLE and (not isinstance(self.noise_dim, int) or self.noise_dim < 1):
            raise PreconditionError("noise_dim must be a positive integer or 'countable'")

    @property
    def mode_count(self) -> int:
        return int(self.eigenvalues.size)

    @classmethod
    def from_eigenvalues(cls, values: Sequence[float], noise_dim: NoiseDim = 1) -> "DiagonalModel":
        return cls(np.asarray(values, dtype=float), tail=None, noise_dim=noise_dim)

    @classmethod
    def from_power(
        cls,
        c: float,
        p: float,
        modes: int,
        include_zero_mode: bool = True,
        lambda0: float | None = None,
        noise_dim: NoiseDim = 1,
    ) -> "DiagonalModel":
        """Materialize ``modes`` eigenvalues of the family ``lambda_n = -c n**p``.

        With ``include_zero_mode`` the indices run 0..modes-1 (so the first
        eigenvalue is 0), otherwise 1..modes.  ``lambda0`` overrides the first
        materialized eigenvalue only.
        """
        if modes < 1:
            raise PreconditionError("modes must be >= 1")
        start = 0 if include_zero_mode else 1
        idx = np.arange(start, start + modes, dtype=float)
        lam = -c * idx**p
        if lambda0 is not None:
            lam[0] = float(lambda0)
        tail = SpectrumTail(c=float(c), p=float(p), next_index=start + modes)
        return cls(lam, tail=tail, noise_dim=noise_dim)

    def shifted(self, omega: float) -> "DiagonalModel":
        """The model of the shifted generator (eigenvalues ``lambda_n - omega``)."""
        tail = self.tail.shifted(omega) if self.tail is not None else None
        return DiagonalModel(self.eigenvalues - omega, tail=tail, noise_dim=self.noise_dim)


@dataclass(frozen=True)
class TailRule:
    """Analytic description of coefficient weights beyond the materialized modes.

    kind:
      * ``"constant"`` -- per-mode weight ``w_n = value`` for every tail mode
        (``value=None`` means: reuse the last materialized weight);
      * ``"zero"``     -- coefficients vanish beyond the materialized range;
      * ``"ell2"``     -- the tail weights sum to at most ``value``.
    """

    kind: Literal["constant", "zero", "ell2"]
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "zero", "ell2"):
            raise PreconditionError(f"unknown tail rule kind {self.kind!r}")
        if self.kind == "ell2":
            if self.value is None or self.value < 0:
                raise PreconditionError("ell2 tail rule needs a nonnegative bound")
        if self.kind == "constant" and self.value is not None and self.value < 0:
            raise PreconditionError("constant tail weight must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "TailRule":
        """Parse the spec-file encoding: ``constant`` | ``zero_tail`` | ``ell2:<bound>``."""
        if text == "constant":
            return cls("constant")
        if text == "zero_tail":
            return cls("zero")
        if text.startswith("ell2:"):
            try:
                bound = float(text.split(":", 1)[1])
            except ValueError:
                raise PreconditionError(f"cannot parse ell2 bound in {text!r}") from None
            return cls("ell2", bound)
        raise PreconditionError(f"unknown tail rule {text!r}")

    def encode(self) -> str:
        if self.kind == "constant":
            return "constant"
        if self.kind == "zero":
            return "zero_tail"
        return f"ell2:{self.value!r}"


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Mode-by-channel coefficient table for a control or observation operator.

    Entry ``(n, k)`` pairs mode ``n`` with channel ``k``.  No summability
    across modes is required (the operator may be unbounded into the state
    space); the per-mode channel sums must be finite, which a finite table
    guarantees.  ``tail`` describes the weights of non-materialized modes.
    """

    array: np.ndarray
    tail: TailRule | None = None

    def __post_init__(self):
        arr = np.asarray(self.array, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.size == 0:
            raise PreconditionError("coefficients must form a (modes, channels) array")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("coefficients must be finite")
        object.__setattr__(self, "array", arr)

    @property
    def mode_count(self) -> int:
        return int(self.array.shape[0])

    @property
    def channel_count(self) -> int:
        return int(self.array.shape[1])

    @property
    def weights(self) -> np.ndarray:
        """Per-mode channel sums ``w_n = sum_k coeff_{n,k}**2``."""
        return np.einsum("nk,nk->n", self.array, self.array)

    @property
    def gram(self) -> np.ndarray:
        """Mode-by-mode Gram matrix ``sum_k coeff_{n,k} coeff_{m,k}``."""
        return self.array @ self.array.T

    def tail_weight(self) -> float | None:
        """The constant tail weight, resolving ``value=None`` to the last row."""
        if self.tail is None or self.tail.kind != "constant":
            return None
        if self.tail.value is not None:
            return float(self.tail.value)
        return float(self.weights[-1])


# The two operator roles share one table layout; keep distinct names for call sites.
ControlCoefficients = Coefficients
ObservationCoefficients = Coefficients


def _check_paired(model: DiagonalModel, x: np.ndarray) -> np.ndarray:
    vec = np.asarray(x)
    if vec.shape != (model.mode_count,):
        raise TruncationMismatchError(
            f"mode vector of length {vec.shape} does not match model truncation {model.mode_count}"
        )
    return vec


def growth_bound(model: DiagonalModel) -> float:
    """``sup_n lambda_n`` over materialized modes and the tail family."""
    sup = float(np.max(model.eigenvalues))
    if model.tail is not None:
        # the tail family is non-increasing, so its supremum is its first member
        sup = max(sup, float(model.tail.eigenvalue(model.tail.next_index)))
    return sup + 0.0  # normalizes -0.0


def evaluate_semigroup(model: DiagonalModel, t: float, x: np.ndarray) -> np.ndarray:
    """Coefficients of the semigroup orbit: ``x_n -> exp(lambda_n t) x_n``."""
    if t < 0:
        raise PreconditionError(f"semigroup time must be nonnegative, got {t}")
    vec = _check_paired(model, x)
    return np.exp(model.eigenvalues * t) * vec


def evaluate_resolvent(model: DiagonalModel, lam: complex, x: np.ndarray) -> np.ndarray:
    """Resolvent action ``x_n -> x_n / (lam - lambda_n)``."""
    vec = _check_paired(model, x)
    gaps = lam - model.eigenvalues
    hits = np.nonzero(gaps == 0)[0]
    if hits.size:
        raise SingularResolventError(lam, int(hits[0]))
    return vec / gaps


def extrapolation_norm(model: DiagonalModel, x: np.ndarray, beta: float) -> float:
    """Norm of ``x`` in the completion under the resolvent at ``beta``: ``||R(beta,A)x||``."""
    if beta <= growth_bound(model):
        raise PreconditionError(
            f"beta={beta} must exceed the growth bound {growth_bound(model)}"
        )
    vec = _check_paired(model, x)
    return float(np.sqrt(np.sum(vec**2 / (beta - model.eigenvalues) ** 2)))


@dataclass(frozen=True)
class YosidaLimit:
    """Result of probing ``C lambda R(lambda, A) x`` along an increasing sequence."""

    value: np.ndarray | None
    converged: bool
    history: np.ndarray  # (len(probe), output channels)


def yosida_apply(
    model: DiagonalModel,
    obs: Coefficients,
    x: np.ndarray,
    probe: Sequence[float],
    rel_tol: float = 1e-2,
) -> YosidaLimit:
    """Evaluate the canonical extension of an observation operator along a probe.

    Returns the last probe value when the final two evaluations agree within
    ``rel_tol`` (relative to the last value), else a divergence flag.  On a
    finite model the limit always exists and equals ``sum_n gamma_n x_n``.
    """
    vec = _check_paired(model, x)
    if obs.mode_count != model.mode_count:
        raise TruncationMismatchError("observation table does not match model truncation")
    pts = np.asarray(probe, dtype=float)
    if pts.size < 2:
        raise PreconditionError("probe needs at least two points")
    if np.any(np.diff(pts) <= 0):
        raise PreconditionError("probe must be strictly increasing")
    bound = growth_bound(model)
    if np.any(pts <= bound):
        raise PreconditionError(f"probe values must exceed the growth bound {bound}")
    history = np.empty((pts.size, obs.channel_count))
    for j, lam in enumerate(pts):
        weights = lam / (lam - model.eigenvalues) * vec
        history[j] = obs.array.T @ weights
    step = np.linalg.norm(history[-1] - history[-2])
    scale = max(np.linalg.norm(history[-1]), np.linalg.norm(history[-2]))
    converged = step <= rel_tol * scale or scale == 0.0
    return YosidaLimit(history[-1] if converged else None, converged, history)


def exp_integral(lam: np.ndarray, T: float) -> np.ndarray:
    """``int_0^T exp(2 lambda t) dt`` elementwise; expm1 keeps the lambda -> 0 limit exact."""
    lam = np.asarray(lam, dtype=float)
    out = np.full(lam.shape, float(T))
    nz = lam != 0.0
    out[nz] = np.expm1(2.0 * lam[nz] * T) / (2.0 * lam[nz])
    return out
