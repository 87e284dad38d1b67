"""Shared state-space model types, beliefs, and covariance hygiene helpers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Vector = np.ndarray
Matrix = np.ndarray

SYMMETRY_RTOL = 1e-12
JITTER_SCALE = 1e-9


class FilterNumericsError(RuntimeError):
    """A covariance lost positive definiteness beyond what jitter can repair."""


def symmetrize(mat: Matrix) -> Matrix:
    """Return the symmetric part (mat + mat.T) / 2."""
    return 0.5 * (mat + mat.T)


def _jitter_for(mat: Matrix) -> float:
    n = mat.shape[0]
    jitter = JITTER_SCALE * float(np.trace(mat)) / n
    # trace can be ~0 for near-singular covariances; fall back to a tiny absolute floor
    if not np.isfinite(jitter) or jitter <= 0.0:
        jitter = 1e-12
    return jitter


def ensure_spd(mat: Matrix, name: str = "cov") -> Matrix:
    """Symmetrize and verify positive definiteness.

    On a failed Cholesky the matrix gets one jitter shot of
    1e-9 * trace / n on the diagonal; a second failure is a hard error.
    """
    sym = symmetrize(np.asarray(mat, dtype=float))
    try:
        np.linalg.cholesky(sym)
        return sym
    except np.linalg.LinAlgError:
        pass
    repaired = sym + _jitter_for(sym) * np.eye(sym.shape[0])
    try:
        np.linalg.cholesky(repaired)
    except np.linalg.LinAlgError as exc:
        raise FilterNumericsError(
            f"{name} is not positive definite even after diagonal jitter"
        ) from exc
    return repaired


def chol_lower(mat: Matrix, name: str = "cov") -> Matrix:
    """Lower Cholesky factor under the same one-shot jitter policy as ensure_spd."""
    sym = symmetrize(np.asarray(mat, dtype=float))
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        pass
    repaired = sym + _jitter_for(sym) * np.eye(sym.shape[0])
    try:
        return np.linalg.cholesky(repaired)
    except np.linalg.LinAlgError as exc:
        raise FilterNumericsError(
            f"{name} is not positive definite even after diagonal jitter"
        ) from exc


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GaussianBelief:
    """State mean and covariance (m, P) at one time step.

    The covariance must be symmetric to 1e-12 relative tolerance and
    positive definite; both are checked on construction.
    """

    mean: Vector
    cov: Matrix

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        n = mean.size
        if cov.shape != (n, n):
            raise ValueError(f"cov shape {cov.shape} does not match state dim {n}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("belief contains non-finite entries")
        skew = np.abs(cov - cov.T).max(initial=0.0)
        if skew > SYMMETRY_RTOL * max(1.0, np.abs(cov).max(initial=0.0)):
            raise ValueError("cov is not symmetric within tolerance")
        sym = symmetrize(cov)
        try:
            np.linalg.cholesky(sym)
        except np.linalg.LinAlgError as exc:
            raise ValueError("cov is not positive definite") from exc
        object.__setattr__(self, "mean", _frozen_array(mean))
        object.__setattr__(self, "cov", _frozen_array(sym))

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class NonlinearSSM:
    """Nonlinear state-space model with diagonal measurement noise.

    process_fn and meas_fn are opaque point-evaluation maps.  With
    vectorized=True they must also accept a (batch, dim) array and return
    the mapped batch; this only affects speed, never results.
    angular_mask flags measurement dimensions that live on the circle, so
    downstream residuals are wrapped to (-pi, pi].
    """

    state_dim: int
    meas_dim: int
    process_fn: Callable[[Vector], Vector]
    meas_fn: Callable[[Vector], Vector]
    process_cov: Matrix
    meas_var_diag: Vector
    angular_mask: np.ndarray | None = None
    vectorized: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "process_cov", _frozen_array(np.atleast_2d(self.process_cov))
        )
        object.__setattr__(
            self, "meas_var_diag", _frozen_array(np.atleast_1d(self.meas_var_diag))
        )
        if self.angular_mask is not None:
            object.__setattr__(
                self, "angular_mask", _frozen_array(self.angular_mask, dtype=bool)
            )


@dataclass(frozen=True)
class Measurement:
    """One measurement vector y_k at time index k >= 1."""

    time_index: int
    values: Vector

    def __post_init__(self) -> None:
        if int(self.time_index) != self.time_index or self.time_index < 1:
            raise ValueError("time_index must be an integer >= 1")
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if values.ndim != 1:
            raise ValueError("values must be a vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("measurement values must be finite")
        object.__setattr__(self, "time_index", int(self.time_index))
        object.__setattr__(self, "values", _frozen_array(values))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.ok


def validate_model(model: NonlinearSSM) -> ValidationReport:
    """Check model invariants and report every violation by field name."""
    issues: list[str] = []
    n, m = model.state_dim, model.meas_dim
    if n < 1:
        issues.append("state_dim must be >= 1")
    if m < 1:
        issues.append("meas_dim must be >= 1")

    if model.process_cov.shape != (n, n):
        issues.append(
            f"process_cov dimension mismatch: expected ({n}, {n}), "
            f"got {model.process_cov.shape}"
        )
    else:
        q = model.process_cov
        if np.abs(q - q.T).max(initial=0.0) > SYMMETRY_RTOL * max(
            1.0, np.abs(q).max(initial=0.0)
        ):
            issues.append("process_cov must be symmetric")
        elif np.linalg.eigvalsh(symmetrize(q)).min() < -1e-10 * max(
            1.0, np.abs(q).max(initial=0.0)
        ):
            issues.append("process_cov must be positive semidefinite")

    if model.meas_var_diag.shape != (m,):
        issues.append(
            f"meas_var_diag length mismatch: expected {m}, "
            f"got {model.meas_var_diag.shape[0]}"
        )
    if not np.all(model.meas_var_diag > 0.0):
        issues.append("meas_var_diag must be strictly positive")

    if model.angular_mask is not None and model.angular_mask.shape != (m,):
        issues.append(f"angular_mask length mismatch: expected {m}")

    if n >= 1 and not issues[:1]:
        for name, fn, out_dim in (
            ("process_fn", model.process_fn, n),
            ("meas_fn", model.meas_fn, m),
        ):
            try:
                probe = np.asarray(fn(np.zeros(n)), dtype=float)
            except Exception as exc:  # surfaced as a report, not a crash
                issues.append(f"{name} raised at the zero vector: {exc}")
                continue
            if probe.shape != (out_dim,):
                issues.append(
                    f"{name} output shape {probe.shape} does not match ({out_dim},)"
                )
            elif not np.all(np.isfinite(probe)):
                issues.append(f"{name} produced non-finite output at the zero vector")

    return ValidationReport(ok=not issues, issues=tuple(issues))
