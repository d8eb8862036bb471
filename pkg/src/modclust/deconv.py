"""Network deconvolution.

An observed correlation matrix is modelled as the sum of all powers of a
direct-correlation matrix, ``obs = dir (I - dir)^-1``. Inverting gives
``dir = obs (I + obs)^-1``, computed here through the symmetric
eigendecomposition where each eigenvalue maps as ``lam -> lam / (1 + lam)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CorrelationMatrix,
    InputError,
    NonConvergentEigensolve,
    SingularShift,
    SpectralRadiusTooLarge,
    validate_correlation_matrix,
)

CLOSED_FORM = "closed-form"
_SHIFT_TOL = 1e-12


@dataclass(frozen=True)
class DeconvConfig:
    delta: float = 0.7
    scaling: str = "auto"
    rescale_output: bool = True

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InputError(f"delta must lie in (0, 1), got {self.delta}")
        if self.scaling not in ("auto", "none"):
            raise InputError(f"scaling must be 'auto' or 'none', got {self.scaling!r}")


def _eigh(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        return np.linalg.eigh(w)
    except np.linalg.LinAlgError as exc:
        raise NonConvergentEigensolve(str(exc)) from exc


def auto_scale(eigvals: np.ndarray, delta: float) -> float:
    """Largest alpha in (0, 1] keeping every ``alpha*lam/(1+alpha*lam)`` in [-delta, delta]."""
    alpha = 1.0
    lmax = float(eigvals.max(initial=0.0))
    lmin = float(eigvals.min(initial=0.0))
    if lmax > 0:
        alpha = min(alpha, delta / ((1.0 - delta) * lmax))
    if lmin < 0:
        alpha = min(alpha, delta / ((1.0 + delta) * -lmin))
    return alpha


def deconvolve_array(w: np.ndarray, delta: float = 0.7, scaling: str = "auto") -> np.ndarray:
    """Raw direct matrix for a symmetric input, taken as is (diagonal included)."""
    w = np.asarray(w, dtype=float)
    w = (w + w.T) / 2
    lam, u = _eigh(w)
    if scaling == "auto":
        lam = auto_scale(lam, delta) * lam
    elif np.any(np.abs(1.0 + lam) < _SHIFT_TOL):
        raise SingularShift("observed matrix has an eigenvalue of -1")
    direct = lam / (1.0 + lam)
    out = (u * direct) @ u.T
    return (out + out.T) / 2


def _minmax_offdiag(v: np.ndarray) -> np.ndarray:
    n = v.shape[0]
    off = ~np.eye(n, dtype=bool)
    out = np.zeros_like(v)
    if n > 1:
        vals = v[off]
        lo, hi = vals.min(), vals.max()
        if hi > lo:
            out[off] = (vals - lo) / (hi - lo)
    np.fill_diagonal(out, 1.0)
    return out


def deconvolve(d_obs: CorrelationMatrix, cfg: DeconvConfig | None = None):
    """Direct-correlation matrix of ``d_obs``.

    The diagonal is zeroed before the transform. With ``rescale_output`` the
    off-diagonals are min-max rescaled to [0, 1] and a flagged
    :class:`CorrelationMatrix` is returned; otherwise the raw array.
    """
    cfg = cfg or DeconvConfig()
    w = np.array(d_obs.values, dtype=float)
    np.fill_diagonal(w, 0.0)
    raw = deconvolve_array(w, cfg.delta, cfg.scaling)
    if not cfg.rescale_output:
        return raw
    out = d_obs.with_values(_minmax_offdiag(raw), deconvolved=True)
    return validate_correlation_matrix(out)


def convolve(d_dir: np.ndarray, order: int | str = CLOSED_FORM) -> np.ndarray:
    """Observed matrix generated by a direct matrix: sum of all its powers.

    ``order`` truncates the series after that many terms; the default uses the
    resolvent ``dir (I - dir)^-1``.
    """
    d = np.asarray(d_dir, dtype=float)
    d = (d + d.T) / 2
    radius = float(np.max(np.abs(np.linalg.eigvalsh(d)), initial=0.0))
    if radius >= 1.0:
        raise SpectralRadiusTooLarge(f"spectral radius {radius:.6g} is not below 1")
    n = d.shape[0]
    if order == CLOSED_FORM:
        out = np.linalg.solve(np.eye(n) - d, d)
    else:
        out = np.zeros_like(d)
        term = np.eye(n)
        for _ in range(int(order)):
            term = term @ d
            out += term
    return (out + out.T) / 2
