"""Numerical rank from an eigenvalue spectrum, and subspace recovery score."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSubspace, ZeroMatrixRank
from .linalg import sym_eig

NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class SpectrumReport:
    values: np.ndarray
    i_max: int
    r_opt: int
    gap_ratio: float
    floored: int = 0

    def to_dict(self):
        return {
            "values": [float(v) for v in self.values],
            "i_max": self.i_max,
            "r_opt": self.r_opt,
            "gap_ratio": self.gap_ratio if np.isfinite(self.gap_ratio) else None,
            "floored": self.floored,
        }


def numerical_rank(values, cutoff=0.05):
    """Rank read off the largest eigenvalue gap.

    ``i_max`` is the first index ``i`` (1-based) with
    ``values[i+1] / values[1] < cutoff``, or ``n`` if there is none. The
    rank is the index ``i <= i_max`` maximising ``values[i] / values[i+1]``;
    ties go to the smaller index and a zero denominator counts as an
    infinite ratio. Values below ``1e-12 * values[0]`` are floored to zero
    first so round-off cannot manufacture an infinite ratio.

    Parameters
    ----------
    values : array_like
        Nonnegative eigenvalues (sorted descending here if they are not).
    cutoff : float

    Returns
    -------
    SpectrumReport
    """
    v = np.sort(np.clip(np.asarray(values, dtype=float), 0.0, None))[::-1]
    if v.size == 0 or not v[0] > 0:
        raise ZeroMatrixRank("spectrum is identically zero; rank is 0")
    small = v < NOISE_FLOOR * v[0]
    v = np.where(small, 0.0, v)
    n = v.size
    if n == 1:
        return SpectrumReport(v, 1, 1, np.inf, int(small.sum()))

    below = np.flatnonzero(v[1:] / v[0] < cutoff)
    i_max = int(below[0]) + 1 if below.size else n
    m = min(i_max, n - 1)
    with np.errstate(divide="ignore"):
        ratios = np.where(v[1:m + 1] > 0, v[:m] / np.where(v[1:m + 1] > 0, v[1:m + 1], 1.0), np.inf)
    r_opt = int(np.argmax(ratios)) + 1
    return SpectrumReport(v, i_max, r_opt, float(ratios[r_opt - 1]), int(small.sum()))


def subspace_alignment(A_true, L_opt, r_opt):
    """Fraction of the energy of ``A_true`` captured by the top-``r_opt`` eigenspace of ``L_opt``.

    ``tr(A^T P A) / tr(A^T A)`` with ``P`` the orthogonal projector onto the
    span of ``U_r S_r`` (leading eigenvectors scaled by eigenvalues).
    1 means the column space of ``A_true`` is recovered exactly.
    """
    A = np.asarray(A_true, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if r_opt < 1:
        raise DegenerateSubspace("r_opt must be at least 1")
    w, V = sym_eig(L_opt)
    order = np.argsort(w)[::-1][:r_opt]
    A_opt = V[:, order] * w[order]
    G = A_opt.T @ A_opt
    wg = np.linalg.eigvalsh(G)
    if not wg[0] > 1e-12 * max(wg[-1], 0.0) or not wg[-1] > 0:
        raise DegenerateSubspace("A_opt is rank deficient")
    P = A_opt @ np.linalg.solve(G, A_opt.T)
    s = float(np.sum(A * (P @ A)) / np.sum(A * A))
    if s < -1e-12 or s > 1 + 1e-12:
        raise DegenerateSubspace(f"alignment {s} outside [0, 1]")
    return min(max(s, 0.0), 1.0)
