"""self-CIDEr: spectral diversity of a caption set under the CIDEr kernel."""

from __future__ import annotations

import math

import numpy as np

from .corpus import CaptionSet, ReferenceSet
from .ngram_metrics import DfStats, cider

__all__ = ["jacobi_eigenvalues", "cider_kernel", "self_cider", "self_cider_from_kernel"]

JACOBI_TOL = 1e-10
MAX_KERNEL_SIZE = 512
RANK_TOL = 1e-8
_EPS = 1e-18


def jacobi_eigenvalues(a, tol: float = JACOBI_TOL, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F``. Returned in descending order.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.sort(np.diag(a))[::-1]
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(a[offdiag] ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(apq) <= _EPS * min(abs(a[p, p]), abs(a[q, q])):
                    a[p, q] = a[q, p] = 0.0
                    continue
                if abs(apq) <= _EPS * abs(h):
                    # theta huge: t ~ 1 / (2 theta)
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.sort(np.diag(a))[::-1]


def cider_kernel(caption_set: CaptionSet, df: DfStats) -> np.ndarray:
    """Symmetrized pairwise CIDEr-D matrix, M[i, j] = cider(c_i, {c_j})."""
    caps = caption_set.captions
    k = len(caps)
    if k < 2:
        raise ValueError("self-CIDEr kernel needs at least two captions")
    if k > MAX_KERNEL_SIZE:
        raise ValueError(f"kernel size {k} exceeds {MAX_KERNEL_SIZE}")
    m = np.empty((k, k))
    for j, cj in enumerate(caps):
        refs = ReferenceSet(caption_set.image_id, (cj,))
        for i, ci in enumerate(caps):
            m[i, j] = cider(ci, refs, df)
    return 0.5 * (m + m.T)


def self_cider_from_kernel(kernel) -> float:
    kernel = np.asarray(kernel, dtype=float)
    k = kernel.shape[0]
    if k < 2:
        raise ValueError("self-CIDEr needs K >= 2")
    ev = jacobi_eigenvalues(kernel)
    ev = np.clip(ev, 0.0, None)
    top = ev[0]
    if top <= 0.0:
        raise ValueError("degenerate kernel: no positive singular value")
    ev[ev <= RANK_TOL * top] = 0.0
    ratio = top / math.fsum(ev)
    score = -math.log(ratio) / math.log(k)
    return min(1.0, max(0.0, score))


def self_cider(caption_set: CaptionSet, df: DfStats) -> float:
    """-log(s_max / sum(s)) / log(K) over the singular values s of the CIDEr kernel.

    0 when every caption is the same, 1 when the kernel is a multiple of
    the identity (pairwise n-gram-disjoint captions of equal self-similarity).
    """
    return self_cider_from_kernel(cider_kernel(caption_set, df))
