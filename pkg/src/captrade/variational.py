"""Closed-form and Monte-Carlo KL machinery for diagonal Gaussians and GMMs.

Argument order is the KL direction: ``kl_diag_gaussian(q, p)`` is
KL(q || p), an expectation under the first argument. The same holds for
``gmm_kl_upper_bound(p, q)``, which bounds KL(p || q) by pairing
components index by index and weighting with the first mixture's
weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng as _rng

__all__ = [
    "DiagGaussian",
    "Gmm",
    "KlBreakdown",
    "kl_diag_gaussian",
    "grad_kl_diag_gaussian",
    "gmm_log_density",
    "gmm_density",
    "gmm_kl_upper_bound",
    "mc_gmm_kl",
    "agmm_select_kernels",
    "iip_kl",
    "reparam_sample",
    "vat_loss",
]

_LOG_2PI = math.log(2.0 * math.pi)


def _vector(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class DiagGaussian:
    mean: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        mean = _vector(self.mean, "mean")
        log_var = _vector(self.log_var, "log_var")
        if mean.shape != log_var.shape or mean.size < 1:
            raise ValueError(f"mean/log_var dimension mismatch: {mean.shape} vs {log_var.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "log_var", log_var)

    @classmethod
    def standard(cls, dim: int) -> "DiagGaussian":
        return cls(np.zeros(dim), np.zeros(dim))

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def var(self) -> np.ndarray:
        return np.exp(self.log_var)

    def log_pdf(self, x) -> np.ndarray:
        """Log density at the rows of ``x`` (shape (..., d))."""
        x = np.asarray(x, dtype=float)
        z2 = (x - self.mean) ** 2 / self.var
        return -0.5 * np.sum(z2 + self.log_var + _LOG_2PI, axis=-1)


def _softmax(g: np.ndarray) -> np.ndarray:
    e = np.exp(g - g.max())
    return e / e.sum()


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


@dataclass(frozen=True, eq=False)
class Gmm:
    """Mixture of diagonal Gaussians with weights softmax(weight_logits)."""

    components: tuple[DiagGaussian, ...]
    weight_logits: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        g = _vector(self.weight_logits, "weight_logits")
        if not comps:
            raise ValueError("a GMM needs at least one component")
        if g.size != len(comps):
            raise ValueError(f"{len(comps)} components but {g.size} weight logits")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise ValueError(f"components disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weight_logits", g)

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def weights(self) -> np.ndarray:
        return _softmax(self.weight_logits)

    @property
    def log_weights(self) -> np.ndarray:
        # shift first so that uniform logits give exactly -log K for any offset
        g = self.weight_logits - self.weight_logits.max()
        return g - math.log(float(np.sum(np.exp(g))))

    def sample(self, n: int, generator: np.random.Generator) -> np.ndarray:
        idx = generator.choice(self.k, size=n, p=self.weights)
        means = np.stack([c.mean for c in self.components])
        stds = np.stack([np.exp(0.5 * c.log_var) for c in self.components])
        return means[idx] + stds[idx] * generator.standard_normal((n, self.dim))


@dataclass(frozen=True)
class KlBreakdown:
    weight_term: float
    component_terms: tuple[float, ...]
    weights: tuple[float, ...]
    total: float

    @classmethod
    def single(cls, kl: float) -> "KlBreakdown":
        """One-component breakdown: plain Gaussian KL with no weight term."""
        return cls(0.0, (float(kl),), (1.0,), float(kl))


def _check_pair(q: DiagGaussian, p: DiagGaussian) -> None:
    if q.dim != p.dim:
        raise ValueError(f"dimension mismatch: {q.dim} vs {p.dim}")


def kl_diag_gaussian(q: DiagGaussian, p: DiagGaussian) -> float:
    """KL(q || p) between diagonal Gaussians, summed over dimensions."""
    _check_pair(q, p)
    var_q, var_p = q.var, p.var
    terms = 0.5 * ((p.log_var - q.log_var) + (var_q + (q.mean - p.mean) ** 2) / var_p - 1.0)
    return max(0.0, float(np.sum(terms)))


def grad_kl_diag_gaussian(q: DiagGaussian, p: DiagGaussian) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of KL(q || p) w.r.t. ``q.mean`` and ``q.log_var``."""
    _check_pair(q, p)
    var_p = p.var
    d_mean = (q.mean - p.mean) / var_p
    d_log_var = 0.5 * (q.var / var_p - 1.0)
    return d_mean, d_log_var


def gmm_log_density(x, g: Gmm) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.dim:
        raise ValueError(f"point dimension {x.shape[-1]} does not match mixture dimension {g.dim}")
    per_comp = np.stack([c.log_pdf(x) for c in g.components], axis=-1)
    return _logsumexp(per_comp + g.log_weights, axis=-1)


def gmm_density(x, g: Gmm) -> float:
    """Mixture density at a single point ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError("gmm_density takes a single point; use gmm_log_density for batches")
    return float(np.exp(gmm_log_density(x, g)))


def gmm_kl_upper_bound(p: Gmm, q: Gmm) -> KlBreakdown:
    """Upper bound on KL(p || q) with components matched by index.

    KL(w || w~) + sum_k w_k KL(p_k || q_k), with w the weights of ``p``.
    """
    if p.k != q.k:
        raise ValueError(f"component counts differ: {p.k} vs {q.k}")
    if p.dim != q.dim:
        raise ValueError(f"dimensions differ: {p.dim} vs {q.dim}")
    w = p.weights
    weight_term = max(0.0, float(np.sum(w * (p.log_weights - q.log_weights))))
    comps = tuple(kl_diag_gaussian(pk, qk) for pk, qk in zip(p.components, q.components))
    total = weight_term + float(np.dot(w, comps))
    return KlBreakdown(weight_term, comps, tuple(float(v) for v in w), total)


def mc_gmm_kl(p: Gmm, q: Gmm, samples: int = 100_000, seed: int = 0,
              stream: int = 0) -> tuple[float, float]:
    """Monte-Carlo estimate of KL(p || q) and its standard error.

    Draws ``samples`` points from ``p`` and averages log p(x) - log q(x),
    both evaluated in log space. Reproducible given ``(seed, stream)``.
    """
    if samples < 10_000:
        raise ValueError(f"need at least 1e4 samples, got {samples}")
    if p.dim != q.dim:
        raise ValueError(f"dimensions differ: {p.dim} vs {q.dim}")
    x = p.sample(samples, _rng.make_rng(seed, _rng.MC_KL, stream))
    diff = gmm_log_density(x, p) - gmm_log_density(x, q)
    return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(samples))


def agmm_select_kernels(g: Gmm, dims: int, seed: int = 0) -> np.ndarray:
    """Draw one kernel index per latent dimension from categorical(softmax(g))."""
    if dims < 1:
        raise ValueError(f"dims must be >= 1, got {dims}")
    if g.k == 1:
        return np.zeros(dims, dtype=np.int64)
    gen = _rng.make_rng(seed, _rng.AGMM_SELECT)
    return gen.choice(g.k, size=dims, p=g.weights).astype(np.int64)


def iip_kl(posteriors: Sequence[DiagGaussian], prior: DiagGaussian) -> float:
    """Mean over positions of KL(q(z | x_<t) || p(z | x))."""
    if len(posteriors) == 0:
        raise ValueError("iip_kl needs at least one posterior")
    return math.fsum(kl_diag_gaussian(q, prior) for q in posteriors) / len(posteriors)


def reparam_sample(q: DiagGaussian, noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=float)
    if noise.shape[-1] != q.dim:
        raise ValueError(f"noise dimension {noise.shape[-1]} does not match {q.dim}")
    return q.mean + np.exp(0.5 * q.log_var) * noise


def vat_loss(recon_nll: float, kl: KlBreakdown, beta: float = 1.0) -> float:
    """Reconstruction NLL plus ``beta`` times the (bounded) KL term."""
    if not (math.isfinite(recon_nll) and math.isfinite(beta) and math.isfinite(kl.total)):
        raise ValueError("vat_loss inputs must be finite")
    if recon_nll < 0:
        raise ValueError(f"reconstruction NLL must be non-negative, got {recon_nll}")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    return recon_nll + beta * kl.total
