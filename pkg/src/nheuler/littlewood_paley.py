"""Dyadic partition of unity, (logarithmic) Besov norms and inequality checks.

Partition
---------
The radial profile is ``chi(r) = H((1.9 - r)/0.8)`` with the smooth step
``H(t) = G(t)/(G(t) + G(1-t))``, ``G(t) = exp(-1/t)`` for ``t > 0``.  So
``chi = 1`` on ``|xi| <= 1.1`` and ``chi = 0`` on ``|xi| >= 1.9``.

Blocks use ``phi(xi) = chi(xi) - chi(2 xi)``::

    Delta_{-1} = chi(2D),     Delta_j = phi(2^-j D)   (j >= 0)

so that ``Delta_j`` lives in ``0.55*2^j < |k| < 1.9*2^j`` and the family sums
to ``chi(2^-J D)``, i.e. to one on ``|k| <= 1.1*2^J``.  The low-frequency
cut-off is ``S_j = sum_{k <= j-1} Delta_k = chi(2^(1-j) D)``.

On the integer lattice ``Delta_{-1}`` keeps only the mean, ``|k| = 1`` and
``|k| = sqrt 2`` sit in block 0 and ``|k| = 2`` sits in block 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import BlockRangeError, InputError
from .spectral import Field, TorusGrid, get_grid

LOG_INTERP_ALPHA_MAX = 3 * math.log(2)
REPORT_SCHEMA_VERSION = 1


def _smooth_step(t):
    t = np.asarray(t, dtype=float)
    g = lambda s: np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)  # noqa: E731
    a, b = g(t), g(1.0 - t)
    return a / (a + b)


def chi(r):
    """Radial low-pass profile evaluated at ``|xi| = r``."""
    return _smooth_step((1.9 - np.asarray(r, dtype=float)) / 0.8)


def phi(r):
    r = np.asarray(r, dtype=float)
    return chi(r) - chi(2 * r)


class DyadicPartition:
    """Multiplier tables ``phi_j(k)`` for ``j = -1..j_max`` on one grid."""

    def __init__(self, grid: TorusGrid):
        self.grid = grid
        # 2^J <= n/2 < 2^(J+1)
        self.j_max = int(math.log2(grid.n // 2))
        self.indices = np.arange(-1, self.j_max + 1)
        self.table = np.stack([self.multiplier(j) for j in self.indices])
        self.table.setflags(write=False)

    def multiplier(self, j: int) -> np.ndarray:
        k = self.grid.kmag
        if j == -1:
            return chi(2 * k)
        return chi(k / 2.0**j) - chi(k / 2.0 ** (j - 1))

    def low_multiplier(self, j: int) -> np.ndarray:
        """Multiplier of ``S_j``; zero for ``j <= -1``."""
        if j <= -1:
            return np.zeros(self.grid.spectral_shape)
        return chi(self.grid.kmag / 2.0 ** (j - 1))

    def check_index(self, j: int) -> None:
        if not -1 <= j <= self.j_max:
            raise BlockRangeError(f"block index {j} outside -1..{self.j_max} for n={self.grid.n}")

    def blocks(self, a: np.ndarray) -> np.ndarray:
        """All blocks of a physical array; shape ``(j_max + 2, *a.shape)``."""
        ah = self.grid.fft(a)
        t = self.table.reshape(self.table.shape[:1] + (1,) * (a.ndim - 2) + self.table.shape[1:])
        return self.grid.ifft(t * ah[None])

    def block_norms(self, a: np.ndarray, p: float) -> np.ndarray:
        return np.array([self.grid.lp_norm(b, p) for b in self.blocks(a)])


@lru_cache(maxsize=None)
def get_partition(n: int) -> DyadicPartition:
    return DyadicPartition(get_grid(n))


def partition_for(f: Field) -> DyadicPartition:
    return get_partition(f.grid.n)


def dyadic_block(f: Field, j: int) -> Field:
    """``Delta_j f``; identically zero for ``j <= -2``."""
    part = partition_for(f)
    if j <= -2:
        return Field(f.grid, np.zeros_like(f.values))
    part.check_index(j)
    g = f.grid
    return Field(g, g.ifft(part.table[j + 1] * f.spectral().data))


def low_cutoff(f: Field, j: int) -> Field:
    """``S_j f = sum_{k <= j-1} Delta_k f``."""
    part = partition_for(f)
    if j > part.j_max + 1:
        raise BlockRangeError(f"cut-off index {j} above {part.j_max + 1} for n={f.grid.n}")
    g = f.grid
    return Field(g, g.ifft(part.low_multiplier(j) * f.spectral().data))


@dataclass(frozen=True)
class BesovSpec:
    """Indices ``(s, p, r, alpha)`` of ``B^{s + alpha log}_{p, r}``."""

    s: float
    p: float
    r: float
    alpha: float = 0.0

    def __post_init__(self):
        for name in ("p", "r"):
            v = getattr(self, name)
            if not (1 <= v <= math.inf):
                raise InputError(f"Besov index {name}={v} outside [1, inf]")
        if not (math.isfinite(self.s) and math.isfinite(self.alpha)):
            raise InputError("Besov indices s and alpha must be finite")

    def weights(self, j: np.ndarray) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        return 2.0 ** (j * self.s) * (2.0 + j) ** self.alpha

    def aggregate(self, norms: np.ndarray) -> float:
        """Weighted l^r sum of a block-norm sequence starting at ``j = -1``."""
        seq = self.weights(np.arange(-1, len(norms) - 1)) * np.asarray(norms)
        if math.isinf(self.r):
            return float(seq.max(initial=0.0))
        return float((seq**self.r).sum() ** (1.0 / self.r))

    def to_dict(self):
        return {"s": self.s, "p": _num(self.p), "r": _num(self.r), "alpha": self.alpha}


def _num(x):
    return "inf" if math.isinf(x) else x


def block_norms(f: Field, p: float) -> np.ndarray:
    """``(||Delta_j f||_{L^p})_{j=-1..j_max}``."""
    return partition_for(f).block_norms(f.values, p)


def besov_norm(f: Field, spec: BesovSpec) -> float:
    return spec.aggregate(block_norms(f, spec.p))


def top_block_fraction(norms: np.ndarray) -> float:
    """Share of the top block in the unweighted l^1 sum; flags under-resolution."""
    total = float(np.sum(norms))
    return float(norms[-1] / total) if total > 0 else 0.0


# -- reports -----------------------------------------------------------------


@dataclass
class InequalityReport:
    inequality: str
    ratios: list
    threshold: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def ensemble_size(self) -> int:
        return len(self.ratios)

    @property
    def worst_ratio(self) -> float:
        return float(max(self.ratios)) if self.ratios else float("nan")

    @property
    def passed(self) -> bool:
        finite = all(math.isfinite(r) for r in self.ratios)
        return finite and (self.threshold is None or self.worst_ratio <= self.threshold)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "inequality": self.inequality,
            "ensemble_size": self.ensemble_size,
            "worst_ratio": self.worst_ratio,
            "per_sample_ratios": [float(r) for r in self.ratios],
            "threshold": self.threshold,
            "passed": self.passed,
            "params": self.params,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# -- Bernstein ---------------------------------------------------------------


@dataclass(frozen=True)
class BandLimitedSample:
    """A field with recorded spectral support: ball ``|k| <= lam*R`` or
    annulus ``r*lam <= |k| <= R*lam``."""

    field: Field
    lam: float
    kind: str = "ball"


def derivative_tensor(f: Field, k: int) -> np.ndarray:
    """All ``2^k`` ordered k-th partial derivatives of a scalar field."""
    g = f.grid
    parts = [f.spectral().data]
    for _ in range(k):
        parts = [ik * q for q in parts for ik in g.ik]
    return g.ifft(np.stack(parts))


@dataclass
class BernsteinReport:
    k: int
    p: float
    q: float
    ball_ratios: list
    annulus_ratios: list
    threshold: float

    @property
    def max_ratio(self) -> float:
        return float(max(self.ball_ratios))

    @property
    def annulus_max(self) -> float:
        return float(max(self.annulus_ratios)) if self.annulus_ratios else float("nan")

    @property
    def annulus_min(self) -> float:
        return float(min(self.annulus_ratios)) if self.annulus_ratios else float("nan")

    @property
    def violated(self) -> bool:
        bad = not np.all(np.isfinite(self.ball_ratios)) or self.max_ratio > self.threshold
        if self.annulus_ratios:
            bad |= self.annulus_max > self.threshold or self.annulus_min < 1.0 / self.threshold
        return bool(bad)

    def to_report(self) -> InequalityReport:
        return InequalityReport(
            "bernstein", list(self.ball_ratios), self.threshold,
            {"k": self.k, "p": _num(self.p), "q": _num(self.q),
             "annulus_max": self.annulus_max, "annulus_min": self.annulus_min},
        )


def verify_bernstein(ensemble: Sequence[BandLimitedSample], k: int, p: float, q: float,
                     threshold: float = 10.0, d: int = 2) -> BernsteinReport:
    if not ensemble:
        raise InputError("empty Bernstein ensemble")
    if p > q:
        raise InputError(f"Bernstein needs p <= q, got p={p}, q={q}")
    gap = d * (1 / p - 1 / q)
    ball, ann = [], []
    for s in ensemble:
        u = s.field
        g = u.grid
        dk = derivative_tensor(u, k)
        up = g.lp_norm(u.values, p)
        if up == 0:
            raise InputError("Bernstein sample is identically zero")
        ball.append(g.lp_norm(dk, q) / (s.lam ** (k + gap) * up))
        if s.kind == "annulus":
            ann.append(g.lp_norm(dk, p) / (s.lam**k * up))
    return BernsteinReport(k, p, q, ball, ann, threshold)


# -- interpolation and embeddings -------------------------------------------

B0_INF_1 = BesovSpec(0, math.inf, 1)
B0_INF_INF = BesovSpec(0, math.inf, math.inf)


def interpolation_ratio(f: Field, which: str, *, eps: float = 0.5, alpha: float = 1.5) -> float:
    """LHS/RHS of one of the three interpolation inequalities (unit constant).

    ``classic``      ||f||_{B^0_{inf,1}} vs (1/eps)||f||_{B^0_{inf,inf}} (1 + log(1 + ||f||_{B^eps}/||f||_{B^0}))
    ``interp_log``   ||f||_{B^0_{inf,1}} vs ||f||_{B^0_{inf,inf}}^{1-1/alpha} ||f||_{B^{alpha log}_{inf,inf}}^{1/alpha}
    ``log_interp``   ||f||_{B^{alpha log}_{inf,inf}} vs ||f||_{B^0_{inf,inf}} (1 + log(1 + ||grad f||_{B^0}/||f||_{B^0}))^alpha
    """
    if which == "classic":
        if not 0 < eps < 1:
            raise InputError(f"eps={eps} outside ]0,1[")
    elif which == "interp_log":
        if not alpha > 1:
            raise InputError(f"alpha={alpha} must exceed 1")
    elif which == "log_interp":
        if not 0 <= alpha <= LOG_INTERP_ALPHA_MAX:
            raise InputError(f"alpha={alpha} outside [0, 3 log 2]")
    else:
        raise InputError(f"unknown interpolation inequality {which!r}")

    norms = block_norms(f, math.inf)
    b0 = B0_INF_INF.aggregate(norms)
    if b0 == 0:
        raise InputError("interpolation check needs a nonzero field")
    if which == "classic":
        beps = BesovSpec(eps, math.inf, math.inf).aggregate(norms)
        return B0_INF_1.aggregate(norms) / (b0 / eps * (1 + math.log1p(beps / b0)))
    blog = BesovSpec(0, math.inf, math.inf, alpha).aggregate(norms)
    if which == "interp_log":
        return B0_INF_1.aggregate(norms) / (b0 ** (1 - 1 / alpha) * blog ** (1 / alpha))
    grad_b0 = B0_INF_INF.aggregate(partition_for(f).block_norms(f.grid.grad(f.values), math.inf))
    return blog / (b0 * (1 + math.log1p(grad_b0 / b0)) ** alpha)


def verify_interpolation(f: Field, which: str, **params) -> float:
    return interpolation_ratio(f, which, **params)


def interpolation_ensemble(fields: Iterable[Field], which: str, threshold: float | None = None,
                           **params) -> InequalityReport:
    ratios = [interpolation_ratio(f, which, **params) for f in fields]
    if not ratios:
        raise InputError("empty ensemble")
    return InequalityReport(f"interpolation:{which}", ratios, threshold, dict(params))


def embedding_admissible(src: BesovSpec, dst: BesovSpec, d: int = 2) -> bool:
    """Index conditions for ``B^{s1+a1 log}_{p1,r1}`` into ``B^{s2+a2 log}_{p2,r2}``."""
    if src.p > dst.p:
        return False
    crit = src.s - d * (1 / src.p - 1 / dst.p)
    if dst.s < crit:
        return True
    if not math.isclose(dst.s, crit, abs_tol=1e-12):
        return False
    if dst.alpha <= src.alpha and src.r <= dst.r:
        return True
    if src.alpha - dst.alpha > 1:
        return True
    # refined form: B^{alpha log}_{inf,r} into B^0_{inf,1} once alpha > 1 - 1/r
    return dst.r == 1 and src.alpha - dst.alpha > 1 - 1 / src.r


def verify_embedding(f: Field, src: BesovSpec, dst: BesovSpec) -> float:
    """``||f||_dst / ||f||_src`` after checking the index pair."""
    if not embedding_admissible(src, dst):
        raise InputError(f"no embedding from {src} into {dst}")
    denom = besov_norm(f, src)
    if denom == 0:
        raise InputError("embedding check needs a nonzero field")
    return besov_norm(f, dst) / denom


def embedding_ensemble(fields: Iterable[Field], src: BesovSpec, dst: BesovSpec,
                       threshold: float | None = None) -> InequalityReport:
    ratios = [verify_embedding(f, src, dst) for f in fields]
    return InequalityReport("embedding", ratios, threshold, {"from": src.to_dict(), "to": dst.to_dict()})
