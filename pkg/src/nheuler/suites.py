"""Seeded verification suites behind ``nheuler verify``.

Every random ensemble is drawn from trigonometric polynomials whose modes and
coefficients depend only on the seed, so the same ensemble can be sampled on
several grids and the observed constants compared across resolutions.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .littlewood_paley import (
    BandLimitedSample, BesovSpec, get_partition, interpolation_ratio, verify_bernstein, verify_embedding,
)
from .paraproduct import bony_decompose, continuity_ratio
from .solver import FlowState, eta_identity_residual, helmholtz_momentum, make_state, reconstruct_grad_u
from .spectral import Field, get_grid, random_field
from .transport import ramped_shear_family

SUITE_SCHEMA_VERSION = 1
SUITES = ("spectral", "besov", "paraproduct", "transport", "identities")

# Band limits that keep an ensemble identical on every grid n >= 64
SINGLE_BAND = 21      # n=64 dealias cutoff
PRODUCT_BAND = 10     # products stay below the n=64 cutoff


@dataclass
class Check:
    name: str
    observed: float
    threshold: float
    kind: str = "max"    # "max": observed <= threshold; "min": observed >= threshold

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.observed):
            return False
        return self.observed <= self.threshold if self.kind == "max" else self.observed >= self.threshold

    def to_dict(self):
        return {"name": self.name, "observed": self.observed, "threshold": self.threshold,
                "kind": self.kind, "passed": self.passed}


@dataclass
class SuiteResult:
    suite: str
    n: int
    seed: int
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {"schema_version": SUITE_SCHEMA_VERSION, "suite": self.suite, "n": self.n, "seed": self.seed,
                "passed": self.passed, "seconds": self.seconds, "checks": [c.to_dict() for c in self.checks]}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


# -- ensembles -------------------------------------------------------------------


def _rng(seed: int, i: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag, i])


def multiblock_ensemble(n: int, size: int = 100, seed: int = 0, kmax: int = SINGLE_BAND) -> list[Field]:
    """Mean-zero random fields spanning several dyadic blocks."""
    g = get_grid(n)
    out = []
    for i in range(size):
        rng = _rng(seed, i, 1)
        K = int(rng.integers(2, kmax + 1))
        slope = float(rng.uniform(0.0, 2.0))
        out.append(Field(g, random_field(g, rng, K, kmin=1, slope=slope)))
    return out


def bernstein_ensemble(n: int, size: int = 100, seed: int = 0, kmax: int = SINGLE_BAND) -> list[BandLimitedSample]:
    """Alternating ball (``|k| <= lam``) and annulus (``lam/2 <= |k| <= lam``) samples."""
    g = get_grid(n)
    out = []
    for i in range(size):
        rng = _rng(seed, i, 2)
        lam = float(rng.integers(2, kmax + 1))
        if i % 2:
            out.append(BandLimitedSample(Field(g, random_field(g, rng, lam, kmin=lam / 2, slope=0)), lam, "annulus"))
        else:
            out.append(BandLimitedSample(Field(g, random_field(g, rng, lam, slope=0)), lam, "ball"))
    return out


def pair_ensemble(n: int, size: int = 50, seed: int = 0, kmax: int = PRODUCT_BAND) -> list[tuple[Field, Field]]:
    g = get_grid(n)
    out = []
    for i in range(size):
        rng = _rng(seed, i, 3)
        a = random_field(g, rng, int(rng.integers(1, kmax + 1)), slope=float(rng.uniform(0, 2)))
        b = random_field(g, rng, int(rng.integers(1, kmax + 1)), slope=float(rng.uniform(0, 2)))
        out.append((Field(g, a), Field(g, b)))
    return out


def random_flow_state(n: int, rng: np.random.Generator, contrast: float = 3.0, kmax: int | None = None) -> FlowState:
    """Random ``(rho, u)`` with ``1 <= rho <= contrast`` and band ``<= n/6``, so
    ``rho u`` stays inside the dealias band."""
    g = get_grid(n)
    K = n // 6 if kmax is None else kmax
    r = random_field(g, rng, K, kmin=1)
    r = (r - r.min()) / (r.max() - r.min())
    rho = 1.0 + (contrast - 1.0) * r
    u = np.stack([random_field(g, rng, K, kmin=1), random_field(g, rng, K, kmin=1)])
    return make_state(g, rho, u)


# -- observed constants ----------------------------------------------------------------

BERNSTEIN_CASES = ((1, 2.0, 2.0), (1, 2.0, math.inf), (2, math.inf, math.inf))
INTERP_LOG_ALPHAS = (1.25, 1.5, 2.0)
LOG_INTERP_ALPHAS = (0.5, 1.0, 2.0)
TAME_SPEC = BesovSpec(1, math.inf, 1)


def inequality_constants(n: int, size: int = 100, seed: int = 0) -> dict[str, float]:
    """Worst observed ratio of every inequality verifier over seeded ensembles on grid ``n``."""
    fields_ = multiblock_ensemble(n, size, seed)
    out = {}
    bern = bernstein_ensemble(n, size, seed)
    for k, p, q in BERNSTEIN_CASES:
        rep = verify_bernstein(bern, k, p, q, threshold=math.inf)
        out[f"bernstein(k={k},p={p:g},q={q:g})"] = rep.max_ratio
        out[f"bernstein-annulus-lower(k={k},p={p:g},q={q:g})"] = 1.0 / rep.annulus_min
    out["interpolation"] = max(interpolation_ratio(f, "classic", eps=0.5) for f in fields_)
    for a in INTERP_LOG_ALPHAS:
        out[f"interp_log(alpha={a:g})"] = max(interpolation_ratio(f, "interp_log", alpha=a) for f in fields_)
    for a in LOG_INTERP_ALPHAS:
        out[f"log_interp(alpha={a:g})"] = max(interpolation_ratio(f, "log_interp", alpha=a) for f in fields_)
    emb_src, emb_dst = BesovSpec(0, math.inf, math.inf, 2.0), BesovSpec(0, math.inf, 1)
    out["embedding(alpha=2)"] = max(verify_embedding(f, emb_src, emb_dst) for f in fields_)
    pairs = pair_ensemble(n, size, seed)
    out["tame"] = max(continuity_ratio("tame", u, v, spec=TAME_SPEC) for u, v in pairs)
    return out


# Configured empirical constants (no explicit constants are available in closed form).
BESOV_THRESHOLDS = {
    "bernstein": 10.0,
    "bernstein-annulus-lower": 10.0,
    "interpolation": 2.0,
    "interp_log": 2.0,
    "log_interp": 5.0,
    "embedding": 10.0,
    "tame": 4.0,
}


def _threshold(name: str) -> float:
    return BESOV_THRESHOLDS[name.split("(")[0]]


# -- suites ------------------------------------------------------------------------------


def suite_spectral(n: int, seed: int) -> list[Check]:
    g = get_grid(n)
    part = get_partition(n)
    rng = np.random.default_rng(seed)
    k = g.kmag
    inside = k <= n / 2
    checks = [
        Check("partition-of-unity", float(np.abs(part.table.sum(axis=0) - 1)[inside].max()), 1e-12),
    ]
    dis = 0.0
    for a in range(len(part.indices)):
        for b in range(a + 2, len(part.indices)):
            dis = max(dis, float(np.abs(part.table[a] * part.table[b]).max()))
    checks.append(Check("block-disjointness", dis, 1e-12))
    v = np.stack([random_field(g, rng, n // 3), random_field(g, rng, n // 3)])
    pv = g.leray(v)
    checks.append(Check("leray-divergence", float(np.abs(g.div(pv)).max() / np.abs(v).max()), 1e-12))
    checks.append(Check("leray-idempotent", float(np.abs(g.leray(pv) - pv).max() / np.abs(v).max()), 1e-12))
    f = random_field(g, rng, n // 3)
    checks.append(Check("fft-roundtrip", float(np.abs(g.ifft(g.fft(f)) - f).max() / np.abs(f).max()), 1e-13))
    # exact products of band-n/6 fields survive truncation unchanged
    a, b = random_field(g, rng, n // 6), random_field(g, rng, n // 6)
    checks.append(Check("dealiased-product", float(np.abs(g.mul(a, b) - a * b).max() / np.abs(a * b).max()), 1e-12))
    return checks


def suite_besov(n: int, seed: int, size: int = 100) -> list[Check]:
    return [Check(name, val, _threshold(name)) for name, val in inequality_constants(n, size, seed).items()]


def suite_paraproduct(n: int, seed: int, size: int = 50) -> list[Check]:
    pairs = pair_ensemble(n, size, seed, kmax=n // 3)
    g = get_grid(n)
    recon, asym = 0.0, 0.0
    for u, v in pairs:
        b = bony_decompose(u, v)
        prod = g.mul(u.values, v.values)
        recon = max(recon, float(np.abs(b.total().values - prod).max() / max(1.0, np.abs(prod).max())))
        asym = max(asym, float(np.abs(b.R_uv.values - bony_decompose(v, u).R_uv.values).max()))
    small = pair_ensemble(n, size, seed)
    spec = BesovSpec(0.5, math.inf, 1)
    pp = max(continuity_ratio("pp_Linf", u, v, spec=spec) for u, v in small)
    rem = max(continuity_ratio("rem_positive", u, v, u_spec=BesovSpec(0.5, math.inf, 1),
                               v_spec=BesovSpec(0.5, math.inf, math.inf)) for u, v in small)
    tame = max(continuity_ratio("tame", u, v, spec=TAME_SPEC) for u, v in small)
    return [
        Check("bony-reconstruction", recon, 1e-10),
        Check("remainder-symmetry", asym, 0.0),
        Check("paraproduct-Linf-continuity", pp, 10.0),
        Check("remainder-continuity", rem, 10.0),
        Check("tame", tame, 4.0),
    ]


def suite_transport(n: int, seed: int) -> list[Check]:
    fam = ramped_shear_family(get_grid(n))
    margin = min(m.relative_margin for ms in fam.lp_margins.values() for m in ms)
    return [
        Check("lp-relative-margin", margin, -1e-6, kind="min"),
        Check("linear-ratio-spread", fam.linear_spread, 4.0),
        Check("log-envelope-growth", math.log(fam.envelope_growth), 4.0, kind="min"),
    ]


def suite_identities(n: int, seed: int, size: int = 20) -> list[Check]:
    rng = np.random.default_rng(seed)
    eta = helm = du = 0.0
    for _ in range(size):
        s = random_flow_state(n, rng)
        eta = max(eta, eta_identity_residual(s))
        helm = max(helm, helmholtz_momentum(s).residual)
        du = max(du, reconstruct_grad_u(s).discrepancy)
    return [Check("eta-identity", eta, 1e-8), Check("helmholtz", helm, 1e-8), Check("grad-u-reconstruction", du, 1e-8)]


_SUITE_FUNCS = {
    "spectral": suite_spectral,
    "besov": suite_besov,
    "paraproduct": suite_paraproduct,
    "transport": suite_transport,
    "identities": suite_identities,
}


def run_suite(name: str, n: int = 128, seed: int = 0) -> SuiteResult:
    if name not in _SUITE_FUNCS:
        raise InputError(f"unknown suite {name!r}; choose from {SUITES}")
    t0 = time.perf_counter()
    checks = _SUITE_FUNCS[name](n, seed)
    return SuiteResult(name, n, seed, checks, time.perf_counter() - t0)
