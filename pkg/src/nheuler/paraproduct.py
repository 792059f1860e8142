"""Bony decomposition ``uv = T_u v + T_v u + R(u, v)`` and continuity estimates.

``T_u v = sum_{j>=1} S_{j-1}u Delta_j v`` (``S_{j-1} = 0`` below ``j = 1``)
and ``R(u, v) = sum_j sum_{|k-j|<=1} Delta_j u Delta_k v``.  All products are
taken at the nodes and then truncated by the 2/3 rule, so the three pieces add
up to the dealiased product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .littlewood_paley import (
    BesovSpec, InequalityReport, get_partition,
)
from .spectral import Field


def _blocks(f: Field) -> np.ndarray:
    return get_partition(f.grid.n).blocks(f.values)


def _check_pair(u: Field, v: Field) -> None:
    if not isinstance(u, Field) or not isinstance(v, Field):
        raise InputError("paraproduct operands must be Field instances")
    if u.grid.n != v.grid.n:
        raise InputError(f"grid mismatch: n={u.grid.n} vs n={v.grid.n}")
    if u.is_vector and v.is_vector:
        raise InputError("at most one operand may be a vector field")


def _align(a: np.ndarray, b: np.ndarray):
    # blocks carry a leading j axis; a scalar operand broadcasts over vector components
    if a.ndim < b.ndim:
        a = a[:, None]
    elif b.ndim < a.ndim:
        b = b[:, None]
    return a, b


def _paraproduct_raw(ub: np.ndarray, vb: np.ndarray) -> np.ndarray:
    ub, vb = _align(ub, vb)
    low = np.cumsum(ub, axis=0)  # low[i] = S_{i} u in block-table indexing (j = i - 1)
    out = np.zeros(np.broadcast_shapes(ub.shape[1:], vb.shape[1:]))
    # table row i holds Delta_{i-1}; S_{j-1} u = sum_{k <= j-2} Delta_k u = low[j-1]
    for j in range(1, vb.shape[0] - 1):
        out += low[j - 1] * vb[j + 1]
    return out


def _remainder_raw(ub: np.ndarray, vb: np.ndarray) -> np.ndarray:
    ub, vb = _align(ub, vb)
    out = np.zeros(np.broadcast_shapes(ub.shape[1:], vb.shape[1:]))
    nb = ub.shape[0]
    for i in range(nb):
        out += ub[i] * vb[i]
        if i + 1 < nb:
            # (x + y) == (y + x) in IEEE arithmetic, so R(u, v) == R(v, u) bitwise
            out += ub[i] * vb[i + 1] + ub[i + 1] * vb[i]
    return out


def paraproduct(u: Field, v: Field) -> Field:
    _check_pair(u, v)
    g = u.grid
    return Field(g, g.dealias(_paraproduct_raw(_blocks(u), _blocks(v))))


def remainder(u: Field, v: Field) -> Field:
    _check_pair(u, v)
    g = u.grid
    return Field(g, g.dealias(_remainder_raw(_blocks(u), _blocks(v))))


@dataclass(frozen=True)
class BonyTriple:
    T_uv: Field
    T_vu: Field
    R_uv: Field

    def total(self) -> Field:
        return Field(self.T_uv.grid, self.T_uv.values + self.T_vu.values + self.R_uv.values)


def bony_decompose(u: Field, v: Field) -> BonyTriple:
    _check_pair(u, v)
    g = u.grid
    ub, vb = _blocks(u), _blocks(v)
    return BonyTriple(
        Field(g, g.dealias(_paraproduct_raw(ub, vb))),
        Field(g, g.dealias(_paraproduct_raw(vb, ub))),
        Field(g, g.dealias(_remainder_raw(ub, vb))),
    )


# -- continuity constants ----------------------------------------------------


def _norm(f: Field | np.ndarray, spec: BesovSpec, grid=None) -> float:
    a = f.values if isinstance(f, Field) else f
    grid = f.grid if isinstance(f, Field) else grid
    return spec.aggregate(get_partition(grid.n).block_norms(a, spec.p))


def _shift(spec: BesovSpec, ds: float = 0.0, **kw) -> BesovSpec:
    vals = dict(s=spec.s + ds, p=spec.p, r=spec.r, alpha=spec.alpha)
    vals.update(kw)
    return BesovSpec(**vals)


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return num / den


def continuity_ratio(which: str, u: Field, v: Field, **params) -> float:
    """Observed LHS/RHS of one continuity estimate for a single pair.

    ``pp_Linf``      ||T_u v||_{B^{s+a log}_{p,r}} / (||u||_inf ||grad v||_{B^{(s-1)+a log}_{p,r}});  ``spec``
    ``pp_negative``  ||T_u v||_{B^{(s-t)+(a+b) log}_{p,q}} / (||u||_{B^{-t+b log}_{inf,r2}} ||grad v||_{B^{(s-1)+a log}_{p,r1}});
                     ``spec`` (s,p,r1,a), ``t``, ``beta``, ``r2``
    ``rem_positive`` ||R(u,v)||_{B^{(s+t)+(a+b) log}_{p,r}} / (||u||_{u_spec} ||v||_{v_spec}), s+t > 0
    ``rem_zero``     same with target B^{(a+b) log}_{p,inf}, needs s+t = 0, a+b >= 0, r = 1
    ``tame``         ||fg||_{B^s_{p,r}} / (||f||_inf ||g||_{B^s_{p,r}} + ||f||_{B^s_{p,r}} ||g||_inf), s > 0
    """
    _check_pair(u, v)
    if u.is_vector or v.is_vector:
        raise InputError("continuity estimates take scalar operands")
    g = u.grid
    if which == "pp_Linf":
        spec = params["spec"]
        lhs = _norm(paraproduct(u, v), spec)
        rhs = g.lp_norm(u.values, math.inf) * _norm(g.grad(v.values), _shift(spec, -1), g)
        return _ratio(lhs, rhs)
    if which == "pp_negative":
        spec, t = params["spec"], params["t"]
        beta, r2 = params.get("beta", 0.0), params.get("r2", math.inf)
        if t < 0 or (t == 0 and not (beta <= 0 and math.isinf(r2))):
            raise InputError("pp_negative needs t > 0, or t = 0 with beta <= 0 and r2 = inf")
        q = 1.0 / min(1.0, 1.0 / spec.r + 1.0 / r2)
        target = BesovSpec(spec.s - t, spec.p, q, spec.alpha + beta)
        lhs = _norm(paraproduct(u, v), target)
        rhs = _norm(u, BesovSpec(-t, math.inf, r2, beta)) * _norm(g.grad(v.values), _shift(spec, -1), g)
        return _ratio(lhs, rhs)
    if which in ("rem_positive", "rem_zero"):
        us, vs = params["u_spec"], params["v_spec"]
        ip, ir = 1 / us.p + 1 / vs.p, 1 / us.r + 1 / vs.r
        if ip > 1 or ir > 1:
            raise InputError("remainder estimate needs 1/p1 + 1/p2 <= 1 and 1/r1 + 1/r2 <= 1")
        p = math.inf if ip == 0 else 1 / ip
        r = math.inf if ir == 0 else 1 / ir
        if which == "rem_positive":
            if not us.s + vs.s > 0:
                raise InputError("rem_positive needs s1 + s2 > 0")
            target = BesovSpec(us.s + vs.s, p, r, us.alpha + vs.alpha)
        else:
            if not (math.isclose(us.s + vs.s, 0.0, abs_tol=1e-12) and us.alpha + vs.alpha >= 0 and r == 1):
                raise InputError("rem_zero needs s1 + s2 = 0, alpha1 + alpha2 >= 0 and r = 1")
            target = BesovSpec(0.0, p, math.inf, us.alpha + vs.alpha)
        return _ratio(_norm(remainder(u, v), target), _norm(u, us) * _norm(v, vs))
    if which == "tame":
        spec = params["spec"]
        if not spec.s > 0:
            raise InputError("tame estimate needs s > 0")
        prod = Field(g, g.mul(u.values, v.values))
        ui, vi = g.lp_norm(u.values, math.inf), g.lp_norm(v.values, math.inf)
        rhs = ui * _norm(v, spec) + _norm(u, spec) * vi
        return _ratio(_norm(prod, spec), rhs)
    raise InputError(f"unknown continuity estimate {which!r}")


def estimate_continuity_constant(which: str, ensemble: Sequence[tuple[Field, Field]],
                                 threshold: float | None = None, **params) -> InequalityReport:
    """Worst observed ratio of a paraproduct/remainder/tame estimate over pairs."""
    if not ensemble:
        raise InputError("empty ensemble")
    ratios = [continuity_ratio(which, u, v, **params) for u, v in ensemble]
    shown = {k: (v.to_dict() if isinstance(v, BesovSpec) else v) for k, v in params.items()}
    return InequalityReport(f"continuity:{which}", ratios, threshold, shown)
