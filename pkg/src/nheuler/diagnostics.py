"""Per-step monitoring of the continuation-criterion quantities.

A :class:`DiagnosticRecord` is computed from one immutable :class:`FlowState`;
:class:`DiagnosticSeries` collects records (it can be passed straight to
``solver.run`` as a callback) and :func:`criterion_status` turns a series into
time integrals, running sups and a bounded/growing verdict.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, InputError
from .littlewood_paley import B0_INF_1, BesovSpec, get_partition, top_block_fraction
from .solver import (
    FlowState, compute_dX_usq, compute_dXu, compute_eta, compute_X, energy,
    eta_identity_residual, grad_u, helmholtz_momentum, reconstruct_grad_u,
)

SERIES_SCHEMA_VERSION = 1
REPORT_SCHEMA_VERSION = 1
UNDER_RESOLVED_SHARE = 0.10
MODES = ("subcritical", "critical_sum", "critical_sup")


@dataclass(frozen=True)
class DiagnosticRecord:
    t: float
    energy: float
    rho_min: float
    rho_max: float
    grad_rho_inf: float
    u_inf: float
    grad_u_inf: float
    dXu_inf: float
    dXu_b0: float
    dX_usq_b0: float
    eta_b0: float
    grad_rho_b0: float
    res_eta: float
    res_helmholtz: float
    res_grad_u: float
    S1: float
    S2: float
    top_block_share: float
    flagged: bool = False

    @property
    def under_resolved(self) -> bool:
        return self.top_block_share > UNDER_RESOLVED_SHARE

    @property
    def max_residual(self) -> float:
        return max(self.res_eta, self.res_helmholtz, self.res_grad_u)


COLUMNS = [f.name for f in fields(DiagnosticRecord)]


def _b0(grid, a):
    norms = get_partition(grid.n).block_norms(a, math.inf)
    return B0_INF_1.aggregate(norms), top_block_fraction(norms)


def singular_integrals(state: FlowState):
    """``S1 = ||grad grad^perp (-Delta)^-1 eta||_inf`` and ``S2 = ||grad^2 (-Delta)^-1 (u . grad rho)||_inf``."""
    g = state.grid
    psi = g.inv_lap(compute_eta(state))
    S1 = g.lp_norm(g.grad_tensor(g.perp_grad(psi)), math.inf)
    phi = g.inv_lap(g.mul(state.u, g.grad(state.rho)).sum(axis=0))
    S2 = g.lp_norm(g.grad_tensor(g.grad(phi)), math.inf)
    return S1, S2


@dataclass(frozen=True)
class SingularBounds:
    S1: float
    S2: float
    rhs1: float     # 1 + ||eta||_{B^0_{inf,1}}
    rhs2: float     # 1 + ||grad rho||_{B^0_{inf,1}} + ||u||_{B^0_{inf,1}}

    @property
    def ratio1(self) -> float:
        return self.S1 / self.rhs1

    @property
    def ratio2(self) -> float:
        return self.S2 / self.rhs2


def singular_bounds(state: FlowState) -> SingularBounds:
    g = state.grid
    S1, S2 = singular_integrals(state)
    eta_b0, _ = _b0(g, compute_eta(state))
    grho_b0, _ = _b0(g, g.grad(state.rho))
    u_b0, _ = _b0(g, state.u)
    return SingularBounds(S1, S2, 1 + eta_b0, 1 + grho_b0 + u_b0)


def check_lipschitz_indices(spec: BesovSpec) -> str:
    """Return ``"subcritical"`` or ``"critical"``; raise if ``B^s_{p,r}`` misses the Lipschitz class."""
    if not (2 <= spec.p <= math.inf and spec.r >= 1 and spec.alpha == 0):
        raise InputError("need p in [2, inf], r >= 1 and no logarithmic weight")
    edge = 1 + 2 / spec.p
    if spec.s > edge + 1e-12:
        return "subcritical"
    if abs(spec.s - edge) <= 1e-12 and spec.r == 1:
        return "critical"
    raise InputError(f"(s, p, r) = ({spec.s}, {spec.p}, {spec.r}) needs s > 1 + 2/p, or s = 1 + 2/p with r = 1")


def log_bound_ratio(state: FlowState, spec: BesovSpec) -> float:
    """``||grad u||_inf / log(e + N)`` with ``N = ||grad rho||_{B^{s-1}_{p,r}} + ||u||_{B^s_{p,r}}``."""
    check_lipschitz_indices(spec)
    g = state.grid
    part = get_partition(g.n)
    lower = BesovSpec(spec.s - 1, spec.p, spec.r)
    N = lower.aggregate(part.block_norms(g.grad(state.rho), spec.p)) + \
        spec.aggregate(part.block_norms(state.u, spec.p))
    return g.lp_norm(grad_u(state), math.inf) / math.log(math.e + N)


def record(state: FlowState) -> DiagnosticRecord:
    g = state.grid
    X = compute_X(state)
    dXu = compute_dXu(state)
    dXu_b0, s1 = _b0(g, dXu)
    dXusq_b0, s2 = _b0(g, compute_dX_usq(state))
    eta_b0, s3 = _b0(g, compute_eta(state))
    grho_b0, s4 = _b0(g, X)  # |grad^perp rho| = |grad rho| pointwise and blockwise
    S1, S2 = singular_integrals(state)
    vals = dict(
        t=float(state.t),
        energy=energy(state),
        rho_min=float(state.rho.min()),
        rho_max=float(state.rho.max()),
        grad_rho_inf=g.lp_norm(X, math.inf),
        u_inf=g.lp_norm(state.u, math.inf),
        grad_u_inf=g.lp_norm(grad_u(state), math.inf),
        dXu_inf=g.lp_norm(dXu, math.inf),
        dXu_b0=dXu_b0, dX_usq_b0=dXusq_b0, eta_b0=eta_b0, grad_rho_b0=grho_b0,
        res_eta=eta_identity_residual(state),
        res_helmholtz=helmholtz_momentum(state).residual,
        res_grad_u=reconstruct_grad_u(state).discrepancy,
        S1=S1, S2=S2,
        top_block_share=max(s1, s2, s3, s4),
    )
    flagged = not all(math.isfinite(v) for v in vals.values())
    return DiagnosticRecord(**vals, flagged=flagged)


class DiagnosticSeries:
    """Ordered records; callable as a ``solver.run`` callback."""

    def __init__(self, records: Sequence[DiagnosticRecord] = ()):
        self.records: list[DiagnosticRecord] = []
        for r in records:
            self.append(r)

    def __call__(self, state: FlowState, step: int = 0) -> None:
        self.append(record(state))

    def append(self, rec: DiagnosticRecord) -> None:
        if self.records and not rec.t > self.records[-1].t:
            raise InputError(f"record time {rec.t} does not increase past {self.records[-1].t}")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.records:
                w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
        return path

    @classmethod
    def from_csv(cls, path) -> "DiagnosticSeries":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"series file {path} is missing")
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != COLUMNS:
            raise DataError(f"{path}: header does not match series schema v{SERIES_SCHEMA_VERSION}")
        recs = []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != len(COLUMNS):
                raise DataError(f"{path}:{lineno}: expected {len(COLUMNS)} columns, got {len(row)}")
            try:
                vals = {c: float(v) for c, v in zip(COLUMNS[:-1], row[:-1])}
                flagged = {"0": False, "1": True}[row[-1]]
            except (ValueError, KeyError) as exc:
                raise DataError(f"{path}:{lineno}: unparseable value ({exc})") from exc
            recs.append(DiagnosticRecord(**vals, flagged=flagged))
        try:
            return cls(recs)
        except InputError as exc:
            raise DataError(f"{path}: {exc}") from exc


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return "%.17g" % v


# -- criterion reports -------------------------------------------------------------


def cumulative_trapezoid(t: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros_like(q, dtype=float)
    if len(q) > 1:
        out[1:] = np.cumsum(0.5 * (q[1:] + q[:-1]) * np.diff(t))
    return out


def growth_slope(t: np.ndarray, q: np.ndarray) -> float:
    """Least-squares slope of ``log q`` over the last quarter of the record."""
    if len(t) < 2 or not np.any(q > 0):
        return 0.0
    m = max(2, int(math.ceil(len(t) / 4)))
    tt, qq = t[-m:], q[-m:]
    floor = 1e-12 * (1.0 + float(np.max(q)))
    y = np.log(qq + floor)
    if np.ptp(tt) == 0:
        return 0.0
    return float(np.polyfit(tt, y, 1)[0])


@dataclass
class CriterionReport:
    mode: str
    T: float
    records: int
    K: float                         # int ||d_X u||_inf dt
    sum_integral: float              # int (||d_X u||_B + ||d_X |u|^2||_B) dt
    sup_dXu_b0: float                # sup ||d_X u||_{B^0_{inf,1}}
    grad_u_integral: float           # int ||grad u||_inf dt
    classification: dict = field(default_factory=dict)
    status: str = "bounded"
    growth_threshold: float = 1.0
    under_resolved: bool = False
    flagged_records: int = 0
    schema_version: int = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, path) -> "CriterionReport":
        try:
            data = json.loads(Path(path).read_text())
            return cls(**data)
        except (OSError, ValueError, TypeError) as exc:
            raise DataError(f"cannot read criterion report {path}: {exc}") from exc


def criterion_integrands(series: DiagnosticSeries) -> dict:
    return {
        "subcritical": series.column("dXu_inf"),
        "critical_sum": series.column("dXu_b0") + series.column("dX_usq_b0"),
        "critical_sup": series.column("dXu_b0"),
        "lipschitz": series.column("grad_u_inf"),
    }


def criterion_status(series: DiagnosticSeries, mode: str = "subcritical",
                     growth_threshold: float = 1.0) -> CriterionReport:
    """Integrals, running sup and bounded/growing verdicts from a record series.

    ``mode`` picks which criterion drives ``status``; every criterion is
    classified regardless.  A quantity is "growing" when the slope of its
    logarithm over the last quarter of the record exceeds ``growth_threshold``.
    """
    if mode not in MODES:
        raise InputError(f"unknown criterion mode {mode!r}; choose from {MODES}")
    if series is None or len(series) == 0:
        raise InputError("criterion status needs a nonempty series")
    t = series.column("t")
    q = criterion_integrands(series)
    classification = {k: ("growing" if growth_slope(t, v) > growth_threshold else "bounded")
                      for k, v in q.items()}
    return CriterionReport(
        mode=mode,
        T=float(t[-1]),
        records=len(series),
        K=float(cumulative_trapezoid(t, q["subcritical"])[-1]),
        sum_integral=float(cumulative_trapezoid(t, q["critical_sum"])[-1]),
        sup_dXu_b0=float(np.max(q["critical_sup"])),
        grad_u_integral=float(cumulative_trapezoid(t, q["lipschitz"])[-1]),
        classification=classification,
        status=classification[mode],
        growth_threshold=growth_threshold,
        under_resolved=any(r.under_resolved for r in series.records),
        flagged_records=sum(r.flagged for r in series.records),
    )


def cumulative_criteria(series: DiagnosticSeries) -> dict:
    """Running values of every criterion quantity, one entry per record."""
    t = series.column("t")
    q = criterion_integrands(series)
    return {
        "t": t,
        "K": cumulative_trapezoid(t, q["subcritical"]),
        "sum_integral": cumulative_trapezoid(t, q["critical_sum"]),
        "sup_dXu_b0": np.maximum.accumulate(q["critical_sup"]),
        "grad_u_integral": cumulative_trapezoid(t, q["lipschitz"]),
    }
