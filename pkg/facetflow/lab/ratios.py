"""
Empirical constants of the local boundedness estimates

Each estimate bounds a quantity on Q_{R/2} by an average over Q_R times an
unknown constant; the functions here report the ratio of the two sides, the
constant a run actually needs. Stability of that constant across ε and mesh
refinement is judged by `constant_stability`.
"""
from __future__ import annotations
import typing as ty
import attrs
import numpy as np
from facetflow.exceptions import HypothesisError
from facetflow.composites import ExponentBook
from facetflow.solver import RunResult
from .cylinder import ParabolicCylinder
from .report import DiagnosticsReport


def _fitted_report(
    check: str, run: RunResult, C: float, **params
) -> DiagnosticsReport:
    "A single run only yields a constant; a usable one is judged across runs"
    usable = bool(np.isfinite(C) and C >= 0.0)
    return DiagnosticsReport(
        check=check,
        run_ids=[run.run_id],
        params={**params, "judged_by": "constant_stability"},
        fitted={"C": C},
        status="inconclusive" if usable else "fail",
    )


def has_fitted_constant(report: DiagnosticsReport) -> bool:
    "Whether a ratio report carries a constant `constant_stability` can compare"
    return report.status != "fail" and report.fitted.get("C") is not None


def sup_estimate_ratio(
    run: RunResult, Q: ParabolicCylinder, s: float
) -> DiagnosticsReport:
    """C = sup_{Q_{R/2}} |u| / (R^{−s_c} ⨏_{Q_R} (|u| + 1)^s)^{1/(s − s_c)}

    Raises
    ------
    HypothesisError
        if s ≤ s_c = n(2 − p)/p or R ≥ 1
    GeometryError
        if Q leaves the run domain
    """
    book = ExponentBook.for_model(run.model, s=s)
    s = float(book.require_s())
    s_c = float(book.s_c)
    Q.require_unit_radius()
    full = Q.restrict(run)
    half = Q.half().restrict(run)
    lhs = float(np.abs(half.u).max())
    average = float(np.mean((np.abs(full.u) + 1.0) ** s))
    rhs = (Q.R ** (-s_c) * average) ** (1.0 / (s - s_c))
    return _fitted_report(
        "sup_estimate", run, lhs / rhs, s=s, s_c=s_c, cylinder=attrs.asdict(Q)
    )


def reversed_holder_ratio(
    run: RunResult, q: float, Q: ParabolicCylinder
) -> DiagnosticsReport:
    """C = ∬_{Q_{R/2}} V_ε^q / ∬_{Q_R} (V_ε^p + 1)

    Raises
    ------
    HypothesisError
        unless p < q and R < 1
    """
    p = run.model.p
    if not q > p:
        raise HypothesisError(f"q = {q:g} must exceed p = {p:g}")
    Q.require_unit_radius()
    full = Q.restrict(run)
    half = Q.half().restrict(run)
    numerator = float(np.mean(half.V**q)) * Q.half().measure()
    denominator = float(np.mean(full.V**p + 1.0)) * Q.measure()
    return _fitted_report(
        "reversed_holder",
        run,
        numerator / denominator,
        q=q,
        p=p,
        cylinder=attrs.asdict(Q),
    )


def sup_vq_ratio(run: RunResult, q: float, Q: ParabolicCylinder) -> DiagnosticsReport:
    """C = sup_{Q_{R/2}} V_ε / (⨏_{Q_R} (1 + V_ε)^q)^{1/(q − q_c)}

    Raises
    ------
    HypothesisError
        unless q > q_c = n(2 − p)/2, q ≥ 2 and R < 1
    """
    book = ExponentBook.for_model(run.model, q=q)
    q = float(book.require_q(minimum=2))
    q_c = float(book.q_c)
    Q.require_unit_radius()
    full = Q.restrict(run)
    half = Q.half().restrict(run)
    lhs = float(half.V.max())
    rhs = float(np.mean((1.0 + full.V) ** q)) ** (1.0 / (q - q_c))
    return _fitted_report(
        "sup_vq", run, lhs / rhs, q=q, q_c=q_c, cylinder=attrs.asdict(Q)
    )


def constant_stability(
    reports: ty.Sequence[DiagnosticsReport], factor: float = 2.0
) -> DiagnosticsReport:
    """Judges whether fitted constants agree within `factor`

    Parameters
    ----------
    reports : sequence of DiagnosticsReport
        reports of the same check on runs differing in ε or grid
    factor : float
        the largest admissible max C / min C

    Returns
    -------
    DiagnosticsReport
        passing iff every constant is finite and positive and max C ≤ factor·min C
    """
    constants = np.array([r.fitted.get("C", np.nan) for r in reports], dtype=float)
    checks = sorted({r.check for r in reports})
    valid = bool(constants.size) and bool(
        np.all(np.isfinite(constants)) and np.all(constants > 0)
    )
    spread = float(constants.max() / constants.min()) if valid else float("inf")
    return DiagnosticsReport.judged(
        valid and spread <= factor,
        check="constant_stability:" + "+".join(checks),
        run_ids=[i for r in reports for i in r.run_ids],
        params={"factor": factor},
        margins={"constants": constants, "spread": factor - spread},
        fitted={"C": float(constants.max()) if valid else None},
    )
