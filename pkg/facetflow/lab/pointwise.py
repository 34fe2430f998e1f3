"""
Nodewise diagnostics of a run: facet size, V/W compatibility and Euler's identity
"""
from __future__ import annotations
import typing as ty
import numpy as np
from facetflow.composites import v_eps_field, vw_margins
from facetflow.energy import MollifiedDensity, QuadSpec, mollify_density
from facetflow.solver import RunResult
from .report import DiagnosticsReport

VW_SLACK = 1e-12


def facet_fraction(run: RunResult, delta: float) -> np.ndarray:
    "Fraction of nodes with V_ε ≤ δ in every snapshot"
    return np.array(
        [float(np.mean(v_eps_field(g, run.eps) <= delta)) for g in run.gradients()]
    )


def vw_compatibility(run: RunResult) -> DiagnosticsReport:
    """Checks V_ε ≤ c_n W_ε ≤ c_n(1 + V_ε) everywhere and W_ε ≤ √2 V_ε where
    |∇u| > 1, at every node of every snapshot"""
    worst = {"lower": np.inf, "upper": np.inf, "facet": np.inf}
    located = {}
    for k, grad in enumerate(run.gradients()):
        for name, margin in vw_margins(grad, run.eps).items():
            index = int(np.argmin(margin))
            if margin.flat[index] < worst[name]:
                worst[name] = float(margin.flat[index])
                located[name] = {
                    "t": float(run.snapshots[k].t),
                    "node": [int(i) for i in np.unravel_index(index, margin.shape)],
                }
    passed = min(worst.values()) >= -VW_SLACK
    return DiagnosticsReport.judged(
        passed,
        check="vw_compatibility",
        run_ids=[run.run_id],
        params={"eps": run.eps, "n": run.grid.dim},
        margins=worst,
        located={} if passed else located,
    )


def euler_identity_residual(
    run: RunResult, md: ty.Optional[MollifiedDensity] = None
) -> DiagnosticsReport:
    """sup over nodes of |⟨∇E_{1,ε}(∇u), ∇u⟩ − |∇u||

    The mollified one-homogeneous part satisfies Euler's identity up to O(ε); the
    check passes iff the residual is at most 2Kε plus the quadrature error of the
    table.

    Parameters
    ----------
    run : RunResult
        the run to inspect
    md : MollifiedDensity, optional
        a table of the run's density at the run's ε, covering its gradients
        (tabulated on demand otherwise)
    """
    grads = run.gradients()
    if md is None:
        largest = max(float(np.linalg.norm(g, axis=-1).max()) for g in grads)
        md = mollify_density(
            run.model, run.eps, QuadSpec(r_max=max(2.0, 1.5 * largest + 1.0))
        )
    residual = 0.0
    for grad in grads:
        flux = md.gradient(grad, part="one")
        pairing = np.sum(flux * grad, axis=-1)
        residual = max(
            residual, float(np.abs(pairing - np.linalg.norm(grad, axis=-1)).max())
        )
    bound = 2.0 * run.model.K * run.eps
    tolerance = md.quad_error * max(1.0, md.r_max)
    return DiagnosticsReport.judged(
        residual <= bound + tolerance,
        check="euler_identity",
        run_ids=[run.run_id],
        params={"eps": run.eps, "K": run.model.K, "quad_tolerance": tolerance},
        margins={"bound": bound + tolerance - residual},
        fitted={"C": residual / run.eps},
    )
