"""
Empirical Hölder modulus of the truncated gradient 𝒢_{2δ,ε}(∇u_ε)
"""
from __future__ import annotations
import typing as ty
import logging
import attrs
import numpy as np
from facetflow.composites import TruncationParams, truncate_gradient
from facetflow.solver import RunResult
from .cylinder import ParabolicCylinder
from .report import DiagnosticsReport

logger = logging.getLogger("facetflow")

MIN_PAIRS = 10_000
MIN_BINS = 3
ZERO_DIFFERENCE = 1e-12


def parabolic_distance(x, t, y, s) -> np.ndarray:
    "d_p((x, t), (y, s)) = max(|x − y|, |t − s|^{1/2})"
    spatial = np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)
    return np.maximum(spatial, np.sqrt(np.abs(np.asarray(t) - np.asarray(s))))


def holder_modulus_estimate(
    run: RunResult,
    params: TruncationParams,
    Q: ParabolicCylinder,
    pairs: int = MIN_PAIRS,
    bins: int = 12,
    seed: int = 0,
) -> DiagnosticsReport:
    """Fits |Δ𝒢| ≤ C μ₀ (d_p/R)^α to the truncated gradient of a run over Q

    The truncation uses the run's own ε. First the bound
    |𝒢_{2δ,ε}(∇u_ε)| ≤ max(0, sup_Q V_ε − 2δ) is verified; then random pairs of
    nodes of Q are drawn, their differences |Δ𝒢| are binned by parabolic distance
    on a logarithmic scale and a line is fitted through the logarithms of the bin
    maxima.

    Parameters
    ----------
    run : RunResult
        the run to inspect
    params : TruncationParams
        the truncation radius δ (its eps is replaced by the run's)
    Q : ParabolicCylinder
        the cylinder the pairs are drawn from
    pairs : int
        number of sampled pairs, at least 10⁴
    bins : int
        number of distance bins of the envelope
    seed : int
        seed of the pair sampler

    Returns
    -------
    DiagnosticsReport
        with the fitted exponent in fitted["alpha"] and the constant in
        fitted["C"]. When every difference vanishes the check passes as trivially
        Hölder; when fewer than three bins hold a nonzero maximum it is
        inconclusive

    Raises
    ------
    HypothesisError
        if ε > δ/8
    GeometryError
        if Q leaves the run domain
    """
    params = attrs.evolve(params, eps=run.eps)
    params.require_holder_regime()
    pairs = max(int(pairs), MIN_PAIRS)
    sample = Q.restrict(run)
    G = truncate_gradient(sample.grad, params, mode="regularized")
    norm_G = np.linalg.norm(G, axis=-1)
    V = sample.V
    pointwise = np.maximum(V - 2.0 * params.delta, 0.0) - norm_G
    mu0 = float(norm_G.max())
    sup_bound = max(0.0, float(V.max()) - 2.0 * params.delta)
    margins = {
        "pointwise_sup": float(pointwise.min()),
        "sup": sup_bound - mu0,
    }
    bound_ok = min(margins.values()) >= -1e-12 * (1.0 + sup_bound)
    report_args = dict(
        check="holder_modulus",
        run_ids=[run.run_id],
        params={
            "delta": params.delta,
            "eps": params.eps,
            "pairs": pairs,
            "bins": bins,
            "seed": seed,
            "cylinder": attrs.asdict(Q),
            "mu0": mu0,
        },
        margins=margins,
    )
    n_times, n_nodes = norm_G.shape
    rng = np.random.default_rng(seed)
    first = rng.integers(0, n_times * n_nodes, pairs)
    second = rng.integers(0, n_times * n_nodes, pairs)
    distinct = first != second
    first, second = first[distinct], second[distinct]
    t1, x1 = np.divmod(first, n_nodes)
    t2, x2 = np.divmod(second, n_nodes)
    d = parabolic_distance(
        sample.coords[x1], sample.times[t1], sample.coords[x2], sample.times[t2]
    )
    flat_G = G.reshape(-1, G.shape[-1])
    delta_G = np.linalg.norm(flat_G[first] - flat_G[second], axis=-1)
    # affine data leaves rounding noise in the reconstructed gradient
    delta_G = np.where(delta_G <= ZERO_DIFFERENCE * (1.0 + mu0), 0.0, delta_G)
    if not np.any(delta_G > 0.0):
        logger.info(f"run '{run.run_id}': truncated gradient is constant on {Q}")
        return DiagnosticsReport.judged(
            bound_ok, located={"trivial": True}, **report_args
        )
    positive = d > 0.0
    d, delta_G = d[positive], delta_G[positive]
    edges = np.geomspace(d.min(), d.max() * (1.0 + 1e-12), bins + 1)
    which = np.clip(np.searchsorted(edges, d, side="right") - 1, 0, bins - 1)
    envelope_d, envelope_G = [], []
    for b in range(bins):
        in_bin = np.flatnonzero(which == b)
        if in_bin.size == 0:
            continue
        top = in_bin[np.argmax(delta_G[in_bin])]
        if delta_G[top] > 0.0:
            envelope_d.append(d[top])
            envelope_G.append(delta_G[top])
    report_args["margins"]["envelope_bins"] = len(envelope_d)
    if len(envelope_d) < MIN_BINS:
        logger.warning(
            f"run '{run.run_id}': only {len(envelope_d)} nonzero envelope bins, "
            "the Hölder fit is inconclusive"
        )
        return DiagnosticsReport(status="inconclusive", **report_args)
    alpha, intercept = np.polyfit(
        np.log(np.asarray(envelope_d) / Q.R), np.log(envelope_G), 1
    )
    alpha = float(alpha)
    C = float(np.exp(intercept)) / mu0
    return DiagnosticsReport.judged(
        bound_ok and alpha > 0.0,
        fitted={"C": C, "alpha": alpha},
        located={"envelope_d": envelope_d, "envelope": envelope_G},
        **report_args,
    )


def exponent_stability(
    reports: ty.Sequence[DiagnosticsReport], tolerance: float = 0.1
) -> DiagnosticsReport:
    """Passes iff all reports fitted a positive exponent and the exponents differ
    by at most `tolerance`"""
    alphas = np.array([r.fitted.get("alpha", np.nan) for r in reports], dtype=float)
    valid = bool(alphas.size) and bool(np.all(alphas > 0))
    spread = float(alphas.max() - alphas.min()) if valid else float("inf")
    return DiagnosticsReport.judged(
        valid and spread <= tolerance,
        check="holder_exponent_stability",
        run_ids=[i for r in reports for i in r.run_ids],
        params={"tolerance": tolerance},
        margins={"alphas": alphas, "spread": tolerance - spread},
    )
