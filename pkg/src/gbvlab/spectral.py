"""Spectra of Ulam matrices and the certified radius bounds.

Ritz values come from a seeded Arnoldi iteration with modified Gram-Schmidt
(one reorthogonalization pass); an exact invariant subspace terminates the
iteration and yields the exact Ritz set of the restriction.  The bounds are
rho <= lam2 and r_ess <= lam1^beta * lam2^(1-beta), with the per-n proxy
sequence lambda(n) = 10 * sup|cocycle|^beta * sup|weighted cocycle|^(1-beta)
whose n-th roots approach the essential bound.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigurationError
from .gbv import gbv_upper
from .maps import CocycleBounds, lambda_estimates
from .measures import tv_norm
from .transfer import TransferSystem, apply_transfer, ulam_matrix

__all__ = [
    "SolverSettings",
    "SpectrumResult",
    "HypothesisRefusalError",
    "LyDiagnostic",
    "SpectralReport",
    "leading_spectrum",
    "radius_bounds",
    "lambda_n_sequence",
    "ly_diagnostic",
    "make_report",
]


class HypothesisRefusalError(RuntimeError):
    """Standing assumptions failed and no force flag was given."""

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("standing assumptions failed: " + ", ".join(self.failures))


@dataclass(frozen=True)
class SolverSettings:
    krylov: int = 60
    ritz: int = 10
    tol: float = 1e-10
    seed: int = 0
    sampling_allowance: float = 0.02


@dataclass(eq=False)
class SpectrumResult:
    """Ritz values sorted by modulus desc (ties: real desc, then imag desc)."""

    values: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    breakdown: bool
    krylov_dim: int


def leading_spectrum(matrix, m: int = 10, tol: float = 1e-10,
                     max_iter: int = 60, seed: int = 0) -> SpectrumResult:
    """Largest-modulus Ritz values of a (possibly non-normal) matrix.

    Arnoldi with a deterministic seeded start vector.  On breakdown the
    Krylov space is exactly invariant and the returned Ritz values are exact
    eigenvalues of the restriction (residuals reported as zero).
    """
    arr = np.asarray(getattr(matrix, "matrix", matrix))
    n = arr.shape[0]
    if arr.shape != (n, n):
        raise ValueError("matrix must be square")
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, {n}], got {m}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    dim = min(max_iter, n)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    if np.iscomplexobj(arr):
        v0 = v0 + 1j * rng.standard_normal(n)
    v0 = v0 / np.linalg.norm(v0)
    V = np.zeros((n, dim + 1), dtype=complex if np.iscomplexobj(arr) else float)
    H = np.zeros((dim + 1, dim), dtype=V.dtype)
    V[:, 0] = v0
    breakdown = False
    k_eff = dim
    scale = 0.0
    for k in range(dim):
        w = arr @ V[:, k]
        for _ in range(2):  # MGS with one reorthogonalization pass
            for j in range(k + 1):
                h = np.vdot(V[:, j], w)
                H[j, k] += h
                w = w - h * V[:, j]
        beta = np.linalg.norm(w)
        scale = max(scale, float(np.max(np.abs(H[: k + 2, k]))), float(beta))
        if beta <= 1e-14 * max(1.0, scale):
            breakdown = True
            k_eff = k + 1
            break
        H[k + 1, k] = beta
        V[:, k + 1] = w / beta
    Hk = H[:k_eff, :k_eff]
    evals, evecs = np.linalg.eig(Hk)
    if breakdown:
        residuals = np.zeros(evals.size)
    else:
        residuals = np.abs(H[k_eff, k_eff - 1]) * np.abs(evecs[-1, :])
    converged = residuals <= tol * np.maximum(1.0, np.abs(evals))
    order = np.lexsort((-evals.imag, -evals.real, -np.abs(evals)))
    take = order[: min(m, evals.size)]
    return SpectrumResult(values=evals[take], residuals=residuals[take],
                          converged=converged[take], breakdown=breakdown,
                          krylov_dim=k_eff)


def radius_bounds(lam1: float, lam2: float, beta: float):
    """(spectral radius bound, essential spectral radius bound)."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0,1], got {beta}")
    if lam1 < 0 or lam2 < 0:
        raise ValueError("rates must be nonnegative")
    return float(lam2), float(lam1**beta * lam2 ** (1.0 - beta))


def lambda_n_sequence(bmap, weight, beta: float, n_max: int, grid: int = 4096,
                      refinement_depth: int = 20, bounds: CocycleBounds | None = None):
    """Rows (n, lambda(n), lambda(n)^(1/n)) from sampled cocycle sups."""
    if bounds is None:
        bounds = lambda_estimates(bmap, weight, n_max, grid=grid,
                                  refinement_depth=refinement_depth)
    lam_n = 10.0 * bounds.sup1**beta * bounds.sup2 ** (1.0 - beta)
    with np.errstate(divide="ignore"):
        roots = np.exp(np.log(lam_n) / bounds.n)
    rows = np.column_stack([bounds.n.astype(float), lam_n, roots])
    return rows, bounds


# ---------------------------------------------------------------------------
# Lasota-Yorke-shaped diagnostics


@dataclass(eq=False)
class LyDiagnostic:
    """Max-envelope fits of norm growth against the two-norm inequality shape.

    For each n: upper estimate of the output norm <= coeff * input norm
    + c_fixed * input mass norm, where coeff is pinned to the cocycle-sup
    product 10 * sup1^beta * sup2^(1-beta); (theta_env, c_env) is the free
    minimal envelope pair.  Because the left side is an upper estimate of an
    infimum norm, positive c_fixed records estimator slack, not a
    counterexample to the inequality.
    """

    beta: float
    ns: np.ndarray
    ensemble_size: int
    coeff: np.ndarray
    c_fixed: np.ndarray
    theta_env: np.ndarray
    c_env: np.ndarray
    slack_max: np.ndarray
    slack_mean: np.ndarray

    def to_dict(self):
        return {
            "beta": self.beta,
            "n": self.ns.tolist(),
            "ensemble_size": self.ensemble_size,
            "coeff": self.coeff.tolist(),
            "c_fixed": self.c_fixed.tolist(),
            "theta_env": self.theta_env.tolist(),
            "c_env": self.c_env.tolist(),
            "slack_max": self.slack_max.tolist(),
            "slack_mean": self.slack_mean.tolist(),
        }

    def to_csv(self):
        lines = ["n,coeff,c_fixed,theta_env,c_env,slack_max,slack_mean"]
        for i, n in enumerate(self.ns):
            vals = ",".join(repr(float(v)) for v in (
                self.coeff[i], self.c_fixed[i], self.theta_env[i],
                self.c_env[i], self.slack_max[i], self.slack_mean[i]))
            lines.append(f"{int(n)},{vals}")
        return "\n".join(lines) + "\n"


def _envelope_pair(g, t, y):
    """Minimal (theta, c) >= 0 with theta*g + c*t >= y for all members."""
    res = linprog(c=[max(np.mean(g), 1e-30), max(np.mean(t), 1e-30)],
                  A_ub=np.column_stack([-g, -t]), b_ub=-y,
                  bounds=[(0, None), (0, None)], method="highs")
    if not res.success:
        return float("nan"), float("nan")
    return float(res.x[0]), float(res.x[1])


def ly_diagnostic(sys: TransferSystem, beta: float, ensemble, n_list,
                  n_k: int = 10, grid: int = 2048,
                  refinement_depth: int = 20) -> LyDiagnostic:
    """Fit the inequality shape over an ensemble of densities.

    Computes the norm estimates of the n-fold operator images of every
    member and fits, per n, the minimal additive constant with the pinned
    leading coefficient, plus the free minimal max-envelope pair.
    """
    ensemble = list(ensemble)
    if not ensemble:
        raise ConfigurationError("ly diagnostic needs a non-empty ensemble")
    n_list = sorted(set(int(n) for n in n_list))
    if not n_list or n_list[0] < 1:
        raise ValueError("n_list must contain positive integers")
    bounds = lambda_estimates(sys.bmap, sys.weight, n_list[-1], grid=grid,
                              refinement_depth=refinement_depth)

    g = np.array([gbv_upper(d, beta, n_k=n_k).value for d in ensemble])
    t = np.array([tv_norm(d) for d in ensemble])
    y = np.zeros((len(n_list), len(ensemble)))
    for i, d in enumerate(ensemble):
        cur = d
        step = 0
        for row, n in enumerate(n_list):
            while step < n:
                cur = apply_transfer(sys, cur)
                step += 1
            y[row, i] = gbv_upper(cur, beta, n_k=n_k).value

    coeff = np.empty(len(n_list))
    c_fixed = np.empty(len(n_list))
    theta_env = np.empty(len(n_list))
    c_env = np.empty(len(n_list))
    slack_max = np.empty(len(n_list))
    slack_mean = np.empty(len(n_list))
    for row, n in enumerate(n_list):
        sup1 = bounds.sup1[n - 1]
        sup2 = bounds.sup2[n - 1]
        coeff[row] = 10.0 * sup1**beta * sup2 ** (1.0 - beta)
        deficit = y[row] - coeff[row] * g
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(t > 0, deficit / np.where(t > 0, t, 1.0), 0.0)
        c_fixed[row] = max(float(np.max(ratios, initial=0.0)), 0.0)
        theta_env[row], c_env[row] = _envelope_pair(g, t, y[row])
        slack = coeff[row] * g + c_fixed[row] * t - y[row]
        slack_max[row] = float(np.max(slack))
        slack_mean[row] = float(np.mean(slack))
    return LyDiagnostic(beta=beta, ns=np.array(n_list), ensemble_size=len(ensemble),
                        coeff=coeff, c_fixed=c_fixed, theta_env=theta_env,
                        c_env=c_env, slack_max=slack_max, slack_mean=slack_mean)


# ---------------------------------------------------------------------------
# full report


@dataclass(eq=False)
class SpectralReport:
    """Everything the bound pipeline produces for one system."""

    beta: float
    beta_overrides_alpha: bool
    n: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    rho_bound: float
    ess_per_n: np.ndarray
    ess_bound: float
    lambda_n: np.ndarray
    lambda_n_root: np.ndarray
    ritz: list
    hypotheses: object
    forced: bool
    seed: int
    solver: SolverSettings
    system_digest: str
    grid: int
    refinement_depth: int

    def classification_threshold(self):
        return self.ess_bound + 2.0 * (self.solver.tol + self.solver.sampling_allowance)

    def to_dict(self):
        return {
            "beta": self.beta,
            "beta_overrides_alpha": self.beta_overrides_alpha,
            "rho_bound": self.rho_bound,
            "ess_bound": self.ess_bound,
            "n": self.n.tolist(),
            "lambda1_hat": self.lam1.tolist(),
            "lambda2_hat": self.lam2.tolist(),
            "ess_per_n": self.ess_per_n.tolist(),
            "lambda_n": self.lambda_n.tolist(),
            "lambda_n_root": self.lambda_n_root.tolist(),
            "ritz": [
                {
                    "cells": entry["cells"],
                    "values": [[float(v.real), float(v.imag)] for v in entry["spectrum"].values],
                    "residuals": entry["spectrum"].residuals.tolist(),
                    "converged": entry["spectrum"].converged.tolist(),
                    "breakdown": entry["spectrum"].breakdown,
                    "classification": entry["classification"],
                }
                for entry in self.ritz
            ],
            "hypotheses": self.hypotheses.to_dict(),
            "forced": self.forced,
            "seed": self.seed,
            "system": self.system_digest,
            "grid": self.grid,
            "refinement_depth": self.refinement_depth,
            "classification_threshold": self.classification_threshold(),
        }

    def cocycle_csv(self):
        lines = ["n,lambda1_hat,lambda2_hat,lambda_n,lambda_n_root"]
        for i in range(self.n.size):
            vals = ",".join(repr(float(v)) for v in (
                self.lam1[i], self.lam2[i], self.lambda_n[i], self.lambda_n_root[i]))
            lines.append(f"{int(self.n[i])},{vals}")
        return "\n".join(lines) + "\n"

    def ritz_csv(self):
        lines = ["N,ritz_index,re,im,modulus,classification"]
        for entry in self.ritz:
            for i, v in enumerate(entry["spectrum"].values):
                lines.append(",".join([
                    str(entry["cells"]), str(i), repr(float(v.real)),
                    repr(float(v.imag)), repr(float(abs(v))),
                    entry["classification"][i]]))
        return "\n".join(lines) + "\n"


def make_report(sys: TransferSystem, beta: float | None = None,
                N_list=(16, 64, 256), n_max: int = 16,
                solver: SolverSettings | None = None, grid: int = 4096,
                refinement_depth: int = 20, force: bool = False,
                threads: int = 1) -> SpectralReport:
    """Full pipeline: rate estimates, theorem bounds, Ulam spectra, labels.

    Refuses to run when the standing assumptions fail, unless forced (the
    force flag is recorded in the report).  Deterministic given the solver
    seed; N_list entries may be processed concurrently.
    """
    solver = solver or SolverSettings()
    hyp = sys.hypotheses
    if not hyp.passed and not force:
        raise HypothesisRefusalError(hyp.failures())
    overrides = beta is not None and beta != sys.weight.alpha
    if overrides:
        warnings.warn("beta differs from the weight's Holder exponent; the "
                      "certified bound is stated at beta = alpha", stacklevel=2)
    beta = sys.weight.alpha if beta is None else float(beta)

    bounds = lambda_estimates(sys.bmap, sys.weight, n_max, grid=grid,
                              refinement_depth=refinement_depth)
    rows, _ = lambda_n_sequence(sys.bmap, sys.weight, beta, n_max, bounds=bounds)
    ess_per_n = bounds.lam1**beta * bounds.lam2 ** (1.0 - beta)
    rho_bound = float(np.min(bounds.lam2))
    ess_bound = float(ess_per_n[-1])
    threshold = ess_bound + 2.0 * (solver.tol + solver.sampling_allowance)

    def one_resolution(cells):
        mat = ulam_matrix(sys, cells)
        spec = leading_spectrum(mat, m=min(solver.ritz, cells), tol=solver.tol,
                                max_iter=solver.krylov, seed=solver.seed)
        labels = ["above" if abs(v) > threshold else "below" for v in spec.values]
        return {"cells": cells, "spectrum": spec, "classification": labels}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ritz = list(pool.map(one_resolution, N_list))
    else:
        ritz = [one_resolution(cells) for cells in N_list]

    return SpectralReport(
        beta=beta, beta_overrides_alpha=overrides,
        n=bounds.n, lam1=bounds.lam1, lam2=bounds.lam2,
        rho_bound=rho_bound, ess_per_n=ess_per_n, ess_bound=ess_bound,
        lambda_n=rows[:, 1], lambda_n_root=rows[:, 2],
        ritz=ritz, hypotheses=hyp, forced=force and not hyp.passed,
        seed=solver.seed, solver=solver, system_digest=sys.digest(),
        grid=grid, refinement_depth=refinement_depth,
    )
