"""Piecewise expanding maps of (0,1), branch weights, and assumption checks.

A map is a list of monotone C1 branches with pairwise-disjoint interiors;
countable families are truncated with an explicit tail descriptor.  Weights
are per-branch callables with a declared Holder exponent.  The module checks
the standing assumptions (uniform expansion, summable branch sups of the
weight, Lp-integrable derivative, bounded weight-times-derivative) by
sampling with geometric refinement toward the singular set, and estimates
the exponential growth rates of the weight cocycle and of the weighted
derivative cocycle from sampled sups.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    InsufficientSamplingError,
    OrbitSingularityError,
    SingularPointError,
)
from .measures import lp_norm_fn

__all__ = [
    "Branch",
    "BranchedMap",
    "WeightSpec",
    "TailDescriptor",
    "HypothesisReport",
    "CocycleBounds",
    "affine_branch",
    "doubling_map",
    "cascade_map",
    "affine_map",
    "make_weight",
    "evaluate",
    "check_hypotheses",
    "cocycle",
    "lambda_estimates",
]

# irrational fraction used to keep sample orbits off the dyadic singular set
_IRR = 0.6180339887498949


@dataclass(frozen=True, eq=False)
class Branch:
    """One monotone branch: interval, forward map, derivative, inverse."""

    lo: float
    hi: float
    fwd: object
    deriv: object
    inv: object
    image_lo: float
    image_hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"branch interval degenerate: ({self.lo}, {self.hi})")

    @property
    def length(self):
        return self.hi - self.lo


def affine_branch(lo, hi, slope, intercept) -> Branch:
    if slope <= 0:
        raise ValueError(f"branch slope must be positive, got {slope}")

    def fwd(x):
        return slope * np.asarray(x, dtype=float) + intercept

    def deriv(x):
        return np.full_like(np.asarray(x, dtype=float), slope)

    def inv(y):
        return (np.asarray(y, dtype=float) - intercept) / slope

    return Branch(lo=float(lo), hi=float(hi), fwd=fwd, deriv=deriv, inv=inv,
                  image_lo=slope * lo + intercept, image_hi=slope * hi + intercept)


@dataclass(eq=False)
class BranchedMap:
    """Ordered branches of a piecewise expanding map, possibly truncated.

    ``tail_length`` is the total length of omitted branches; ``expansion``
    is the declared lower bound for the derivative (validated, not trusted,
    by check_hypotheses).  ``tail_slope_bound`` bounds |f'| on the omitted
    branches when known (used for truncation error reporting).
    """

    branches: tuple
    kind: str = "custom"
    expansion: float = float("nan")
    tail_length: float = 0.0
    tail_slope_bound: float = float("nan")
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.branches = tuple(self.branches)
        if not self.branches:
            raise ValueError("a map needs at least one branch")
        order = np.argsort([b.lo for b in self.branches])
        los = np.array([self.branches[i].lo for i in order])
        his = np.array([self.branches[i].hi for i in order])
        if np.any(his[:-1] > los[1:] + 1e-15):
            raise ValueError("branch interiors overlap")
        covered = float(np.sum(his - los))
        if abs(covered + self.tail_length - 1.0) > 1e-12:
            raise ValueError(
                f"branches plus declared tail cover {covered + self.tail_length}, not 1"
            )
        self._order = order
        self._los = los
        self._his = his

    @property
    def n_branches(self):
        return len(self.branches)

    def singular_points(self):
        """Branch endpoints inside (0,1), sorted."""
        pts = np.array(sorted({b.lo for b in self.branches} | {b.hi for b in self.branches}))
        return pts[(pts > 0.0) & (pts < 1.0)]

    def locate(self, x):
        """Branch index for each point, -1 on the singular set / omitted tail."""
        x = np.asarray(x, dtype=float)
        pos = np.searchsorted(self._los, x, side="right") - 1
        pos_c = np.clip(pos, 0, self.n_branches - 1)
        inside = (pos >= 0) & (x > self._los[pos_c]) & (x < self._his[pos_c])
        idx = np.where(inside, self._order[pos_c], -1)
        return idx

    def forward(self, idx, x):
        """Vectorized f(x) for points with known branch indices."""
        out = np.empty_like(np.asarray(x, dtype=float))
        for j in np.unique(idx):
            sel = idx == j
            out[sel] = self.branches[j].fwd(x[sel])
        return out


def evaluate(bmap: BranchedMap, x: float):
    """Branch index, f(x) and f'(x) at one interior point.

    Raises SingularPointError (with the nearest branch boundaries) when x
    lies on the singular set or inside the omitted tail.
    """
    idx = int(bmap.locate(np.array([x]))[0])
    if idx < 0:
        below = bmap._his[bmap._his <= x]
        above = bmap._los[bmap._los >= x]
        raise SingularPointError(
            x,
            lower=float(below[-1]) if below.size else None,
            upper=float(above[0]) if above.size else None,
        )
    b = bmap.branches[idx]
    return idx, float(b.fwd(np.array([x]))[0]), float(b.deriv(np.array([x]))[0])


def doubling_map() -> BranchedMap:
    branches = (affine_branch(0.0, 0.5, 2.0, 0.0), affine_branch(0.5, 1.0, 2.0, -1.0))
    return BranchedMap(branches=branches, kind="doubling", expansion=2.0,
                       tail_length=0.0, tail_slope_bound=0.0)


def cascade_map(j_max: int = 40) -> BranchedMap:
    """Countable family omega_j = (2^-(j+1), 2^-j), f = 2x - 2^-j, truncated.

    The omitted branches accumulate at 0 with total length 2^-j_max; the
    singular set {2^-j} is closed in (0,1).
    """
    if j_max < 1:
        raise ValueError(f"j_max must be >= 1, got {j_max}")
    branches = tuple(
        affine_branch(2.0 ** -(j + 1), 2.0**-j, 2.0, -(2.0**-j)) for j in range(j_max)
    )
    return BranchedMap(branches=branches, kind="cascade", expansion=2.0,
                       tail_length=2.0**-j_max, tail_slope_bound=2.0,
                       params={"j_max": j_max})


def affine_map(specs) -> BranchedMap:
    """Map from explicit (lo, hi, slope, intercept) branch tuples."""
    branches = tuple(affine_branch(*s) for s in specs)
    slopes = [s[2] for s in specs]
    return BranchedMap(branches=branches, kind="affine", expansion=float(min(slopes)),
                       tail_length=0.0, tail_slope_bound=0.0,
                       params={"specs": tuple(tuple(map(float, s)) for s in specs)})


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class TailDescriptor:
    """Analytic bounds for the omitted branches of a truncated map.

    sup_sum bounds the series of per-branch sups of |xi| over omitted
    branches; mass_bound bounds sum of sup|xi * f'| times branch length,
    i.e. the operator mass lost to truncation per unit density sup.
    """

    sup_sum: float
    mass_bound: float


@dataclass(eq=False)
class WeightSpec:
    """Per-branch weight with declared Holder exponent and Lp exponent."""

    kind: str
    alpha: float
    p: float
    branch_fn: object
    branch_sups: object = None  # analytic per-branch sups, or None to sample
    tail: TailDescriptor | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if not self.p > 1.0:
            raise ValueError(f"p must be > 1, got {self.p}")

    def values(self, j, x):
        return self.branch_fn(j, np.asarray(x, dtype=float))

    def scaled(self, c):
        fn = self.branch_fn
        sups = None if self.branch_sups is None else np.abs(c) * np.asarray(self.branch_sups)
        tail = None
        if self.tail is not None:
            tail = TailDescriptor(abs(c) * self.tail.sup_sum, abs(c) * self.tail.mass_bound)
        return WeightSpec(kind=f"{self.kind}*{c}", alpha=self.alpha, p=self.p,
                          branch_fn=lambda j, x: c * fn(j, x), branch_sups=sups,
                          tail=tail, params=dict(self.params, scale=c))


def weierstrass_profile(x, terms=13):
    """Truncated lacunary cosine sum, Holder exponent 1/2, infinite variation."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for m in range(terms):
        acc += 2.0**-m * np.cos(2.0 * np.pi * 4.0**m * x)
    return 0.5 * (1.0 + 0.25 * acc)


def _cascade_tails(kind, bmap, params):
    """Closed-form tail descriptors on the truncated cascade map."""
    j0 = bmap.params["j_max"]
    if kind == "power":
        delta = params["delta"]
        scale = params["scale"]
        sup_sum = scale * 2.0 ** (-j0 * delta) / (1.0 - 2.0**-delta)
        mass = scale * 2.0 ** (-j0 * (1.0 + delta)) / (1.0 - 2.0 ** -(1.0 + delta))
        return TailDescriptor(sup_sum=sup_sum, mass_bound=mass)
    if kind == "constant":
        c = abs(params["value"])
        if c == 0.0:
            return TailDescriptor(0.0, 0.0)
        return TailDescriptor(sup_sum=float("inf"), mass_bound=2.0 * c * bmap.tail_length)
    if kind == "inverse-derivative":
        # per-branch sup is 1/2 on every omitted branch: not summable
        return TailDescriptor(sup_sum=float("inf"), mass_bound=bmap.tail_length)
    if kind == "weierstrass":
        # |xi| <= 3/4 regardless of truncation order, |f'| = 2 on the tail
        return TailDescriptor(sup_sum=float("inf"), mass_bound=1.5 * bmap.tail_length)
    return None


def make_weight(kind: str, bmap: BranchedMap, alpha=None, p=None, **params) -> WeightSpec:
    """Built-in weights bound to a map (which fixes tails and branch sups)."""
    kind = kind.replace("_", "-")
    tail_sup_override = params.pop("tail_sup_sum", None)
    tail_mass_override = params.pop("tail_mass_bound", None)
    sups = None
    if kind == "constant":
        value = float(params.get("value", 0.5))
        params = {"value": value}

        def fn(j, x):
            return np.full_like(np.asarray(x, dtype=float), value)

        sups = np.full(bmap.n_branches, abs(value))
        alpha = 0.5 if alpha is None else alpha
    elif kind == "inverse-derivative":
        params = {}

        def fn(j, x):
            return 1.0 / bmap.branches[j].deriv(x)

        alpha = 0.5 if alpha is None else alpha
    elif kind == "power":
        delta = float(params.get("delta", 1.0))
        scale = float(params.get("scale", 0.5))
        params = {"delta": delta, "scale": scale}

        def fn(j, x):
            return scale * np.asarray(x, dtype=float) ** delta

        # increasing on (0,1): per-branch sup sits at the right endpoint
        sups = np.array([scale * b.hi**delta for b in bmap.branches])
        alpha = min(delta, 0.5) if alpha is None else alpha
    elif kind == "weierstrass":
        terms = int(params.get("terms", 13))
        params = {"terms": terms}

        def fn(j, x):
            return weierstrass_profile(x, terms=terms)

        alpha = 0.5 if alpha is None else alpha
    elif kind == "tabulated":
        samples = np.asarray(params["samples"], dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise ConfigurationError("tabulated weight needs a 1-d sample array")
        params = {"samples": samples}
        if alpha is None or p is None:
            raise ConfigurationError("tabulated weight needs explicit alpha and p")

        def fn(j, x):
            i = np.clip((np.asarray(x, dtype=float) * samples.size).astype(int),
                        0, samples.size - 1)
            return samples[i]

    else:
        raise ConfigurationError(f"unknown weight kind {kind!r}")

    if bmap.tail_length > 0.0:
        tail = _cascade_tails(kind, bmap, params) if bmap.kind == "cascade" else None
        if tail_sup_override is not None:
            mass = float("inf") if tail_mass_override is None else tail_mass_override
            tail = TailDescriptor(float(tail_sup_override), float(mass))
    else:
        tail = TailDescriptor(0.0, 0.0)

    return WeightSpec(kind=kind, alpha=float(alpha), p=float(4.0 if p is None else p),
                      branch_fn=fn, branch_sups=sups, tail=tail, params=params)


# ---------------------------------------------------------------------------
# assumption checks


@dataclass(eq=False)
class HypothesisReport:
    """Numeric record of the standing assumptions with pass/fail flags.

    Sampled sup values are lower bounds of the true sups (closure sampling
    with geometric refinement toward branch endpoints), so the pass flags
    certify failures, not successes, of boundedness conditions.
    """

    alpha: float
    p: float
    expansion_inf: float
    holder_per_branch: np.ndarray
    holder_uniform: float
    sup_per_branch: np.ndarray
    sup_series_listed: float
    tail_sup_sum: float
    sup_series_total: float
    fprime_lp: float
    xi_fprime_sup: float
    tail_mass_bound: float
    checks: dict
    passed: bool
    samples_per_branch: int
    refinement_depth: int

    def failures(self):
        return [name for name, ok in self.checks.items() if not ok]

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "p": self.p,
            "expansion_inf": self.expansion_inf,
            "holder_uniform": self.holder_uniform,
            "sup_series_listed": self.sup_series_listed,
            "tail_sup_sum": self.tail_sup_sum,
            "sup_series_total": self.sup_series_total,
            "fprime_lp": self.fprime_lp,
            "xi_fprime_sup": self.xi_fprime_sup,
            "tail_mass_bound": self.tail_mass_bound,
            "checks": {k: bool(v) for k, v in self.checks.items()},
            "passed": bool(self.passed),
            "samples_per_branch": self.samples_per_branch,
            "refinement_depth": self.refinement_depth,
        }


def _branch_samples(b: Branch, count, depth, closure=True):
    """Uniform interior samples plus geometric refinement toward both ends."""
    base = b.lo + (np.arange(count) + 0.5) * b.length / count
    offs = b.length * 0.5 ** np.arange(1, depth + 1)
    pts = [base, b.lo + offs, b.hi - offs]
    if closure:
        pts.append(np.array([b.lo, b.hi]))
    return np.unique(np.concatenate(pts))


def check_hypotheses(bmap: BranchedMap, weight: WeightSpec,
                     samples_per_branch: int = 64,
                     refinement_depth: int = 20) -> HypothesisReport:
    """Sample-based validation of expansion, weight summability and Lp bounds."""
    if samples_per_branch < 8:
        raise ValueError("samples_per_branch must be >= 8")
    if bmap.tail_length > 0.0 and weight.tail is None:
        raise ConfigurationError(
            "truncated map requires a tail descriptor on the weight"
        )

    n = bmap.n_branches
    sup_xi = np.empty(n)
    holder = np.zeros(n)
    expansion = np.inf
    xi_fprime = 0.0
    for j, b in enumerate(bmap.branches):
        x = _branch_samples(b, samples_per_branch, refinement_depth)
        xi = np.abs(weight.values(j, x))
        df = b.deriv(x)
        expansion = min(expansion, float(np.min(df)))
        sup_xi[j] = float(np.max(xi))
        xi_fprime = max(xi_fprime, float(np.max(xi * np.abs(df))))
        # Holder quotient over pairs at dyadic index separations
        vals = weight.values(j, x)
        for stride in 2 ** np.arange(0, int(np.log2(max(x.size - 1, 1))) + 1):
            dx = x[stride:] - x[:-stride]
            quot = np.abs(vals[stride:] - vals[:-stride]) / dx**weight.alpha
            holder[j] = max(holder[j], float(np.max(quot)))
        if weight.branch_sups is not None:
            sup_xi[j] = float(weight.branch_sups[j])

    listed = float(np.sum(sup_xi))
    tail = weight.tail or TailDescriptor(0.0, 0.0)
    total = listed + tail.sup_sum

    def fprime(x):
        idx = bmap.locate(x)
        out = np.full(x.shape, np.nan)
        for j in np.unique(idx[idx >= 0]):
            sel = idx == j
            out[sel] = bmap.branches[j].deriv(x[sel])
        # omitted tail: use the declared slope bound (zero-measure effect)
        out[idx < 0] = bmap.tail_slope_bound if bmap.tail_length > 0 else 0.0
        return out

    fprime_lp = lp_norm_fn(fprime, weight.p,
                           singular_points=bmap.singular_points(),
                           cells=1024, depth=refinement_depth)

    checks = {
        "expansion > 1": expansion > 1.0,
        "p > 1/alpha": weight.p > 1.0 / weight.alpha,
        "sum sup |xi| < inf": np.isfinite(total),
        "|f'|_Lp < inf": np.isfinite(fprime_lp),
        "|xi f'|_inf < inf": np.isfinite(xi_fprime),
    }
    return HypothesisReport(
        alpha=weight.alpha, p=weight.p, expansion_inf=expansion,
        holder_per_branch=holder, holder_uniform=float(np.max(holder)),
        sup_per_branch=sup_xi, sup_series_listed=listed,
        tail_sup_sum=tail.sup_sum, sup_series_total=total,
        fprime_lp=fprime_lp, xi_fprime_sup=xi_fprime,
        tail_mass_bound=tail.mass_bound,
        checks=checks, passed=all(checks.values()),
        samples_per_branch=samples_per_branch, refinement_depth=refinement_depth,
    )


# ---------------------------------------------------------------------------
# cocycles


def cocycle(bmap: BranchedMap, weight: WeightSpec, n: int, x: float):
    """(weight product, derivative product) along the first n iterates."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    xi_prod = 1.0
    df_prod = 1.0
    cur = float(x)
    for step in range(n):
        idx = int(bmap.locate(np.array([cur]))[0])
        if idx < 0:
            raise OrbitSingularityError(x, step)
        b = bmap.branches[idx]
        xi_prod = xi_prod * complex(weight.values(idx, np.array([cur]))[0])
        df_prod = df_prod * float(b.deriv(np.array([cur]))[0])
        cur = float(b.fwd(np.array([cur]))[0])
    if isinstance(xi_prod, complex) and xi_prod.imag == 0.0:
        xi_prod = xi_prod.real
    return xi_prod, df_prod


@dataclass(eq=False)
class CocycleBounds:
    """Per-n sampled sups of the two cocycles and their n-th roots.

    The sups are sampled (lower bounds of the true sups), so lam1/lam2 are
    estimates, certified only up to the sampling of the sup; in exact
    arithmetic every per-n sup root upper-bounds the limit rate by
    submultiplicativity.
    """

    n: np.ndarray
    sup1: np.ndarray
    sup2: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    grid: int
    refinement_depth: int
    points_used: int
    points_masked_final: int
    certified: bool = False


def _sample_points(bmap: BranchedMap, grid: int, depth: int):
    pts = [(np.arange(grid) + _IRR) / grid]
    for b in bmap.branches:
        offs = b.length * _IRR * 0.5 ** np.arange(1, depth + 1)
        pts.append(b.lo + offs)
        pts.append(b.hi - offs)
    x = np.unique(np.concatenate(pts))
    return x[(x > 0.0) & (x < 1.0)]


def lambda_estimates(bmap: BranchedMap, weight: WeightSpec, n_max: int,
                     grid: int = 4096, refinement_depth: int = 20) -> CocycleBounds:
    """Sampled growth rates of |xi-cocycle| and |xi-cocycle * (f^n)'|."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    x = _sample_points(bmap, grid, refinement_depth)
    idx = bmap.locate(x)
    alive = idx >= 0
    x = x[alive]
    idx = idx[alive]
    if x.size == 0:
        raise InsufficientSamplingError("no sample point lies inside a listed branch")

    xi_prod = np.ones(x.size)
    df_prod = np.ones(x.size)
    alive = np.ones(x.size, dtype=bool)
    sup1 = np.empty(n_max)
    sup2 = np.empty(n_max)
    for step in range(n_max):
        if not np.any(alive):
            raise InsufficientSamplingError(
                f"all sampled orbits singular before iterate {step + 1}"
            )
        sub = np.nonzero(alive)[0]
        for j in np.unique(idx[sub]):
            sel = sub[idx[sub] == j]
            b = bmap.branches[j]
            xi_prod[sel] *= np.abs(weight.values(j, x[sel]))
            df_prod[sel] *= np.abs(b.deriv(x[sel]))
            x[sel] = b.fwd(x[sel])
        sup1[step] = float(np.max(xi_prod[sub]))
        sup2[step] = float(np.max(xi_prod[sub] * df_prod[sub]))
        nxt = bmap.locate(x[sub])
        idx[sub] = nxt
        alive[sub] = nxt >= 0

    n = np.arange(1, n_max + 1, dtype=float)
    with np.errstate(divide="ignore"):
        lam1 = np.exp(np.log(sup1) / n)
        lam2 = np.exp(np.log(sup2) / n)
    return CocycleBounds(n=n.astype(int), sup1=sup1, sup2=sup2, lam1=lam1, lam2=lam2,
                         grid=grid, refinement_depth=refinement_depth,
                         points_used=x.size,
                         points_masked_final=int(np.sum(~alive)))
