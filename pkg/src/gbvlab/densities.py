"""Seeded generators of grid densities and observables for experiments."""

from __future__ import annotations

import numpy as np

from .maps import weierstrass_profile
from .measures import GridDensity, GridFunction, mollify

__all__ = [
    "builtin_density",
    "random_step_densities",
    "smooth_bv_densities",
    "layered_observables",
]


def builtin_density(name: str, cells: int, seed: int = 0, **params) -> GridDensity:
    """Named densities for the command line: constant, step, hat,
    weierstrass, random-steps."""
    name = name.replace("_", "-")
    if name == "constant":
        return GridDensity.constant(float(params.get("value", 1.0)), cells)
    if name == "step":
        base = np.asarray(params.get("values", [2.0, 0.0]), dtype=float)
        if cells % base.size:
            raise ValueError(f"cells={cells} incompatible with step pattern {base.size}")
        return GridDensity(np.repeat(base, cells // base.size))
    if name == "hat":
        x = (np.arange(cells) + 0.5) / cells
        return GridDensity(1.0 - np.abs(2.0 * x - 1.0))
    if name == "weierstrass":
        return GridDensity.from_callable(weierstrass_profile, cells)
    if name == "random-steps":
        rng = np.random.default_rng(seed)
        return random_step_densities(rng, cells, 1)[0]
    raise ValueError(f"unknown density name {name!r}")


def random_step_densities(rng, cells: int, count: int, pieces: int = 8,
                          signed: bool = False):
    """Random piecewise-constant densities with a few jumps each."""
    out = []
    for _ in range(count):
        edges = np.sort(rng.integers(1, cells, size=pieces - 1))
        levels = rng.uniform(0.2, 2.0, size=pieces)
        if signed:
            levels *= rng.choice([-1.0, 1.0], size=pieces)
        v = np.empty(cells)
        prev = 0
        for e, lev in zip(list(edges) + [cells], levels):
            v[prev:e] = lev
            prev = e
        out.append(GridDensity(v))
    return out


def smooth_bv_densities(rng, cells: int, count: int, smoothing: float = 0.05):
    """Mollified random steps: bounded variation close to the mass norm."""
    return [mollify(d, smoothing)
            for d in random_step_densities(rng, cells, count, signed=False)]


def layered_observables(rng, cells: int, count: int, p: float):
    """Observables with a designed dyadic super-level profile.

    Layer n of the decomposition by thresholds 2^n * |g|_p receives a known
    cell count below half the dyadic budget cells * 2^(-n p); layer values
    sit at c * 2^(n-1) in units of the norm, and the norm solves in closed
    form because the non-layer cells are norm-independent.  Returns
    (observables, layer count profiles) so the decomposition can be checked
    against ground truth.
    """
    depth = int(6.0 / p)
    if depth < 1 or cells * 2.0**(-p) < 8:
        raise ValueError(f"grid too coarse for p={p}")
    out = []
    profiles = []
    for _ in range(count):
        u = np.empty(depth)
        c = np.empty(depth)
        u[0] = rng.uniform(0.30, 0.42)
        c[0] = rng.uniform(1.85, 1.95)
        if depth > 1:
            u[1:] = rng.uniform(0.08, 0.18, size=depth - 1)
            c[1:] = rng.uniform(1.2, 1.9, size=depth - 1)
        ks = np.floor(u * cells * 2.0 ** (-p * np.arange(1, depth + 1))).astype(int)
        # per-layer shares of the p-th power mean carried by the layer cells
        a = float(np.sum(ks * (c * 2.0 ** np.arange(depth)) ** p) / cells)
        n_small = cells // 20
        n_flat = cells - n_small - int(np.sum(ks))
        small = rng.uniform(0.02, 0.2, size=n_small)
        flat = rng.uniform(0.97, 1.0, size=n_flat)
        norm = (float(np.sum(small**p) + np.sum(flat**p)) / (cells * (1.0 - a))) ** (1.0 / p)
        layered = np.concatenate([np.full(k, cv * 2.0**n_ * norm)
                                  for n_, (k, cv) in enumerate(zip(ks, c))])
        v = np.concatenate([layered, flat, small])
        rng.shuffle(v)
        amp = rng.uniform(0.5, 2.0)
        sign = rng.choice([-1.0, 1.0], size=cells)
        out.append(GridFunction(amp * sign * v))
        profiles.append(ks.tolist())
    return out, profiles
