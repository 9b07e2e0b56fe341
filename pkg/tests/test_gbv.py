import numpy as np
import pytest

from gbvlab.densities import layered_observables, random_step_densities
from gbvlab.errors import ConfigurationError, DegenerateInputError, FamilyBoundError
from gbvlab.gbv import (
    adapt_two_piece,
    build_family,
    clamp_family,
    dyadic_grid,
    family_value,
    gbv_upper,
    layer_decompose,
    pair,
)
from gbvlab.maps import weierstrass_profile
from gbvlab.measures import GridDensity, GridFunction, bv_norm, lp_norm, tv_norm


def test_endpoint_beta_one_constant_family():
    # at beta = 1 the constant family witnesses the variation norm
    rng = np.random.default_rng(0)
    d = GridDensity(rng.standard_normal(32))
    est = family_value(build_family(d, 1.0, dyadic_grid(12), "constant"), d)
    assert est.value == pytest.approx(bv_norm(d), rel=1e-13)


def test_endpoint_beta_zero_zero_family():
    rng = np.random.default_rng(1)
    d = GridDensity(rng.standard_normal(32))
    est = family_value(build_family(d, 0.0, dyadic_grid(12), "zero"), d)
    assert est.value == pytest.approx(tv_norm(d), rel=1e-13)


def test_two_piece_family_gives_bv_at_half():
    rng = np.random.default_rng(2)
    d = GridDensity(rng.standard_normal(32))
    est = family_value(build_family(d, 0.5, dyadic_grid(12), "two-piece"), d)
    assert est.value == pytest.approx(bv_norm(d), rel=1e-13)


def test_gbv_upper_sandwich_seeded():
    rng = np.random.default_rng(404)
    for d in random_step_densities(rng, 64, 30, signed=True):
        for beta in (0.25, 0.5, 0.75):
            est = gbv_upper(d, beta)
            assert tv_norm(d) <= est.value + 1e-12
            assert est.value <= bv_norm(d) + 1e-9


def test_gbv_upper_homogeneity():
    rng = np.random.default_rng(3)
    d = GridDensity(rng.standard_normal(48))
    base = gbv_upper(d, 0.4, n_k=8)
    scaled = gbv_upper(GridDensity(-3.0 * d.values), 0.4, n_k=8)
    assert scaled.value == pytest.approx(3.0 * base.value, rel=1e-12)


def test_gbv_upper_breakdown_structure():
    d = GridDensity([2.0, 0.0])
    est = gbv_upper(d, 0.5, n_k=4)
    assert est.breakdown.shape == (9, 3)
    terms = est.breakdown[:, 1] + est.breakdown[:, 2]
    assert est.value == pytest.approx(np.max(terms), rel=1e-15)


def test_monotone_two_piece_adaptation():
    # transforming the beta-optimal family by the cutoff can only shrink the
    # estimate at a smaller exponent
    rng = np.random.default_rng(5)
    for _ in range(10):
        d = GridDensity(rng.standard_normal(32))
        beta, beta_prime = 0.75, 0.3
        est = gbv_upper(d, beta, n_k=8)
        adapted = family_value(adapt_two_piece(est.family, beta_prime), d)
        assert adapted.value <= est.value + 1e-10


def test_gbv_upper_rejects_bad_arguments():
    d = GridDensity([1.0])
    with pytest.raises(ValueError):
        gbv_upper(d, 1.2)
    with pytest.raises(ConfigurationError):
        gbv_upper(d, 0.5, strategies=())
    with pytest.raises(ConfigurationError):
        build_family(d, 0.5, dyadic_grid(2), "nope")


# ---------------------------------------------------------------------------
# clamped families


def test_clamp_constant_family():
    rng = np.random.default_rng(6)
    d = GridDensity(rng.standard_normal(16))
    fam = build_family(d, 1.0, dyadic_grid(6), "constant")
    bound = family_value(fam, d).value
    est = clamp_family(fam, d, 1.0, bound)
    assert est.value == pytest.approx(bv_norm(d), rel=1e-12)
    assert est.value <= 2 * bound + 1e-9


def test_clamp_two_piece_family():
    rng = np.random.default_rng(7)
    d = GridDensity(rng.standard_normal(16))
    fam = build_family(d, 0.5, dyadic_grid(6), "two-piece")
    bound = family_value(fam, d).value
    est = clamp_family(fam, d, 1.0, bound)
    assert est.value <= 2 * bound + 1e-9


def test_clamp_mollified_weierstrass():
    d = GridDensity.from_callable(weierstrass_profile, 512)
    fam = build_family(d, 0.5, dyadic_grid(6), "mollified")
    bound = family_value(fam, d).value
    for k_star in (0.25, 1.0, 4.0):
        est = clamp_family(fam, d, k_star, bound)
        assert est.value <= 2 * bound + 1e-9


def test_clamp_seeded_cases():
    rng = np.random.default_rng(505)
    ks = dyadic_grid(6)
    for _ in range(50):
        d = random_step_densities(rng, 32, 1, signed=True)[0]
        beta = float(rng.choice([0.25, 0.5, 0.75]))
        strategy = str(rng.choice(["mollified", "two-piece", "constant"]))
        fam = build_family(d, beta, ks, strategy)
        bound = family_value(fam, d).value
        k_star = float(rng.choice(ks))
        est = clamp_family(fam, d, k_star, bound)
        assert est.value <= 2 * bound + 1e-9


def test_clamp_precondition_violation_names_k():
    d = GridDensity([2.0, 0.0])
    fam = build_family(d, 0.5, dyadic_grid(4), "constant")
    terms = family_value(fam, d).breakdown
    too_small = 0.5 * np.max(terms[:, 1] + terms[:, 2])
    with pytest.raises(FamilyBoundError) as err:
        clamp_family(fam, d, 1.0, too_small)
    assert err.value.k in fam.ks


def test_clamp_requires_grid_k():
    d = GridDensity([1.0, 1.0])
    fam = build_family(d, 0.5, dyadic_grid(3), "constant")
    with pytest.raises(ValueError):
        clamp_family(fam, d, 0.3, 100.0)


# ---------------------------------------------------------------------------
# layer decomposition


def test_layers_constant_function():
    lay = layer_decompose(GridFunction.constant(3.0, 50), 2.0)
    assert len(lay.layers) == 1
    assert lay.layers[0].size == 50
    assert lay.measures()[0] == 1.0


def test_layers_partition_and_dyadic_bound():
    for p in (1.5, 2.0, 4.0):
        rng = np.random.default_rng(606)
        obs, profiles = layered_observables(rng, 4096, 10, p)
        for g, prof in zip(obs, profiles):
            lay = layer_decompose(g, p)
            counts = [idx.size for idx in lay.layers]
            assert sum(counts) == g.cells
            assert sorted(np.concatenate(lay.layers)) == list(range(g.cells))
            assert counts[1:] == prof  # designed profile recovered exactly
            for n, m in enumerate(lay.measures()):
                if n >= 1:
                    assert m <= 2.0 ** (-n * p)


def test_layers_chebyshev_bound_arbitrary_observables():
    # the one-threshold-coarser bound holds for any observable
    rng = np.random.default_rng(8)
    for p in (1.5, 2.0, 4.0):
        for _ in range(10):
            g = GridFunction(rng.standard_normal(512))
            lay = layer_decompose(g, p)
            for n, m in enumerate(lay.measures()):
                if n >= 1:
                    assert m <= 2.0 ** (-(n - 1) * p) + 1e-15


def test_layers_reject_degenerate():
    with pytest.raises(DegenerateInputError):
        layer_decompose(GridFunction.constant(0.0, 8), 2.0)
    with pytest.raises(ValueError):
        layer_decompose(GridFunction.constant(1.0, 8), 1.0)


# ---------------------------------------------------------------------------
# pairing


def test_pair_examples():
    assert pair(GridDensity.constant(1.0, 16), GridFunction.constant(2.5, 16)) == pytest.approx(2.5)
    assert pair(GridDensity([2.0, 0.0]), GridFunction([1.0, 3.0])) == pytest.approx(1.0)


def test_pair_resampling():
    d = GridDensity([2.0, 0.0])
    g = GridFunction([1.0, 1.0, 3.0, 3.0])
    assert pair(d, g) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pair(d, GridFunction([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        pair(d, g, allow_resample=False)


def test_pair_bounded_by_fitted_constant():
    # |mu(eta)| <= C |eta|_p * gbv(mu) across an ensemble, p * beta > 1
    rng = np.random.default_rng(9)
    p, beta = 4.0, 0.5
    ratios = []
    for _ in range(20):
        d = random_step_densities(rng, 64, 1, signed=True)[0]
        g = GridFunction(rng.standard_normal(64))
        val = abs(pair(d, g))
        ratios.append(val / (lp_norm(g, p) * gbv_upper(d, beta, n_k=8).value))
    fitted = max(ratios)
    assert np.isfinite(fitted)
    assert all(r <= fitted for r in ratios)
    assert fitted < 10.0
