import numpy as np
import pytest

from gbvlab.densities import random_step_densities
from gbvlab.errors import ConfigurationError
from gbvlab.maps import cascade_map, doubling_map, lambda_estimates, make_weight
from gbvlab.measures import GridDensity
from gbvlab.spectral import (
    HypothesisRefusalError,
    SolverSettings,
    lambda_n_sequence,
    leading_spectrum,
    ly_diagnostic,
    make_report,
    radius_bounds,
)
from gbvlab.transfer import TransferSystem, ulam_matrix


@pytest.fixture(scope="module")
def pushforward():
    dm = doubling_map()
    return TransferSystem(dm, make_weight("inverse-derivative", dm))


def test_leading_spectrum_two_cells(pushforward):
    spec = leading_spectrum(ulam_matrix(pushforward, 2), m=2)
    assert np.abs(spec.values[0] - 1.0) <= 1e-14
    assert np.abs(spec.values[1]) <= 1e-14


@pytest.mark.parametrize("cells", [2, 4, 8, 16, 64, 256, 512])
def test_leading_ritz_value_one(pushforward, cells):
    spec = leading_spectrum(ulam_matrix(pushforward, cells), m=min(10, cells),
                            tol=1e-10, max_iter=60, seed=0)
    assert abs(spec.values[0] - 1.0) <= 1e-12
    assert spec.converged[0]


def test_ritz_against_dense_oracle(pushforward):
    for cells in (8, 32, 64):
        mat = ulam_matrix(pushforward, cells)
        spec = leading_spectrum(mat, m=4, seed=0)
        dense = np.linalg.eigvals(mat.matrix)
        dense = dense[np.argsort(-np.abs(dense))]
        assert abs(spec.values[0] - dense[0]) <= 1e-10
        # all Ritz moduli within the dense spectral radius up to tolerance
        assert np.max(np.abs(spec.values)) <= np.max(np.abs(dense)) + 1e-10


def test_ritz_scaling():
    rng = np.random.default_rng(0)
    mat = rng.standard_normal((20, 20))
    base = leading_spectrum(mat, m=5, seed=1)
    # powers of two scale exactly in floating point
    half = leading_spectrum(0.5 * mat, m=5, seed=1)
    assert np.array_equal(half.values, 0.5 * base.values)
    odd = leading_spectrum(0.3 * mat, m=5, seed=1)
    assert np.max(np.abs(odd.values - 0.3 * base.values)) <= 1e-10


def test_leading_spectrum_breakdown_flag(pushforward):
    spec = leading_spectrum(ulam_matrix(pushforward, 16), m=5, seed=0)
    assert spec.breakdown  # the Krylov space of the doubling matrix closes early
    assert np.all(spec.residuals == 0.0)


def test_leading_spectrum_validation(pushforward):
    mat = ulam_matrix(pushforward, 4)
    with pytest.raises(ValueError):
        leading_spectrum(mat, m=0)
    with pytest.raises(ValueError):
        leading_spectrum(mat, m=5)
    with pytest.raises(ValueError):
        leading_spectrum(mat, m=2, tol=0.0)


def test_radius_bounds_examples():
    assert radius_bounds(0.5, 1.0, 0.5) == (1.0, 0.7071067811865476)
    lam1, lam2 = 0.3, 0.8
    assert radius_bounds(lam1, lam2, 1.0) == (lam2, pytest.approx(lam1))
    assert radius_bounds(lam1, lam2, 0.0) == (lam2, pytest.approx(lam2))
    with pytest.raises(ValueError):
        radius_bounds(0.5, 1.0, 1.5)
    with pytest.raises(ValueError):
        radius_bounds(-0.1, 1.0, 0.5)


def test_radius_bounds_monotone_and_loglinear():
    rng = np.random.default_rng(1)
    for _ in range(20):
        lam1, lam2 = rng.uniform(0.1, 2.0, 2)
        beta = rng.uniform(0.0, 1.0)
        _, ess = radius_bounds(lam1, lam2, beta)
        _, ess_up1 = radius_bounds(lam1 * 1.1, lam2, beta)
        _, ess_up2 = radius_bounds(lam1, lam2 * 1.1, beta)
        assert ess_up1 >= ess and ess_up2 >= ess
        assert np.log(ess) == pytest.approx(
            beta * np.log(lam1) + (1 - beta) * np.log(lam2), abs=1e-12)


def test_lambda_n_sequence_closed_form():
    dm = doubling_map()
    w = make_weight("constant", dm, value=0.5)
    rows, bounds = lambda_n_sequence(dm, w, 0.5, 24, grid=512, refinement_depth=10)
    n = rows[:, 0]
    assert np.allclose(rows[:, 1], 10.0 * 2.0 ** (-n / 2), rtol=1e-13)
    # identity between the root and the per-n rate product
    ident = 10.0 ** (1 / n) * bounds.lam1**0.5 * bounds.lam2**0.5
    assert np.max(np.abs(rows[:, 2] - ident)) <= 1e-12
    # base case n = 1
    assert rows[0, 1] == pytest.approx(10.0 * bounds.lam1[0]**0.5 * bounds.lam2[0]**0.5,
                                       rel=1e-13)


# ---------------------------------------------------------------------------
# inequality diagnostics


def test_ly_zero_ensemble():
    dm = doubling_map()
    sysc = TransferSystem(dm, make_weight("constant", dm, value=0.5))
    diag = ly_diagnostic(sysc, 0.5, [GridDensity.zero(32) for _ in range(4)], [1, 2])
    assert np.all(diag.c_fixed == 0.0)
    assert np.all(diag.theta_env == 0.0) and np.all(diag.c_env == 0.0)


def test_ly_stability_across_resampling():
    dm = doubling_map()
    sysc = TransferSystem(dm, make_weight("constant", dm, value=0.5))
    cs = []
    for resample in range(4):
        rng = np.random.default_rng(777 + resample)
        ens = random_step_densities(rng, 128, 16)
        cs.append(ly_diagnostic(sysc, 0.5, ens, [1, 2, 3], n_k=8).c_fixed)
    cs = np.array(cs)
    assert np.all(np.isfinite(cs))
    spread = cs.max(axis=0) - cs.min(axis=0)
    assert np.all(spread <= 0.2 * np.maximum(cs.mean(axis=0), 1e-12))


def test_ly_envelope_covers_members():
    dm = doubling_map()
    sysw = TransferSystem(dm, make_weight("weierstrass", dm))
    rng = np.random.default_rng(8)
    ens = random_step_densities(rng, 64, 12)
    diag = ly_diagnostic(sysw, 0.5, ens, [1, 2], n_k=8)
    assert np.all(diag.slack_max >= -1e-9)
    assert np.all(diag.theta_env >= 0) and np.all(diag.c_env >= 0)


def test_ly_homogeneity_and_determinism():
    dm = doubling_map()
    sysc = TransferSystem(dm, make_weight("constant", dm, value=0.5))
    rng = np.random.default_rng(9)
    ens = random_step_densities(rng, 64, 8)
    d1 = ly_diagnostic(sysc, 0.5, ens, [1, 2])
    d2 = ly_diagnostic(sysc, 0.5, [GridDensity(3.0 * d.values) for d in ens], [1, 2])
    assert np.max(np.abs(d1.c_fixed - d2.c_fixed)) <= 1e-12
    d3 = ly_diagnostic(sysc, 0.5, [GridDensity(d.values.copy()) for d in ens], [1, 2])
    assert np.array_equal(d1.c_fixed, d3.c_fixed)
    assert np.array_equal(d1.theta_env, d3.theta_env)


def test_ly_rejects_empty_ensemble():
    dm = doubling_map()
    sysc = TransferSystem(dm, make_weight("constant", dm, value=0.5))
    with pytest.raises(ConfigurationError):
        ly_diagnostic(sysc, 0.5, [], [1])


# ---------------------------------------------------------------------------
# full reports


def test_report_doubling_pushforward(pushforward):
    rep = make_report(pushforward, beta=0.5, N_list=(16, 128, 512), n_max=12)
    assert rep.rho_bound == pytest.approx(1.0, abs=1e-12)
    assert rep.ess_bound == pytest.approx(np.sqrt(0.5), abs=1e-12)
    for entry in rep.ritz:
        mods = np.abs(entry["spectrum"].values)
        assert entry["classification"][0] == "above"
        assert mods[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(mods[1:] <= 0.5001)
        assert all(c == "below" for c in entry["classification"][1:])


def test_report_quarter_weight():
    dm = doubling_map()
    sysq = TransferSystem(dm, make_weight("constant", dm, value=0.25))
    rep = make_report(sysq, beta=0.5, N_list=(64,), n_max=8)
    assert rep.rho_bound == pytest.approx(0.5, abs=1e-12)
    lead = rep.ritz[0]["spectrum"].values[0]
    assert abs(lead) <= rep.rho_bound + 1e-9
    assert abs(lead - 0.5) <= 1e-10


def test_report_cascade_system():
    cm = cascade_map(40)
    sysc = TransferSystem(cm, make_weight("power", cm, delta=1.0, alpha=0.5, p=4.0))
    rep = make_report(sysc, N_list=(64, 256), n_max=24, grid=2048,
                      refinement_depth=28)
    assert rep.beta == 0.5  # defaults to the declared Holder exponent
    assert abs(rep.ess_bound - np.sqrt(0.5)) / np.sqrt(0.5) <= 0.02
    bounds = lambda_estimates(cm, sysc.weight, 24, grid=2048, refinement_depth=28)
    allowance = float(np.min(bounds.lam2)) + 0.05
    for entry in rep.ritz:
        spec = entry["spectrum"]
        assert np.all(np.abs(spec.values[spec.converged]) <= allowance)


def test_report_refuses_failed_hypotheses():
    dm = doubling_map()
    bad = TransferSystem(dm, make_weight("constant", dm, value=0.5, alpha=0.5, p=1.5))
    with pytest.raises(HypothesisRefusalError) as err:
        make_report(bad, N_list=(16,), n_max=4)
    assert any("p > 1/alpha" in f for f in err.value.failures)
    rep = make_report(bad, N_list=(16,), n_max=4, force=True)
    assert rep.forced


def test_report_warns_on_beta_override(pushforward):
    with pytest.warns(UserWarning):
        rep = make_report(pushforward, beta=0.9, N_list=(16,), n_max=4)
    assert rep.beta == 0.9 and rep.beta_overrides_alpha


def test_report_threading_identical(pushforward):
    rep1 = make_report(pushforward, N_list=(16, 32, 64), n_max=6, threads=1)
    rep4 = make_report(pushforward, N_list=(16, 32, 64), n_max=6, threads=4)
    assert rep1.cocycle_csv() == rep4.cocycle_csv()
    assert rep1.ritz_csv() == rep4.ritz_csv()


def test_report_serialization_round_trip(pushforward):
    rep = make_report(pushforward, N_list=(16,), n_max=4)
    payload = rep.to_dict()
    assert payload["rho_bound"] == rep.rho_bound
    csv = rep.cocycle_csv()
    assert csv.splitlines()[0] == "n,lambda1_hat,lambda2_hat,lambda_n,lambda_n_root"
    ritz = rep.ritz_csv()
    assert ritz.splitlines()[0] == "N,ritz_index,re,im,modulus,classification"
