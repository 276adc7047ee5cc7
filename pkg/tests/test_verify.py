"""Tests for the quadrature verification cases and the fitting diagnostics."""

import math

import numpy as np
import pytest

from boltzdv.errors import UsageError
from boltzdv.grid import GridSpec, make_field
from boltzdv.kernel import KernelSpec, angular_b, cancellation_constant
from boltzdv.verify import (
    CASE_IDS,
    VerificationReport,
    fit_decay,
    hypoellipticity_bound,
    hypoellipticity_diagnostic,
    verify_identity,
)

KERNEL = KernelSpec(gamma=0.0, s=0.25, eta=0.1, theta_min=1e-3)


# --------------------------------------------------------------------------
# report type
# --------------------------------------------------------------------------


def test_report_consistency_enforced():
    with pytest.raises(UsageError):
        VerificationReport(case_id="X", resolution={}, measured_error=2.0,
                           tolerance=1.0, passed=True)
    with pytest.raises(UsageError):
        VerificationReport(case_id="X", resolution={}, measured_error=0.5,
                           tolerance=1.0, passed=False)
    rep = VerificationReport(case_id="X", resolution={"n": 1},
                             measured_error=0.5, tolerance=1.0, passed=True)
    assert rep.to_dict()["passed"] is True
    assert "empirical_constant" not in rep.to_dict()


def test_reports_are_byte_stable_under_fixed_seed():
    a = verify_identity("CUTOFF_LIPSCHITZ", kernel=KERNEL)
    b = verify_identity("CUTOFF_LIPSCHITZ", kernel=KERNEL)
    assert a.to_json() == b.to_json()


def test_unknown_case_and_unknown_resolution_key_are_usage_errors():
    with pytest.raises(UsageError):
        verify_identity("NO_SUCH_CASE", kernel=KERNEL)
    with pytest.raises(UsageError):
        verify_identity("REMARK35", kernel=KERNEL,
                        resolution={"bogus_key": 3})


def test_case_registry_is_complete():
    assert set(CASE_IDS) == {
        "REMARK35", "CUTOFF_LIPSCHITZ", "CHANGE_VARS_REGULAR",
        "CHANGE_VARS_SINGULAR", "CANCELLATION", "PREPOST",
        "VPRIME_EXPANSION", "LALPHA_DISSIPATIVE", "BETA_BOUNDS",
        "COERCIVITY",
    }


# --------------------------------------------------------------------------
# pointwise inequality cases
# --------------------------------------------------------------------------


def test_angular_margin_arithmetic_spot_check():
    # at exponent 10 and the right endpoint the margin is 1/8 - 1/16 = 1/16
    val = 0.25 * math.sin(math.pi / 4) ** 2 - math.sin(math.pi / 4) ** 8
    assert val == pytest.approx(1.0 / 16.0, abs=1e-15)
    assert val > 0.0


def test_remark35_case_passes_pointwise():
    rep = verify_identity("REMARK35", kernel=KERNEL)
    assert rep.passed
    assert rep.measured_error == 0.0
    # the lower envelope is sharp at the right endpoint: ratio reaches 1
    assert rep.empirical_constant == pytest.approx(1.0, abs=1e-9)


def test_cutoff_lipschitz_zero_violations():
    rep = verify_identity("CUTOFF_LIPSCHITZ", kernel=KERNEL)
    assert rep.passed
    assert rep.measured_error <= 0.0          # no violation of the 13 bound
    assert 0.0 < rep.empirical_constant <= 13.0


def test_beta_bounds_sandwich():
    rep = verify_identity("BETA_BOUNDS", kernel=KERNEL)
    assert rep.passed
    assert rep.measured_error <= 1e-12
    assert rep.empirical_constant >= 1.0 - 1e-9


# --------------------------------------------------------------------------
# integral identity cases
# --------------------------------------------------------------------------


@pytest.mark.parametrize("gamma", [0.0, -1.0])
@pytest.mark.parametrize("case_id",
                         ["CHANGE_VARS_REGULAR", "CHANGE_VARS_SINGULAR"])
def test_change_of_variables_identities(case_id, gamma):
    kernel = KernelSpec(gamma=gamma, s=0.25, eta=0.1, theta_min=1e-3)
    rep = verify_identity(case_id, kernel=kernel)
    assert rep.passed
    assert rep.measured_error <= 5e-2
    # empirical convergence order >= 1 at refinement factor 2
    assert rep.refinement_ratio >= 2.0


def test_cancellation_two_path_agreement():
    rep = verify_identity("CANCELLATION", kernel=KERNEL)
    assert rep.passed
    assert rep.measured_error <= 5e-2
    assert rep.refinement_ratio >= 1.5
    # reduced angular constant, frozen from a 30-digit evaluation of the
    # gain/loss difference integral
    assert rep.empirical_constant == pytest.approx(4.1438109345142492,
                                                   rel=1e-10)
    assert rep.resolution["n_v"] == 16
    assert rep.resolution["n_theta"] == 64


def test_cancellation_constant_other_parameters():
    assert cancellation_constant(
        KernelSpec(gamma=-1.0, s=0.25, eta=0.1, theta_min=1e-3)
    ) == pytest.approx(2.5308852523658249, rel=1e-10)
    assert cancellation_constant(
        KernelSpec(gamma=0.0, s=0.75, eta=0.1, theta_min=1e-3)
    ) == pytest.approx(5.4514510483315248, rel=1e-10)


def test_prepost_exchange_symmetry():
    rep = verify_identity("PREPOST", kernel=KERNEL)
    assert rep.passed
    assert rep.measured_error <= 5e-2


# --------------------------------------------------------------------------
# sampled-supremum inequality cases
# --------------------------------------------------------------------------


def test_vprime_expansion_constant_stable():
    rep = verify_identity("VPRIME_EXPANSION", kernel=KERNEL)
    assert rep.passed
    assert rep.measured_error <= 0.1          # drift under sample doubling
    assert np.isfinite(rep.empirical_constant)
    assert rep.empirical_constant > 0.0


def test_weighted_regularizer_dissipation():
    rep = verify_identity("LALPHA_DISSIPATIVE", kernel=KERNEL)
    assert rep.passed
    assert rep.measured_error <= 0.1
    assert rep.empirical_constant > 0.0


def test_weighted_regularizer_rejects_bad_exponents():
    with pytest.raises(UsageError):
        verify_identity("LALPHA_DISSIPATIVE", kernel=KERNEL,
                        resolution={"alpha": -1.0})
    with pytest.raises(UsageError):
        verify_identity("LALPHA_DISSIPATIVE", kernel=KERNEL,
                        resolution={"l": 7.0})


def test_coercivity_shape_fit():
    rep = verify_identity("COERCIVITY", kernel=KERNEL)
    assert rep.passed
    # measured_error is minus the fitted dissipation coefficient: c > 0
    assert rep.measured_error < 0.0
    # the reported constant is the angular coercivity weight
    theta = np.linspace(KERNEL.theta_min, math.pi / 2, 400_001)
    integrand = angular_b(theta, KERNEL) * np.sin(theta) \
        * np.sin(0.5 * theta) ** 2
    direct = 0.5 * 2.0 * math.pi * np.trapezoid(integrand, theta)
    assert rep.empirical_constant == pytest.approx(direct, rel=1e-6)


# --------------------------------------------------------------------------
# decay fitting
# --------------------------------------------------------------------------


def test_fit_decay_exponential_synthetic():
    t = np.linspace(0.5, 8.0, 40)
    series = [(float(ti), math.exp(-2.0 * ti)) for ti in t]
    rate, r2 = fit_decay(series, "exponential")
    assert rate == pytest.approx(2.0, abs=1e-6)
    assert r2 > 1.0 - 1e-9


def test_fit_decay_algebraic_synthetic():
    t = np.linspace(0.5, 20.0, 60)
    series = [(float(ti), (1.0 + ti) ** -3.0) for ti in t]
    rate, r2 = fit_decay(series, "algebraic")
    assert rate == pytest.approx(3.0, abs=1e-6)
    assert r2 > 1.0 - 1e-9


def test_fit_decay_window_bounds():
    t = np.linspace(0.0, 10.0, 50)
    series = [(float(ti), math.exp(-ti)) for ti in t]
    rate, _ = fit_decay(series, "exponential", t_min=2.0, t_max=9.0)
    assert rate == pytest.approx(1.0, abs=1e-6)


def test_fit_decay_usage_errors():
    good = [(float(i), math.exp(-float(i))) for i in range(12)]
    with pytest.raises(UsageError):
        fit_decay(good, "geometric")
    with pytest.raises(UsageError):
        fit_decay(good[:5], "exponential")
    with pytest.raises(UsageError):
        fit_decay(good, "exponential", t_min=8.0)   # leaves < 10 samples
    bad = list(good)
    bad[3] = (3.0, 0.0)
    with pytest.raises(UsageError):
        fit_decay(bad, "exponential")


# --------------------------------------------------------------------------
# spatial-regularity diagnostic
# --------------------------------------------------------------------------


def _trajectory(n_x, n_t=9, x_dependent=True, seed=0):
    grid = GridSpec(R=4.0, n_v=8, n_x=n_x)
    rng = np.random.default_rng(seed)
    base = rng.random((1, 8, 8, 8))
    out = []
    for i in range(n_t):
        vals = np.broadcast_to(base * (1.0 + 0.1 * i),
                               (n_x, 8, 8, 8)).copy()
        if x_dependent and n_x > 1:
            vals *= (1.0 + 0.3 * np.cos(
                2.0 * math.pi * np.arange(n_x) / n_x))[:, None, None, None]
        out.append((0.25 * i, make_field(grid, vals)))
    return grid, out


def test_diagnostic_rejects_homogeneous_trajectory():
    _, traj = _trajectory(n_x=1)
    with pytest.raises(UsageError):
        hypoellipticity_diagnostic(traj, 0.03)


def test_diagnostic_enforces_order_cap():
    _, traj = _trajectory(n_x=4)
    with pytest.raises(UsageError):
        hypoellipticity_diagnostic(traj, 0.05, s=0.25)  # cap is ~0.0385
    with pytest.raises(UsageError):
        hypoellipticity_diagnostic(traj, -0.01)


def test_diagnostic_x_independent_field_is_plain_mass_integral():
    grid, traj = _trajectory(n_x=4, x_dependent=False)
    meas = grid.cell_measure()
    vals = np.array([float((f.values ** 2).sum()) * meas for _, f in traj])
    dt = 0.25
    plain = dt * float(vals.sum() - 0.5 * (vals[0] + vals[-1]))
    got = hypoellipticity_diagnostic(traj, 0.03, s=0.25)
    assert got == pytest.approx(plain, rel=1e-13)


def test_diagnostic_order_zero_is_plain_l2_integral():
    grid, traj = _trajectory(n_x=4, x_dependent=True)
    meas = grid.cell_measure()
    vals = np.array([float((f.values ** 2).sum()) * meas for _, f in traj])
    dt = 0.25
    plain = dt * float(vals.sum() - 0.5 * (vals[0] + vals[-1]))
    got = hypoellipticity_diagnostic(traj, 0.0)
    assert got == pytest.approx(plain, abs=1e-12 * max(plain, 1.0))


def test_diagnostic_positive_order_sees_spatial_oscillation():
    _, traj = _trajectory(n_x=4, x_dependent=True)
    flat = hypoellipticity_diagnostic(traj, 0.0)
    smoothed = hypoellipticity_diagnostic(traj, 0.03, s=0.25)
    assert smoothed > flat


def test_envelope_bound_fit():
    _, traj = _trajectory(n_x=4, x_dependent=True)
    out = hypoellipticity_bound(traj, 0.03, l=8.0, s=0.25)
    assert set(out) == {"integral", "initial_weighted_mass", "bound_constant"}
    assert out["integral"] > 0.0
    assert out["initial_weighted_mass"] > 0.0
    c = out["bound_constant"]
    assert c >= 0.0
    # the fitted constant makes the envelope hold at the final snapshot
    t_final = traj[-1][0] - traj[0][0]
    envelope = c * math.exp(c * t_final) * (out["initial_weighted_mass"]
                                            + t_final)
    assert envelope >= 0.999 * out["integral"]
