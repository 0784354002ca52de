import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twophase import (
    AuxTransform,
    DesignSpec,
    EstimatorId,
    alpha_opt,
    analytic_table,
    efficiency_gap,
    factors,
    k_yz,
    min_mse_combined,
    mse_chain,
    mse_combined,
    mse_two_phase_ratio,
    theta,
    var_ybar,
)
from twophase.mse_theory import ratio_gap
from twophase.population import summary_from_values

PAPER_DESIGN = DesignSpec(25, 10, 7)

# Table 4.1 as published
PAPER_PRE = {
    "ybar": 100.0,
    "rd": 122.5393,
    "t1": 178.8189,
    "t2": 178.8405,
    "t3": 178.8277,
    "t4": 186.3912,
    "t5": 181.6025,
    "t7": 179.9636,
    "tstar": 186.6515,
}


def _summary(**over):
    base = dict(
        N=25, mean_y=183.84, mean_x=185.72, mean_z=151.12, cv_y=0.0546, cv_x=0.0526, cv_z=0.0488,
        rho_xy=0.7108, rho_xz=0.7346, rho_yz=0.6932, sigma_z=7.224, beta1_z=0.002, beta2_z=2.6519,
    )
    base.update(over)
    return summary_from_values(base)


summaries = st.builds(
    lambda my, cy, cx, cz, rxy, ryz: _summary(mean_y=my, cv_y=cy, cv_x=cx, cv_z=cz, rho_xy=rxy, rho_yz=ryz),
    st.floats(1.0, 1e4), st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(0.01, 1.0),
    st.floats(-1.0, 1.0), st.floats(-1.0, 1.0),
)
designs = st.integers(3, 500).flatmap(
    lambda N: st.integers(2, N).flatmap(lambda n1: st.tuples(st.just(N), st.just(n1), st.integers(2, n1)))
)


@pytest.mark.parametrize("name,pre", sorted(PAPER_PRE.items()))
def test_table_reproduces_paper(anderson, name, pre):
    table = analytic_table(anderson, PAPER_DESIGN)
    assert table.row(name).pre == pytest.approx(pre, abs=0.01)


def test_t6_formula_value(anderson):
    # hand evaluation: theta6 = 0.002*151.12 / (0.002*151.12 + 7.224) = 0.0401582 -> PRE 126.9376
    table = analytic_table(anderson, PAPER_DESIGN)
    assert table.row("t6").theta == pytest.approx(0.30224 / 7.52624, rel=1e-12)
    assert table.row("t6").pre == pytest.approx(126.9376, abs=1e-4)


def test_var_ybar_anderson(anderson):
    f = factors(PAPER_DESIGN)
    assert var_ybar(anderson, f) == pytest.approx(183.84**2 * (18 / 175) * 0.0546**2, rel=1e-12)
    assert var_ybar(anderson, f) == pytest.approx(10.363, abs=5e-4)


def test_var_ybar_homogeneous(anderson):
    f = factors(PAPER_DESIGN)
    doubled = _summary(mean_y=2 * 183.84)
    assert var_ybar(doubled, f) == pytest.approx(4 * var_ybar(anderson, f), rel=1e-12)


def test_rd_nil_gain_point():
    # rho_yx * Cy * Cx = Cx**2 / 2
    s = _summary(cv_y=0.05, cv_x=0.04, rho_xy=0.4)
    f = factors(PAPER_DESIGN)
    assert mse_two_phase_ratio(s, f) == pytest.approx(var_ybar(s, f), rel=1e-12)


def test_single_phase_degeneracies(anderson):
    f = factors(DesignSpec(25, 7, 7))
    assert mse_two_phase_ratio(anderson, f) == pytest.approx(var_ybar(anderson, f), rel=1e-14)
    f = factors(DesignSpec(25, 25, 7))
    assert min_mse_combined(anderson, f) == pytest.approx(mse_two_phase_ratio(anderson, f), rel=1e-14)
    f = factors(PAPER_DESIGN)
    assert min_mse_combined(_summary(rho_yz=0.0), f) == pytest.approx(
        mse_two_phase_ratio(_summary(rho_yz=0.0), f), rel=1e-14
    )


def test_chain_special_cases(anderson):
    f = factors(PAPER_DESIGN)
    assert mse_chain(anderson, f, 0.0) == pytest.approx(mse_two_phase_ratio(anderson, f), rel=1e-14)
    for th in (0.0, 0.3, 0.7355, 1.0):
        assert mse_combined(anderson, f, th, 1.0) == pytest.approx(mse_chain(anderson, f, 1.0), rel=1e-14)
        assert mse_combined(anderson, f, th, 0.0) == pytest.approx(mse_chain(anderson, f, th), rel=1e-14)


def test_gap_examples(anderson):
    f = factors(PAPER_DESIGN)
    th = 0.6932 * 0.0546 / 0.0488
    assert efficiency_gap(anderson, f, th) == pytest.approx(0.0, abs=1e-15)
    direct = mse_chain(anderson, f, 1.0) - min_mse_combined(anderson, f)
    assert efficiency_gap(anderson, f, 1.0) == pytest.approx(direct, rel=1e-10)
    direct = mse_two_phase_ratio(anderson, f) - min_mse_combined(anderson, f)
    assert ratio_gap(anderson, f) == pytest.approx(direct, rel=1e-10)


def test_alpha_opt_reaches_minimum_on_grid(anderson):
    f = factors(PAPER_DESIGN)
    th = theta(AuxTransform(0.0488, 2.6519), 151.12)
    grid = np.arange(-2.0, 3.0, 1e-5)
    values = np.array([mse_combined(anderson, f, th, a) for a in grid[::10]])
    coarse = grid[::10][np.argmin(values)]
    fine = grid[np.abs(grid - coarse) < 2e-4]
    best = fine[np.argmin([mse_combined(anderson, f, th, a) for a in fine])]
    a_opt = alpha_opt(th, k_yz(anderson))
    assert abs(best - a_opt) < 1e-4
    assert mse_combined(anderson, f, th, a_opt) == pytest.approx(min_mse_combined(anderson, f), rel=1e-10)


def test_census_table(anderson):
    table = analytic_table(anderson, DesignSpec(25, 25, 25))
    for row in table.rows:
        assert row.mse == 0.0
        assert row.pre is None


def test_pre_inversely_ordered_to_mse(anderson):
    table = analytic_table(anderson, PAPER_DESIGN)
    rows = sorted(table.rows, key=lambda r: r.mse)
    pres = [r.pre for r in rows]
    assert pres == sorted(pres, reverse=True)
    assert table.row("ybar").pre == 100.0
    for r in table.rows:
        assert r.pre == pytest.approx(100 * table.base_variance / r.mse, rel=1e-9)


def test_per_i_combined_rows_equal_minimum(anderson):
    ids = [EstimatorId(f"tstar{i}") for i in range(2, 8)]
    table = analytic_table(anderson, PAPER_DESIGN, ids)
    m = min_mse_combined(anderson, factors(PAPER_DESIGN))
    for r in table.rows:
        assert r.mse == pytest.approx(m, rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(summaries, designs, st.floats(-3.0, 3.0).filter(lambda t: abs(t - 1) > 1e-3), st.floats(-5, 5))
def test_identities(s, dims, th, alpha):
    f = factors(DesignSpec(*dims))
    m = min_mse_combined(s, f)
    scale = s.mean_y**2 * (f.f1 * (s.cv_y**2 + s.cv_x**2 + s.cv_z**2) + f.f2 * s.cv_z**2 * th**2) + 1e-300
    a = alpha_opt(th, k_yz(s))
    assert abs(mse_combined(s, f, th, a) - m) <= 1e-10 * scale
    assert abs(mse_chain(s, f, th) - m - efficiency_gap(s, f, th)) <= 1e-10 * scale
    assert abs(mse_two_phase_ratio(s, f) - m - ratio_gap(s, f)) <= 1e-10 * scale
    assert mse_combined(s, f, th, alpha) >= m - 1e-10 * scale
    assert efficiency_gap(s, f, th) >= 0


@given(st.floats(0.01, 10), st.floats(0, 10), st.floats(1, 500))
def test_sign_flip_of_transform(a, b, zbar):
    assert theta(AuxTransform(a, b), zbar) == pytest.approx(theta(AuxTransform(-a, -b), zbar), rel=1e-14)
