import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latharm.harmonic import (
    HERMITE_MAX,
    BoxTooSmallError,
    hermite_eval,
    hermite_function,
    merged_levels,
    quasimode,
    read_levels_csv,
    well_data,
    write_levels_csv,
)
from latharm.lattice import build_lattice
from latharm.model import Constant, ModelSpec, Polynomial, PotentialSpec

from conftest import harmonic_1d, nearest_neighbour_1d

W1 = math.sqrt(2 - math.sqrt(2))
W2 = math.sqrt(2 + math.sqrt(2))


def test_m1_well_data(m1):
    wd = well_data(m1, 1)
    np.testing.assert_allclose(wd.location, [1.0])
    np.testing.assert_allclose(wd.hessian_half, [[4.0]])
    np.testing.assert_allclose(wd.kinetic, [[1.0]])
    np.testing.assert_allclose(wd.A, [[4.0]])
    np.testing.assert_allclose(wd.frequencies, [2.0])
    assert wd.offset == 0.0


def test_m2_frequencies(m2):
    wd = well_data(m2, 0)
    np.testing.assert_allclose(wd.frequencies, [W1, W2], atol=1e-12)
    np.testing.assert_allclose(wd.frequencies, [0.76537, 1.84776], atol=1e-5)
    np.testing.assert_allclose(wd.axes.T @ wd.axes, np.eye(2), atol=1e-10)
    for i in range(2):
        col = wd.axes[:, i]
        assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0


def test_isotropic_toy():
    V0 = Polynomial([(1.0, (2, 0)), (1.0, (0, 2))])
    a0 = {(0, 0): Constant(4.0)}
    for eta in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        a0[eta] = Constant(-1.0)
    from latharm.model import HoppingFamily

    model = ModelSpec(HoppingFamily(2, a0), PotentialSpec(V0, Constant(0.0), np.zeros((1, 2))))
    np.testing.assert_allclose(well_data(model, 0).frequencies, [1.0, 1.0])


def test_sqrt_kinetic_is_symmetric_root(m2):
    wd = well_data(m2, 0)
    R = wd.kinetic_sqrt
    np.testing.assert_allclose(R, R.T)
    np.testing.assert_allclose(R @ R, wd.kinetic, atol=1e-14)
    np.testing.assert_allclose(wd.kinetic_inv_sqrt @ R, np.eye(2), atol=1e-14)


def test_offset_from_first_order_terms(offset_model):
    wd = well_data(offset_model, 0)
    assert wd.offset == pytest.approx(0.75)
    levels = merged_levels(offset_model, 2)
    assert [lv.value for lv in levels] == pytest.approx([1.0 + 0.75, 3.0 + 0.75])


def test_well_index_checked(m1):
    with pytest.raises(IndexError):
        well_data(m1, 2)


def test_m1_merged_levels(m1):
    levels = merged_levels(m1, 4)
    assert [lv.value for lv in levels] == pytest.approx([2, 2, 6, 6])
    assert [(lv.well, lv.alpha, lv.rank) for lv in levels] == [(0, (0,), 1), (1, (0,), 2), (0, (1,), 3), (1, (1,), 4)]


def test_m2_merged_levels(m2):
    # the three lowest are ω₁+ω₂, 3ω₁+ω₂, 5ω₁+ω₂ (5ω₁+ω₂ ≈ 5.67459 lies below ω₁+3ω₂ ≈ 6.30866)
    values = [lv.value for lv in merged_levels(m2, 4)]
    np.testing.assert_allclose(values, [W1 + W2, 3 * W1 + W2, 5 * W1 + W2, W1 + 3 * W2], atol=1e-12)
    np.testing.assert_allclose(values[:2], [2.61313, 4.14386], atol=1e-5)


def test_single_well_ladder():
    model = harmonic_1d(coef=2.25)  # Ã = 2.25, B = 1, ω = 1.5
    assert [lv.value for lv in merged_levels(model, 3)] == pytest.approx([1.5, 4.5, 7.5])


def test_merged_levels_requires_positive_count(m1):
    with pytest.raises(ValueError):
        merged_levels(m1, 0)


def _two_wells(c0, c1, order):
    V0 = Polynomial([(c0, (2,))])
    wells = np.array([[-1.0], [1.0]])[list(order)]
    pot = PotentialSpec(V0, Constant(0.0), wells, hessian=lambda x: np.array([[2 * (c0 if x[0] < 0 else c1)]]))
    return ModelSpec(nearest_neighbour_1d(), pot)


@given(st.floats(0.2, 5), st.floats(0.2, 5), st.integers(1, 12))
@settings(max_examples=40, deadline=None)
def test_merged_levels_relabeling_invariant(c0, c1, n):
    a = [lv.value for lv in merged_levels(_two_wells(c0, c1, (0, 1)), n)]
    b = [lv.value for lv in merged_levels(_two_wells(c0, c1, (1, 0)), n)]
    assert a == b


@given(st.floats(0.2, 5), st.floats(0.2, 5), st.integers(1, 12))
@settings(max_examples=40, deadline=None)
def test_merged_levels_complete(c0, c1, n):
    # brute-force oracle: all α ≤ 40 in each well
    model = _two_wells(c0, c1, (0, 1))
    brute = sorted(
        well_data(model, j).level((a,)) for j in range(2) for a in range(40)
    )[:n]
    np.testing.assert_allclose([lv.value for lv in merged_levels(model, n)], brute, rtol=1e-14)


def test_scaling_covariance(m2):
    doubled = ModelSpec(
        m2.hopping,
        PotentialSpec(Polynomial([(2.0, (2, 0)), (4.0, (1, 1)), (6.0, (0, 2))]), Constant(0.0), np.zeros((1, 2))),
    )
    base = merged_levels(m2, 6)
    scaled = merged_levels(doubled, 6)
    np.testing.assert_allclose(well_data(doubled, 0).frequencies, math.sqrt(2) * well_data(m2, 0).frequencies)
    np.testing.assert_allclose([lv.value for lv in scaled], [math.sqrt(2) * lv.value for lv in base], rtol=1e-12)
    assert [lv.alpha for lv in scaled] == [lv.alpha for lv in base]


def test_levels_csv_roundtrip(tmp_path, m2):
    levels = merged_levels(m2, 5)
    back = read_levels_csv(write_levels_csv(levels, tmp_path / "harmonic.csv"))
    assert back == levels


# ----------------------------------------------------------------------------
# Hermite functions


def test_hermite_examples():
    assert hermite_eval(0, 2.7) == pytest.approx(math.pi**-0.25)
    assert hermite_eval(1, 1.0) == pytest.approx(math.sqrt(2) * math.pi**-0.25)
    # h_2(t) = (4t² − 2)/√(8√π)
    t = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(hermite_eval(2, t), (4 * t**2 - 2) / math.sqrt(8 * math.sqrt(math.pi)), atol=1e-13)


def test_hermite_orthonormal_quadrature():
    t = np.linspace(-12, 12, 24001)
    dt = t[1] - t[0]
    H = np.array([hermite_eval(k, t) for k in range(11)])
    G = (H * np.exp(-(t**2))) @ H.T * dt
    np.testing.assert_allclose(G, np.eye(11), atol=1e-8)


def test_hermite_large_argument_finite():
    assert np.isfinite(hermite_eval(30, 40.0))
    assert hermite_function(30, 40.0) == pytest.approx(0.0, abs=1e-200)


def test_hermite_range():
    with pytest.raises(ValueError):
        hermite_eval(HERMITE_MAX + 1, 0.0)
    with pytest.raises(ValueError):
        hermite_function(-1, 0.0)


# ----------------------------------------------------------------------------
# quasimodes


def test_quasimode_value_at_well(m2):
    eps = 0.05
    box = build_lattice(2, eps, 2.0)
    wd = well_data(m2, 0)
    g = quasimode(box, wd, (0, 0), eps)
    centre = box.index([0, 0])
    # |det B^{−1/2}|^{1/2} ε^{−d/4} π^{−d/4} times the normalization Π ω^{1/4}
    expected = eps**-0.5 * math.pi**-0.5 * np.prod(wd.frequencies) ** 0.25
    assert g[centre] == pytest.approx(expected, rel=1e-14)


def test_quasimode_even(m1):
    eps = 0.01
    box = build_lattice(1, eps, 3.0)
    g = quasimode(box, well_data(m1, 1), (0,), eps)
    x = box.points()[:, 0]
    i = int(np.argmin(np.abs(x - 1.0)))
    for k in range(1, 40):
        assert g[i + k] == pytest.approx(g[i - k], rel=1e-12)


def _oscillator_residual(wd, alpha, eps, h):
    box = build_lattice(2, h, 2.4)
    hz = h / math.sqrt(eps)
    z = box.points().reshape(box.shape + (2,))[1:-1, 1:-1] / math.sqrt(eps)
    pot = np.einsum("...i,ij,...j->...", z, wd.hessian_half, z)
    g = quasimode(box, wd, alpha, eps).reshape(box.shape)
    c = g[1:-1, 1:-1]
    lap = (g[2:, 1:-1] + g[:-2, 1:-1] + g[1:-1, 2:] + g[1:-1, :-2] - 4 * c) / hz**2
    return np.abs(-lap + (pot - wd.level(alpha)) * c).max() / np.abs(g).max()


@pytest.mark.parametrize("alpha", [(0, 0), (1, 0), (0, 2)])
def test_quasimode_is_oscillator_eigenfunction(m2, alpha):
    # in z = x/√ε: (−Δ_z + ⟨z, Ã z⟩) g = e g up to the O(h²) error of second differences
    wd = well_data(m2, 0)
    coarse = _oscillator_residual(wd, alpha, 0.04, 0.01)
    fine = _oscillator_residual(wd, alpha, 0.04, 0.005)
    assert fine < 5e-3
    assert coarse / fine > 3.5


def test_quasimode_margin(m1):
    box = build_lattice(1, 0.01, 1.2)
    with pytest.raises(BoxTooSmallError):
        quasimode(box, well_data(m1, 1), (3,), 0.01)


def test_quasimode_alpha_length(m2):
    with pytest.raises(ValueError):
        quasimode(build_lattice(2, 0.1, 2.0), well_data(m2, 0), (0,), 0.1)
