import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oct_elast.errors import OrderingViolated, OutOfBand, SchemaError
from oct_elast.medium import (
    ComplexTable,
    Layer,
    LayerBoundary,
    MediumStack,
    RandomSublayer,
    ScanGrid,
    compress,
    stack_from_json,
    stack_to_json,
    validate,
)
from oct_elast.spectra import Constant, Lorentz

W = np.linspace(1.0, 2.0, 11)
GRID = ScanGrid(W, [-1.0, -0.5, 0.0, 0.5, 1.0])


def sublayer(**kw):
    p = dict(rho=3.0, nu_model=Constant(1.6**2 - 1), nu_rate=0.02j, zeta=0.6, zeta_rate=0.1, Z=0.4, Z_rate=0.3, R=0.0)
    p.update(kw)
    return RandomSublayer(**p)


def two_layer(sub=None, rate=0.01j, dr=(-0.5, 0.5)):
    return MediumStack(
        (
            Layer(Constant(1.4**2 - 1 + 0.02j), rate, LayerBoundary(1.0, 0.0), sub),
            Layer(Lorentz(0.9, 10.0, 1.0), 0.05, LayerBoundary(-0.5, 0.05)),
        ),
        delta_range=dr,
    )


def test_compress_at_rest_is_identity():
    st_ = two_layer(sublayer())
    cs = compress(st_, 0.0)
    for L, C in zip(st_.layers, cs.layers):
        assert C.z == L.boundary_top.z
        np.testing.assert_array_equal(C.n(W), L.index(W))
    s = cs.layers[0].sublayer
    assert (s.zeta, s.Z, s.rho) == (0.6, 0.4, 3.0)
    np.testing.assert_array_equal(s.nu(W), st_.layers[0].sublayer.nu(W))


def test_compress_affine_boundary():
    st_ = MediumStack((Layer(Constant(1.0), 0.1, LayerBoundary(1.0, -0.1)),), delta_range=(0, 2))
    assert compress(st_, 2.0).layers[0].z == pytest.approx(0.8, abs=1e-15)


def test_compress_rejects_sublayer_crossing():
    st_ = MediumStack((Layer(Constant(0.5), 0.01j, LayerBoundary(2.0), sublayer()),))
    with pytest.raises(OrderingViolated):
        compress(st_, 1.0)  # Z-bar = zeta-bar = 0.7


def test_stack_rejects_reordering_within_delta_range():
    with pytest.raises(OrderingViolated):
        two_layer(dr=(-40.0, 40.0))


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_compress_midpoint_affine(d1, d2):
    st_ = two_layer(sublayer())
    a, b, m = compress(st_, d1), compress(st_, d2), compress(st_, 0.5 * (d1 + d2))
    for La, Lb, Lm in zip(a.layers, b.layers, m.layers):
        assert abs(0.5 * (La.z + Lb.z) - Lm.z) < 1e-14
        np.testing.assert_allclose(0.5 * (La.n(W) + Lb.n(W)), Lm.n(W), rtol=0, atol=1e-14)
    sa, sb, sm = a.layers[0].sublayer, b.layers[0].sublayer, m.layers[0].sublayer
    assert abs(0.5 * (sa.zeta + sb.zeta) - sm.zeta) < 1e-14
    assert abs(0.5 * (sa.Z + sb.Z) - sm.Z) < 1e-14
    np.testing.assert_allclose(0.5 * (sa.nu(W) + sb.nu(W)), sm.nu(W), rtol=0, atol=1e-14)


def codes(diags):
    return {d.code for d in diags}


def test_validate_flags_zero_rate():
    st_ = two_layer(rate=0.0)
    c = codes(validate(st_, GRID))
    assert "first-interface-degenerate" in c
    assert any("first-interface recovery degenerate" in d.message for d in validate(st_, GRID))


def test_validate_decay_condition_met():
    g = ScanGrid(W, [-0.5, 0.0, 0.5])
    assert "decay-hypothesis" not in codes(validate(two_layer(rate=0.01j), g))
    assert "decay-hypothesis" in codes(validate(two_layer(rate=0.01), g))


def test_validate_shrink_condition():
    st_ = MediumStack((Layer(Constant(0.5), 0.01j, LayerBoundary(2.0), sublayer(zeta_rate=0.2, Z_rate=0.1)),))
    d = validate(st_, GRID)
    assert "shrink-condition" in codes(d)
    assert any("shrink condition violated" in x.message for x in d)


def test_validate_contrast_degenerate():
    # nu'/nu == n'/n with nu = n
    n = 1.4
    sub = sublayer(nu_model=Constant(n * n - 1), nu_rate=0.01j)
    st_ = MediumStack((Layer(Constant(n * n - 1), 0.01j, LayerBoundary(2.0), sub),))
    assert "contrast-degenerate" in codes(validate(st_, GRID))


def test_validate_ordering_over_grid():
    st_ = MediumStack((Layer(Constant(0.5), 0.01j, LayerBoundary(2.0), sublayer()),))
    grid = ScanGrid(W, [-1.0, 0.0, 1.5])
    assert "ordering" in codes(validate(st_, grid))


def test_complex_table():
    t = ComplexTable([1 + 1j, 3 + 0j], [1.0, 2.0])
    assert t(1.5) == pytest.approx(2 + 0.5j)
    with pytest.raises(OutOfBand):
        t(2.5)
    assert ComplexTable.from_json([[0.0, 0.5, 0.1]])(123.0) == 0.5 + 0.1j
    with pytest.raises(SchemaError):
        ComplexTable.from_json([[1.0, 2.0]])


def test_scan_grid_requires_rest_state():
    with pytest.raises(ValueError):
        ScanGrid(W, [0.5, 1.0])
    with pytest.raises(ValueError):
        ScanGrid(W, [0.0, 0.0, 1.0])


def test_stack_json_round_trip():
    st_ = two_layer(sublayer(R=0.01))
    back = stack_from_json(stack_to_json(st_))
    assert back == st_


def test_sublayer_invariants():
    with pytest.raises(ValueError):
        sublayer(rho=0.0)
    with pytest.raises(ValueError):
        sublayer(R=-1.0)
    with pytest.raises(OrderingViolated):
        sublayer(Z=0.7)
