import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sprd import (
    CoupledSystem,
    MeshConfig,
    assemble_lhs,
    assemble_q_operator,
    build_mesh,
    builtin_example,
    compute_weights,
    quadrature_weights,
    select_regime,
    stencil_weights_r,
    validate_coupling,
    verify_positive_type,
)
from sprd.scheme import CENTRAL, COMPACT, LAYER_WEIGHTS, node_diagnostics


def setup(example_id, k, n=64, dt=0.5, sigma0=4.0):
    system = builtin_example(example_id, epsilon=2.0**-k)
    mesh = build_mesh(MeshConfig(n, sigma0), system.epsilon)
    return system, mesh, dt


def compact_q(hl, hr):
    s = 6.0 * (hl + hr)
    return ((2 * hl - hr) / s, 5.0 / 6.0, (2 * hr - hl) / s)


def second_difference(v_left, v_mid, v_right, hl, hr):
    return (
        2 * v_left / (hl * (hl + hr))
        - 2 * v_mid / (hl * hr)
        + 2 * v_right / (hr * (hl + hr))
    )


def difference_magnitude(v_left, v_mid, v_right, hl, hr):
    return (
        2 * abs(v_left) / (hl * (hl + hr))
        + 2 * abs(v_mid) / (hl * hr)
        + 2 * abs(v_right) / (hr * (hl + hr))
    )


# polynomial reproduction of the non-equidistant compact weights

@settings(max_examples=200, deadline=None)
@given(
    hl=st.floats(1e-3, 1.0),
    ratio=st.floats(0.5, 2.0),
    xi=st.floats(-2.0, 2.0),
    coeffs=st.lists(st.floats(-5, 5), min_size=4, max_size=4),
)
def test_compact_weights_exact_through_cubics(hl, ratio, xi, coeffs):
    hr = hl * ratio
    q = compact_q(hl, hr)
    p = np.polynomial.Polynomial(coeffs)
    d2 = p.deriv(2)
    xs = (xi - hl, xi, xi + hr)
    lhs = second_difference(*(p(x) for x in xs), hl, hr)
    rhs = sum(w * d2(x) for w, x in zip(q, xs))
    # relative to the size of the terms that cancel inside the difference quotient
    scale = max(abs(rhs), difference_magnitude(*(p(x) for x in xs), hl, hr))
    assert abs(lhs - rhs) <= 1e-10 * scale


@settings(max_examples=200, deadline=None)
@given(hl=st.floats(1e-2, 1.0), ratio=st.floats(0.5, 2.0), xi=st.floats(-2.0, 2.0))
def test_quartic_defect_law(hl, ratio, xi):
    hr = hl * ratio
    q = compact_q(hl, hr)
    xs = np.array([xi - hl, xi, xi + hr])
    p = (xs - xi) ** 4
    d2 = 12 * (xs - xi) ** 2
    defect = float(np.dot(q, d2)) - second_difference(*p, hl, hr)
    expected = 2 * (hr - hl) ** 2
    if expected == 0.0:
        assert abs(defect) <= 1e-12 * hl**2
    else:
        assert defect == pytest.approx(expected, rel=1e-10, abs=1e-12 * hl**2)


def test_layer_weights_uniform_quartic_exact():
    h, xi = 0.1, 0.3
    xs = np.array([xi - h, xi, xi + h])
    p = (xs - 0.2) ** 4
    d2 = 12 * (xs - 0.2) ** 2
    assert np.dot(LAYER_WEIGHTS, d2) == pytest.approx(second_difference(*p, h, h), rel=1e-12)


@pytest.mark.parametrize("example_id, k", [(1, 4), (1, 20), (2, 8), (3, 32)])
def test_q_normalisation_everywhere(example_id, k):
    system, mesh, dt = setup(example_id, k)
    w = compute_weights(mesh, system, dt)
    assert np.max(np.abs(w.q.sum(axis=2) - 1.0)) <= 1e-14


def test_layer_nodes_use_layer_weights():
    system, mesh, dt = setup(1, 20)
    w = compute_weights(mesh, system, dt)
    n = mesh.n
    for i in list(range(1, n // 4)) + list(range(3 * n // 4 + 1, n)):
        for k in range(system.m):
            assert tuple(w.q[i - 1, k]) == LAYER_WEIGHTS
    assert quadrature_weights(mesh, CENTRAL, 5) == LAYER_WEIGHTS


def test_quadrature_weights_regular_region():
    _, mesh, _ = setup(3, 20)
    i = mesh.n // 2
    assert quadrature_weights(mesh, CENTRAL, i) == (0.0, 1.0, 0.0)
    q = quadrature_weights(mesh, COMPACT, i)
    assert q == pytest.approx(compact_q(mesh.widths[i - 1], mesh.widths[i]))
    with pytest.raises(IndexError):
        quadrature_weights(mesh, COMPACT, 0)


def test_compact_equal_widths_reduce_to_layer_weights():
    assert compact_q(0.2, 0.2) == pytest.approx(LAYER_WEIGHTS, abs=1e-15)


def test_regime_examples():
    system, mesh, dt = setup(3, 20)
    diag = node_diagnostics(system, mesh)
    assert select_regime(mesh, diag, dt) == (CENTRAL, CENTRAL)
    system, mesh, dt = setup(3, 4)
    assert mesh.h_max == pytest.approx(1 / 64)
    assert select_regime(mesh, node_diagnostics(system, mesh), dt) == (COMPACT, COMPACT)
    system, mesh, dt = setup(3, 32)
    assert select_regime(mesh, node_diagnostics(system, mesh), dt, gamma=0.0) == (COMPACT, COMPACT)


def test_r_weights_worked_example():
    rm, rc, rp = stencil_weights_r(1.0, 0.5, 0.25, 0.25, LAYER_WEIGHTS, 2.0, 2.0, 2.0)
    assert rm == pytest.approx(-3.875)
    assert rp == pytest.approx(-3.875)
    assert rc == pytest.approx(9.25)
    assert rm + rc + rp == pytest.approx(1.5)


def test_r_weights_vanishing_dt():
    r = stencil_weights_r(1e-3, 1e-14, 0.1, 0.1, (0.0, 1.0, 0.0), 2.0, 3.0, 4.0)
    np.testing.assert_allclose(r, (0.0, 1.0, 0.0), atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    eps=st.floats(1e-10, 1.0),
    dt=st.floats(1e-4, 1.0),
    hl=st.floats(1e-4, 0.5),
    hr=st.floats(1e-4, 0.5),
    a=st.lists(st.floats(0.1, 10.0), min_size=3, max_size=3),
    central=st.booleans(),
)
def test_r_row_sum_identity(eps, dt, hl, hr, a, central):
    q = (0.0, 1.0, 0.0) if central else compact_q(hl, hr)
    r = stencil_weights_r(eps, dt, hl, hr, q, *a)
    expected = 1 + 0.5 * dt * sum(w * v for w, v in zip(q, a))
    assert abs(sum(r) - expected) <= 1e-13 * sum(abs(v) for v in r)


def test_lhs_tends_to_quadrature_operator():
    # every dt-scaled term vanishes, leaving r -> q: B -> Q, the identity
    # wherever central weights are in use
    zero = CoupledSystem(
        m=1 + 1,
        epsilon=1e-3,
        horizon=1.0,
        coupling=lambda x: np.zeros((x.size, 2, 2)),
        source=lambda x, t: np.zeros((x.size, 2)),
    )
    mesh = build_mesh(MeshConfig(16, 4.0), zero.epsilon)
    dt = 1e-14
    w = compute_weights(mesh, zero, dt, diagnostics=validate_coupling(zero))
    b = assemble_lhs(mesh, zero, dt, w)
    q = assemble_q_operator(mesh, w)
    np.testing.assert_allclose(b.to_dense(), q.to_dense(), atol=1e-9)
    regular = ~mesh.layer[1:-1]
    assert w.regime == (CENTRAL, CENTRAL)
    for i in np.flatnonzero(regular) + 1:
        np.testing.assert_allclose(b.diag[i], np.eye(2), atol=1e-9)
        np.testing.assert_allclose(b.sub[i], 0.0, atol=1e-9)


def test_central_coupling_entries():
    system, mesh, dt = setup(3, 20)
    w = compute_weights(mesh, system, dt)
    b = assemble_lhs(mesh, system, dt, w)
    i = mesh.n // 2
    assert b.diag[i, 0, 1] == pytest.approx(-0.25)
    assert b.sub[i, 0, 1] == 0.0
    assert b.sup[i, 0, 1] == 0.0
    # boundary rows are identity
    np.testing.assert_array_equal(b.diag[0], np.eye(2))
    np.testing.assert_array_equal(b.sup[0], 0.0)
    np.testing.assert_array_equal(b.diag[-1], np.eye(2))


def test_q_operator_structure():
    system, mesh, dt = setup(3, 20)
    w = compute_weights(mesh, system, dt)
    q = assemble_q_operator(mesh, w)
    ones = np.ones((mesh.n + 1, 2))
    np.testing.assert_allclose(q.matvec(ones), ones, atol=1e-15)
    for blk in (q.sub, q.diag, q.sup):
        assert np.all(blk[:, 0, 1] == 0.0) and np.all(blk[:, 1, 0] == 0.0)
    np.testing.assert_array_equal(w.q[:, 0], w.q[:, 1])


def test_q_on_quadratic_uniform():
    system, mesh, dt = setup(3, 4)  # uniform mesh, compact regime everywhere
    w = compute_weights(mesh, system, dt)
    q = assemble_q_operator(mesh, w)
    x = mesh.nodes
    v = np.stack([x**2, x**2], axis=1)
    out = q.matvec(v)
    h = 1 / 64
    np.testing.assert_allclose(out[1:-1, 0], x[1:-1] ** 2 + h**2 / 6, rtol=1e-12)


def test_positive_type_example1_passes():
    system, mesh, dt = setup(1, 12)
    report = verify_positive_type(mesh, system, dt, 4.0)
    assert report.mesh_lhs == pytest.approx((64 / 3.0453) ** 2, rel=1e-3)
    # max over both components; |a_22| reaches e + 1
    assert report.mesh_rhs == pytest.approx(4 * 16 * (np.e + 1 + 4) / 3, rel=1e-6)
    assert report.passed
    text = report.format()
    assert "PASS" in text and f"{report.mesh_rhs:.6g}" in text


def test_positive_type_small_step_fails():
    system, mesh, _ = setup(1, 12, n=8)
    report = verify_positive_type(mesh, system, 1e-4, 4.0)
    assert not report.mesh_ok
    assert report.mesh_rhs > 20000
    assert "FAIL" in report.format()


CELLS = [(e, k, n, dt) for e in (1, 2, 3) for k in (4, 12, 24, 32) for n, dt in ((64, 0.5), (128, 0.125))]


@pytest.mark.parametrize("example_id, k, n, dt", CELLS)
def test_hypothesis_implies_sign_pattern(example_id, k, n, dt):
    system, mesh, _ = setup(example_id, k, n)
    report = verify_positive_type(mesh, system, dt, 4.0)
    if report.hypothesis_ok:
        assert report.sign_violations == []
        w = compute_weights(mesh, system, dt)
        assert np.all(w.q >= 0.0)


# small instances: N = 16, Example 3 data.  (16 / L*)^2 is about 60.7, so the
# mesh condition needs 2 + 2/dt below 2.85, i.e. dt above about 2.4.

SMALL_DT = 4.0


def small_operator(k):
    system, mesh, dt = setup(3, k, n=16, dt=SMALL_DT)
    report = verify_positive_type(mesh, system, dt, 4.0)
    w = compute_weights(mesh, system, dt)
    return report, assemble_lhs(mesh, system, dt, w)


@pytest.mark.parametrize("k", [4, 8, 16, 24, 32])
def test_inverse_is_nonnegative(k):
    report, b = small_operator(k)
    assert report.hypothesis_ok
    inv = np.linalg.inv(b.to_dense())
    assert inv.min() >= -1e-12


def test_inverse_bounded_uniformly():
    norms = []
    for k in (4, 16, 32):
        report, b = small_operator(k)
        assert report.hypothesis_ok
        inv = np.linalg.inv(b.to_dense())
        norms.append(np.abs(inv).sum(axis=1).max())
    assert max(norms) <= 10.0
