"""Tests for gradient segments, flow differentials, and index arithmetic."""

import numpy as np
import pytest

from gluelab.errors import DegenerateBasis
from gluelab.flow import (
    JointData,
    adjoint_flow_differential,
    creal_matrix,
    creal_vec,
    dfd_transversality,
    dim_identity_check,
    fredholm_index,
    flow_differential,
    immersion_check,
    real_vec_to_cplx,
    solve_gradient_segment,
    toy_index_experiment,
)
from gluelab.target import MorseData, TargetModel
from gluelab.cylinder import CylinderGrid


def _cubicish_morse():
    # grad f(z) = z + 0.2 z^3 (componentwise, complex analytic), so
    # D(grad f)(z) = diag(1 + 0.6 z_i^2) acts complex-linearly.
    def f(x):
        return 0.0  # value unused by the flow machinery

    def grad(x):
        x = np.asarray(x, dtype=complex)
        return x + 0.2 * x**3

    def hess(x):
        x = np.asarray(x, dtype=complex)
        return np.diag(1.0 + 0.6 * x**2)

    return MorseData(f, grad, hess, critical_points=[(np.zeros(2, complex), 0)])


def test_quadratic_segment_closed_form():
    md = MorseData.quadratic([1.0, 2.0])
    x0 = np.array([0.5, 0.25 + 0.1j])
    seg = solve_gradient_segment(md, x0, l=1.0)
    tau = np.linspace(-1, 1, 7)
    expect = np.exp(-md.lam * (tau[:, None] + 1.0)) * x0
    assert np.allclose(seg.eval(tau), expect, atol=1e-14)
    assert seg.residual_sup() < 1e-12


def test_generic_segment_matches_quadratic():
    # run the RK4/spline path on quadratic data (without the fast-path attrs)
    lam = np.array([1.0, 0.5])

    def grad(x):
        return lam * np.asarray(x, dtype=complex)

    md = MorseData(lambda x: 0.0, grad, lambda x: np.diag(lam).astype(complex))
    x0 = np.array([0.4, 0.3 - 0.2j])
    seg = solve_gradient_segment(md, x0, l=1.0, n_per_unit=64)
    tau = np.linspace(-1.0, 1.0, 11)
    expect = np.exp(-lam * (tau[:, None] + 1.0)) * x0
    assert np.allclose(seg.eval(tau), expect, atol=1e-9)
    # margin: defined slightly beyond [-l, l]
    assert np.all(np.isfinite(seg.eval(np.array([-1.5, 1.5]))))


def test_flow_reversibility_and_semigroup():
    md = _cubicish_morse()
    x0 = np.array([0.4 + 0.1j, -0.3j])
    seg = solve_gradient_segment(md, x0, l=1.0, n_per_unit=64)
    # semigroup: flowing from chi(-1) for time 1 lands at chi(0)
    mid = seg.eval(np.array([0.0]))[0]
    seg2 = solve_gradient_segment(md, mid, l=0.5, n_per_unit=64)
    assert np.allclose(seg2.eval(np.array([0.5]))[0],
                       seg.eval(np.array([1.0]))[0], atol=1e-9)
    # reversibility: positive-gradient flow from chi(l) recovers x0
    md_rev = MorseData(md.f, lambda x: -np.asarray(md.grad_f(x)),
                       lambda x: -np.asarray(md.hess_grad_f(x)))
    end = seg.eval(np.array([1.0]))[0]
    back = solve_gradient_segment(md_rev, end, l=1.0, n_per_unit=64)
    assert np.allclose(back.eval(np.array([1.0]))[0], x0, atol=1e-9)


def test_flow_differential_constant_hessian():
    md = MorseData.quadratic([1.0, 3.0])
    seg = solve_gradient_segment(md, np.array([0.1, 0.1 + 0j]), l=0.75)
    P = flow_differential(md, seg)
    assert np.allclose(P, creal_matrix(np.diag(np.exp(-1.5 * md.lam))), atol=1e-12)


def test_flow_differential_vs_fd_jacobian():
    # P should be the Jacobian of the nonlinear time-2l flow map; compare
    # against Richardson-extrapolated central differences.
    md = _cubicish_morse()
    x0 = np.array([0.3 + 0.05j, -0.2 + 0.1j])
    l = 0.5
    seg = solve_gradient_segment(md, x0, l=l, n_per_unit=128)
    P = flow_differential(md, seg, n_per_unit=128)

    def flow_map(xr):
        s = solve_gradient_segment(md, real_vec_to_cplx(xr), l=l, n_per_unit=128)
        return creal_vec(s.eval(np.array([l]))[0])

    n2 = 4
    x0r = creal_vec(x0)
    errs = []
    for h in (1e-4, 5e-5):
        J = np.empty((n2, n2))
        for j in range(n2):
            e = np.zeros(n2)
            e[j] = h
            J[:, j] = (flow_map(x0r + e) - flow_map(x0r - e)) / (2 * h)
        errs.append(np.max(np.abs(J - P)))
    assert errs[0] < 1e-6
    slope = np.log(errs[0] / errs[1]) / np.log(2.0)
    assert slope > 1.7 or errs[1] < 1e-10


def test_adjoint_pairing_exact():
    # <P a, P_adj b> = <a, b> for the nonconstant-Hessian flow
    md = _cubicish_morse()
    seg = solve_gradient_segment(md, np.array([0.4, 0.2 + 0.3j]), l=1.0,
                                 n_per_unit=128)
    P = flow_differential(md, seg, n_per_unit=128)
    Pa = adjoint_flow_differential(md, seg, n_per_unit=128)
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = rng.standard_normal(4)
        b = rng.standard_normal(4)
        assert abs((P @ a) @ (Pa @ b) - a @ b) < 1e-10


def test_transversality_full_and_deficient():
    n2 = 4
    P = np.diag([0.5, 0.5, 2.0, 2.0])
    full = JointData(np.eye(n2), np.eye(n2), P)
    rep = dfd_transversality(full)
    assert rep["transversal"] and rep["coker_dim"] == 0
    # complementary half-spaces: transversal with zero kernel correction
    half = JointData(np.eye(n2)[:, :2], np.eye(n2)[:, 2:], P)
    rep = dfd_transversality(half)
    assert rep["transversal"] and rep["ker_correction"] == 0
    # overlapping half-spaces: fails
    bad = JointData(np.eye(n2)[:, :2], np.eye(n2)[:, :2], P)
    rep = dfd_transversality(bad)
    assert not rep["transversal"] and rep["coker_dim"] == 2
    with pytest.raises(DegenerateBasis):
        JointData(np.eye(n2), np.eye(n2), np.zeros((n2, n2)))
    with pytest.raises(DegenerateBasis):
        dfd_transversality(JointData(np.ones((n2, 2)), np.eye(n2), P))


def test_fredholm_index_values():
    assert fredholm_index(1, 1, 0, 1) == 2
    assert fredholm_index(1, 1, 0, 1, family=True) == 3
    assert fredholm_index(0, 0, 0, 0) == 0
    assert fredholm_index(2, -1, 1, 0) == 5


def test_dim_identity_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = rng.integers(2, 7)
        da = rng.integers(0, n + 1)
        db = rng.integers(0, n + 1)
        A = rng.standard_normal((n, da))
        B = rng.standard_normal((n, db))
        out = dim_identity_check(A, B, int(n))
        assert out["lhs"] == out["rhs_plus"]


def test_dim_identity_structured():
    # A = B = x-axis in R^2: A x B + Delta is 3-dimensional = 2 + dim(A+B)
    A = np.array([[1.0], [0.0]])
    out = dim_identity_check(A, A, 2)
    assert out["lhs"] == 3 and out["rhs_plus"] == 3


def test_toy_index_matches_formula():
    rng = np.random.default_rng(1)
    for trial in range(20):
        n = int(rng.integers(1, 4))
        c1m = int(rng.integers(0, 2))
        c1p = int(rng.integers(0, 2))
        mu_m = int(rng.integers(-n, n + 1 - 2 * c1m))
        mu_p = int(rng.integers(-n + 2 * c1p, n + 1))
        out = toy_index_experiment(mu_m, mu_p, c1m, c1p, n, seed=trial)
        assert out["index_svd"] == out["index_formula"]
        out2 = toy_index_experiment(mu_m, mu_p, c1m, c1p, n, n_nodes=24,
                                    seed=trial)
        assert out2["index_svd"] == out["index_svd"]


def test_immersion_check_cases():
    model = TargetModel.flat(2)

    def emb(tt, t):  # z = e^{2 pi (tau + i t)} in the first factor: immersed
        z = np.exp(2 * np.pi * (tt + 1j * t))
        return np.stack([z, np.zeros_like(z)], axis=-1)

    u = CylinderGrid.from_function(model, emb, -1.0, 1.0, n_t=16)
    assert immersion_check(u, (16, 3))

    def const(tt, t):
        z = np.zeros_like(tt + t, dtype=complex)
        return np.stack([z, z], axis=-1)

    u0 = CylinderGrid.from_function(model, const, -1.0, 1.0, n_t=16)
    assert not immersion_check(u0, (16, 3))

    def degen(tt, t):  # depends on tau only: rank 1
        z = (tt + 0.0 * t).astype(complex)
        return np.stack([z, np.zeros_like(z)], axis=-1)

    u1 = CylinderGrid.from_function(model, degen, -1.0, 1.0, n_t=16)
    assert not immersion_check(u1, (16, 3))
