"""Tests for grids, mode decomposition, weights, norms, energy, Hausdorff."""

import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gluelab.cylinder import (
    CylinderGrid,
    ModeField,
    Section,
    dt_spectral,
    dtau_fd4,
    energy_local,
    hausdorff_distance,
    mode_decompose,
    norm_weighted_Lp,
    norm_weighted_W1p,
    recompose,
    resolved_eta_norm,
    resolved_xi_norm,
    weight_profile,
)
from gluelab.errors import EmptySet, GridTooShort, ShapeMismatch
from gluelab.preglue import AdiabaticParams
from gluelab.target import TargetModel


def _grid(tau_min=-2.0, tau_max=2.0, h=1 / 16, n_t=64, n=2):
    model = TargetModel.flat(n)

    def zero(tt, t):
        z = np.zeros_like(tt + t, dtype=complex)
        return np.stack([z] * n, axis=-1)

    return CylinderGrid.from_function(model, zero, tau_min, tau_max, h, n_t)


def test_grid_validation():
    model = TargetModel.flat(1)
    with pytest.raises(ShapeMismatch):
        CylinderGrid(np.linspace(0, 1, 5), np.zeros((4, 8, 1)), model)
    with pytest.raises(ValueError):
        CylinderGrid(np.array([0.0, 0.1, 0.3]), np.zeros((3, 8, 1)), model)
    g = _grid()
    assert g.index_of_tau(0.5) == g.n_tau // 2 + 8
    with pytest.raises(ValueError):
        g.index_of_tau(0.51)


def test_dtau_fd4_exact_on_quartics():
    tau = np.linspace(-1, 1, 33)
    v = (tau**4 - 2 * tau**2 + tau)[:, None, None] * np.ones((1, 4, 1))
    d = dtau_fd4(v, tau[1] - tau[0])
    expect = (4 * tau**3 - 4 * tau + 1)[:, None, None] * np.ones((1, 4, 1))
    assert np.max(np.abs(d - expect)) < 1e-10
    with pytest.raises(GridTooShort):
        dtau_fd4(v[:4], 0.1)


def test_dt_spectral_exact_on_trig():
    g = _grid(n_t=32)
    t = g.t_samples()
    v = np.exp(2j * np.pi * 3 * t)[None, :, None] * np.ones((g.n_tau, 1, 1))
    d = dt_spectral(np.concatenate([v, np.conj(v)], axis=2), g.period_t)
    expect = 2j * np.pi * 3 * v
    assert np.max(np.abs(d[..., :1] - expect)) < 1e-10
    assert np.max(np.abs(d[..., 1:] - np.conj(expect))) < 1e-10


def test_mode_decompose_oracle_and_parseval():
    g = _grid(n=1, n_t=64)
    t = g.t_samples()
    tau = g.tau
    c0 = np.cos(tau) + 0.5j * tau
    a2 = np.exp(-(tau**2)) * (1 + 1j)
    am5 = 0.3 * np.sin(tau)
    vec = (c0[:, None] + a2[:, None] * np.exp(2j * np.pi * 2 * t)[None, :]
           + am5[:, None] * np.exp(-2j * np.pi * 5 * t)[None, :])[..., None]
    s = Section(g, vec)
    zero, hi = mode_decompose(s)
    assert np.max(np.abs(zero[:, 0] - c0)) < 1e-12
    assert np.max(np.abs(hi.get(2)[:, 0] - a2)) < 1e-12
    assert np.max(np.abs(hi.get(-5)[:, 0] - am5)) < 1e-12
    assert np.max(np.abs(hi.get(3))) < 1e-14
    # Parseval per slice: mean_t |s|^2 = |a0|^2 + sum_k |a_k|^2
    lhs = np.mean(np.abs(vec[..., 0]) ** 2, axis=1)
    rhs = np.abs(c0) ** 2 + np.abs(a2) ** 2 + np.abs(am5) ** 2
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    back = recompose(zero, hi, g)
    assert np.max(np.abs(back.vec - vec)) < 1e-12


def test_modefield_kmax_truncates():
    g = _grid(n=1, n_t=64)
    t = g.t_samples()
    vec = np.exp(2j * np.pi * 20 * t)[None, :, None] * np.ones((g.n_tau, 1, 1))
    _, hi = mode_decompose(Section(g, vec), k_max=8)
    assert np.max(np.abs(hi.coeffs)) < 1e-14
    with pytest.raises(ValueError):
        ModeField(np.zeros((3, 16, 1), complex), np.arange(3.0), k_max=31)


def test_unit_norms_closed_form():
    g = _grid(-1.0, 1.0, 1 / 16, 32, 1)
    s = Section(g, np.full_like(g.values, 3.0 + 4.0j))
    w = weight_profile("Unit", None, g.tau)
    p = 4.0
    # |s| = 5 pointwise; integral over tau-span 2, t-span 1
    assert abs(norm_weighted_Lp(s, w, p) - 5.0 * 2 ** (1 / p)) < 1e-10
    assert abs(norm_weighted_W1p(s, w, p) - 5.0 * 2 ** (1 / p)) < 1e-10


def test_beta_weight_shape():
    pa = AdiabaticParams(eps=2.0**-5, l=1.0)
    L, te = pa.R, pa.tau_eps
    tau = np.linspace(-te - 3, te + 3, 4001)
    w = weight_profile("BetaDeltaEps", pa, tau)
    b = w.samples
    assert np.all(b >= 1.0 - 1e-12)
    # identically 1 beyond tau_eps
    assert np.max(np.abs(b[np.abs(tau) > te + 1e-9] - 1.0)) < 1e-12
    # power law at the center and exponential decay on the end segments
    assert abs(b[np.argmin(np.abs(tau))]
               - pa.eps ** (1 - pa.p + pa.delta)) < 1e-6 * b.max()
    mask = (tau > L + 1.0) & (tau < te)
    expo = np.exp(2 * np.pi * pa.delta * (te - tau[mask]))
    assert np.allclose(b[mask], expo, rtol=1e-12)
    # peak sits at the bridge, ratio to center value is (1+L)^delta
    grid_tau = np.arange(-np.ceil(te + 2), np.ceil(te + 2), 1 / 16)
    bg = weight_profile("BetaDeltaEps", pa, grid_tau).samples
    ratio = bg.max() / bg[np.argmin(np.abs(grid_tau))]
    assert abs(ratio - (1 + L) ** pa.delta) < 1e-2 * (1 + L) ** pa.delta
    # near-continuity of the exponential and power pieces at tau = L
    pw = pa.eps ** (1 - pa.p + pa.delta) * (1 + L) ** pa.delta
    ex = np.exp(2 * np.pi * pa.delta * (te - L))
    assert abs(ex / pw - 1.0) < 4 * pa.eps * (pa.p - 1)


def test_beta_no_jumps():
    pa = AdiabaticParams(eps=2.0**-4, l=1.0)
    tau = np.linspace(-pa.tau_eps - 2, pa.tau_eps + 2, 20001)
    b = weight_profile("BetaDeltaEps", pa, tau).samples
    rel_jump = np.abs(np.diff(b)) / b[:-1]
    # C^0 with bounded log-slope: finite differences stay O(h)
    assert rel_jump.max() < 8 * (tau[1] - tau[0])


def test_weight_validation():
    pa = AdiabaticParams(eps=0.25)
    with pytest.raises(ValueError):
        weight_profile("NotAKind", pa, np.zeros(3))


def _resolved_grid(pa, h=1 / 16, n_t=16, n=1):
    model = TargetModel.flat(n)
    half = np.ceil((pa.tau_eps + 1.0) / h) * h
    m = int(round(half / h))
    tau = h * np.arange(-m, m + 1)
    return CylinderGrid(tau, np.zeros((tau.size, n_t, n), complex), model)


def test_resolved_xi_norm_neck_zero_mode_oracle():
    pa = AdiabaticParams(eps=0.25, l=1.0)
    g = _resolved_grid(pa)
    L = pa.R
    # t-independent bump supported strictly inside the neck: tilde part = 0,
    # boundary values = 0, so the norm is the eps-scaled W^{1,p} by hand
    bump = np.exp(-((g.tau / (L / 3)) ** 2)) * np.maximum(0, 1 - (np.abs(g.tau) / (0.8 * L)) ** 8)
    bump[np.abs(g.tau) > 0.9 * L] = 0.0
    vec = bump[:, None, None] * np.ones((1, g.n_t, 1))
    s = Section(g, vec)
    total, comp = resolved_xi_norm(s, 0.0, pa, return_components=True)
    iL, imL = g.index_of_tau(L), g.index_of_tau(-L)
    sl = slice(imL, iL + 1)
    h = g.h_tau
    tw = np.full(g.tau[sl].size, h)
    tw[0] *= 0.5
    tw[-1] *= 0.5
    d = dtau_fd4(bump[:, None], h)[sl, 0]
    p = pa.p
    hand = (np.sum((pa.eps * np.abs(bump[sl]) ** p
                    + pa.eps ** (1 - p) * np.abs(d) ** p) * tw)) ** (1 / p)
    assert comp["boundary"] < 1e-12
    assert comp["tilde_W1p_beta"] < 1e-10 * total
    assert abs(comp["zero_W1p_eps"] - hand) < 1e-10 * hand
    assert abs(total - hand) < 1e-9 * hand


def test_resolved_norms_homogeneity_and_mu():
    pa = AdiabaticParams(eps=0.25, l=1.0)
    g = _resolved_grid(pa, n_t=16)
    rng = np.random.default_rng(3)
    vec = rng.standard_normal(g.values.shape) + 1j * rng.standard_normal(g.values.shape)
    s = Section(g, vec)
    n1 = resolved_xi_norm(s, 0.7, pa)
    n2 = resolved_xi_norm(2.0 * s, 1.4, pa)
    assert abs(n2 - 2 * n1) < 1e-9 * n1
    e1 = resolved_eta_norm(s, pa)
    e2 = resolved_eta_norm(3.0 * s, pa)
    assert abs(e2 - 3 * e1) < 1e-9 * e1
    with pytest.raises(GridTooShort):
        short = _grid(-1.0, 1.0, 1 / 16, 16, 1)
        resolved_xi_norm(Section(short, np.zeros_like(short.values)), 0.0, pa)


def test_resolved_eta_norm_pure_higher():
    pa = AdiabaticParams(eps=0.25, l=1.0)
    g = _resolved_grid(pa, n_t=16)
    t = g.t_samples()
    vec = (np.exp(-g.tau[:, None] ** 2) * np.cos(2 * np.pi * t)[None, :])[..., None]
    s = Section(g, vec.astype(complex))
    total, comp = resolved_eta_norm(s, pa, return_components=True)
    assert comp["zero_Lp_eps"] < 1e-12
    w = weight_profile("BetaDeltaEps", pa, g.tau)
    assert abs(total - norm_weighted_Lp(s, w, pa.p)) < 1e-12


def test_energy_closed_form():
    # u = A e^{2 pi (tau + i t)}: energy on [a,b] is 2 pi |A|^2 (e^{4 pi b} - e^{4 pi a})
    model = TargetModel.flat(1)
    A = 0.7 - 0.2j

    def fn(tt, t):
        return (A * np.exp(2 * np.pi * (tt + 1j * t)))[..., None]

    u = CylinderGrid.from_function(model, fn, -1.0, 0.5, 1 / 64, 64)
    a, b = -0.5, 0.25
    expect = 2 * np.pi * abs(A) ** 2 * (np.exp(4 * np.pi * b) - np.exp(4 * np.pi * a))
    got = energy_local(u, (a, b))
    assert abs(got - expect) / expect < 5e-3
    assert energy_local(u, (0.25, 0.25)) == 0.0


def test_energy_metric_aware():
    # constant-speed vertical line through the FS chart origin: |du|^2 shrinks
    model = TargetModel.projective(1)

    def fn(tt, t):
        return (tt + 0.0 * t).astype(complex)[..., None]

    u = CylinderGrid.from_function(model, fn, -0.5, 0.5, 1 / 64, 8)
    flat = CylinderGrid(u.tau, u.values, TargetModel.flat(1))
    assert energy_local(u, (-0.5, 0.5)) < energy_local(flat, (-0.5, 0.5))


def test_hausdorff_oracles():
    A = np.array([[0.0 + 0j]])
    B = np.array([[1.0 + 0j]])
    assert abs(hausdorff_distance(A, B) - 2.0) < 1e-14
    rng = np.random.default_rng(11)
    X = rng.standard_normal((17, 2)) + 1j * rng.standard_normal((17, 2))
    Y = rng.standard_normal((9, 2)) + 1j * rng.standard_normal((9, 2))
    D = np.linalg.norm(X[:, None] - Y[None, :], axis=-1)
    brute = D.min(axis=1).max() + D.min(axis=0).max()
    assert abs(hausdorff_distance(X, Y) - brute) < 1e-12
    assert hausdorff_distance(X, X) < 1e-14
    with pytest.raises(EmptySet):
        hausdorff_distance(np.zeros((0, 2)), Y)


def test_serialization_roundtrips(tmp_path):
    g = _grid(-1.0, 1.0, 1 / 8, 16, 2)
    rng = np.random.default_rng(5)
    g.values[:] = rng.standard_normal(g.values.shape) + 1j * rng.standard_normal(g.values.shape)
    f = tmp_path / "grid.npz"
    g.save_npz(f)
    g2 = CylinderGrid.load_npz(f)
    assert np.array_equal(g.values, g2.values)
    assert np.array_equal(g.tau, g2.tau)
    assert g2.model.kind == g.model.kind
    buf = io.StringIO()
    g.to_csv(buf)
    buf.seek(0)
    g3 = CylinderGrid.from_csv(buf, g.model)
    assert g.csv_roundtrip_equal(g3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 3.0))
def test_lp_norm_triangle_and_scaling(seed, c):
    g = _grid(-1.0, 1.0, 1 / 8, 16, 1)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(g.values.shape) + 1j * rng.standard_normal(g.values.shape)
    b = rng.standard_normal(g.values.shape) + 1j * rng.standard_normal(g.values.shape)
    w = weight_profile("Unit", None, g.tau)
    p = 4.0
    na = norm_weighted_Lp(Section(g, a), w, p)
    nb = norm_weighted_Lp(Section(g, b), w, p)
    nab = norm_weighted_Lp(Section(g, a + b), w, p)
    assert nab <= na + nb + 1e-9 * (na + nb)
    assert abs(norm_weighted_Lp(Section(g, c * a), w, p) - c * na) < 1e-9 * max(1, na)
