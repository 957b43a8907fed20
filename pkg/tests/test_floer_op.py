import numpy as np
import pytest

from gluelab.cylinder import Section, mode_decompose
from gluelab.floer_op import dbar_evaluate, error_norm, linearize
from gluelab.preglue import AdiabaticParams, flat_toy, preglue
from gluelab.target import MorseData


@pytest.fixture(scope="module")
def setup4():
    pa = AdiabaticParams(eps=2.0 ** -4)
    cfg = flat_toy()
    u = preglue(cfg, pa)
    return pa, cfg, u


def test_residual_supported_on_bridges(setup4):
    pa, cfg, u = setup4
    r = np.abs(dbar_evaluate(u, pa, cfg.morse).vec).max(axis=(1, 2))
    L = pa.R
    bridges = (np.abs(u.tau) >= L - 1e-9) & (np.abs(u.tau) <= L + 1 + 1e-9)
    # away from the two unit bridges only finite-difference truncation
    # remains, two orders below the genuine gluing error on the bridges
    assert r[~bridges].max() < 1e-2 * r[bridges].max()
    assert r[bridges].max() > 1e-3  # the gluing error genuinely lives there


def test_constant_critical_map_is_solution():
    pa = AdiabaticParams(eps=2.0 ** -4)
    cfg = flat_toy(x_start=np.zeros(2, dtype=complex), amplitude=0.0)
    u = preglue(cfg, pa)
    assert error_norm(u, pa, cfg.morse) == 0.0


def test_bridge_residual_linear_in_eps():
    cfg = flat_toy()
    maxima = []
    for e in (4, 5):
        pa = AdiabaticParams(eps=2.0 ** -e)
        u = preglue(cfg, pa)
        maxima.append(np.abs(dbar_evaluate(u, pa, cfg.morse).vec).max())
    assert maxima[1] < 0.75 * maxima[0]


def test_error_norm_scaling_quarter_power():
    cfg = flat_toy()
    es, ns = [], []
    for e in (3, 4, 5):
        pa = AdiabaticParams(eps=2.0 ** -e)
        u = preglue(cfg, pa)
        es.append(np.log(pa.eps))
        ns.append(np.log(error_norm(u, pa, cfg.morse)))
    slope = np.polyfit(es, ns, 1)[0]
    assert 0.1 < slope < 0.4  # ~ eps^{1/p} with p = 4


def test_linearize_single_mode_closed_form(setup4):
    pa, cfg, u = setup4
    op = linearize(u, pa, cfg.morse, cfg.segment)
    t = u.t_samples()
    for k in (1, -3):
        for j in range(u.n):
            xi = np.zeros((u.n_tau, u.n_t, u.n), dtype=complex)
            xi[:, :, j] = np.exp(2j * np.pi * k * t)[None, :]
            got = op.apply(xi)
            lam = pa.eps * cfg.morse.lam[j]
            expect = (-2.0 * np.pi * k + op.kap[:, None] * lam) * xi[:, :, j]
            assert np.abs(got[:, :, j] - expect).max() < 1e-10
            got[:, :, j] = 0.0
            assert np.abs(got).max() < 1e-12


def test_linearize_is_linear(setup4):
    pa, cfg, u = setup4
    op = linearize(u, pa, cfg.morse, cfg.segment)
    rng = np.random.default_rng(0)
    shape = (u.n_tau, u.n_t, u.n)
    x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    y = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    lhs = op.apply(2.0 * x - 0.5j * y)
    rhs = 2.0 * op.apply(x) - 0.5j * op.apply(y)
    assert np.abs(lhs - rhs).max() < 1e-12 * max(1.0, np.abs(rhs).max())


def test_mode_invariance_zero_block(setup4):
    pa, cfg, u = setup4
    op = linearize(u, pa, cfg.morse, cfg.segment)
    rng = np.random.default_rng(1)
    shape = (u.n_tau, u.n_t, u.n)
    xi = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    xi -= xi.mean(axis=1, keepdims=True)  # strip the zero mode
    zero, _ = mode_decompose(Section(u, op.apply(xi)))
    assert np.abs(zero).max() < 1e-10


def test_linearization_consistency_slope(setup4):
    pa, cfg, u = setup4

    def grad(x):
        x = np.asarray(x, dtype=complex)
        return x + 0.3 * x ** 2

    def hess(x):
        x = np.asarray(x, dtype=complex)
        return np.diag(1.0 + 0.6 * x).astype(complex)

    morse = MorseData(lambda x: 0.0, grad, hess)
    op = linearize(u, pa, morse, cfg.segment)
    rng = np.random.default_rng(2)
    shape = (u.n_tau, u.n_t, u.n)
    xi = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    F0 = dbar_evaluate(u, pa, morse).vec
    errs, hs = [], [1e-2, 5e-3, 2.5e-3]
    for h in hs:
        up = u.copy()
        up.values = u.values + h * xi
        diff = (dbar_evaluate(up, pa, morse).vec - F0) / h
        errs.append(np.abs(diff - op.apply(xi)).max())
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 0.9
