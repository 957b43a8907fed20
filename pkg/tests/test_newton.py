import numpy as np
import pytest

from gluelab.cylinder import Section
from gluelab.errors import HypothesisFailed
from gluelab.inverse import ApproxInverse, smooth_probe
from gluelab.newton import (F_eval, glue, newton_solve, quadratic_probe,
                            reparametrize_neck)
from gluelab.preglue import AdiabaticParams, flat_toy, preglue
from gluelab.target import MorseData


@pytest.fixture(scope="module")
def setup4():
    pa = AdiabaticParams(eps=2.0 ** -4)
    cfg = flat_toy()
    u_app = preglue(cfg, pa)
    Q = ApproxInverse(cfg, pa, u_app)
    return pa, cfg, u_app, Q


def test_exact_solution_zero_iterations():
    pa = AdiabaticParams(eps=2.0 ** -4)
    cfg = flat_toy(x_start=np.zeros(2, dtype=complex), amplitude=0.0)
    u_app = preglue(cfg, pa)
    u_glue, mu, rep = newton_solve(cfg, pa, u_app=u_app)
    assert rep.iterations == 0
    assert rep.initial_residual == 0.0
    assert mu == 0.0
    assert np.array_equal(u_glue.values, u_app.values)


def test_flat_toy_fine_scale_convergence():
    pa = AdiabaticParams(eps=2.0 ** -7)
    cfg = flat_toy()
    u_glue, mu, rep = newton_solve(cfg, pa)
    assert rep.iterations <= 6
    assert rep.final_residual < 1e-10
    assert abs(mu) < 1e-3
    # corrected map actually solves the equation on its own grid
    u_app = preglue(cfg, pa)
    assert rep.initial_residual > 1e-3  # the problem was not already solved


def test_distance_bound_and_envelope(setup4):
    pa, cfg, u_app, Q = setup4
    u_glue, mu, rep = newton_solve(cfg, pa, u_app=u_app, Q=Q)
    # triangle inequality over steps dominates the distance moved
    assert sum(rep.step_norms) <= 2.0 * rep.C_used * rep.initial_residual
    assert all(np.isfinite(r) for r in rep.quadratic_ratios)
    # residuals drop monotonically (damped-quadratic envelope, affine case)
    assert rep.final_residual < 1e-6 * rep.initial_residual


def test_uniqueness_shadow(setup4):
    pa, cfg, u_app, Q = setup4
    rng = np.random.default_rng(11)
    finals = []
    for _ in range(2):
        pert = 1e-3 * smooth_probe(u_app, rng).vec
        u_glue, mu, rep = newton_solve(cfg, pa, u_app=u_app, Q=Q,
                                       x0_perturbation=pert)
        assert rep.final_residual < 1e-12
        finals.append((u_glue.values.copy(), mu))
    diff = np.abs(finals[0][0] - finals[1][0]).max()
    assert diff < 1e-8
    assert abs(finals[0][1] - finals[1][1]) < 1e-8


def test_hypothesis_gate_rejects_large_residual(setup4):
    pa, cfg, u_app, Q = setup4
    rng = np.random.default_rng(5)
    pert = 50.0 * smooth_probe(u_app, rng).vec
    with pytest.raises(HypothesisFailed):
        newton_solve(cfg, pa, u_app=u_app, Q=Q, x0_perturbation=pert,
                     kappa=1.0, C_used=2.0)


def test_reparametrize_roundtrip(setup4):
    pa, cfg, u_app, Q = setup4
    mu = 0.02
    back = reparametrize_neck(reparametrize_neck(u_app, pa, mu), pa, -mu)
    assert np.abs(back.values - u_app.values).max() < 1e-4
    # below the activation threshold the map is the identity
    same = reparametrize_neck(u_app, pa, 1e-15)
    assert same is u_app


def test_quadratic_probe_affine_is_tiny(setup4):
    pa, cfg, u_app, Q = setup4
    out = quadratic_probe(u_app, pa, cfg.morse, pairs=3,
                          segment=cfg.segment, seed=1)
    assert out["max_constant"] < 1e-6


def _cubic_morse(alpha=0.4):
    lam = np.ones(2)

    def f(x):
        x = np.asarray(x, dtype=complex)
        return 0.5 * np.sum(np.abs(x) ** 2, axis=-1)

    def grad(x):
        x = np.asarray(x, dtype=complex)
        return lam * x + alpha * x ** 2

    def hess(x):
        x = np.asarray(x, dtype=complex)
        return np.diag(lam + 2.0 * alpha * x).astype(complex)

    return MorseData(f, grad, hess, critical_points=[(np.zeros(2, complex), 0)])


def test_quadratic_probe_scaling(setup4):
    pa, cfg, u_app, Q = setup4
    morse = _cubic_morse()
    big = quadratic_probe(u_app, pa, morse, pairs=4, seed=2,
                          scale=1e-2)["max_constant"]
    small = quadratic_probe(u_app, pa, morse, pairs=4, seed=2,
                            scale=5e-3)["max_constant"]
    assert big > 1e-6  # genuinely nonlinear
    # normalized constant is scale-free for a quadratic nonlinearity
    assert abs(big - small) <= 0.2 * big


def test_quadratic_probe_uniform_in_eps():
    cfg = flat_toy()
    consts = []
    for e in (4, 7):
        pa = AdiabaticParams(eps=2.0 ** -e)
        u_app = preglue(cfg, pa)
        consts.append(quadratic_probe(u_app, pa, cfg.morse, pairs=3,
                                      segment=cfg.segment,
                                      seed=0)["max_constant"])
    floor = 1e-7
    if min(consts) > floor:
        assert consts[0] / consts[1] < 2.0
    else:
        assert max(consts) < floor


def test_glue_provenance(setup4):
    pa, cfg, u_app, Q = setup4
    u_glue = glue(cfg, pa, Q=Q)
    prov = u_glue.provenance
    assert prov["eps"] == pa.eps
    assert prov["report"]["final_residual"] < 1e-10
    assert prov["report"]["iterations"] <= 6


def test_report_serializes(setup4):
    import json
    pa, cfg, u_app, Q = setup4
    _, _, rep = newton_solve(cfg, pa, u_app=u_app, Q=Q)
    s = json.dumps(rep.as_dict())
    assert "final_residual" in s
