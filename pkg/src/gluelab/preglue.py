"""Adiabatic parameters and the pre-glued disk-flow-disk approximation.

The resolved cylinder carries five zones: two holomorphic disk ends
(translated by -/+ tau_eps), two one-unit chart bridges across |tau| in
[l/eps, l/eps + 1], and the renormalized gradient trajectory chi(eps tau)
on the neck |tau| <= l/eps.  Away from the bridges the pre-glued map solves
its zone equation exactly; the bridges carry the O(eps^..) gluing error that
the error sweep measures.
"""

from dataclasses import dataclass, field

import numpy as np

from . import cutoffs
from .cylinder import CylinderGrid, H_TAU_DEFAULT, N_T_DEFAULT
from .errors import ConfigInvalid
from .flow import solve_gradient_segment, flow_differential

TAU_CUT_DEFAULT = 2.2
END_AMPLITUDE_DEFAULT = 1e-8


@dataclass(frozen=True)
class AdiabaticParams:
    """The adiabatic scales: neck half-length R, logarithmic scale S, and the
    derived end-translation tau_eps and splice half-width T."""
    eps: float
    l: float = 1.0
    p: float = 4.0
    delta: float = 0.5

    def __post_init__(self):
        if not (0 < self.eps <= 1):
            raise ConfigInvalid("eps must lie in (0, 1]")
        if self.l <= 0:
            raise ConfigInvalid("l must be positive")
        if self.p <= 2:
            raise ConfigInvalid("p must exceed 2")
        if not (0 < self.delta < 1):
            raise ConfigInvalid("delta must lie in (0, 1)")

    @property
    def R(self):
        return self.l / self.eps

    @property
    def S(self):
        return np.log1p(self.l / self.eps) / (2.0 * np.pi)

    @property
    def tau_eps(self):
        return self.R + ((self.p - 1.0) / self.delta) * self.S

    @property
    def T(self):
        return ((self.p - 1.0) / self.delta) * self.S / 3.0


class HolomorphicEnd:
    """A holomorphic disk end p + A z^{sign} with z = e^{2 pi (tau + i t)}.

    sign=+1 is the right-hand (plus) end: the joint value p sits at
    tau -> -infinity and the disk body grows to the right.  sign=-1 mirrors.
    """

    def __init__(self, p, A, sign):
        if sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        self.p = np.asarray(p, dtype=complex)
        self.A = np.asarray(A, dtype=complex)
        if self.p.shape != self.A.shape:
            raise ValueError("p and A must have matching shapes")
        self.sign = int(sign)

    def eval(self, tau, t):
        """Broadcasts tau (..., 1) against t (1, ...); returns (..., n)."""
        z = np.exp(2.0 * np.pi * self.sign * (np.asarray(tau, dtype=float)
                                              + 1j * np.asarray(t, dtype=float)))
        return self.p + z[..., None] * self.A


@dataclass
class DfdConfig:
    """A disk-flow-disk scenario: target, Morse data, flow segment, disk ends,
    and the joint evaluation images used by transversality/matching."""
    model: object
    morse: object
    segment: object
    end_minus: HolomorphicEnd
    end_plus: HolomorphicEnd
    V_minus: np.ndarray
    V_plus: np.ndarray
    tau_cut: float = TAU_CUT_DEFAULT
    P: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.P is None:
            self.P = flow_differential(self.morse, self.segment)

    @property
    def p_minus(self):
        return self.end_minus.p

    @property
    def p_plus(self):
        return self.end_plus.p


def flat_toy(n=2, lam=None, x_start=None, l=1.0, amplitude=END_AMPLITUDE_DEFAULT,
             tau_cut=TAU_CUT_DEFAULT, seed=None):
    """The flat C^n scenario: quadratic Morse data, a finite gradient segment,
    and tiny holomorphic end perturbations.  Disk joint evaluations are
    surjective (holomorphic disks through a point realize every variation),
    so V_+- are full."""
    from .target import MorseData, TargetModel

    model = TargetModel.flat(n)
    lam = np.full(n, 1.0) if lam is None else np.asarray(lam, dtype=float)
    if x_start is None:
        x_start = np.full(n, 0.55 + 0.0j) / np.sqrt(n)
    morse = MorseData.quadratic(lam)
    seg = solve_gradient_segment(morse, x_start, l=l)
    p_minus = seg.eval(np.array([-l]))[0]
    p_plus = seg.eval(np.array([l]))[0]
    rng = np.random.default_rng(0 if seed is None else seed)
    phase = np.exp(2j * np.pi * rng.random(2 * n).reshape(2, n))
    A_minus = amplitude * phase[0]
    A_plus = amplitude * phase[1]
    em = HolomorphicEnd(p_minus, A_minus, -1)
    ep = HolomorphicEnd(p_plus, A_plus, +1)
    V = np.eye(2 * n)
    return DfdConfig(model, morse, seg, em, ep, V.copy(), V.copy(),
                     tau_cut=tau_cut)


def preglue_grid_tau(params, tau_cut=TAU_CUT_DEFAULT, h_tau=H_TAU_DEFAULT):
    """Symmetric uniform tau grid covering [-(tau_eps+tau_cut), +...] with
    endpoints on the h_tau lattice (so +-l/eps are grid nodes)."""
    half = np.ceil((params.tau_eps + tau_cut) / h_tau) * h_tau
    n_half = int(round(half / h_tau))
    return h_tau * np.arange(-n_half, n_half + 1)


def preglue(config, params, h_tau=H_TAU_DEFAULT, n_t=N_T_DEFAULT,
            use_transport=False):
    """Assemble the pre-glued approximation on the resolved cylinder.

    Zones (L = l/eps): disk ends for |tau| >= L+1 (translated by -+tau_eps),
    chi(eps tau) on |tau| <= L, and a smooth chart blend on the unit bridges.
    With use_transport=True the bridge blend interpolates along geodesics
    from the neck point instead of by chart arithmetic.
    """
    L = params.R
    te = params.tau_eps
    tau = preglue_grid_tau(params, config.tau_cut, h_tau)
    t = np.arange(n_t) * (1.0 / n_t)
    tt = tau[:, None]
    tg = t[None, :]
    seg = config.segment

    vals = np.empty((tau.size, n_t, config.model.n), dtype=complex)

    # neck + bridges share the trajectory values (segment margin covers the
    # extra eps-length past +-l)
    mid = np.abs(tau) <= L + 1.0 + 1e-12
    chi_vals = seg.eval(params.eps * tau[mid])          # (m, n)
    chi_block = np.broadcast_to(chi_vals[:, None, :],
                                (mid.sum(), n_t, config.model.n))

    right = tau >= L - 1e-12
    left = tau <= -L + 1e-12
    up = config.end_plus.eval(tt - te, tg)              # (n_tau, n_t, n)
    um = config.end_minus.eval(tt + te, tg)

    vals[mid] = chi_block
    k0 = cutoffs.kappa0(tau, L)
    for side, uend in ((right, up), (left, um)):
        bridge = side & mid
        w = k0[bridge][:, None, None]
        chi_b = vals[bridge]
        if use_transport and not config.model.is_flat:
            out = np.empty_like(chi_b)
            for a in range(chi_b.shape[0]):
                for b in range(n_t):
                    v = config.model.log_map(chi_b[a, b], uend[bridge][a, b])
                    out[a, b] = config.model.exp_map(
                        chi_b[a, b], (1.0 - w[a, 0, 0]) * v)
            vals[bridge] = out
        else:
            vals[bridge] = w * chi_b + (1.0 - w) * uend[bridge]
        far = side & ~mid
        vals[far] = uend[far]

    return CylinderGrid(tau, vals, config.model, period_t=1.0)
