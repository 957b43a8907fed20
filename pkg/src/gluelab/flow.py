"""Gradient segments, linearized flow, transversality, and index arithmetic.

Sign convention: chi' = -grad f everywhere.  The linearized flow is
a' + A(tau) a = 0 with A = D(grad f) along chi; its adjoint pairing partner
solves b' - A(tau)^T b = 0, so <P a, P^adj b> = <a, b> exactly.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ChartExceeded, DegenerateBasis

TOL_RANK = 1e-8
TOL_ODE = 1e-6
TOL_DET = 1e-12


# complex <-> real representation helpers ------------------------------------

def creal_matrix(M):
    """Real 2n x 2n representation of a complex-linear (n, n) matrix."""
    M = np.asarray(M, dtype=complex)
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def creal_vec(v):
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag], axis=-1)


def real_vec_to_cplx(r):
    r = np.asarray(r, dtype=float)
    n = r.shape[-1] // 2
    return r[..., :n] + 1j * r[..., n:]


# gradient segments ----------------------------------------------------------

class GradientSegment:
    """A finite negative-gradient trajectory chi on [-l, l] (with margin)."""

    def __init__(self, l, morse, eval_fn, deriv_fn, n_per_unit=64, margin=1.0):
        self.l = float(l)
        self.morse = morse
        self.margin = float(margin)
        self._eval = eval_fn
        self._deriv = deriv_fn
        m = max(2, int(round(2 * l * n_per_unit)))
        self.tau = np.linspace(-l, l, m + 1)
        self.samples = self.eval(self.tau)

    def eval(self, tau):
        return self._eval(np.asarray(tau, dtype=float))

    def deriv(self, tau):
        return self._deriv(np.asarray(tau, dtype=float))

    def residual_sup(self):
        # chi' + grad f(chi) should vanish along the trajectory
        r = self.deriv(self.tau) + np.array([self.morse.grad_f(x) for x in self.samples])
        return float(np.max(np.abs(r)))


def solve_gradient_segment(morse, x_start, l, n_per_unit=64, margin=1.0,
                           chart_radius=np.inf):
    """Negative gradient flow with chi(-l) = x_start, defined on
    [-l - margin, l + margin].  Quadratic Morse data uses the closed form."""
    x0 = np.asarray(x_start, dtype=complex)
    if hasattr(morse, "lam"):
        lam, c = morse.lam, morse.center

        def ev(tau):
            tau = np.asarray(tau, dtype=float)
            return c + np.exp(-lam * (tau[..., None] + l)) * (x0 - c)

        def dv(tau):
            tau = np.asarray(tau, dtype=float)
            return -lam * np.exp(-lam * (tau[..., None] + l)) * (x0 - c)

        seg = GradientSegment(l, morse, ev, dv, n_per_unit, margin)
    else:
        h = 1.0 / n_per_unit
        lo, hi = -l - margin, l + margin
        n_fwd = int(round((hi - (-l)) / h))
        n_bwd = int(round(((-l) - lo) / h))

        def rk4(x, sgn, steps):
            out = [x]
            for _ in range(steps):
                f = lambda y: -sgn * np.asarray(morse.grad_f(y))
                k1 = f(x)
                k2 = f(x + 0.5 * h * k1)
                k3 = f(x + 0.5 * h * k2)
                k4 = f(x + h * k3)
                x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                out.append(x)
            return np.asarray(out)

        fwd = rk4(x0, 1.0, n_fwd)
        bwd = rk4(x0, -1.0, n_bwd)
        tau_full = np.concatenate([lo + h * np.arange(n_bwd + 1),
                                   -l + h * np.arange(1, n_fwd + 1)])
        vals = np.concatenate([bwd[::-1], fwd[1:]], axis=0)
        if np.max(np.abs(vals)) > chart_radius:
            raise ChartExceeded("gradient trajectory leaves the chart")
        sp = CubicSpline(tau_full, vals, axis=0)
        seg = GradientSegment(l, morse, sp, sp.derivative(), n_per_unit, margin)
    return seg


def flow_differential(morse, seg, n_per_unit=64):
    """Time-2l linearization P of the flow along seg: solves P' + A(tau) P = 0
    on [-l, l] with P(-l) = I, in the real 2n x 2n representation."""
    if hasattr(morse, "lam"):
        return creal_matrix(np.diag(np.exp(-2.0 * seg.l * morse.lam)))
    return _flow_matrix(morse, seg, n_per_unit, adjoint=False)


def adjoint_flow_differential(morse, seg, n_per_unit=64):
    """Solves P' - A(tau)^T P = 0, P(-l) = I: the pairing partner with
    <P a, P_adj b> = <a, b>."""
    if hasattr(morse, "lam"):
        return creal_matrix(np.diag(np.exp(2.0 * seg.l * morse.lam)))
    return _flow_matrix(morse, seg, n_per_unit, adjoint=True)


def _flow_matrix(morse, seg, n_per_unit, adjoint):
    l = seg.l
    h = 1.0 / n_per_unit
    steps = int(round(2 * l / h))
    n2 = creal_vec(seg.eval(np.array([0.0]))[0]).size
    P = np.eye(n2)
    tau = -l
    for _ in range(steps):
        def rhs(t, M):
            A = creal_matrix(np.asarray(morse.hess_grad_f(seg.eval(np.array([t]))[0])))
            return (A.T @ M) if adjoint else (-A @ M)
        k1 = rhs(tau, P)
        k2 = rhs(tau + 0.5 * h, P + 0.5 * h * k1)
        k3 = rhs(tau + 0.5 * h, P + 0.5 * h * k2)
        k4 = rhs(tau + h, P + h * k3)
        P = P + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tau += h
    return P


# joints, transversality, index ----------------------------------------------

@dataclass
class JointData:
    V_minus: np.ndarray      # (2n, d-) basis of the minus evaluation image
    V_plus: np.ndarray       # (2n, d+) basis
    P: np.ndarray            # (2n, 2n) time-2l flow differential
    p_minus: np.ndarray = field(default=None)
    p_plus: np.ndarray = field(default=None)

    def __post_init__(self):
        if abs(np.linalg.det(self.P)) < TOL_DET:
            raise DegenerateBasis("flow differential is singular")


def _rank(M, tol=TOL_RANK):
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s[0] > 0 else 0


def dfd_transversality(j):
    """Transversality of the configuration: P V- + V+ = R^{2n}."""
    for V in (j.V_minus, j.V_plus):
        if V.shape[1] > 0 and _rank(V) < V.shape[1]:
            raise DegenerateBasis("subspace basis is rank deficient")
    n2 = j.P.shape[0]
    stacked = np.hstack([j.P @ j.V_minus, j.V_plus])
    r = _rank(stacked)
    ker_corr = j.V_minus.shape[1] + j.V_plus.shape[1] - r
    return {"transversal": r == n2, "coker_dim": n2 - r, "ker_correction": ker_corr}


def fredholm_index(mu_minus, mu_plus, c1_minus, c1_plus, family=False):
    idx = mu_minus - mu_plus + 2 * c1_minus + 2 * c1_plus
    return idx + 1 if family else idx


def dim_identity_check(A, B, n):
    """dim(A x B + Delta) in R^n + R^n, against both candidate identities."""
    A = np.asarray(A, dtype=float).reshape(n, -1)
    B = np.asarray(B, dtype=float).reshape(n, -1)
    top = np.hstack([A, np.zeros_like(B), np.eye(n)])
    bot = np.hstack([np.zeros_like(A), B, np.eye(n)])
    lhs = _rank(np.vstack([top, bot]))
    dim_sum = _rank(np.hstack([A, B]))
    dim_int = _rank(A) + _rank(B) - dim_sum
    return {"lhs": lhs, "rhs_plus": n + dim_sum, "rhs_minus_variant": n + dim_int}


def immersion_check(u, node, tol_rank=TOL_RANK):
    """Rank-2 test of the discrete differential at an interior grid node."""
    i, j = node
    if not (0 < i < u.n_tau - 1):
        raise ValueError("node must be interior in tau")
    h = u.h_tau
    dt = u.period_t / u.n_t
    du_tau = (u.values[i + 1, j] - u.values[i - 1, j]) / (2 * h)
    du_t = (u.values[i, (j + 1) % u.n_t] - u.values[i, (j - 1) % u.n_t]) / (2 * dt)
    D = np.vstack([creal_vec(du_tau), creal_vec(du_t)])
    s = np.linalg.svd(D, compute_uv=False)
    scale = max(s[0], 1e-300)
    return bool(s[0] > 0 and s[1] / scale > tol_rank)


# finite-dimensional index experiment ----------------------------------------

def toy_index_experiment(mu_minus, mu_plus, c1_minus, c1_plus, n, n_nodes=12,
                         seed=0, tol=TOL_RANK):
    """Dense SVD index of a discretized disk-flow-disk operator.

    Each disk is a first-order difference operator on n_nodes+1 nodes of
    R^{2n} with enough boundary rows at its free end to realize the disk
    index n +/- mu + 2 c1; the joint evaluations are coupled through an
    invertible flow matrix P.  Returns the SVD index and the closed formula.
    """
    rng = np.random.default_rng(seed)
    n2 = 2 * n
    ind_m = n + mu_minus + 2 * c1_minus
    ind_p = n - mu_plus + 2 * c1_plus
    for ind in (ind_m, ind_p):
        if not 0 <= ind <= n2:
            raise ValueError("disk index %d outside [0, %d] for this toy" % (ind, n2))

    def disk_block(ind, joint_at_end):
        N = n_nodes
        h = 1.0 / N
        cols = (N + 1) * n2
        rows = []
        for j in range(N):
            row = np.zeros((n2, cols))
            A = 0.3 * rng.standard_normal((n2, n2))
            row[:, (j + 1) * n2:(j + 2) * n2] = np.eye(n2)
            row[:, j * n2:(j + 1) * n2] = -(np.eye(n2) + h * A)
            rows.append(row)
        b = n2 - ind
        if b > 0:
            bc = np.zeros((b, cols))
            pos = 0 if joint_at_end else N  # conditions at the non-joint end
            bc[:, pos * n2:(pos + 1) * n2] = rng.standard_normal((b, n2))
            rows.append(bc)
        ev = np.zeros((n2, cols))
        jpos = N if joint_at_end else 0
        ev[:, jpos * n2:(jpos + 1) * n2] = np.eye(n2)
        return np.vstack(rows), ev

    Dm, ev_m = disk_block(ind_m, joint_at_end=True)
    Dp, ev_p = disk_block(ind_p, joint_at_end=False)
    P = np.linalg.qr(rng.standard_normal((n2, n2)))[0] + 0.1 * np.eye(n2)
    cm, cp = Dm.shape[1], Dp.shape[1]
    M = np.zeros((Dm.shape[0] + Dp.shape[0] + n2, cm + cp))
    M[:Dm.shape[0], :cm] = Dm
    M[Dm.shape[0]:Dm.shape[0] + Dp.shape[0], cm:] = Dp
    M[-n2:, :cm] = P @ ev_m
    M[-n2:, cm:] = -ev_p
    r = _rank(M, tol)
    ker = M.shape[1] - r
    coker = M.shape[0] - r
    return {
        "index_svd": ker - coker,
        "index_formula": fredholm_index(mu_minus, mu_plus, c1_minus, c1_plus),
        "dim_ker": ker,
        "dim_coker": coker,
    }
