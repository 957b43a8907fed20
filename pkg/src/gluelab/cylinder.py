"""Discrete cylinder maps/sections, per-slice Fourier modes, weights, norms.

A grid holds values u(tau_i, t_j) in a chart, complex shape (n_tau, n_t, n).
t is sampled uniformly on [0, period_t); tau on a uniform grid with step
h_tau.  tau-derivatives are 4th-order finite differences (one-sided at the
ends), t-derivatives are spectral.
"""

import csv

import numpy as np

from . import cutoffs
from .errors import EmptySet, GridTooShort, ShapeMismatch

N_T_DEFAULT = 64
K_MAX_DEFAULT = 31
H_TAU_DEFAULT = 1.0 / 16.0
SERIAL_VERSION = 1


class CylinderGrid:
    def __init__(self, tau, values, model, period_t=1.0):
        tau = np.asarray(tau, dtype=float)
        values = np.asarray(values, dtype=complex)
        if values.ndim != 3 or values.shape[0] != tau.size:
            raise ShapeMismatch("values must be (n_tau, n_t, n)")
        if tau.size >= 2:
            steps = np.diff(tau)
            if not np.allclose(steps, steps[0], rtol=0, atol=1e-10 * max(1.0, abs(steps[0]))):
                raise ValueError("tau grid must be uniform")
        self.tau = tau
        self.values = values
        self.model = model
        self.period_t = float(period_t)

    @property
    def n_tau(self):
        return self.tau.size

    @property
    def n_t(self):
        return self.values.shape[1]

    @property
    def n(self):
        return self.values.shape[2]

    @property
    def h_tau(self):
        return float(self.tau[1] - self.tau[0])

    def t_samples(self):
        return np.arange(self.n_t) * (self.period_t / self.n_t)

    def index_of_tau(self, tau_value, tol=1e-8):
        i = int(np.argmin(np.abs(self.tau - tau_value)))
        if abs(self.tau[i] - tau_value) > tol * max(1.0, abs(tau_value)):
            raise ValueError("tau=%g is not a grid node" % tau_value)
        return i

    @classmethod
    def from_function(cls, model, fn, tau_min, tau_max, h_tau=H_TAU_DEFAULT,
                      n_t=N_T_DEFAULT, period_t=1.0):
        n_tau = int(round((tau_max - tau_min) / h_tau)) + 1
        tau = tau_min + h_tau * np.arange(n_tau)
        t = np.arange(n_t) * (period_t / n_t)
        vals = fn(tau[:, None], t[None, :])
        vals = np.asarray(vals, dtype=complex)
        if vals.ndim == 2:  # t-independent scalar field per coordinate came back
            raise ShapeMismatch("fn must return (n_tau, n_t, n)")
        return cls(tau, vals, model, period_t)

    def copy(self):
        return CylinderGrid(self.tau.copy(), self.values.copy(), self.model, self.period_t)

    # serialization ----------------------------------------------------------

    def save_npz(self, path):
        np.savez_compressed(
            path, version=SERIAL_VERSION, tau=self.tau, values=self.values,
            period_t=self.period_t, kind=self.model.kind, n=self.model.n,
            chart_radius=self.model.chart_radius)

    @classmethod
    def load_npz(cls, path):
        from .target import TargetModel
        with np.load(path, allow_pickle=False) as d:
            if int(d["version"]) != SERIAL_VERSION:
                raise ValueError("unsupported dump version %s" % d["version"])
            model = TargetModel(int(d["n"]), str(d["kind"]), float(d["chart_radius"]))
            return cls(d["tau"], d["values"], model, float(d["period_t"]))

    def to_csv(self, fh):
        w = csv.writer(fh)
        header = ["tau", "t_index"]
        for i in range(self.n):
            header += ["re%d" % i, "im%d" % i]
        w.writerow(header)
        for i, tv in enumerate(self.tau):
            for j in range(self.n_t):
                row = [repr(float(tv)), j]
                for c in range(self.n):
                    z = self.values[i, j, c]
                    row += [repr(float(z.real)), repr(float(z.imag))]
                w.writerow(row)

    @classmethod
    def from_csv(cls, fh, model, period_t=1.0):
        r = csv.reader(fh)
        header = next(r)
        n = (len(header) - 2) // 2
        taus, rows = [], []
        for row in r:
            taus.append(float(row[0]))
            rows.append([complex(float(row[2 + 2 * c]), float(row[3 + 2 * c]))
                        for c in range(n)])
        taus = np.asarray(taus)
        tau = np.unique(taus)
        n_t = taus.size // tau.size
        values = np.asarray(rows, dtype=complex).reshape(tau.size, n_t, n)
        return cls(tau, values, model, period_t)

    def csv_roundtrip_equal(self, other):
        return (np.array_equal(self.tau, other.tau)
                and np.array_equal(self.values, other.values))


class Section:
    """Tangent-valued field over a grid; flat chart representation."""

    def __init__(self, base, vec):
        vec = np.asarray(vec, dtype=complex)
        if vec.shape != base.values.shape:
            raise ShapeMismatch("section shape %s != grid %s" % (vec.shape, base.values.shape))
        self.base = base
        self.vec = vec

    @classmethod
    def zero(cls, base):
        return cls(base, np.zeros_like(base.values))

    def __add__(self, other):
        return Section(self.base, self.vec + other.vec)

    def __sub__(self, other):
        return Section(self.base, self.vec - other.vec)

    def __mul__(self, c):
        return Section(self.base, self.vec * c)

    __rmul__ = __mul__

    def copy(self):
        return Section(self.base, self.vec.copy())


# derivatives ----------------------------------------------------------------

def dtau_fd4(values, h):
    """4th-order finite difference along axis 0; one-sided at the ends."""
    v = np.asarray(values)
    if v.shape[0] < 5:
        raise GridTooShort("need at least 5 tau nodes for 4th-order differences")
    d = np.empty_like(v)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    d[0] = (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h)
    d[1] = (-3 * v[0] - 10 * v[1] + 18 * v[2] - 6 * v[3] + v[4]) / (12 * h)
    d[-1] = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * h)
    d[-2] = (3 * v[-1] + 10 * v[-2] - 18 * v[-3] + 6 * v[-4] - v[-5]) / (12 * h)
    return d


def dt_spectral(values, period=1.0):
    """Spectral derivative along axis 1 (the circle direction)."""
    v = np.asarray(values, dtype=complex)
    n_t = v.shape[1]
    k = np.fft.fftfreq(n_t, d=1.0 / n_t)  # integer wave numbers
    vh = np.fft.fft(v, axis=1)
    vh *= (2j * np.pi * k / period)[None, :, None]
    return np.fft.ifft(vh, axis=1)


# mode decomposition ---------------------------------------------------------

class ModeField:
    """Per-slice Fourier coefficients a_k(tau), stored in FFT layout.

    Reconstruction convention: s(tau, t) = sum_k a_k(tau) e^{2 pi i k t/period}.
    Coefficients with |k| > K_max are zeroed (aliasing guard n_t >= 2 K_max + 2).
    """

    def __init__(self, coeffs, tau, period_t=1.0, k_max=K_MAX_DEFAULT):
        coeffs = np.asarray(coeffs, dtype=complex)
        n_t = coeffs.shape[1]
        if n_t < 2 * k_max + 2:
            raise ValueError("n_t=%d too small for K_max=%d" % (n_t, k_max))
        k = np.rint(np.fft.fftfreq(n_t, d=1.0 / n_t)).astype(int)
        coeffs = coeffs.copy()
        coeffs[:, np.abs(k) > k_max, :] = 0.0
        self.coeffs = coeffs
        self.tau = np.asarray(tau, dtype=float)
        self.period_t = float(period_t)
        self.k_max = int(k_max)
        self._k = k

    @property
    def k_values(self):
        return self._k

    def get(self, k):
        idx = np.nonzero(self._k == k)[0]
        if idx.size != 1:
            raise KeyError("mode %d not represented" % k)
        return self.coeffs[:, idx[0], :]

    def set(self, k, a):
        idx = np.nonzero(self._k == k)[0][0]
        self.coeffs[:, idx, :] = a

    def recompose(self, base):
        return Section(base, np.fft.ifft(self.coeffs * base.n_t, axis=1))

    def copy(self):
        return ModeField(self.coeffs.copy(), self.tau, self.period_t, self.k_max)


def mode_decompose(s, k_max=K_MAX_DEFAULT):
    """Split a section into its per-slice average and the higher modes."""
    vh = np.fft.fft(s.vec, axis=1) / s.base.n_t
    zero = vh[:, 0, :].copy()
    vh[:, 0, :] = 0.0
    return zero, ModeField(vh, s.base.tau, s.base.period_t, k_max)


def recompose(zero, higher, base):
    s = higher.recompose(base)
    return Section(base, s.vec + zero[:, None, :])


# weights --------------------------------------------------------------------

class WeightProfile:
    KINDS = ("Unit", "BetaDeltaEps", "RhoEps", "GeometricEps", "ExponentialEnd")

    def __init__(self, kind, params, samples):
        if kind not in self.KINDS:
            raise ValueError("unknown weight kind %r" % kind)
        samples = np.asarray(samples, dtype=float)
        if np.any(samples <= 0):
            raise ValueError("weight must be positive")
        self.kind = kind
        self.params = params
        self.samples = samples


def beta_profile(tau, params):
    """The glued power/exponential weight on the resolved cylinder.

    Pieces: 1 beyond |tau| = tau_eps; exponential e^{2 pi delta (tau_eps - |tau|)}
    on the end segments; the scaled power weight eps^{1-p+delta}(1+|tau|)^delta
    on the neck; smooth convex bridges across |tau| in [l/eps, l/eps + 1].
    """
    tau = np.asarray(tau, dtype=float)
    eps, l, p, dl = params.eps, params.l, params.p, params.delta
    L, te = l / eps, params.tau_eps
    at = np.abs(tau)
    power = eps ** (1.0 - p + dl) * (1.0 + at) ** dl
    # the exponential branch is only selected for |tau| >= l/eps; clamp the
    # exponent there so the unselected entries cannot overflow
    expo = np.exp(2.0 * np.pi * dl * np.minimum(te - at, te - L))
    k0 = cutoffs.kappa0(tau, L)
    out = np.ones_like(tau)
    out = np.where(at <= te, expo, out)
    bridge = k0 * power + (1.0 - k0) * expo
    out = np.where(at < L + 1.0, bridge, out)
    out = np.where(at <= L, power, out)
    return out


def weight_profile(kind, params, tau):
    tau = np.asarray(tau, dtype=float)
    if kind == "Unit":
        s = np.ones_like(tau)
    elif kind == "BetaDeltaEps":
        s = beta_profile(tau, params)
    elif kind == "RhoEps":
        s = params.eps ** (1.0 - params.p + params.delta) * (1.0 + np.abs(tau)) ** params.delta
    elif kind == "GeometricEps":
        s = np.full_like(tau, params.eps)
    elif kind == "ExponentialEnd":
        s = np.exp(2.0 * np.pi * params.delta * np.abs(tau) / params.p)
    else:
        raise ValueError("unknown weight kind %r" % kind)
    return WeightProfile(kind, params, s)


# norms ----------------------------------------------------------------------

def _trapz_weights(tau):
    w = np.full(tau.size, tau[1] - tau[0] if tau.size > 1 else 1.0)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _abs2(vec):
    return np.sum(np.abs(vec) ** 2, axis=-1)


def norm_weighted_Lp(s, w, p):
    """(∫∫ |s|^p w(tau) dt dtau)^(1/p); exact t-sum, trapezoid in tau."""
    base = s.base
    dens = _abs2(s.vec) ** (p / 2.0)
    dt = base.period_t / base.n_t
    per_tau = dens.sum(axis=1) * dt
    return float(np.sum(per_tau * w.samples * _trapz_weights(base.tau))) ** (1.0 / p)


def norm_weighted_W1p(s, w, p):
    """Weighted norm of (|s|^p + |ds|^p) with ds the full first derivative."""
    base = s.base
    st = dt_spectral(s.vec, base.period_t)
    sta = dtau_fd4(s.vec, base.h_tau)
    grad2 = _abs2(sta) + _abs2(st)
    dens = _abs2(s.vec) ** (p / 2.0) + grad2 ** (p / 2.0)
    dt = base.period_t / base.n_t
    per_tau = dens.sum(axis=1) * dt
    return float(np.sum(per_tau * w.samples * _trapz_weights(base.tau))) ** (1.0 / p)


def _zero_mode_resolved(s, params):
    """The resolved-norm zero mode: slice average on the neck, boundary value
    ramped off by kappa0 outside |tau| = l/eps."""
    base = s.base
    L = params.l / params.eps
    zero = np.mean(s.vec, axis=1)
    iL = base.index_of_tau(L)
    imL = base.index_of_tau(-L)
    out = zero.copy()
    right = base.tau > L
    left = base.tau < -L
    k0 = cutoffs.kappa0(base.tau, L)
    out[right] = k0[right, None] * zero[iL][None, :]
    out[left] = k0[left, None] * zero[imL][None, :]
    return out, iL, imL


def resolved_xi_norm(s, mu, params, return_components=False):
    """Banach norm of a correction field on the resolved cylinder:
    weighted W^{1,p} of the higher part + eps-scaled W^{1,p} of the neck zero
    mode + the zero-mode boundary values + |mu|."""
    base = s.base
    eps, p = params.eps, params.p
    L = params.l / eps
    if base.tau[0] > -params.tau_eps or base.tau[-1] < params.tau_eps:
        raise GridTooShort("grid must span [-tau_eps, tau_eps]")
    xi0, iL, imL = _zero_mode_resolved(s, params)
    tilde = Section(base, s.vec - xi0[:, None, :])
    beta = weight_profile("BetaDeltaEps", params, base.tau)
    c_tilde = norm_weighted_W1p(tilde, beta, p)
    sl = slice(imL, iL + 1)
    x0 = xi0[sl]
    dx0 = dtau_fd4(xi0, base.h_tau)[sl]
    tw = _trapz_weights(base.tau[sl])
    c_zero = float(np.sum((eps * _abs2(x0) ** (p / 2.0)
                           + eps ** (1.0 - p) * _abs2(dx0) ** (p / 2.0)) * tw)) ** (1.0 / p)
    c_bdry = float(np.sqrt(_abs2(xi0[iL])) + np.sqrt(_abs2(xi0[imL])))
    total = c_tilde + c_zero + c_bdry + abs(mu)
    if return_components:
        return total, {"tilde_W1p_beta": c_tilde, "zero_W1p_eps": c_zero,
                       "boundary": c_bdry, "mu": abs(mu)}
    return total


def resolved_eta_norm(s, params, return_components=False):
    """Banach norm of a right-hand side: weighted L^p of the higher part +
    the geometric eps-weighted L^p (weight eps^{1-p}) of the neck zero mode
    (zero mode set to 0 off the neck)."""
    base = s.base
    eps, p = params.eps, params.p
    L = params.l / eps
    zero = np.mean(s.vec, axis=1)
    neck = np.abs(base.tau) <= L + 1e-12
    eta0 = np.where(neck[:, None], zero, 0.0)
    tilde = Section(base, s.vec - eta0[:, None, :])
    beta = weight_profile("BetaDeltaEps", params, base.tau)
    c_tilde = norm_weighted_Lp(tilde, beta, p)
    iL = base.index_of_tau(L)
    imL = base.index_of_tau(-L)
    sl = slice(imL, iL + 1)
    tw = _trapz_weights(base.tau[sl])
    c_zero = float(np.sum(eps ** (1.0 - p) * _abs2(eta0[sl]) ** (p / 2.0) * tw)) ** (1.0 / p)
    total = c_tilde + c_zero
    if return_components:
        return total, {"tilde_Lp_beta": c_tilde, "zero_Lp_eps": c_zero}
    return total


# energy and distances -------------------------------------------------------

def energy_local(u, box):
    """∫_box |du|^2_g dt dtau (trapezoid in tau, exact t-sum)."""
    a, b = box
    i0 = u.index_of_tau(a)
    i1 = u.index_of_tau(b)
    if i1 <= i0:
        return 0.0
    ut = dt_spectral(u.values, u.period_t)
    uta = dtau_fd4(u.values, u.h_tau)
    x = u.values
    dens = u.model.inner(x, uta, uta) + u.model.inner(x, ut, ut)
    dt = u.period_t / u.n_t
    per_tau = dens.sum(axis=1) * dt
    sl = slice(i0, i1 + 1)
    return float(np.sum(per_tau[sl] * _trapz_weights(u.tau[sl])))


def hausdorff_distance(A, B, model=None, max_points=None):
    """Sum-of-suprema Hausdorff distance between finite chart point sets."""
    A = np.asarray(A, dtype=complex).reshape(-1, np.asarray(A).shape[-1])
    B = np.asarray(B, dtype=complex).reshape(-1, np.asarray(B).shape[-1])
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise EmptySet("hausdorff_distance needs nonempty sets")

    def sub(X):
        if max_points is not None and X.shape[0] > max_points:
            stride = int(np.ceil(X.shape[0] / max_points))
            return X[::stride]
        return X

    A, B = sub(A), sub(B)

    def dmat(X, Y):
        if model is None or model.is_flat:
            return np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)
        return model.dist(X[:, None, :], Y[None, :, :])

    chunk = max(1, int(2e7) // max(1, B.shape[0]))
    supA = 0.0
    minB = np.full(B.shape[0], np.inf)
    for i0 in range(0, A.shape[0], chunk):
        D = dmat(A[i0:i0 + chunk], B)
        supA = max(supA, float(D.min(axis=1).max()))
        minB = np.minimum(minB, D.min(axis=0))
    return supA + float(minB.max())
