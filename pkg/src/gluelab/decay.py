"""Three-interval exponential decay machinery: the constant gamma(c), the
sequence lemma it feeds, windowed energies on unit cylinders, and
exponential-rate fitting.
"""

import numpy as np

from .cylinder import (Section, dt_spectral, dtau_fd4, energy_local,
                       mode_decompose)
from .errors import AllZero, BoundViolated, GammaOutOfRange, GridTooShort

HYP_SLACK = 1e-12


def gamma_c(c):
    """gamma(c) = 1/(e^c + e^{-c}): the unique constant with

        int_0^1 e^{c tau} dtau = gamma(c) * (int_{-1}^0 + int_1^2) e^{c tau} dtau,

    i.e. a pure exponential on three consecutive unit intervals puts exactly
    the fraction gamma of its neighbours' mass in the middle one."""
    c = np.asarray(c, dtype=float)
    out = 1.0 / (2.0 * np.cosh(c))
    return float(out) if out.ndim == 0 else out


def xi_rate(gamma):
    """The decay base of the three-interval lemma: the larger root of
    xi + 1/xi = 1/gamma, so xi(gamma(c)) = e^c."""
    if not (0.0 < gamma < 0.5):
        raise GammaOutOfRange("gamma must lie in (0, 1/2), got %g" % gamma)
    return (1.0 + np.sqrt(1.0 - 4.0 * gamma ** 2)) / (2.0 * gamma)


class WindowEnergySeq:
    """Nonnegative per-window quantities x_k on unit cylinders [k, k+1]."""

    def __init__(self, x, window_bounds, kind):
        self.x = np.asarray(x, dtype=float)
        if np.any(self.x < 0):
            raise ValueError("window energies must be nonnegative")
        self.window_bounds = np.asarray(window_bounds, dtype=float)
        self.kind = kind

    def __len__(self):
        return self.x.size


def three_interval_bound(x, gamma):
    """Check the three-interval hypothesis x_k <= gamma (x_{k-1} + x_{k+1})
    for the interior entries; when it holds, certify the exponential
    conclusion x_k <= x_0 xi^{-k} + x_N xi^{-(N-k)} pointwise and return the
    bound array.

    The conclusion is a discrete maximum principle: the bound sequence
    satisfies the recursion with equality (xi + 1/xi = 1/gamma), dominates x
    at both ends, and gamma < 1/2 forbids an interior positive maximum of
    the difference."""
    xs = x.x if isinstance(x, WindowEnergySeq) else np.asarray(x, dtype=float)
    xi = xi_rate(gamma)
    N = xs.size - 1
    scale = max(1.0, xs.max(initial=0.0))
    holds = bool(np.all(
        xs[1:-1] <= gamma * (xs[:-2] + xs[2:]) + HYP_SLACK * scale))
    k = np.arange(N + 1)
    bound = xs[0] * xi ** (-k.astype(float)) + xs[-1] * xi ** (-(N - k).astype(float))
    if holds:
        bad = np.where(xs > bound * (1.0 + 1e-9) + HYP_SLACK * scale)[0]
        if bad.size:
            raise BoundViolated("three-interval conclusion fails",
                                node=int(bad[0]))
    return {"holds_hypothesis": holds, "bound": bound, "xi": xi}


def window_energies(u, kind="GradEnergy", offset=0.0, span=None):
    """Per-unit-window quantities along tau.

    GradEnergy on a grid map: int |du|^2 over [k, k+1] x S^1 (so a single
    harmonic c e^{2pi(tau+it)} gives x_k proportional to int e^{4 pi tau},
    and the gamma(4 pi) identity holds across consecutive windows).
    HigherModeL2 on a section: the L^2 norm of the t-nonconstant part over
    the window."""
    tau = (u.base if isinstance(u, Section) else u).tau
    lo = np.ceil(tau[0] - 1e-9) + offset
    hi = np.floor(tau[-1] + 1e-9) + offset
    if span is not None:
        lo, hi = max(lo, span[0]), min(hi, span[1])
    edges = np.arange(lo, hi + 0.5)
    if edges.size < 4:
        raise GridTooShort("need at least 3 unit windows, got %d"
                           % max(edges.size - 1, 0))
    if kind == "GradEnergy":
        base = u.base if isinstance(u, Section) else u
        xs = [energy_local(base, (a, b)) for a, b in zip(edges[:-1], edges[1:])]
    elif kind == "HigherModeL2":
        s = u if isinstance(u, Section) else Section(u, u.values)
        grid = s.base
        _, hi_modes = mode_decompose(s)
        tilde = hi_modes.recompose(grid).vec
        dens = np.sum(np.abs(tilde) ** 2, axis=(1, 2)) / grid.n_t
        xs = []
        for a, b in zip(edges[:-1], edges[1:]):
            i0, i1 = grid.index_of_tau(a), grid.index_of_tau(b)
            xs.append(np.sqrt(np.trapezoid(dens[i0:i1 + 1], grid.tau[i0:i1 + 1])))
    else:
        raise ValueError("unknown window kind %r" % kind)
    return WindowEnergySeq(xs, np.column_stack([edges[:-1], edges[1:]]), kind)


def decay_fit(x, min_positive=4):
    """Least-squares exponential rate of a window sequence: fit
    log x_k = -sigma * d_k + const with d_k the distance from the boundary
    the sequence decays away from (both ends for a valley-shaped neck
    profile).  Returns {sigma, r2, all_zero}."""
    xs = x.x if isinstance(x, WindowEnergySeq) else np.asarray(x, dtype=float)
    N = xs.size - 1
    if np.all(xs == 0.0):
        return {"sigma": np.inf, "r2": 1.0, "all_zero": True}
    pos = xs > 0
    if pos.sum() < min_positive:
        raise AllZero("need at least %d positive window entries" % min_positive)
    k = np.arange(N + 1)
    diffs = np.diff(xs)
    if np.all(diffs <= 0):
        d = k
    elif np.all(diffs >= 0):
        d = N - k
    else:
        d = np.minimum(k, N - k)
    logs = np.log(xs[pos])
    slope, intercept = np.polyfit(d[pos], logs, 1)
    fit = slope * d[pos] + intercept
    ss_res = np.sum((logs - fit) ** 2)
    ss_tot = np.sum((logs - logs.mean()) ** 2)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return {"sigma": float(-slope), "r2": float(r2), "all_zero": False}
