"""Adiabatic-limit diagnostics: Karcher means and center-of-mass curves,
neck renormalization, slice width, and the composite adiabatic distance
between a resolved-cylinder map and its limiting disk-flow-disk data.
"""

import numpy as np

from .cylinder import (CylinderGrid, Section, dt_spectral, dtau_fd4,
                       energy_local, hausdorff_distance)
from .errors import DiameterTooLarge, GridTooShort, NoConvergence

TOL_KARCHER = 1e-10


def karcher_mean(points, model, diameter_gate=1.0, tol=TOL_KARCHER,
                 max_iter=100):
    """Riemannian center of mass of a small cluster of chart points.

    Gated on cluster diameter (the mean is only unique for small clusters);
    exact arithmetic mean in the flat model, fixed-point iteration
    m <- exp_m(avg log_m(p_i)) otherwise."""
    pts = np.asarray(points, dtype=complex)
    pts = pts.reshape(-1, pts.shape[-1])
    diam = cluster_diameter(pts, model)
    if diam >= diameter_gate:
        raise DiameterTooLarge("cluster diameter %g exceeds gate %g"
                               % (diam, diameter_gate))
    if model.is_flat:
        return pts.mean(axis=0)
    m = pts.mean(axis=0)
    for _ in range(max_iter):
        v = np.mean([model.log_map(m, p) for p in pts], axis=0)
        if model.norm(m, v) < tol:
            return m
        m = model.exp_map(m, v)
    raise NoConvergence("Karcher iteration did not settle in %d steps"
                        % max_iter)


def cluster_diameter(points, model):
    pts = np.asarray(points, dtype=complex)
    pts = pts.reshape(-1, pts.shape[-1])
    d = model.dist(pts[:, None, :], pts[None, :, :])
    return float(np.max(d))


class CenterOfMassCurve:
    """Per-slice Karcher mean of a grid map and the mean-zero remainder."""

    def __init__(self, cm, residual_xi):
        self.cm = cm
        self.residual_xi = residual_xi


def center_of_mass_curve(u, diameter_gate=1.0):
    """Slice-wise center of mass cm(tau) with u = exp_cm(xi), xi per-slice
    mean-zero (within the Karcher tolerance)."""
    model = u.model
    cm = np.empty((u.n_tau, u.n), dtype=complex)
    xi = np.empty_like(u.values)
    for i in range(u.n_tau):
        cm[i] = karcher_mean(u.values[i], model, diameter_gate=diameter_gate)
        if model.is_flat:
            xi[i] = u.values[i] - cm[i]
        else:
            for j in range(u.n_t):
                xi[i, j] = model.log_map(cm[i], u.values[i, j])
    return CenterOfMassCurve(cm, Section(u, xi))


def renormalize(u, params):
    """Zoom out to the adiabatic scale: restrict to the neck |tau| <= l/eps
    and rescale both cylinder coordinates by eps, so the neck becomes
    [-l, l] with t-period eps.  Node values are untouched (bit-exact)."""
    L = params.R
    keep = np.abs(u.tau) <= L + 1e-9
    if keep.sum() < 5:
        raise GridTooShort("grid does not span the neck")
    return CylinderGrid(params.eps * u.tau[keep], u.values[keep].copy(),
                        u.model, params.eps * u.period_t)


def renormalize_inverse(u_bar, params):
    """Undo renormalize on the retained nodes (bit-exact)."""
    return CylinderGrid(u_bar.tau / params.eps, u_bar.values.copy(),
                        u_bar.model, u_bar.period_t / params.eps)


def rescaled_residual(u_bar, morse):
    """Residual of the eps-independent limit equation
    d/dtau + i d/dt + grad f on a renormalized neck."""
    r = (dtau_fd4(u_bar.values, u_bar.h_tau)
         + 1j * dt_spectral(u_bar.values, u_bar.period_t)
         + np.asarray(morse.grad_f(u_bar.values), dtype=complex))
    return Section(u_bar, r)


def width(u_bar):
    """sup over tau of the slice diameter: zero iff every slice constant."""
    vals = u_bar.values
    model = u_bar.model
    best = 0.0
    for i in range(u_bar.n_tau):
        d = model.dist(vals[i][:, None, :], vals[i][None, :, :])
        best = max(best, float(np.max(d)))
    return best


class AdiaDistanceReport:
    """Component-wise distance of a resolved map to its dfd limit data."""

    def __init__(self, local_energy, hausdorff_neck, transition_diams,
                 end_C1_distances, zeta):
        self.local_energy = float(local_energy)
        self.hausdorff_neck = float(hausdorff_neck)
        self.transition_diams = tuple(float(d) for d in transition_diams)
        self.end_C1_distances = tuple(float(d) for d in end_C1_distances)
        self.zeta = float(zeta)
        self.composite = max(self.local_energy, self.hausdorff_neck,
                             *self.transition_diams, *self.end_C1_distances)

    def as_dict(self):
        return {"local_energy": self.local_energy,
                "hausdorff_neck": self.hausdorff_neck,
                "transition_diams": list(self.transition_diams),
                "end_C1_distances": list(self.end_C1_distances),
                "zeta": self.zeta,
                "composite": self.composite}


def adia_distance(u, cfg, params, zeta=0.25):
    """Composite adiabatic distance of a resolved-cylinder map to the
    disk-flow-disk configuration cfg, as the max of:

    - energy of u over the two transition collars |tau -+ l/eps| <= w,
      w = zeta * eps^{-delta} (shrinking at the adiabatic scale),
    - Hausdorff distance between the neck image and the gradient segment,
    - image diameters of the two transition collars,
    - sup-norm C^1 distances between u and the configured disk ends
      beyond the collars."""
    L = params.R
    w = zeta * params.eps ** (-params.delta)
    tau = u.tau
    model = u.model

    collars = []
    for s in (-1, +1):
        m = np.abs(tau - s * L) <= w + 1e-9
        if not np.any(m):
            raise GridTooShort("transition collar off the grid")
        collars.append(m)
    local_energy = sum(
        energy_local(u, (tau[m][0], tau[m][-1])) for m in collars)

    neck = np.abs(tau) <= L + 1e-9
    seg_pts = cfg.segment.eval(params.eps * tau[neck])
    hausdorff_neck = hausdorff_distance(
        u.values[neck].reshape(-1, u.n), seg_pts, model=model,
        max_points=4000)

    diams = [cluster_diameter(u.values[m].reshape(-1, u.n), model)
             for m in collars]

    du = dtau_fd4(u.values, u.h_tau)
    end_dists = []
    for s, end in ((-1, cfg.end_minus), (+1, cfg.end_plus)):
        m = s * tau >= L + w - 1e-9
        if not np.any(m):
            raise GridTooShort("end zone off the grid")
        tt = tau[m][:, None]
        tg = u.t_samples()[None, :]
        ref = end.eval(tt - s * params.tau_eps, tg)
        dref = dtau_fd4(ref, u.h_tau)
        c0 = np.abs(u.values[m] - ref).max()
        c1 = np.abs(du[m] - dref).max()
        end_dists.append(c0 + c1)

    return AdiaDistanceReport(local_energy, hausdorff_neck, diams,
                              end_dists, zeta)
