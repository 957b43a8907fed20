"""The perturbed Cauchy-Riemann operator on the resolved cylinder.

F(u) = du/dtau + i du/dt + kappa0(tau) grad(eps f)(u), with kappa0 ramping
the Morse term off outside the neck |tau| <= l/eps.  tau-derivatives are
4th-order finite differences, t-derivatives spectral.

The truncated cylinder is a boundary-value problem: the outermost EDGE_ROWS
rows on each side carry the Dirichlet matching to the prescribed disk data
(they hold the configured end values by construction, so the matching rows
are satisfied identically).  The residual and the linearization are the
interior operator rows only; corrections vanish on the matching rows.
"""

import numpy as np

from . import cutoffs
from .cylinder import Section, dt_spectral, dtau_fd4, resolved_eta_norm

EDGE_ROWS = 2


def mask_edge_rows(vec):
    """Zero the Dirichlet matching rows (in place) and return vec."""
    vec[:EDGE_ROWS] = 0.0
    vec[-EDGE_ROWS:] = 0.0
    return vec


def dbar_evaluate(u, params, morse):
    """Nonlinear residual of the neck equation at the grid map u."""
    du_tau = dtau_fd4(u.values, u.h_tau)
    du_t = dt_spectral(u.values, u.period_t)
    kap = cutoffs.kappa0(u.tau, params.R)[:, None, None]
    grad = params.eps * np.asarray(morse.grad_f(u.values), dtype=complex)
    return Section(u, mask_edge_rows(du_tau + 1j * du_t + kap * grad))


def error_norm(u, params, morse, return_components=False):
    """Resolved-norm size of the nonlinear residual (the gluing error)."""
    return resolved_eta_norm(dbar_evaluate(u, params, morse), params,
                             return_components=return_components)


class LinearizedOp:
    """Linearization of F at a grid map, with the neck-length parameter
    direction adjoined:

        D(xi, mu) = d xi/dtau + i d xi/dt + kappa0 A(u) xi
                    + (mu/l) grad(eps f)(chi(eps tau)) [|tau| <= l/eps].

    A(u) = eps D(grad f)(u) acts complex-linearly per node (constant for
    quadratic Morse data).
    """

    def __init__(self, u, params, morse, segment=None):
        self.u = u
        self.params = params
        self.morse = morse
        self.kap = cutoffs.kappa0(u.tau, params.R)
        if hasattr(morse, "lam"):
            self.A_const = params.eps * np.asarray(morse.lam, dtype=complex)
            self.A_field = None
        else:
            self.A_const = None
            self.A_field = np.empty(u.values.shape + (u.n,), dtype=complex)
            for i in range(u.n_tau):
                for j in range(u.n_t):
                    self.A_field[i, j] = params.eps * np.asarray(
                        morse.hess_grad_f(u.values[i, j]))
        neck = np.abs(u.tau) <= params.R + 1e-12
        if segment is not None:
            chi = segment.eval(params.eps * u.tau[neck])
        else:
            chi = np.mean(u.values[neck], axis=1)
        g = np.zeros((u.n_tau, u.n), dtype=complex)
        g[neck] = (params.eps / params.l) * np.asarray(morse.grad_f(chi),
                                                      dtype=complex)
        self.mu_column = g

    def apply_A(self, vec):
        if self.A_const is not None:
            return self.A_const * vec
        return np.einsum("ijab,ijb->ija", self.A_field, vec)

    def apply(self, vec, mu=0.0):
        u = self.u
        d = dtau_fd4(vec, u.h_tau) + 1j * dt_spectral(vec, u.period_t)
        d += self.kap[:, None, None] * self.apply_A(vec)
        d += mu * self.mu_column[:, None, :]
        return mask_edge_rows(d)

    def apply_section(self, s, mu=0.0):
        return Section(self.u, self.apply(s.vec, mu))


def linearize(u, params, morse, segment=None):
    return LinearizedOp(u, params, morse, segment)
