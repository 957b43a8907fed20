"""Chart-based target geometry: flat C^n and the affine chart of CP^n.

Points and tangent vectors are complex arrays of shape (..., n); the real
manifold dimension is 2n.  The projective chart carries the Fubini-Study
metric in closed form; geodesics and parallel transport are integrated with
classical RK4 on the holomorphic geodesic equation

    z'' = 2 z' <conj(z), z'> / (1 + |z|^2),

which follows from the Christoffel symbols
Gamma^k_{ij} = -(delta_ki conj(z)_j + delta_kj conj(z)_i)/(1+|z|^2).
"""

import numpy as np

from .errors import ChartExceeded, StepTooLarge, OutOfInjectivity

TOL_CRIT = 1e-8
_GEO_STEPS = 128


def _cdot(a, b):
    # Hermitian pairing <a, conj(b)> = sum a_i conj(b)_i
    return np.sum(a * np.conj(b), axis=-1)


class TargetModel:
    """Flat C^n or one Fubini-Study affine chart of CP^n."""

    def __init__(self, dim_complex, kind="FlatComplex", chart_radius=np.inf):
        if dim_complex < 1:
            raise ValueError("dim_complex must be positive")
        if kind not in ("FlatComplex", "ProjectiveChart"):
            raise ValueError("unknown kind %r" % kind)
        self.n = int(dim_complex)
        self.kind = kind
        self.chart_radius = float(chart_radius)
        if kind == "FlatComplex":
            self.injectivity_floor = np.inf
        else:
            self.injectivity_floor = min(self.chart_radius / 4.0, 0.5)

    @classmethod
    def flat(cls, n):
        return cls(n, "FlatComplex")

    @classmethod
    def projective(cls, n, chart_radius=1e9):
        return cls(n, "ProjectiveChart", chart_radius)

    @property
    def is_flat(self):
        return self.kind == "FlatComplex"

    def check_point(self, x):
        x = np.asarray(x, dtype=complex)
        if x.shape[-1] != self.n:
            raise ValueError("point dimension mismatch")
        if not self.is_flat:
            if np.any(np.abs(x) > self.chart_radius):
                raise ChartExceeded("point outside chart radius %g" % self.chart_radius)
        return x

    # metric -----------------------------------------------------------------

    def inner(self, x, u, v):
        """Real Riemannian inner product g_x(u, v); broadcasts over leading axes."""
        u = np.asarray(u, dtype=complex)
        v = np.asarray(v, dtype=complex)
        if self.is_flat:
            return np.real(_cdot(u, v))
        x = np.asarray(x, dtype=complex)
        s2 = 1.0 + np.real(_cdot(x, x))
        num = s2 * _cdot(u, v) - _cdot(u, x) * np.conj(_cdot(v, x))
        return np.real(num) / s2**2

    def norm(self, x, v):
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def metric_at(self, x):
        """Real 2n x 2n metric matrix in coordinates (Re z, Im z)."""
        x = self.check_point(x)
        n2 = 2 * self.n
        G = np.empty((n2, n2))
        basis = np.zeros((n2, self.n), dtype=complex)
        for i in range(self.n):
            basis[i, i] = 1.0
            basis[self.n + i, i] = 1.0j
        for i in range(n2):
            for j in range(n2):
                G[i, j] = self.inner(x, basis[i], basis[j])
        return 0.5 * (G + G.T)

    def dist(self, x, y):
        """Geodesic distance; closed form in both models.  Broadcasts."""
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        if self.is_flat:
            return np.sqrt(np.real(_cdot(x - y, x - y)))
        # lift to homogeneous coordinates (1, x), (1, y)
        num = np.abs(1.0 + _cdot(x, y))
        den = np.sqrt((1.0 + np.real(_cdot(x, x))) * (1.0 + np.real(_cdot(y, y))))
        return np.arccos(np.clip(num / den, -1.0, 1.0))

    # geodesics --------------------------------------------------------------

    def exp_map(self, x, v, n_steps=_GEO_STEPS):
        x = self.check_point(x)
        v = np.asarray(v, dtype=complex)
        if self.is_flat:
            return x + v
        speed = self.norm(x, v)
        if speed > self.injectivity_floor * (1 + 1e-12):
            raise StepTooLarge("|v|_g = %g exceeds gate %g" % (speed, self.injectivity_floor))
        if speed == 0.0:
            return x.copy()
        z, w = x.astype(complex), v.astype(complex)
        h = 1.0 / n_steps

        def acc(z, w):
            s2 = 1.0 + np.real(_cdot(z, z))
            return 2.0 * w * (_cdot(w, z) / s2)

        for _ in range(n_steps):
            k1z, k1w = w, acc(z, w)
            k2z, k2w = w + 0.5 * h * k1w, acc(z + 0.5 * h * k1z, w + 0.5 * h * k1w)
            k3z, k3w = w + 0.5 * h * k2w, acc(z + 0.5 * h * k2z, w + 0.5 * h * k2w)
            k4z, k4w = w + h * k3w, acc(z + h * k3z, w + h * k3w)
            z = z + (h / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
            w = w + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
        return self.check_point(z)

    def log_map(self, x, y, tol=1e-12, max_iter=40):
        x = self.check_point(x)
        y = self.check_point(y)
        if self.is_flat:
            return y - x
        d = float(self.dist(x, y))
        if d >= self.injectivity_floor:
            raise OutOfInjectivity("dist %g >= gate %g" % (d, self.injectivity_floor))
        if d == 0.0:
            return np.zeros_like(x)
        chord = y - x
        cn = self.norm(x, chord)
        v = chord * (d / cn) if cn > 0 else chord
        n2 = 2 * self.n

        def to_real(c):
            return np.concatenate([c.real, c.imag])

        def to_cplx(r):
            return r[: self.n] + 1j * r[self.n:]

        def resid(vr):
            return to_real(self.exp_map(x, to_cplx(vr)) - y)

        vr = to_real(v)
        for _ in range(max_iter):
            r = resid(vr)
            if np.max(np.abs(r)) < tol:
                break
            J = np.empty((n2, n2))
            h = 1e-6
            for j in range(n2):
                e = np.zeros(n2)
                e[j] = h
                J[:, j] = (resid(vr + e) - resid(vr - e)) / (2 * h)
            vr = vr - np.linalg.solve(J, r)
        return to_cplx(vr)

    def parallel_transport(self, x, y, v, n_steps=_GEO_STEPS):
        """Transport v from T_x to T_y along the shortest geodesic."""
        x = self.check_point(x)
        y = self.check_point(y)
        v = np.asarray(v, dtype=complex)
        if self.is_flat:
            return v.copy()
        d = float(self.dist(x, y))
        if d >= self.injectivity_floor:
            raise OutOfInjectivity("dist %g >= gate %g" % (d, self.injectivity_floor))
        if d == 0.0:
            return v.copy()
        w = self.log_map(x, y)
        z, u, p = x.astype(complex), w.astype(complex), v.astype(complex)
        h = 1.0 / n_steps

        def rhs(z, u, p):
            s2 = 1.0 + np.real(_cdot(z, z))
            dz = u
            du = 2.0 * u * (_cdot(u, z) / s2)
            dp = (u * _cdot(p, z) + p * _cdot(u, z)) / s2
            return dz, du, dp

        for _ in range(n_steps):
            k1 = rhs(z, u, p)
            k2 = rhs(z + 0.5 * h * k1[0], u + 0.5 * h * k1[1], p + 0.5 * h * k1[2])
            k3 = rhs(z + 0.5 * h * k2[0], u + 0.5 * h * k2[1], p + 0.5 * h * k2[2])
            k4 = rhs(z + h * k3[0], u + h * k3[1], p + h * k3[2])
            z = z + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            u = u + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            p = p + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        return p


class MorseData:
    """Morse function on a chart: value, gradient, and linearized gradient.

    grad_f is the gradient in the flat chart metric (the convention used by
    all neck equations here); hess_grad_f(x) returns an (n, n) complex matrix
    acting complex-linearly on tangent vectors, A(x) = D(grad f)(x).
    """

    def __init__(self, f, grad_f, hess_grad_f, critical_points=()):
        self.f = f
        self.grad_f = grad_f
        self.hess_grad_f = hess_grad_f
        self.critical_points = list(critical_points)

    @classmethod
    def quadratic(cls, lam, center=None):
        """f(z) = 1/2 sum lam_i |z_i - c_i|^2 with positive diagonal lam."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        if np.any(lam <= 0):
            raise ValueError("lam must be positive")
        n = lam.size
        c = np.zeros(n, dtype=complex) if center is None else np.asarray(center, dtype=complex)

        def f(x):
            d = np.asarray(x, dtype=complex) - c
            return 0.5 * np.sum(lam * np.abs(d) ** 2, axis=-1)

        def grad(x):
            return lam * (np.asarray(x, dtype=complex) - c)

        def hess(x):
            return np.diag(lam).astype(complex)

        md = cls(f, grad, hess, critical_points=[(c.copy(), 0)])
        md.lam = lam        # closed-form flows downstream key off these
        md.center = c
        return md

    def check_nondegenerate(self, tol=TOL_CRIT):
        for pt, _idx in self.critical_points:
            g = np.asarray(self.grad_f(pt))
            if np.max(np.abs(g)) >= tol:
                raise ValueError("listed critical point has |grad f| = %g" % np.max(np.abs(g)))
            w = np.linalg.eigvals(np.asarray(self.hess_grad_f(pt)))
            if np.min(np.abs(w)) < tol:
                raise ValueError("degenerate critical point (eigenvalue %g)" % np.min(np.abs(w)))
        return True
