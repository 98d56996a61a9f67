"""Model manifolds, curvature data, and pulled-back ball metrics.

The sign conventions, fixed once here and relied on everywhere else:

* riemann[i,j,k,l] is the inner product of the curvature operator applied to
  the frame pair (E_i, E_j) acting on E_k against E_l, with the operator
  ordered so that the round unit sphere has riemann[i,j,k,l] =
  d_jk d_il - d_ik d_jl (in particular riemann[1,2,1,2] = -1).
* ricci[k,l] = - sum_i riemann[i,k,i,l], which makes the round metric's
  Ricci tensor positive: (N-1) * curvature * identity.
* nabla_riemann[i,j,k,l,m] differentiates in the last slot.

Geodesic normal coordinates y around a point then expand the metric as

    g_ab(y) = d_ab + (1/3) riemann[a,k,b,l] y^k y^l
            + (1/6) nabla_riemann[a,k,b,l,m] y^k y^l y^m + O(|y|^4),

and rescaling y = eps * x puts factors eps^2/3 and eps^3/6 on the curvature
terms over the unit ball.

Model manifolds expose a small uniform surface: curvature packets, exp/log
and parallel transport in a fixed orthonormal frame, and (where a closed form
exists) the exact normal-coordinate metric. MetricJet combines a manifold,
a center, a radius and a boundary perturbation into the pointwise metric
callbacks the ball solver consumes.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from . import ball_solver
from .sphere_spectral import get_basis

__all__ = [
    "CurvaturePacket",
    "ModelManifold",
    "FlatSpace",
    "ConstantCurvature",
    "ConformalSphere2D",
    "MetricJet",
    "pullback_metric",
    "laplace_beltrami_apply",
    "packet_from_chart",
    "manifold_from_config",
]


# -- curvature packet ---------------------------------------------------------


def _model_tensor(N):
    """T[i,j,k,l] = d_jk d_il - d_ik d_jl, the unit-curvature model."""
    d = np.eye(N)
    return np.einsum("jk,il->ijkl", d, d) - np.einsum("ik,jl->ijkl", d, d)


@dataclass
class CurvaturePacket:
    """Pointwise curvature data at a chosen center, in an orthonormal frame."""

    dim: int
    scalar: float
    scalar_gradient: np.ndarray  # (N,)
    ricci: np.ndarray  # (N, N)
    riemann: np.ndarray  # (N, N, N, N)
    nabla_riemann: np.ndarray  # (N, N, N, N, N), derivative slot last

    def validate(self, tol=1e-10):
        """Check the algebraic and differential identities; raise on failure.

        Returns the dict of measured violations (useful in diagnostics).
        """
        R = self.riemann
        nR = self.nabla_riemann
        checks = {}
        checks["antisym_front"] = np.abs(R + R.transpose(1, 0, 2, 3)).max()
        checks["antisym_back"] = np.abs(R + R.transpose(0, 1, 3, 2)).max()
        checks["pair_symmetry"] = np.abs(R - R.transpose(2, 3, 0, 1)).max()
        checks["bianchi_first"] = np.abs(
            R + R.transpose(1, 2, 0, 3) + R.transpose(2, 0, 1, 3)
        ).max()
        checks["ricci_contraction"] = np.abs(
            self.ricci + np.einsum("ikil->kl", R)
        ).max()
        checks["ricci_symmetry"] = np.abs(self.ricci - self.ricci.T).max()
        checks["scalar_trace"] = abs(self.scalar - float(np.trace(self.ricci)))
        checks["d_antisym_front"] = np.abs(nR + nR.transpose(1, 0, 2, 3, 4)).max()
        checks["d_antisym_back"] = np.abs(nR + nR.transpose(0, 1, 3, 2, 4)).max()
        checks["d_pair_symmetry"] = np.abs(nR - nR.transpose(2, 3, 0, 1, 4)).max()
        checks["bianchi_second"] = np.abs(
            nR
            + nR.transpose(0, 1, 3, 4, 2)
            + nR.transpose(0, 1, 4, 2, 3)
        ).max()
        # trace of the derivative reproduces the scalar-curvature gradient
        dS = -np.einsum("ikikm->m", nR)
        checks["scalar_gradient_trace"] = np.abs(dS - self.scalar_gradient).max()
        bad = {k: v for k, v in checks.items() if v > tol}
        if bad:
            raise ValueError("curvature packet fails identities: %s" % bad)
        return checks

    def nabla_ricci(self):
        """grad Ric as a (N, N, N) array, derivative slot last."""
        return -np.einsum("ikilm->klm", self.nabla_riemann)


# -- closed-form constant-curvature profile ----------------------------------


def _radial_profile(w):
    """G(w) with g_ab(y) = d_ab + k G(k|y|^2) (|y|^2 d_ab - y_a y_b) for the
    space of constant sectional curvature k, where w = k |y|^2.

    G(w) = (sin^2(sqrt w)/w - 1)/w for w > 0, the analytic continuation
    (sinh for w < 0), with the Taylor series used near zero. Returns
    (G, G') elementwise.
    """
    w = np.asarray(w, dtype=float)
    G = np.empty_like(w)
    Gp = np.empty_like(w)
    # the closed form cancels catastrophically near w = 0; below the switch
    # the tail of the series is under 1e-16 while the closed form is clean
    # above it
    small = np.abs(w) < 0.25
    ws = w[small]
    series = [
        -1.0 / 3.0,
        2.0 / 45.0,
        -1.0 / 315.0,
        2.0 / 14175.0,
        -2.0 / 467775.0,
        4.0 / 42567525.0,
        -1.0 / 638512875.0,
        2.0 / 97692469875.0,
    ]
    G[small] = sum(a * ws**j for j, a in enumerate(series))
    Gp[small] = sum(j * a * ws ** (j - 1) for j, a in enumerate(series) if j > 0)
    wl = w[~small]
    s = np.sqrt(np.abs(wl))
    ss = np.where(wl > 0, np.sin(s), np.sinh(s))
    cc = np.where(wl > 0, np.cos(s), np.cosh(s))
    # sin^2(sqrt w) with sign folded: sin^2 -> -sinh^2 for w < 0
    sq = np.where(wl > 0, ss**2, -(ss**2))
    F = sq / wl - 1.0
    # F'(w) = (s * sin(2s)/2 - sin^2) / w^2, hyperbolic analogue for w < 0
    num = np.where(wl > 0, s * ss * cc - ss**2, -(s * ss * cc) + ss**2)
    Fp = num / wl**2
    G[~small] = F / wl
    Gp[~small] = (Fp * wl - F) / wl**2
    return G, Gp


def constant_curvature_chart(k, Y):
    """Exact normal-coordinate metric and gradient for constant curvature k.

    Y has shape (n, N) in true (unscaled) normal coordinates. Returns
    (g (n,N,N), dg (n,N,N,N)) with dg[p,c,a,b] = d_c g_ab.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n, N = Y.shape
    u = np.einsum("pa,pa->p", Y, Y)
    w = k * u
    G, Gp = _radial_profile(w)
    d = np.eye(N)
    M = u[:, None, None] * d[None] - Y[:, :, None] * Y[:, None, :]
    g = d[None] + k * G[:, None, None] * M
    # dM[p,c,a,b] = 2 y_c d_ab - d_ca y_b - d_cb y_a
    dM = (
        2.0 * Y[:, :, None, None] * d[None, None]
        - np.einsum("ca,pb->pcab", d, Y)
        - np.einsum("cb,pa->pcab", d, Y)
    )
    dg = k * (
        2.0 * k * Gp[:, None, None, None] * Y[:, :, None, None] * M[:, None]
        + G[:, None, None, None] * dM
    )
    return g, dg


def truncated_chart(packet, Y):
    """Cubic normal-coordinate metric model built from a curvature packet.

    Same signature as constant_curvature_chart; Y in true normal coordinates.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    N = packet.dim
    R = packet.riemann
    nR = packet.nabla_riemann
    d = np.eye(N)
    quad = np.einsum("akbl,pk,pl->pab", R, Y, Y, optimize=True)
    cub = np.einsum("akblm,pk,pl,pm->pab", nR, Y, Y, Y, optimize=True)
    g = d[None] + quad / 3.0 + cub / 6.0
    dquad = np.einsum("acbl,pl->pcab", R, Y) + np.einsum("akbc,pk->pcab", R, Y)
    dcub = (
        np.einsum("acblm,pl,pm->pcab", nR, Y, Y, optimize=True)
        + np.einsum("akbcm,pk,pm->pcab", nR, Y, Y, optimize=True)
        + np.einsum("akblc,pk,pl->pcab", nR, Y, Y, optimize=True)
    )
    dg = dquad / 3.0 + dcub / 6.0
    return g, dg


# -- model manifolds -----------------------------------------------------------


class ModelManifold:
    """Uniform surface shared by the built-in geometries.

    Points use each geometry's own representation (ambient vectors for
    embedded spheres, chart coordinates otherwise); tangent data always uses
    coefficients against the manifold's orthonormal frame at the relevant
    point. exp/log/transport accept (n, N) batches.
    """

    dim = None
    has_exact_chart = False

    def origin(self):
        raise NotImplementedError

    def packet(self, p):
        raise NotImplementedError

    def scalar_curvature(self, p):
        return self.packet(p).scalar

    def scalar_gradient(self, p):
        return self.packet(p).scalar_gradient

    def exp(self, p, V):
        raise NotImplementedError

    def log(self, p, Q):
        raise NotImplementedError

    def transport(self, p, q, V):
        raise NotImplementedError

    def distance(self, p, q):
        v = self.log(p, np.atleast_2d(self._point_array(q)))
        return float(np.linalg.norm(v[0]))

    def chart_metric(self, p, Y):
        """Exact normal-coordinate metric at p; only with has_exact_chart."""
        raise NotImplementedError("no closed-form chart for this geometry")

    @staticmethod
    def _point_array(p):
        return np.asarray(p, dtype=float)


class FlatSpace(ModelManifold):
    """Euclidean R^N; every curvature quantity vanishes."""

    has_exact_chart = True

    def __init__(self, dim):
        self.dim = dim

    def origin(self):
        return np.zeros(self.dim)

    def packet(self, p=None):
        N = self.dim
        return CurvaturePacket(
            dim=N,
            scalar=0.0,
            scalar_gradient=np.zeros(N),
            ricci=np.zeros((N, N)),
            riemann=np.zeros((N,) * 4),
            nabla_riemann=np.zeros((N,) * 5),
        )

    def exp(self, p, V):
        return np.atleast_2d(p) + np.atleast_2d(V)

    def log(self, p, Q):
        return np.atleast_2d(Q) - np.atleast_2d(p)

    def transport(self, p, q, V):
        return np.array(np.atleast_2d(V), dtype=float)

    def chart_metric(self, p, Y):
        Y = np.atleast_2d(Y)
        n, N = Y.shape
        return np.broadcast_to(np.eye(N), (n, N, N)).copy(), np.zeros((n, N, N, N))


class ConstantCurvature(ModelManifold):
    """Round sphere of constant sectional curvature k > 0.

    Points are ambient vectors in R^{N+1} of norm 1/sqrt(k). The orthonormal
    frame at p comes from Gram-Schmidt of the ambient coordinate basis
    projected to the tangent space, taken in a deterministic order.
    """

    has_exact_chart = True

    def __init__(self, dim, k=1.0):
        if k <= 0:
            raise ValueError("embedded model requires k > 0")
        self.dim = dim
        self.k = float(k)
        self.radius = 1.0 / math.sqrt(k)

    def origin(self):
        p = np.zeros(self.dim + 1)
        p[-1] = self.radius
        return p

    def frame(self, p):
        """Orthonormal tangent frame at p, rows = frame vectors, (N, N+1)."""
        p = np.asarray(p, dtype=float)
        n = p / np.linalg.norm(p)
        basis = []
        for i in range(self.dim + 1):
            e = np.zeros(self.dim + 1)
            e[i] = 1.0
            w = e - np.dot(e, n) * n
            for b in basis:
                w = w - np.dot(w, b) * b
            norm = np.linalg.norm(w)
            if norm > 1e-8:
                basis.append(w / norm)
            if len(basis) == self.dim:
                break
        return np.stack(basis)

    def packet(self, p=None):
        N, k = self.dim, self.k
        T = _model_tensor(N)
        return CurvaturePacket(
            dim=N,
            scalar=k * N * (N - 1),
            scalar_gradient=np.zeros(N),
            ricci=k * (N - 1) * np.eye(N),
            riemann=k * T,
            nabla_riemann=np.zeros((N,) * 5),
        )

    def exp(self, p, V):
        p = np.asarray(p, dtype=float)
        V = np.atleast_2d(np.asarray(V, dtype=float))
        E = self.frame(p)
        W = V @ E  # ambient tangent vectors, (n, N+1)
        t = np.linalg.norm(W, axis=1)
        out = np.empty((V.shape[0], self.dim + 1))
        zero = t < 1e-300
        tt = np.where(zero, 1.0, t)
        out[:] = (
            np.cos(t / self.radius)[:, None] * p[None, :]
            + (self.radius * np.sin(t / self.radius) / tt)[:, None] * W
        )
        out[zero] = p
        return out

    def log(self, p, Q):
        p = np.asarray(p, dtype=float)
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        R = self.radius
        c = np.clip(Q @ p / R**2, -1.0, 1.0)
        theta = np.arccos(c)
        W = Q - c[:, None] * p[None, :]
        norms = np.linalg.norm(W, axis=1)
        safe = np.where(norms > 1e-300, norms, 1.0)
        amb = (R * theta / safe)[:, None] * W
        amb[norms <= 1e-300] = 0.0
        E = self.frame(p)
        return amb @ E.T

    def transport(self, p, q, V):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        V = np.atleast_2d(np.asarray(V, dtype=float))
        Ep = self.frame(p)
        W = V @ Ep
        u = self.log(p, q[None, :])[0] @ Ep  # ambient initial velocity
        t = np.linalg.norm(u)
        if t > 1e-14:
            uh = u / t
            ph = p / np.linalg.norm(p)
            theta = t / self.radius
            a = W @ uh
            W = (
                W
                - a[:, None] * uh[None, :]
                + a[:, None]
                * (math.cos(theta) * uh - math.sin(theta) * ph)[None, :]
            )
        Eq = self.frame(q)
        return W @ Eq.T

    def chart_metric(self, p, Y):
        return constant_curvature_chart(self.k, Y)


class ConformalSphere2D(ModelManifold):
    """Two-sphere with a conformally perturbed round metric.

    The chart is the stereographic plane; the metric is exp(2 f(z)) times the
    Euclidean one, where f is the round factor log(2 / (1 + |z|^2)) plus a
    sum of Gaussian bumps A exp(-|z - c|^2 / (2 sigma^2)). Bumps break the
    symmetry, so the scalar curvature has genuine critical points. The frame
    is E_i = exp(-f) d_i, smooth across the whole chart. Geodesics, exp/log
    and parallel transport integrate the conformal geodesic equations with a
    high-order adaptive scheme; batches share one ODE solve.
    """

    has_exact_chart = False

    def __init__(self, bumps=None, rtol=1e-12, atol=1e-13):
        self.dim = 2
        if bumps is None:
            bumps = [
                (0.12, (0.4, 0.0), 0.7),
                (-0.08, (-0.3, 0.5), 0.9),
            ]
        self.bumps = [
            (float(A), np.array(c, dtype=float), float(s)) for A, c, s in bumps
        ]
        self.rtol = rtol
        self.atol = atol

    def origin(self):
        return np.zeros(2)

    # -- conformal factor and derivatives, all orders through third --------

    def _f_jet(self, Z, order=1):
        """f and derivatives at points Z (n, 2).

        Returns a tuple of arrays (f, df, [d2f, [d3f]]) up to the requested
        order, with the derivative index axes appended.
        """
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        n = Z.shape[0]
        u = np.einsum("pi,pi->p", Z, Z)
        d = np.eye(2)
        # round part through h(u) = log 2 - log(1 + u)
        c1 = -1.0 / (1.0 + u)
        c2 = 1.0 / (1.0 + u) ** 2
        c3 = -2.0 / (1.0 + u) ** 3
        f = math.log(2.0) - np.log1p(u)
        df = c1[:, None] * 2.0 * Z
        out2 = None
        out3 = None
        if order >= 2:
            out2 = 4.0 * c2[:, None, None] * Z[:, :, None] * Z[:, None, :]
            out2 += 2.0 * c1[:, None, None] * d[None]
        if order >= 3:
            zz = Z[:, :, None, None] * Z[:, None, :, None] * Z[:, None, None, :]
            sym = (
                np.einsum("ij,pk->pijk", d, Z)
                + np.einsum("ik,pj->pijk", d, Z)
                + np.einsum("jk,pi->pijk", d, Z)
            )
            out3 = 8.0 * c3[:, None, None, None] * zz + 4.0 * c2[:, None, None, None] * sym
        for A, c, sg in self.bumps:
            D = Z - c[None, :]
            q = np.einsum("pi,pi->p", D, D)
            b = A * np.exp(-q / (2.0 * sg**2))
            f = f + b
            db = -b[:, None] * D / sg**2
            df = df + db
            if order >= 2:
                out2 = out2 + b[:, None, None] * (
                    D[:, :, None] * D[:, None, :] / sg**4 - d[None] / sg**2
                )
            if order >= 3:
                dd = D[:, :, None, None] * D[:, None, :, None] * D[:, None, None, :]
                symb = (
                    np.einsum("ij,pk->pijk", d, D)
                    + np.einsum("ik,pj->pijk", d, D)
                    + np.einsum("jk,pi->pijk", d, D)
                )
                out3 = out3 + b[:, None, None, None] * (
                    -dd / sg**6 + symb / sg**4
                )
        result = [f, df]
        if order >= 2:
            result.append(out2)
        if order >= 3:
            result.append(out3)
        return tuple(result)

    def conformal_factor(self, Z):
        return self._f_jet(Z, order=1)[0]

    def gauss_curvature(self, Z):
        f, _, d2f = self._f_jet(Z, order=2)
        return -np.exp(-2.0 * f) * np.einsum("pii->p", d2f)

    def _curvature_jet(self, Z):
        """(K, dK chart-gradient) at points Z."""
        f, df, d2f, d3f = self._f_jet(Z, order=3)
        lap = np.einsum("pii->p", d2f)
        K = -np.exp(-2.0 * f) * lap
        dlap = np.einsum("piim->pm", d3f)
        dK = -np.exp(-2.0 * f)[:, None] * dlap - 2.0 * df * K[:, None]
        return K, dK

    def scalar_curvature(self, p):
        return 2.0 * float(self.gauss_curvature(np.atleast_2d(p))[0])

    def scalar_gradient(self, p):
        Z = np.atleast_2d(p)
        f = self._f_jet(Z, order=1)[0]
        _, dK = self._curvature_jet(Z)
        return 2.0 * np.exp(-f[0]) * dK[0]

    def packet(self, p):
        Z = np.atleast_2d(p)
        f = self._f_jet(Z, order=1)[0][0]
        K, dK = self._curvature_jet(Z)
        K = float(K[0])
        T = _model_tensor(2)
        frame_dK = math.exp(-f) * dK[0]
        return CurvaturePacket(
            dim=2,
            scalar=2.0 * K,
            scalar_gradient=2.0 * frame_dK,
            ricci=K * np.eye(2),
            riemann=K * T,
            nabla_riemann=np.einsum("ijkl,m->ijklm", T, frame_dK),
        )

    # -- geodesic flow -----------------------------------------------------

    def _geodesic_rhs(self, state):
        n = state.shape[0] // 4
        Z = state[: 2 * n].reshape(n, 2)
        V = state[2 * n :].reshape(n, 2)
        _, df = self._f_jet(Z, order=1)
        fv = np.einsum("pi,pi->p", df, V)
        vv = np.einsum("pi,pi->p", V, V)
        acc = -2.0 * fv[:, None] * V + vv[:, None] * df
        return np.concatenate([V.ravel(), acc.ravel()])

    def exp(self, p, V):
        p = np.asarray(p, dtype=float)
        V = np.atleast_2d(np.asarray(V, dtype=float))
        n = V.shape[0]
        if np.abs(V).max(initial=0.0) == 0.0:
            return np.tile(p, (n, 1))
        f0 = float(self._f_jet(p[None, :], order=1)[0][0])
        Vc = V * math.exp(-f0)  # chart components of the initial velocity
        Z0 = np.tile(p, (n, 1))
        state0 = np.concatenate([Z0.ravel(), Vc.ravel()])
        sol = solve_ivp(
            lambda t, y: self._geodesic_rhs(y),
            (0.0, 1.0),
            state0,
            method="DOP853",
            rtol=self.rtol,
            atol=self.atol,
        )
        if not sol.success:
            raise RuntimeError("geodesic integration failed: %s" % sol.message)
        end = sol.y[:, -1]
        return end[: 2 * n].reshape(n, 2)

    def log(self, p, Q, tol=1e-12, max_iter=80):
        p = np.asarray(p, dtype=float)
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        f0 = float(self._f_jet(p[None, :], order=1)[0][0])
        scale = math.exp(f0)
        U = scale * (Q - p[None, :])  # first-order seed in frame coefficients
        for it in range(max_iter):
            gap = Q - self.exp(p, U)
            err = np.abs(gap).max()
            if err < tol:
                return U
            step = 1.0 if err < 0.05 else 0.6
            U = U + step * scale * gap
        # Newton fallback for any stubborn points, one at a time
        for i in range(Q.shape[0]):
            gap = Q[i] - self.exp(p, U[i : i + 1])[0]
            if np.abs(gap).max() < tol:
                continue
            for it in range(40):
                h = 1e-7
                J = np.empty((2, 2))
                base = self.exp(p, U[i : i + 1])[0]
                for d in range(2):
                    e = np.zeros(2)
                    e[d] = h
                    J[:, d] = (self.exp(p, (U[i] + e)[None, :])[0] - base) / h
                gap = Q[i] - base
                if np.abs(gap).max() < tol:
                    break
                U[i] = U[i] + np.linalg.solve(J, gap)
            else:
                raise RuntimeError("log map did not converge")
        return U

    def transport(self, p, q, V):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        V = np.atleast_2d(np.asarray(V, dtype=float))
        u = self.log(p, q[None, :])[0]
        if np.abs(u).max(initial=0.0) < 1e-15:
            return V.copy()
        n = V.shape[0]
        f0 = float(self._f_jet(p[None, :], order=1)[0][0])
        Vc = V * math.exp(-f0)
        uc = u * math.exp(-f0)

        def rhs(t, y):
            z = y[:2]
            zdot = y[2:4]
            W = y[4:].reshape(n, 2)
            _, df = self._f_jet(z[None, :], order=1)
            df = df[0]
            fv = df @ zdot
            vv = zdot @ zdot
            acc = -2.0 * fv * zdot + vv * df
            fw = W @ df
            zw = W @ zdot
            Wdot = -(fv * W + np.outer(fw, zdot) - np.outer(zw, df))
            return np.concatenate([zdot, acc, Wdot.ravel()])

        y0 = np.concatenate([p, uc, Vc.ravel()])
        sol = solve_ivp(
            rhs, (0.0, 1.0), y0, method="DOP853", rtol=self.rtol, atol=self.atol
        )
        if not sol.success:
            raise RuntimeError("transport integration failed: %s" % sol.message)
        end = sol.y[:, -1]
        fq = float(self._f_jet(q[None, :], order=1)[0][0])
        return end[4:].reshape(n, 2) * math.exp(fq)

    def scalar_max_point(self, seed=None):
        """Chart location of the (local) maximum of the scalar curvature."""

        def neg(z):
            K, dK = self._curvature_jet(z[None, :])
            f = self._f_jet(z[None, :], order=1)[0]
            return -2.0 * K[0], -2.0 * dK[0]

        z0 = np.zeros(2) if seed is None else np.asarray(seed, dtype=float)
        res = minimize(neg, z0, jac=True, method="BFGS", tol=1e-14)
        return res.x


# -- metric jet ----------------------------------------------------------------


def _smoothstep_jet(r):
    """Quintic ramp in s = clamp(4r - 1): 0 below r=1/4, 1 above r=1/2.

    Returns (chi, dchi/dr, d2chi/dr2).
    """
    s = np.clip(4.0 * r - 1.0, 0.0, 1.0)
    chi = s**3 * (6.0 * s**2 - 15.0 * s + 10.0)
    ds = 30.0 * s**2 * (s - 1.0) ** 2
    dss = 60.0 * s * (s - 1.0) * (2.0 * s - 1.0)
    inside = (r > 0.25) & (r < 0.5)
    dchi = np.where(inside, 4.0 * ds, 0.0)
    d2chi = np.where(inside, 16.0 * dss, 0.0)
    return chi, dchi, d2chi


class MetricJet:
    """Pointwise metric of a perturbed geodesic ball, pulled back to B_1.

    Composition of two maps: x -> rho(x) x deforms the unit ball onto the
    star-shaped domain {r < 1 + v(theta)}, then scaled normal coordinates
    y -> exp_p(eps y E) land it on the manifold. rho blends the mean part of
    the perturbation as a global dilation with the degree >= 2 part ramped
    in over r in [1/4, 1/2]; the degree-1 part of a perturbation is a
    boundary translation handled by the outer solver and never deforms the
    domain here.

    fidelity "truncated" uses the cubic curvature model of the metric (any
    manifold); "exact" uses the closed-form normal-coordinate metric and is
    available when the manifold has one.
    """

    def __init__(self, manifold, p, eps, state=None, fidelity="truncated"):
        self.manifold = manifold
        self.p = p
        self.eps = float(eps)
        self.state = state
        self.fidelity = fidelity
        self.packet = manifold.packet(p)
        self.dim = manifold.dim
        if fidelity == "exact":
            if not manifold.has_exact_chart:
                raise ValueError("manifold has no exact chart")
            self._chart = lambda Y: manifold.chart_metric(p, Y)
        elif fidelity == "truncated":
            self._chart = lambda Y: truncated_chart(self.packet, Y)
        else:
            raise ValueError("unknown fidelity %r" % fidelity)
        if state is not None:
            basis = state.vbar.basis
            self._wbasis = basis
            self._wcoeffs = state.vbar.coeffs
            self._v0 = state.v0
        else:
            self._wbasis = None
            self._v0 = 0.0

    # -- the radial blend rho ------------------------------------------------

    def rho_jet(self, pts):
        """(rho, d rho, d2 rho) at points of B_1, shapes (P,), (P,N), (P,N,N)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        P, N = pts.shape
        rho = np.full(P, 1.0 + self._v0)
        drho = np.zeros((P, N))
        d2rho = np.zeros((P, N, N))
        if self._wbasis is None or not np.any(self._wcoeffs):
            return rho, drho, d2rho
        r = np.linalg.norm(pts, axis=1)
        chi, dchi, d2chi = _smoothstep_jet(r)
        live = r > 0.25
        if not np.any(live):
            return rho, drho, d2rho
        x = pts[live]
        rl = r[live]
        basis = self._wbasis
        H = basis.eval_matrix(x)
        dH = basis.eval_grad_matrix(x)
        d2H = basis.eval_hess_matrix(x)
        c = self._wcoeffs
        degs = basis.degrees.astype(float)
        # w = sum_m c_m r^{-k_m} H_m(x); assemble w, dw, d2w at the live points
        rpow = rl[None, :] ** (-degs[:, None])  # (n_modes, n_live)
        ch = c[:, None] * rpow
        w = np.einsum("mp,mp->p", ch, H)
        xunit = x / rl[:, None]
        eye = np.eye(N)
        # d(r^-k H) = -k r^{-k-2} x H + r^{-k} dH
        kk = degs[:, None]
        dw = np.einsum("mp,mpi->pi", ch, dH, optimize=True)
        dw -= np.einsum("mp,mp,pi->pi", ch * kk, H, x / rl[:, None] ** 2)
        # d2(r^-k H) = k(k+2) r^{-k-4} x x H
        #   - k r^{-k-2} (d_ij H + x_i dH_j + x_j dH_i) + r^{-k} d2H
        t1 = np.einsum(
            "mp,mp,pi,pj->pij",
            ch * (kk * (kk + 2.0)) / rl[None, :] ** 4,
            H,
            x,
            x,
            optimize=True,
        )
        mid = np.einsum("mp,mp,ij->pij", ch * kk, H, eye, optimize=True)
        mid += np.einsum("mp,pi,mpj->pij", ch * kk, x, dH, optimize=True)
        mid += np.einsum("mp,pj,mpi->pij", ch * kk, x, dH, optimize=True)
        mid /= rl[:, None, None] ** 2
        tail = np.einsum("mp,mpij->pij", ch, d2H, optimize=True)
        d2w = t1 - mid + tail
        # combine with the radial ramp
        chl = chi[live]
        dchl = dchi[live]
        d2chl = d2chi[live]
        rho[live] += chl * w
        grad = dchl[:, None] * xunit * w[:, None] + chl[:, None] * dw
        drho[live] = grad
        rhat2 = np.einsum("pi,pj->pij", xunit, xunit)
        d2r = (eye[None] - rhat2) / rl[:, None, None]
        hess = (
            d2chl[:, None, None] * rhat2 * w[:, None, None]
            + dchl[:, None, None] * d2r * w[:, None, None]
            + dchl[:, None, None]
            * (
                np.einsum("pi,pj->pij", xunit, dw)
                + np.einsum("pj,pi->pij", xunit, dw)
            )
            + chl[:, None, None] * d2w
        )
        d2rho[live] = hess
        return rho, drho, d2rho

    def rho(self, pts):
        return self.rho_jet(pts)[0]

    # -- metric callbacks ------------------------------------------------------

    def metric_and_grad(self, pts):
        """(g (P,N,N), dg (P,N,N,N)) of the pulled-back metric at unit-ball
        points; dg[p,c,i,j] = d_c g_ij. Includes the eps^2 scaling of the
        ball, i.e. the flat case returns the identity."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        P, N = pts.shape
        rho, drho, d2rho = self.rho_jet(pts)
        Y = rho[:, None] * pts
        # J[p,a,i] = d_i Y^a; K[p,a,i,c] = d_c d_i Y^a
        eye = np.eye(N)
        J = np.einsum("pi,pa->pai", drho, pts) + rho[:, None, None] * eye[None]
        K = (
            np.einsum("pic,pa->paic", d2rho, pts)
            + np.einsum("pi,ac->paic", drho, eye)
            + np.einsum("pc,ai->paic", drho, eye)
        )
        gbar, dgbar = self._chart(self.eps * Y)
        dgbar = dgbar * self.eps  # chain rule from true to scaled coordinates
        g = np.einsum("pab,pai,pbj->pij", gbar, J, J, optimize=True)
        dg = np.einsum("peab,pec,pai,pbj->pcij", dgbar, J, J, J, optimize=True)
        dg += np.einsum("pab,paic,pbj->pcij", gbar, K, J, optimize=True)
        dg += np.einsum("pab,pai,pbjc->pcij", gbar, J, K, optimize=True)
        return g, dg

    def metric(self, pts):
        return self.metric_and_grad(pts)[0]

    def boundary_metric(self):
        """Metric at the angular quadrature nodes on the unit sphere."""
        basis = self._wbasis or get_basis(self.dim, 0)
        return self.metric(basis.nodes)


def pullback_metric(manifold, p, eps, state=None, fidelity="truncated"):
    """MetricJet for the ball of radius eps at p, deformed by state."""
    return MetricJet(manifold, p, eps, state, fidelity)


def laplace_beltrami_apply(jet, field, grid=None):
    """Metric Laplacian of a ball field, pointwise on the product grid."""
    return ball_solver.laplacian_pointwise(jet, field, grid)


# -- measuring curvature from a chart -----------------------------------------


def _second_derivatives(chart, N, h):
    """d2_{kl} g_ij(0) by central differences at scale h, (N,N,N,N) array
    indexed [k,l,i,j]."""
    out = np.empty((N, N, N, N))
    g0 = chart(np.zeros((1, N)))[0]
    for k in range(N):
        ek = np.zeros(N)
        ek[k] = h
        gp = chart(ek[None, :])[0]
        gm = chart(-ek[None, :])[0]
        out[k, k] = (gp + gm - 2.0 * g0) / h**2
        for l in range(k + 1, N):
            el = np.zeros(N)
            el[l] = h
            gpp = chart((ek + el)[None, :])[0]
            gpm = chart((ek - el)[None, :])[0]
            gmp = chart((el - ek)[None, :])[0]
            gmm = chart((-ek - el)[None, :])[0]
            mixed = (gpp - gpm - gmp + gmm) / (4.0 * h**2)
            out[k, l] = mixed
            out[l, k] = mixed
    return out


def _third_derivatives(chart, N, h):
    """d3_{klm} g_ij(0) via polarization of the odd part, [k,l,m,i,j]."""

    def odd(y):
        return 0.5 * (chart(y[None, :])[0] - chart(-y[None, :])[0])

    out = np.empty((N, N, N, N, N))
    for k in range(N):
        for l in range(k, N):
            for m in range(l, N):
                u = np.zeros(N)
                v = np.zeros(N)
                w = np.zeros(N)
                u[k] = h
                v[l] = h
                w[m] = h
                c = (
                    odd(u + v + w)
                    - odd(u + v - w)
                    - odd(u - v + w)
                    - odd(-u + v + w)
                    + odd(u - v - w)
                    + odd(-u + v - w)
                    + odd(-u - v + w)
                    - odd(-u - v - w)
                ) / 8.0
                # the alternating sum polarizes the cubic part: c equals
                # 6 c_sym(e_k, e_l, e_m) h^3, and the third derivative is
                # 6 c_sym as well, so dividing by h^3 lands exactly on it.
                val = c / h**3
                for per in (
                    (k, l, m),
                    (k, m, l),
                    (l, k, m),
                    (l, m, k),
                    (m, k, l),
                    (m, l, k),
                ):
                    out[per] = val
    return out


def _richardson(samples, order=2):
    """Limit h -> 0 of a sequence sampled at h, h/2, h/4, error O(h^order)."""
    vals = list(samples)
    fac = 2.0**order
    while len(vals) > 1:
        vals = [
            (fac * vals[i + 1] - vals[i]) / (fac - 1.0)
            for i in range(len(vals) - 1)
        ]
        fac *= 4.0
    return vals[0]


def _nabla_riemann_from_third(C, N):
    """Solve the symmetrized-cubic relation for the curvature derivative.

    C[i,j,k,l,m] = d3_{klm} g_ij(0) equals the symmetrization over (k,l,m)
    of nabla_riemann[i,k,j,l,m]. The solve runs as least squares over the
    linear subspace of five-index tensors with the curvature-derivative
    symmetries (front/back antisymmetry, pair symmetry, both Bianchi
    identities), where the symmetrization map is injective.
    """
    size = N**5
    idx = lambda i, j, k, l, m: (((i * N + j) * N + k) * N + l) * N + m
    rows = []

    def add(coeffs):
        row = np.zeros(size)
        for pos, c in coeffs:
            row[idx(*pos)] += c
        rows.append(row)

    rng = range(N)
    for i in rng:
        for j in rng:
            for k in rng:
                for l in rng:
                    for m in rng:
                        add([((i, j, k, l, m), 1.0), ((j, i, k, l, m), 1.0)])
                        add([((i, j, k, l, m), 1.0), ((i, j, l, k, m), 1.0)])
                        add([((i, j, k, l, m), 1.0), ((k, l, i, j, m), -1.0)])
                        add(
                            [
                                ((i, j, k, l, m), 1.0),
                                ((j, k, i, l, m), 1.0),
                                ((k, i, j, l, m), 1.0),
                            ]
                        )
                        add(
                            [
                                ((i, j, k, l, m), 1.0),
                                ((i, j, l, m, k), 1.0),
                                ((i, j, m, k, l), 1.0),
                            ]
                        )
    A = np.stack(rows)
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > 1e-9 * max(s[0], 1.0)))
    B = Vt[rank:].T  # columns span the admissible tensors
    # symmetrization map: S(X)[i,j,k,l,m] = mean over perms p of (k,l,m) of
    # X[i, p(k), j, p(l), p(m)] reindexed to match C[i,j,k,l,m]
    X = B.reshape(N, N, N, N, N, -1)
    perms = [
        (0, 1, 2),
        (0, 2, 1),
        (1, 0, 2),
        (1, 2, 0),
        (2, 0, 1),
        (2, 1, 0),
    ]
    SX = 0.0
    for pe in perms:
        # target C index order (i,j,k,l,m); source X[i, s(k), j, s(l), s(m)]
        src = "i" + "klm"[pe[0]] + "j" + "klm"[pe[1]] + "klm"[pe[2]] + "t"
        SX = SX + np.einsum(src + "->ijklmt", X)
    SX = SX / 6.0
    M = SX.reshape(size, -1)
    sol, *_ = np.linalg.lstsq(M, C.reshape(size), rcond=None)
    Xhat = (B @ sol).reshape(N, N, N, N, N)
    resid = float(np.abs(M @ sol - C.reshape(size)).max())
    return Xhat, resid


def packet_from_chart(chart, N, h=0.04, exact=True):
    """Measure a curvature packet from a normal-coordinate metric callback.

    chart(Y) maps (n, N) true normal coordinates to (n, N, N) metric values.
    For charts that are exactly cubic the stencils are exact at any h; set
    exact=True (the default) to Richardson-extrapolate over h, h/2, h/4 for
    genuine (analytic) charts.
    """
    hs = [h, h / 2.0, h / 4.0] if exact else [h]
    d2 = [_second_derivatives(chart, N, hh) for hh in hs]
    d3 = [_third_derivatives(chart, N, hh) for hh in hs]
    H2 = _richardson(d2) if exact else d2[0]
    H3 = _richardson(d3) if exact else d3[0]
    # With g_ij = d + (1/3) riemann[i,k,j,l] y^k y^l + ..., combining the
    # first Bianchi identity with the symmetries gives the exact relation
    # riemann[i,k,j,l] = d2_{kl} g_ij - d2_{il} g_kj.
    riemann = np.empty((N, N, N, N))
    for i in range(N):
        for k in range(N):
            for j in range(N):
                for l in range(N):
                    riemann[i, k, j, l] = H2[k, l, i, j] - H2[i, l, k, j]
    C3 = np.einsum("klmij->ijklm", H3)
    nabla_riemann, resid = _nabla_riemann_from_third(C3, N)
    ricci = -np.einsum("ikil->kl", riemann)
    scalar = float(np.trace(ricci))
    dS = -np.einsum("ikikm->m", nabla_riemann)
    packet = CurvaturePacket(
        dim=N,
        scalar=scalar,
        scalar_gradient=dS,
        ricci=ricci,
        riemann=riemann,
        nabla_riemann=nabla_riemann,
    )
    packet.fit_residual = resid
    return packet


# -- config loading ------------------------------------------------------------


def manifold_from_config(options):
    """Build a model manifold from a flat key/value mapping.

    kind = flat | sphere | conformal2d. sphere takes dim and curvature;
    conformal2d takes bumps as a semicolon-separated list of
    "A,cx,cy,sigma" quadruples (empty means the default pair).
    """
    kind = options.get("kind", "sphere").strip().lower()
    if kind == "flat":
        return FlatSpace(int(options.get("dim", 2)))
    if kind == "sphere":
        return ConstantCurvature(
            int(options.get("dim", 2)), float(options.get("curvature", 1.0))
        )
    if kind == "conformal2d":
        raw = options.get("bumps", "").strip()
        if not raw:
            return ConformalSphere2D()
        bumps = []
        for part in raw.split(";"):
            part = part.strip()
            if not part:
                continue
            a, cx, cy, sg = (float(t) for t in part.split(","))
            bumps.append((a, (cx, cy), sg))
        return ConformalSphere2D(bumps)
    raise ValueError("unknown manifold kind %r" % kind)
