"""Reduced energy of perturbed geodesic balls and its critical points.

The reduced functional assigns to each ball center the torsion energy of
the solved over-determined domain plus a volume term; its critical points
are exactly the centers whose solutions carry no translation-kernel
component. This module evaluates that functional, locates its critical
points, and cross-checks the underlying shape calculus by independent
finite differences.
"""

import numpy as np
from dataclasses import dataclass
from scipy.optimize import minimize

from .ball_solver import (
    EnvelopeError,
    LaplaceContext,
    dirichlet_solve_full,
    get_grid,
    neumann_trace,
    poisson_solve,
)
from .curvature import MetricJet
from .sphere_spectral import (
    PerturbationState,
    SphereFunction,
    ball_volume,
)

__all__ = [
    "ReducedReport",
    "SearchError",
    "constants",
    "energy_J",
    "find_critical",
    "reduced_functional",
    "shape_derivative_check",
    "stationarity_check",
    "tangential_derivative_check",
    "torsion_integral",
    "volumes",
]


class SearchError(RuntimeError):
    """Critical-point search failed to converge inside the chart."""


def constants(N):
    """Closed-form constants of the energy expansion: (alpha, beta, J1, c).

    alpha is the flat value of the reduced energy, beta its response
    coefficient against eps^2 times scalar curvature, J1 the torsion energy
    of the Euclidean unit ball, and c the volume-normalized coefficient of
    the isochoric profile comparison.
    """
    if N < 2:
        raise ValueError("dimension must be at least 2")
    b1 = ball_volume(N)
    J1 = N * (N + 2.0) / b1
    alpha = (N**3 * (N + 2.0) + b1**2) / (N**2 * b1)
    beta = (N**2 * (N + 2.0) ** 3 - (N + 4.0) * b1**2) / (
        2.0 * N**2 * (N + 2.0) * (N + 4.0) * b1
    )
    c = b1 ** (-2.0 / N) / (N * (N + 4.0))
    if abs(beta) <= 1e-6:
        raise ValueError("degenerate eps^2 coefficient at N = %d" % N)
    return alpha, beta, J1, c


# -- quadratures against the pulled-back volume element ----------------------


def torsion_integral(jet, phi, grid=None, context=None):
    """Integral of the potential against the metric volume element."""
    grid = grid or phi.grid
    ctx = context if context is not None else LaplaceContext(jet, grid)
    weight = ctx.sqrt_det.reshape(grid.n_r, grid.n_ang)
    return phi.integral(weight=weight)


def energy_J(jet, phi, grid=None, context=None):
    """Torsion energy 1 / integral(phi dvol) of a solved potential."""
    return 1.0 / torsion_integral(jet, phi, grid=grid, context=context)


def volumes(jet, grid, context=None):
    """(volume, boundary area) of the unit ball under the pulled-back metric.

    These are the rescaled quantities; multiply by eps^N and eps^(N-1) for
    the ambient-scale ball. The area element on the coordinate sphere is
    sqrt(g^{ij} x_i x_j) sqrt(det g) against the round measure.
    """
    ctx = context if context is not None else LaplaceContext(jet, grid)
    vol = grid.volume_integral(ctx.sqrt_det.reshape(grid.n_r, grid.n_ang))
    basis = grid.basis
    gb = jet.metric(basis.nodes)
    ginv = np.linalg.inv(gb)
    grr = np.einsum("pij,pi,pj->p", ginv, basis.nodes, basis.nodes)
    dens = np.sqrt(grr * np.linalg.det(gb))
    return float(vol), float(basis.weights @ dens)


# -- the reduced functional ----------------------------------------------------


@dataclass
class ReducedReport:
    """Energy accounting of one converged solve."""

    eps: float
    point: np.ndarray
    J_value: float
    volume: float
    boundary_area: float
    phi_eps: float
    F_value: float
    flat: bool
    torsion: float
    solution: object

    def to_record(self):
        rec = {
            "eps": self.eps,
            "point": [float(x) for x in np.atleast_1d(self.point)],
            "J": self.J_value,
            "volume": self.volume,
            "area": self.boundary_area,
            "phi_eps": self.phi_eps,
            "F": self.F_value,
            "flat": self.flat,
            "torsion": self.torsion,
        }
        rec.update(
            {
                "a_norm": float(np.linalg.norm(self.solution.state.a)),
                "v_sobolev": self.solution.v_norm(),
            }
        )
        return rec


def _is_flat(manifold, p):
    packet = manifold.packet(p)
    return bool(
        np.abs(packet.riemann).max() < 1e-12
        and np.abs(packet.nabla_riemann).max() < 1e-12
    )


def reduced_functional(problem, p, eps, solution=None):
    """Evaluate the reduced energy at a ball center.

    problem is a SerrinProblem; the solve is reused when passed in. The
    report's normalized field F rescales the energy offset by the eps^2
    response coefficient, except on flat manifolds where that quotient is
    0/0 and the report carries a flat flag instead.
    """
    p = np.asarray(p, dtype=float)
    sol = solution if solution is not None else problem.solve(p, eps)
    grid = problem.grid
    ctx = LaplaceContext(sol.jet, grid)
    T = torsion_integral(sol.jet, sol.potential, grid, context=ctx)
    J = 1.0 / T
    vol, area = volumes(sol.jet, grid, context=ctx)
    N = problem.manifold.dim
    phi_eps = J + vol / N**2
    alpha, beta, _, _ = constants(N)
    flat = _is_flat(problem.manifold, p)
    F = 0.0 if flat else (phi_eps - alpha) / (beta * eps**2)
    return ReducedReport(
        eps=eps,
        point=p,
        J_value=J,
        volume=vol,
        boundary_area=area,
        phi_eps=phi_eps,
        F_value=F,
        flat=flat,
        torsion=T,
        solution=sol,
    )


# -- critical-point search -------------------------------------------------


def find_critical(
    problem,
    eps,
    p_init=None,
    seed=0,
    jitter=0.01,
    coarse_budget=20,
    tol=1e-9,
    max_polish=12,
    chart_radius=1.5,
):
    """Locate a center whose solution has no translation-kernel component.

    Starts from p_init (falling back to the manifold's scalar-curvature
    maximum when it exposes one, else the origin), applies seeded jitter,
    and drives the kernel component a(p) to zero by finite-difference
    Newton steps. All stepping goes through the exponential map with
    tangent-frame coefficients, so embedded and chart-based point
    representations are handled alike. When the Newton iteration stalls
    from a poor start, one round of derivative-free descent on the reduced
    energy re-seeds it. Returns (point, solution, info).
    """
    manifold = problem.manifold
    N = manifold.dim
    rng = np.random.default_rng(seed)
    if p_init is None:
        if hasattr(manifold, "scalar_max_point"):
            p_init = manifold.scalar_max_point()
        else:
            p_init = manifold.origin()
    p_init = np.asarray(p_init, dtype=float)

    def move(p, w):
        return manifold.exp(p, np.atleast_2d(w))[0]

    start = move(p_init, jitter * rng.standard_normal(N))

    evals = {"solves": 0}
    warm = {"v": None}

    def solve_at(p):
        evals["solves"] += 1
        sol = problem.solve(p, eps, v_init=warm["v"])
        warm["v"] = sol.v_function()
        return sol

    def polish(p):
        sol = solve_at(p)
        best = np.linalg.norm(sol.state.a)
        for _ in range(max_polish):
            anorm = np.linalg.norm(sol.state.a)
            if anorm < tol:
                return p, sol
            h = 0.02
            jac = np.empty((N, N))
            for c in range(N):
                e = np.zeros(N)
                e[c] = h
                ap = solve_at(move(p, e)).state.a
                am = solve_at(move(p, -e)).state.a
                jac[:, c] = (ap - am) / (2.0 * h)
            step = np.linalg.solve(jac, sol.state.a)
            if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 0.5:
                raise SearchError("kernel-component Newton step diverged")
            p = move(p, -step)
            if manifold.distance(p_init, p) > chart_radius:
                raise SearchError("search left the chart")
            sol = solve_at(p)
            best = min(best, float(np.linalg.norm(sol.state.a)))
        if np.linalg.norm(sol.state.a) < tol:
            return p, sol
        raise SearchError(
            "kernel component stalled at %.3g after %d polish steps"
            % (best, max_polish)
        )

    try:
        p, sol = polish(start)
    except (SearchError, EnvelopeError, np.linalg.LinAlgError):
        # re-seed by a short derivative-free descent on the reduced energy,
        # parameterized in the tangent space at the jittered start
        def phi_of(w):
            try:
                rep = reduced_functional(problem, move(start, w), eps)
            except EnvelopeError:
                return np.inf
            evals["solves"] += 1
            return rep.phi_eps

        res = minimize(
            phi_of,
            np.zeros(N),
            method="Nelder-Mead",
            options={"maxfev": coarse_budget, "xatol": 1e-3, "fatol": 1e-13},
        )
        p, sol = polish(move(start, np.asarray(res.x, dtype=float)))

    info = {
        "solves": evals["solves"],
        "a_norm": float(np.linalg.norm(sol.state.a)),
        "start": start,
    }
    return p, sol, info


# -- shape-derivative checks --------------------------------------------------


def _harmonic_speed_jet(pts, triples):
    """Value, gradient, Hessian of sum_k Re[(a_k - i b_k) (x+iy)^k].

    Each term is a harmonic polynomial restricting to a_k cos(k theta) +
    b_k sin(k theta) on the unit circle, so the boundary speed extends
    into the disk with spectral smoothness and exact derivatives.
    """
    z = pts[:, 0] + 1j * pts[:, 1]
    n = len(pts)
    eta = np.zeros(n)
    deta = np.zeros((n, 2))
    d2eta = np.zeros((n, 2, 2))
    for k, a, b in triples:
        c = a - 1j * b
        eta += (c * z**k).real
        if k >= 1:
            dz = k * z ** (k - 1)
            deta[:, 0] += (c * dz).real
            deta[:, 1] += (1j * c * dz).real
        if k >= 2:
            d2z = k * (k - 1) * z ** (k - 2)
            d2eta[:, 0, 0] += (c * d2z).real
            d2eta[:, 0, 1] += (1j * c * d2z).real
            d2eta[:, 1, 0] += (1j * c * d2z).real
            d2eta[:, 1, 1] -= (c * d2z).real
    return eta, deta, d2eta


class _StarMapJet:
    """Pullback of the flat metric through x -> (1 + s eta(x)) x.

    eta is the harmonic-polynomial extension of a band-limited boundary
    speed, so the metric is polynomial and the spectral solver keeps full
    accuracy; the boundary moves with normal speed s eta per unit s.
    """

    def __init__(self, s, triples, basis):
        self.dim = 2
        self.s = float(s)
        self.triples = [(int(k), float(a), float(b)) for k, a, b in triples]
        self._basis = basis

    def metric_and_grad(self, pts):
        s = self.s
        eta, deta, d2eta = _harmonic_speed_jet(pts, self.triples)
        n = len(pts)
        eye = np.eye(2)
        # jac[p, a, i] = d Phi_a / d x_i
        jac = (1.0 + s * eta)[:, None, None] * eye[None]
        jac += s * pts[:, :, None] * deta[:, None, :]
        # hess[p, a, i, c] = d^2 Phi_a / d x_i d x_c
        hess = np.zeros((n, 2, 2, 2))
        for a_idx in range(2):
            for i in range(2):
                for c_idx in range(2):
                    hess[:, a_idx, i, c_idx] = s * (
                        deta[:, c_idx] * eye[a_idx, i]
                        + deta[:, i] * eye[a_idx, c_idx]
                        + pts[:, a_idx] * d2eta[:, i, c_idx]
                    )
        g = np.einsum("pai,paj->pij", jac, jac, optimize=True)
        dg = np.einsum("paic,paj->pcij", hess, jac, optimize=True)
        dg += np.einsum("pai,pajc->pcij", jac, hess, optimize=True)
        return g, dg

    def metric(self, pts):
        return self.metric_and_grad(pts)[0]

    def boundary_metric(self):
        return self.metric(self._basis.nodes)


def shape_derivative_check(speed, h=1e-4, max_degree=16, grid=None):
    """Boundary-integral energy derivative vs central finite differences.

    speed is an iterable of (degree, cos amplitude, sin amplitude) triples
    for the normal speed on the Euclidean unit disk. The analytic side is
    the classical Hadamard formula for the normalized torsion potential,
    -integral((J phi_nu)^2 speed); the finite-difference side re-solves the
    energy on the mapped domains at parameter +-h. Returns a dict with
    both values and their relative gap.
    """
    grid = grid or get_grid(2, max_degree)
    basis = grid.basis
    triples = [(int(k), float(a), float(b)) for k, a, b in speed]

    # base solve on the disk itself (s = 0 map is the identity)
    base_jet = _StarMapJet(0.0, triples, basis)
    phi0 = poisson_solve(-np.ones((grid.n_r, grid.n_ang)), None, grid=grid)
    ctx0 = LaplaceContext(base_jet, grid)
    J0 = energy_J(base_jet, phi0, grid, context=ctx0)
    trace = neumann_trace(base_jet, phi0, grid).node_values()
    zeta = _harmonic_speed_jet(basis.nodes, triples)[0]
    analytic = -float(basis.weights @ ((J0 * trace) ** 2 * zeta))

    def J_at(s):
        jet = _StarMapJet(s, triples, basis)
        phi, _ = dirichlet_solve_full(jet, grid)
        return energy_J(jet, phi, grid)

    fd = (J_at(h) - J_at(-h)) / (2.0 * h)
    rel = abs(fd - analytic) / max(abs(analytic), 1e-300)
    return {
        "analytic": analytic,
        "finite_difference": fd,
        "rel_error": rel,
        "J0": J0,
    }


class _RotationJet:
    """Pullback through a rigid rotation: an exact isometry of the disk."""

    def __init__(self, angle, basis):
        self.dim = 2
        c, s = np.cos(angle), np.sin(angle)
        R = np.array([[c, -s], [s, c]])
        self._g = R.T @ R
        self._basis = basis

    def metric_and_grad(self, pts):
        n = len(pts)
        g = np.broadcast_to(self._g, (n, 2, 2)).copy()
        return g, np.zeros((n, 2, 2, 2))

    def metric(self, pts):
        return self.metric_and_grad(pts)[0]

    def boundary_metric(self):
        return self.metric(self._basis.nodes)


def tangential_derivative_check(h=1e-4, rate=0.7, max_degree=16, grid=None):
    """Purely tangential deformation: both sides of the check vanish.

    The deformation field rate*(-y, x) is tangent to every circle, so its
    normal component is identically zero and the flow is a rotation. The
    analytic boundary integral picks up exact zeros; the finite-difference
    side differentiates a constant energy.
    """
    grid = grid or get_grid(2, max_degree)
    basis = grid.basis
    nodes = basis.nodes
    xi = rate * np.stack([-nodes[:, 1], nodes[:, 0]], axis=1)
    normal_speed = np.einsum("pi,pi->p", xi, nodes)
    phi0 = poisson_solve(-np.ones((grid.n_r, grid.n_ang)), None, grid=grid)
    base = _RotationJet(0.0, basis)
    J0 = energy_J(base, phi0, grid)
    trace = neumann_trace(base, phi0, grid).node_values()
    analytic = -float(basis.weights @ ((J0 * trace) ** 2 * normal_speed))

    def J_at(s):
        jet = _RotationJet(s * rate, basis)
        phi, _ = dirichlet_solve_full(jet, grid)
        return energy_J(jet, phi, grid)

    fd = (J_at(h) - J_at(-h)) / (2.0 * h)
    return {"analytic": analytic, "finite_difference": fd, "J0": J0}


# -- stationarity of the volume-penalized energy -------------------------------


def stationarity_check(problem, sol, xi, h=1e-4):
    """Finite-difference energy derivatives along a boundary-profile direction.

    Deforms the converged perturbation by +-h xi, re-solves the torsion
    problem, and differentiates the torsion integral, the energy, and the
    volume. At a solution with vanishing kernel component the constant
    Neumann trace makes dT = dvol/N^2 exactly, so the volume-penalized
    torsion balance -dT + dvol/N^2 vanishes for every speed, while
    d(J + vol/N^2) collapses to (1 - J^2)/N^2 dvol. Both identities are
    returned for the caller to assert.
    """
    N = problem.manifold.dim
    v = sol.v_function()
    out = {}
    for sgn in (1.0, -1.0):
        state = PerturbationState.from_sphere_function(v + xi * (sgn * h))
        jet = MetricJet(
            problem.manifold, sol.point, sol.eps, state, problem.fidelity
        )
        ctx = LaplaceContext(jet, problem.grid)
        phi, _ = dirichlet_solve_full(
            jet, problem.grid, context=ctx, warm_start=sol.potential
        )
        T = torsion_integral(jet, phi, problem.grid, context=ctx)
        vol, area = volumes(jet, problem.grid, context=ctx)
        out[sgn] = (T, 1.0 / T, vol, area)
    dT, dJ, dvol, darea = (
        (out[1.0][i] - out[-1.0][i]) / (2.0 * h) for i in range(4)
    )
    J0 = 0.5 * (out[1.0][1] + out[-1.0][1])
    return {
        "dT": dT,
        "dJ": dJ,
        "dvol": dvol,
        "darea": darea,
        "torsion_balance": -dT + dvol / N**2,
        "combined": dJ + dvol / N**2,
        "combined_expected": (1.0 - J0**2) / N**2 * dvol,
    }
