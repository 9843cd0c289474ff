"""Quadratic regulators: Riccati flows, the algebraic equation, loop margins."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit
from .errors import (
    AxisEigenvalue,
    FiniteEscape,
    NotDetectable,
    NotStabilizable,
    RepeatedHamiltonianEigenvalues,
    StableSpaceDefect,
)
from .model import StateSpace
from .realization import RationalFunction
from .structural import structural_analysis


@dataclass(frozen=True)
class LqrProblem:
    """Quadratic cost data over a horizon; terminal weight only when finite."""

    sys: object
    Q: np.ndarray
    R: np.ndarray
    M: np.ndarray | None = None
    t0: float = 0.0
    t1: float | None = None  # None marks the infinite horizon

    def __post_init__(self):
        Q = numkit.require_square(self.Q)
        R = numkit.require_square(self.R)
        if numkit.is_positive_definite(Q).verdict == "indefinite":
            raise ValueError("state weight must be positive semidefinite")
        if numkit.is_positive_definite(R).verdict != "PD":
            raise ValueError("input weight must be positive definite")
        M = self.M
        if M is not None:
            M = numkit.require_square(M)
            if numkit.is_positive_definite(M).verdict == "indefinite":
                raise ValueError("terminal weight must be positive semidefinite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "M", M)

    @property
    def infinite(self) -> bool:
        return self.t1 is None

    def state_cost_factor(self) -> np.ndarray:
        """Symmetric square-root factor C with C'C = Q."""
        w, V = np.linalg.eigh(0.5 * (self.Q + self.Q.T))
        w = np.clip(w, 0.0, None)
        return np.diag(np.sqrt(w)) @ V.T


@dataclass(frozen=True)
class RiccatiSolution:
    kind: str  # "finite" | "infinite"
    problem: LqrProblem
    times: np.ndarray | None
    P_grid: np.ndarray | None
    P_bar: np.ndarray | None
    K_bar: np.ndarray | None
    closed_loop_poles: np.ndarray | None
    warnings: tuple = ()

    def P_at(self, t: float) -> np.ndarray:
        if self.kind == "infinite":
            return self.P_bar
        ts = self.times
        t = float(np.clip(t, ts[0], ts[-1]))
        i = int(np.searchsorted(ts, t, side="right") - 1)
        i = min(max(i, 0), ts.size - 2)
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1.0 - w) * self.P_grid[i] + w * self.P_grid[i + 1]

    def K_at(self, t: float) -> np.ndarray:
        if self.kind == "infinite":
            return self.K_bar
        prob = self.problem
        B = prob.sys.B if isinstance(prob.sys, StateSpace) else numkit.as_matrix(
            prob.sys.B(t))
        return np.linalg.solve(prob.R, B.T @ self.P_at(t))

    def value_at(self, x0) -> float:
        x0 = numkit.as_vector(x0)
        P0 = self.P_bar if self.kind == "infinite" else self.P_at(self.times[0])
        return float(x0 @ P0 @ x0)


def _coeff_matrices(prob: LqrProblem, t: float):
    if isinstance(prob.sys, StateSpace):
        return prob.sys.A, prob.sys.B
    return numkit.as_matrix(prob.sys.A(t)), numkit.as_matrix(prob.sys.B(t))


def _default_rde_steps(prob: LqrProblem) -> int:
    A, _ = _coeff_matrices(prob, prob.t1)
    anorm = float(np.linalg.norm(A, 2)) if A.size else 0.0
    span = prob.t1 - prob.t0
    return int(min(200_000, max(800, np.ceil(2000.0 * max(anorm, 1.0) * span))))


def solve_rde(prob: LqrProblem, steps: int = None) -> RiccatiSolution:
    """Backward sweep of the quadratic matrix flow from the terminal weight.

    Fixed-step fourth-order integration on a uniform grid, resymmetrized
    every step; entries running away to infinity raise with the escape
    time instead of returning garbage.
    """
    if prob.infinite:
        raise ValueError("finite horizon required")
    n = prob.Q.shape[0]
    M = prob.M if prob.M is not None else np.zeros((n, n))
    if steps is None:
        steps = _default_rde_steps(prob)
    h = (prob.t1 - prob.t0) / steps
    Rinv = np.linalg.solve(prob.R, np.eye(prob.R.shape[0]))
    escape = 1e12 * (1.0 + float(np.linalg.norm(M) + np.linalg.norm(prob.Q)))

    def flow(P, t):
        A, B = _coeff_matrices(prob, t)
        S = B @ Rinv @ B.T
        return prob.Q + P @ A + A.T @ P - P @ S @ P

    times = [prob.t1]
    grid = [M.astype(float)]
    P = M.astype(float)
    t = prob.t1
    # marching in s = t1 - t, where the quadratic flow enters with plus sign
    for _ in range(steps):
        k1 = flow(P, t)
        k2 = flow(P + (h / 2) * k1, t - h / 2)
        k3 = flow(P + (h / 2) * k2, t - h / 2)
        k4 = flow(P + h * k3, t - h)
        P = P + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        P = 0.5 * (P + P.T)
        t -= h
        if not np.all(np.isfinite(P)) or float(np.linalg.norm(P)) > escape:
            raise FiniteEscape(f"solution escaped near t = {t:.6g}")
        times.append(t)
        grid.append(P)
    times = np.asarray(times[::-1])
    grid = np.asarray(grid[::-1])
    return RiccatiSolution(
        kind="finite", problem=prob, times=times, P_grid=grid,
        P_bar=None, K_bar=None, closed_loop_poles=None,
    )


# ---------------------------------------------------------------------------
# Hamiltonian routes


@dataclass(frozen=True)
class HamiltonianPencil:
    matrix: np.ndarray
    spectrum: np.ndarray
    stable_basis: np.ndarray  # 2n x n, stable eigenvector columns


def build_hamiltonian(prob: LqrProblem) -> HamiltonianPencil:
    if not isinstance(prob.sys, StateSpace):
        raise TypeError("constant-coefficient model required")
    A, B = prob.sys.A, prob.sys.B
    n = A.shape[0]
    Rinv = np.linalg.solve(prob.R, np.eye(prob.R.shape[0]))
    S = B @ Rinv @ B.T
    H = np.block([[A, -S], [-prob.Q, -A.T]])
    eig = numkit.eigen(H)
    order = np.argsort(eig.values.real, kind="stable")
    stable_cols = [i for i in order if eig.values[i].real < 0]
    basis = eig.right_vectors[:, stable_cols[:n]] if len(stable_cols) >= n \
        else eig.right_vectors[:, stable_cols]
    return HamiltonianPencil(matrix=H, spectrum=eig.values, stable_basis=basis)


def _partition_by_stability(H, tol):
    eig = numkit.eigen(H)
    n2 = H.shape[0]
    n = n2 // 2
    lam = eig.values
    if np.any(np.abs(lam.real) <= tol):
        raise AxisEigenvalue("spectrum touches the imaginary axis")
    for i in range(n2):
        for j in range(i + 1, n2):
            if abs(lam[i] - lam[j]) <= tol * (1.0 + abs(lam[i])):
                raise RepeatedHamiltonianEigenvalues(
                    "repeated eigenvalue in the coupled flow matrix"
                )
    stable = [i for i in range(n2) if lam[i].real < 0]
    unstable = [i for i in range(n2) if lam[i].real > 0]
    if len(stable) != n:
        raise StableSpaceDefect(
            f"expected {n} strictly stable directions, found {len(stable)}"
        )
    V = eig.right_vectors
    U_s = V[:, stable]
    U_u = V[:, unstable]
    lam_s = lam[stable]
    lam_u = lam[unstable]
    return lam_s, lam_u, U_s, U_u


def solve_rde_by_hamiltonian(prob: LqrProblem, samples: int = 201) -> RiccatiSolution:
    """Closed-form finite-horizon solution through the coupled linear flow.

    Valid when the 2n x 2n flow matrix has simple, off-axis eigenvalues;
    evaluated on a uniform time grid.
    """
    if prob.infinite:
        raise ValueError("finite horizon required")
    if not isinstance(prob.sys, StateSpace):
        raise TypeError("constant-coefficient model required")
    n = prob.sys.n
    M = prob.M if prob.M is not None else np.zeros((n, n))
    pencil = build_hamiltonian(prob)
    H = pencil.matrix
    tol = 1e-9 * (1.0 + float(np.max(np.abs(pencil.spectrum))))
    lam_s, lam_u, U_s, U_u = _partition_by_stability(H, tol)
    U11, U21 = U_s[:n, :], U_s[n:, :]
    U12, U22 = U_u[:n, :], U_u[n:, :]
    Mc = M.astype(complex)
    G = -np.linalg.solve(U22 - Mc @ U12, U21 - Mc @ U11)
    times = np.linspace(prob.t0, prob.t1, samples)
    grid = []
    for t in times:
        # t <= t1, so both exponential factors stay bounded by one
        tau = t - prob.t1
        W = np.diag(np.exp(lam_u * tau)) @ G @ np.diag(np.exp(-lam_s * tau))
        num = U21 + U22 @ W
        den = U11 + U12 @ W
        P = num @ np.linalg.solve(den, np.eye(n))
        P = np.real(P)
        grid.append(0.5 * (P + P.T))
    return RiccatiSolution(
        kind="finite", problem=prob, times=times, P_grid=np.asarray(grid),
        P_bar=None, K_bar=None, closed_loop_poles=None,
    )


def solve_are(prob: LqrProblem) -> RiccatiSolution:
    """Stationary solution from the stable eigenvectors of the coupled flow.

    Requires a stabilizable input and a detectable cost; the candidate is
    validated against the quadratic equation and the closed-loop spectrum
    before anything is returned.
    """
    if not prob.infinite:
        raise ValueError("infinite horizon required")
    if not isinstance(prob.sys, StateSpace):
        raise TypeError("constant-coefficient model required")
    sys = prob.sys
    n = sys.n
    warnings = []
    Cfac = prob.state_cost_factor()
    probe = StateSpace(sys.A, sys.B, Cfac, np.zeros((n, sys.m)))
    report = structural_analysis(probe)
    if not report.stabilizable:
        raise NotStabilizable("an unstable mode is outside the input's reach")
    if float(np.linalg.norm(Cfac)) <= 1e-14:
        warnings.append("zero state weight: detectability holds vacuously")
        if not report.detectable:
            raise NotDetectable("unstable dynamics carry no cost; value undefined")
    elif not report.detectable:
        raise NotDetectable("an unstable mode is invisible to the cost")
    pencil = build_hamiltonian(prob)
    H = pencil.matrix
    tol = 1e-9 * (1.0 + float(np.max(np.abs(pencil.spectrum))))
    lam = pencil.spectrum
    if np.any(np.abs(lam.real) <= tol):
        raise StableSpaceDefect("coupled-flow spectrum touches the imaginary axis")
    stable = [i for i in range(2 * n) if lam[i].real < -tol]
    if len(stable) != n:
        raise StableSpaceDefect(
            f"expected {n} strictly stable directions, found {len(stable)}"
        )
    eig = numkit.eigen(H)
    U = eig.right_vectors[:, stable]
    U11, U21 = U[:n, :], U[n:, :]
    if np.linalg.cond(U11) > 1e12:
        raise StableSpaceDefect("stable-basis top block is numerically singular")
    P = U21 @ np.linalg.solve(U11, np.eye(n))
    imag_mag = float(np.max(np.abs(P.imag))) if np.iscomplexobj(P) else 0.0
    Preal = np.real(P)
    scale = max(1.0, float(np.linalg.norm(Preal)))
    if imag_mag > 1e-8 * scale:
        raise StableSpaceDefect("stationary candidate failed to come out real")
    Pbar = 0.5 * (Preal + Preal.T)
    Rinv = np.linalg.solve(prob.R, np.eye(prob.R.shape[0]))
    S = sys.B @ Rinv @ sys.B.T
    residual = float(np.linalg.norm(
        sys.A.T @ Pbar + Pbar @ sys.A - Pbar @ S @ Pbar + prob.Q))
    bound = 1e-8 * (float(np.linalg.norm(prob.Q))
                    + float(np.linalg.norm(Pbar)) ** 2 * float(np.linalg.norm(S))
                    + 1.0)
    if residual > bound:
        raise StableSpaceDefect(
            f"stationary residual {residual:.3e} exceeds bound {bound:.3e}"
        )
    K = Rinv @ sys.B.T @ Pbar
    poles = np.asarray(sorted((lam[i] for i in stable),
                              key=lambda z: (z.real, z.imag)), dtype=complex)
    achieved = sorted(numkit.eigen(sys.A - sys.B @ K).values,
                      key=lambda z: (z.real, z.imag))
    for want, got in zip(poles, achieved):
        if abs(want - got) > 1e-6 * (1.0 + abs(want)):
            raise StableSpaceDefect(
                "closed-loop spectrum disagrees with the stable directions"
            )
    return RiccatiSolution(
        kind="infinite", problem=prob, times=None, P_grid=None,
        P_bar=Pbar, K_bar=K, closed_loop_poles=poles, warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# frequency-domain verification


@dataclass(frozen=True)
class FrequencyReport:
    omegas: np.ndarray
    return_difference: np.ndarray  # |1+L| (or smallest singular value of I+L)
    sensitivity: np.ndarray
    min_return_difference: float
    min_omega: float
    identity_residual: float


def return_difference_report(solution: RiccatiSolution,
                             omegas=None) -> FrequencyReport:
    """Evaluate the loop-gain identity and the unit-circle margin bound.

    The identity ties R plus the weighted plant power spectrum to the
    return difference; its residual certifies the gain. The margin value
    is |1+L| for one input, otherwise the smallest singular value of I+L.
    """
    prob = solution.problem
    sys = prob.sys
    if solution.kind != "infinite":
        raise ValueError("stationary solution required")
    if omegas is None:
        omegas = np.logspace(-2, 3, 400)
    omegas = np.asarray(omegas, dtype=float)
    K = solution.K_bar
    R = prob.R
    Cfac = prob.state_cost_factor()
    n, m = sys.n, sys.m
    rd = np.zeros(omegas.size)
    sens = np.zeros(omegas.size)
    worst_resid = 0.0
    rnorm = max(float(np.linalg.norm(R)), 1e-300)
    for i, om in enumerate(omegas):
        resolvent = np.linalg.solve(1j * om * np.eye(n) - sys.A,
                                    sys.B.astype(complex))
        L = K @ resolvent
        Pjw = Cfac @ resolvent
        lhs = R + Pjw.conj().T @ Pjw
        IL = np.eye(m) + L
        rhs = IL.conj().T @ R @ IL
        # relative to the local magnitude: near poles of the plant both
        # sides blow up together and an absolute gap means nothing
        scale = max(float(np.linalg.norm(lhs)), rnorm)
        worst_resid = max(worst_resid,
                          float(np.linalg.norm(lhs - rhs)) / scale)
        if m == 1:
            val = abs(IL[0, 0])
        else:
            val = float(np.linalg.svd(IL, compute_uv=False)[-1])
        rd[i] = val
        sens[i] = 1.0 / val if val > 0 else np.inf
    imin = int(np.argmin(rd))
    return FrequencyReport(
        omegas=omegas, return_difference=rd, sensitivity=sens,
        min_return_difference=float(rd[imin]), min_omega=float(omegas[imin]),
        identity_residual=worst_resid,
    )


# ---------------------------------------------------------------------------
# symmetric root locus


@dataclass(frozen=True)
class SrlPoint:
    r: float
    roots: np.ndarray
    stable_roots: np.ndarray


def _reflection_paired(roots, tol=1e-8):
    rem = list(roots)
    scale = 1.0 + max((abs(z) for z in rem), default=0.0)
    while rem:
        z = rem.pop()
        best, dist = None, np.inf
        for i, w in enumerate(rem):
            d = abs(w + z)
            if d < dist:
                best, dist = i, d
        if best is None or dist > tol * scale:
            return False
        rem.pop(best)
    return True


def symmetric_root_locus(plant: RationalFunction, r_values) -> tuple:
    """Roots of r a(s)a(-s) + b(s)b(-s) per weight, with the stable branch."""
    a = np.real(np.asarray(plant.den, dtype=complex)).astype(float)
    b = np.real(np.asarray(plant.num, dtype=complex)).astype(float)
    return _srl_core(a, [b], r_values)


def symmetric_root_locus_multi(a, numerators, r_values) -> tuple:
    """Vector generalization: the plant power term sums over output channels."""
    a = np.asarray(a, dtype=float)
    return _srl_core(a, [np.asarray(b, dtype=float) for b in numerators], r_values)


def _srl_core(a, numerators, r_values):
    a_even = numkit.poly_mul(a, numkit.poly_reflect(a))
    b_even = np.array([0.0])
    for b in numerators:
        b_even = numkit.poly_add(b_even, numkit.poly_mul(b, numkit.poly_reflect(b)))
    out = []
    for r in np.atleast_1d(np.asarray(r_values, dtype=float)):
        p = numkit.poly_add(numkit.poly_scale(a_even, r), b_even)
        roots = numkit.poly_roots(p)
        if not _reflection_paired(roots):
            raise RuntimeError("internal error: locus lost its axis symmetry")
        stable = np.asarray(sorted((z for z in roots if z.real < 0),
                                   key=lambda w: (w.real, w.imag)), dtype=complex)
        out.append(SrlPoint(r=float(r), roots=roots, stable_roots=stable))
    return tuple(out)


def lqr_value(solution: RiccatiSolution, x0) -> float:
    """Optimal cost from the initial state through the quadratic form."""
    return solution.value_at(x0)
