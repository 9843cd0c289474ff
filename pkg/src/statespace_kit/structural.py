"""Controllability and observability: ranks, grammians, decompositions, zeros."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import numkit
from .errors import (
    DegeneratePencil,
    NonSquarePlant,
    RepeatedEigenvalues,
    SingularGrammian,
)
from .model import LtvModel, StateSpace
from .response import Trajectory, fundamental_matrix_ltv, simulate
from .stability import lti_stability, ASYMPTOTICALLY_STABLE


def controllability_matrix(A, B) -> np.ndarray:
    A = numkit.require_square(A)
    B = numkit.as_matrix(B)
    n = A.shape[0]
    if B.shape[1] == 0:
        return np.zeros((n, 0))
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(A, C) -> np.ndarray:
    A = numkit.require_square(A)
    C = numkit.as_matrix(C)
    n = A.shape[0]
    if C.shape[0] == 0:
        return np.zeros((0, n))
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def _range_basis(M, tol=None):
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M)
    r = numkit.rank(M, tol)
    return U[:, :r]


def _null_basis(M, tol=None):
    if M.size == 0:
        return np.eye(M.shape[1]) if M.shape[1] else np.zeros((0, 0))
    _, s, Vh = np.linalg.svd(M)
    r = numkit.rank(M, tol)
    return Vh[r:, :].T.conj()


@dataclass(frozen=True)
class StructuralReport:
    ctrb_matrix: np.ndarray
    obsv_matrix: np.ndarray
    ctrb_rank: int
    obsv_rank: int
    uncontrollable_modes: tuple
    unobservable_modes: tuple
    stabilizable: bool
    detectable: bool
    controllable_subspace_basis: np.ndarray
    unobservable_subspace_basis: np.ndarray


def structural_analysis(sys: StateSpace, tol: float = None) -> StructuralReport:
    """Rank tests plus a per-eigenvalue pencil classification of the modes.

    A mode fails controllability when [lambda I - A | B] drops rank, and
    dually for observability; the verdict flags require every failed mode
    to sit strictly in the left half plane.
    """
    A, B, C = sys.A, sys.B, sys.C
    n = sys.n
    Ct = controllability_matrix(A, B)
    Ob = observability_matrix(A, C)
    rc = numkit.rank(Ct, tol) if Ct.size else 0
    ro = numkit.rank(Ob, tol) if Ob.size else 0
    eig = numkit.eigen(A)
    unc = []
    unob = []
    for lam in eig.distinct_values:
        pc = np.hstack([lam * np.eye(n) - A, B]) if sys.m else lam * np.eye(n) - A
        po = np.vstack([lam * np.eye(n) - A, C]) if sys.p else lam * np.eye(n) - A
        if numkit.rank(pc, tol) < n:
            unc.append(complex(lam))
        if numkit.rank(po, tol) < n:
            unob.append(complex(lam))
    band = 1e-9 * (1.0 + float(np.max(np.abs(eig.values), initial=0.0)))
    stabilizable = all(z.real < -band for z in unc)
    detectable = all(z.real < -band for z in unob)
    return StructuralReport(
        ctrb_matrix=Ct,
        obsv_matrix=Ob,
        ctrb_rank=rc,
        obsv_rank=ro,
        uncontrollable_modes=tuple(unc),
        unobservable_modes=tuple(unob),
        stabilizable=stabilizable,
        detectable=detectable,
        controllable_subspace_basis=_range_basis(Ct),
        unobservable_subspace_basis=_null_basis(Ob),
    )


# ---------------------------------------------------------------------------
# grammians


@dataclass(frozen=True)
class GrammianReport:
    matrix: np.ndarray
    kind: str
    horizon: tuple
    conditioning: float
    min_eig: float
    max_eig: float


def _grammian_report(W, kind, horizon):
    W = 0.5 * (W + W.T)
    vals = np.linalg.eigvalsh(W) if W.size else np.zeros(0)
    mx = float(vals[-1]) if vals.size else 0.0
    mn = float(vals[0]) if vals.size else 0.0
    cond = mx / mn if mn > 0 else np.inf
    return GrammianReport(matrix=W, kind=kind, horizon=horizon,
                          conditioning=cond, min_eig=mn, max_eig=mx)


def _simpson_outer(make_factor, t0, tf, steps):
    """Simpson quadrature of F(t) = G(t) G(t)' with compensated accumulation."""
    h = (tf - t0) / steps
    acc = None
    comp = None
    for j in range(steps):
        a = t0 + j * h
        Fa = make_factor(a)
        Fm = make_factor(a + h / 2.0)
        Fb = make_factor(a + h)
        panel = (h / 6.0) * (Fa @ Fa.T + 4.0 * (Fm @ Fm.T) + Fb @ Fb.T)
        if acc is None:
            acc = panel
            comp = np.zeros_like(panel)
        else:
            y = panel - comp
            t = acc + y
            comp = (t - acc) - y
            acc = t
    return acc


def _lti_quad_steps(A, span, quad_step):
    if quad_step is not None:
        return max(2, int(np.ceil(span / quad_step)))
    anorm = float(np.linalg.norm(A, 1)) if A.size else 0.0
    return int(min(20000, max(400, np.ceil(60.0 * (anorm + 1.0) * span))))


def controllability_grammian(model, t0: float, tf: float,
                             quad_step: float = None) -> GrammianReport:
    """Energy grammian of the input-to-state map on [t0, tf].

    The constant-coefficient path integrates exp(-A tau) B products with a
    Simpson rule built on half-step propagator increments; tf = inf uses
    the stacked linear-equation solve instead of quadrature and requires
    every mode strictly stable.
    """
    if isinstance(model, StateSpace):
        A, B = model.A, model.B
        if np.isinf(tf):
            if lti_stability(A).kind != ASYMPTOTICALLY_STABLE:
                raise ValueError("infinite-horizon grammian needs a strictly stable A")
            from .stability import solve_lyapunov

            W = solve_lyapunov(A.T, B @ B.T)
            return _grammian_report(W, "controllability", (float(t0), np.inf))
        span = float(tf) - float(t0)
        if span <= 0:
            raise ValueError("need tf > t0")
        steps = _lti_quad_steps(A, span, quad_step)
        h = span / steps
        Eh = numkit.expm(A, -h / 2.0)
        # factors at the half-step grid, advanced incrementally
        cache = [B.astype(float)]
        for _ in range(2 * steps):
            cache.append(Eh @ cache[-1])

        def factor(t, _c=cache, _t0=t0, _h=h / 2.0):
            j = int(round((t - _t0) / _h))
            return _c[j]

        W = _simpson_outer(factor, t0, tf, steps)
        return _grammian_report(W, "controllability", (float(t0), float(tf)))
    if isinstance(model, LtvModel):
        span = float(tf) - float(t0)
        if span <= 0:
            raise ValueError("need tf > t0")
        phi = fundamental_matrix_ltv(model, t0, tf)
        steps = max(2, int(np.ceil(span / (quad_step or span / 400.0))))

        def factor(t):
            return phi(t0, t) @ numkit.as_matrix(model.B(t))

        W = _simpson_outer(factor, t0, tf, steps)
        return _grammian_report(W, "controllability", (float(t0), float(tf)))
    raise TypeError("expected a constant or time-varying linear model")


def observability_grammian(model, t0: float, t1: float,
                           quad_step: float = None) -> GrammianReport:
    """Output-energy grammian on [t0, t1]; mirrors the controllability path."""
    if isinstance(model, StateSpace):
        A, C = model.A, model.C
        if np.isinf(t1):
            if lti_stability(A).kind != ASYMPTOTICALLY_STABLE:
                raise ValueError("infinite-horizon grammian needs a strictly stable A")
            from .stability import solve_lyapunov

            H = solve_lyapunov(A, C.T @ C)
            return _grammian_report(H, "observability", (float(t0), np.inf))
        span = float(t1) - float(t0)
        if span <= 0:
            raise ValueError("need t1 > t0")
        steps = _lti_quad_steps(A, span, quad_step)
        h = span / steps
        Eh = numkit.expm(A.T, h / 2.0)
        cache = [C.T.astype(float)]
        for _ in range(2 * steps):
            cache.append(Eh @ cache[-1])

        def factor(t, _c=cache, _t0=t0, _h=h / 2.0):
            j = int(round((t - _t0) / _h))
            return _c[j]

        H = _simpson_outer(factor, t0, t1, steps)
        return _grammian_report(H, "observability", (float(t0), float(t1)))
    if isinstance(model, LtvModel):
        span = float(t1) - float(t0)
        if span <= 0:
            raise ValueError("need t1 > t0")
        phi = fundamental_matrix_ltv(model, t0, t1)
        steps = max(2, int(np.ceil(span / (quad_step or span / 400.0))))

        def factor(t):
            return phi(t, t0).T @ numkit.as_matrix(model.C(t)).T

        H = _simpson_outer(factor, t0, t1, steps)
        return _grammian_report(H, "observability", (float(t0), float(t1)))
    raise TypeError("expected a constant or time-varying linear model")


# ---------------------------------------------------------------------------
# modal test


@dataclass(frozen=True)
class ModalControllabilityReport:
    eigenvalues: np.ndarray
    input_rows: np.ndarray
    row_norms: np.ndarray
    controllable_flags: tuple


def modal_controllability_test(sys: StateSpace, tol: float = None
                               ) -> ModalControllabilityReport:
    """Zero-row test on the input matrix expressed in the eigenvector basis."""
    eig = numkit.eigen(sys.A)
    if len(eig.distinct_values) != sys.n:
        raise RepeatedEigenvalues("modal test requires simple eigenvalues")
    M = eig.right_vectors
    Bbar = np.linalg.solve(M, sys.B.astype(complex))
    norms = np.array([float(np.linalg.norm(Bbar[i])) for i in range(sys.n)])
    if tol is None:
        tol = 1e-8 * (1.0 + float(norms.max(initial=0.0)))
    flags = tuple(bool(nm > tol) for nm in norms)
    return ModalControllabilityReport(
        eigenvalues=eig.values, input_rows=Bbar, row_norms=norms,
        controllable_flags=flags,
    )


# ---------------------------------------------------------------------------
# Kalman canonical forms


@dataclass(frozen=True)
class KalmanDecomposition:
    kind: str
    transform: np.ndarray  # P with xbar = P x
    A_bar: np.ndarray
    B_bar: np.ndarray
    C_bar: np.ndarray
    n1: int

    @property
    def leading_block(self) -> np.ndarray:
        return self.A_bar[: self.n1, : self.n1]

    @property
    def trailing_block(self) -> np.ndarray:
        return self.A_bar[self.n1:, self.n1:]


def _pivoted_completion(columns, n, tol=1e-9):
    """Greedy selection of raw columns, then raw standard-basis fill-in.

    Orthogonal projections decide independence; the selected vectors are
    kept unmodified so structured entries survive into the transform.
    """
    chosen_raw = []
    chosen_orth = []

    def try_add(v):
        w = v.astype(float).copy()
        for q in chosen_orth:
            w -= (q @ w) * q
        norm = np.linalg.norm(w)
        if norm > tol * max(1.0, np.linalg.norm(v)):
            chosen_raw.append(v.astype(float))
            chosen_orth.append(w / norm)
            return True
        return False

    for v in columns:
        if len(chosen_raw) == n:
            break
        try_add(v)
    picked = len(chosen_raw)
    for i in range(n):
        if len(chosen_raw) == n:
            break
        try_add(np.eye(n)[:, i])
    return np.column_stack(chosen_raw), picked


def kalman_decompose(sys: StateSpace, kind: str = "KCCF") -> KalmanDecomposition:
    """Block-triangular form separating the reachable (or observable) part.

    The inverse transform stacks independent reachability columns first and
    completes them with standard basis directions; the dual form reuses the
    same construction on the transposed data.
    """
    if kind == "KOCF":
        dual = StateSpace(sys.A.T, sys.C.T, sys.B.T, sys.D.T)
        d = kalman_decompose(dual, "KCCF")
        P = np.linalg.solve(d.transform, np.eye(sys.n)).T
        Pinv = np.linalg.solve(P, np.eye(sys.n))
        return KalmanDecomposition(
            kind="KOCF",
            transform=P,
            A_bar=P @ sys.A @ Pinv,
            B_bar=P @ sys.B,
            C_bar=sys.C @ Pinv,
            n1=d.n1,
        )
    if kind != "KCCF":
        raise ValueError("kind must be KCCF or KOCF")
    n = sys.n
    Ct = controllability_matrix(sys.A, sys.B)
    r = numkit.rank(Ct) if Ct.size else 0
    if r == n:
        return KalmanDecomposition(
            kind="KCCF", transform=np.eye(n), A_bar=sys.A.copy(),
            B_bar=sys.B.copy(), C_bar=sys.C.copy(), n1=n,
        )
    cols = [Ct[:, j] for j in range(Ct.shape[1])]
    Pinv, picked = _pivoted_completion(cols, n)
    if picked != r:
        raise RuntimeError("internal error: completion picked a wrong rank")
    P = np.linalg.solve(Pinv, np.eye(n))
    return KalmanDecomposition(
        kind="KCCF",
        transform=P,
        A_bar=P @ sys.A @ Pinv,
        B_bar=P @ sys.B,
        C_bar=sys.C @ Pinv,
        n1=r,
    )


# ---------------------------------------------------------------------------
# transmission zeros


@dataclass(frozen=True)
class ZeroSet:
    transmission_zeros: np.ndarray
    pencil_rank_deficiency_tol: float


def transmission_zeros(sys: StateSpace, tol: float = 1e-8) -> ZeroSet:
    """Finite generalized eigenvalues of the system pencil for square plants."""
    if sys.p != sys.m:
        raise NonSquarePlant(f"plant is {sys.p}x{sys.m}; zeros need p = m")
    n, m = sys.n, sys.m
    M = np.block([[sys.A, sys.B], [-sys.C, -sys.D]])
    N = np.zeros_like(M)
    N[:n, :n] = np.eye(n)
    w = scipy.linalg.eig(M, N, right=False, homogeneous_eigvals=True)
    alpha = np.asarray(w[0]).reshape(-1)
    beta = np.asarray(w[1]).reshape(-1)
    scale = float(np.max(np.abs(alpha), initial=0.0)
                  + np.max(np.abs(beta), initial=0.0))
    if scale == 0.0:
        raise DegeneratePencil("system pencil is identically singular")
    # a degenerate pencil shows up as alpha = beta = 0 pairs
    tiny = 1e-12 * scale
    if np.any((np.abs(alpha) <= tiny) & (np.abs(beta) <= tiny)):
        raise DegeneratePencil("system pencil is identically singular")
    finite = np.abs(beta) > tol * max(1.0, scale)
    zeros = alpha[finite] / beta[finite]
    checked = []
    for z in zeros:
        pencil = M - z * N
        s = np.linalg.svd(pencil, compute_uv=False)
        if s[-1] <= 1e-6 * max(1.0, s[0]):
            checked.append(complex(z))
    checked.sort(key=lambda c: (c.real, c.imag))
    return ZeroSet(
        transmission_zeros=np.asarray(checked, dtype=complex),
        pencil_rank_deficiency_tol=tol,
    )


# ---------------------------------------------------------------------------
# minimum-energy steering


def minimum_energy_steer(model, x0, xf, t0: float, tf: float,
                         samples: int = 201):
    """Open-loop control reaching xf at tf with least input energy.

    Built from the grammian inverse applied to the reachability error; the
    returned trajectory is a simulation under the constructed control.
    """
    x0 = numkit.as_vector(x0).astype(float)
    xf = numkit.as_vector(xf).astype(float)
    rep = controllability_grammian(model, t0, tf)
    W = rep.matrix
    if rep.min_eig <= 1e-9 * max(rep.max_eig, 1e-300):
        raise SingularGrammian(
            "grammian is numerically singular on this horizon"
        )
    if isinstance(model, StateSpace):
        A, B = model.A, model.B

        def phi_t0(t):
            return numkit.expm(A, t0 - t)

        phi_t0_tf = numkit.expm(A, t0 - tf)
        B_of = lambda t: B  # noqa: E731
    else:
        fm = fundamental_matrix_ltv(model, t0, tf)

        def phi_t0(t):
            return fm(t0, t)

        phi_t0_tf = fm(t0, tf)
        B_of = lambda t: numkit.as_matrix(model.B(t))  # noqa: E731
    eta = np.linalg.solve(W, x0 - phi_t0_tf @ xf)

    def u(t, _eta=eta):
        return -(B_of(t).T @ phi_t0(t).T @ _eta)

    times = np.linspace(t0, tf, samples)
    traj = simulate(model, x0, times, u=u)
    return u, traj


# ---------------------------------------------------------------------------
# discrete-time reachability


@dataclass(frozen=True)
class DiscreteReachabilityReport:
    ranks: tuple
    reachable: bool


def discrete_reachability(A, B, steps: int) -> DiscreteReachabilityReport:
    """Rank growth of [B AB ... A^(k-1)B] for k = 1..steps."""
    A = numkit.require_square(A)
    B = numkit.as_matrix(B)
    if steps < 1:
        raise ValueError("need at least one step")
    n = A.shape[0]
    ranks = []
    block = B
    stack = None
    for _ in range(steps):
        stack = block if stack is None else np.hstack([stack, block])
        ranks.append(numkit.rank(stack) if stack.size else 0)
        block = A @ block
    return DiscreteReachabilityReport(ranks=tuple(ranks),
                                      reachable=(ranks[-1] == n))
