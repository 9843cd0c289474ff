"""State-transition evaluators and time-domain simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import numkit
from .errors import (
    IllConditionedVandermonde,
    NotDiagonalizable,
    RepeatedEigenvalues,
    SingularFundamental,
)
from .model import LtvModel, NonlinearModel, StateSpace

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class StateTransition:
    """Two-argument propagator phi(t, tau) mapping state at tau to state at t."""

    evaluator: Callable[[float, float], np.ndarray]
    method: str
    n: int

    def __call__(self, t: float, tau: float) -> np.ndarray:
        return self.evaluator(float(t), float(tau))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    truncated: bool = False


# ---------------------------------------------------------------------------
# constant-coefficient propagators


def stm_series(A) -> StateTransition:
    """Propagator through the scaled-and-squared power series."""
    A = numkit.require_square(A)

    def ev(t, tau, _A=A):
        return numkit.expm(_A, t - tau)

    return StateTransition(evaluator=ev, method="series", n=A.shape[0])


def stm_cayley_hamilton(A, cond_limit: float = 1e12) -> StateTransition:
    """Propagator as a degree n-1 matrix polynomial.

    The coefficient functions come from a Vandermonde solve over the
    eigenvalues, so the eigenvalues must be simple; the conditioning of
    that solve does not depend on t and is checked once.
    """
    A = numkit.require_square(A)
    n = A.shape[0]
    eig = numkit.eigen(A)
    if len(eig.distinct_values) != n:
        raise RepeatedEigenvalues("coefficient system needs simple eigenvalues")
    lam = np.asarray(eig.values, dtype=complex)
    V = np.vander(lam, n, increasing=True)  # V[i, k] = lam_i**k
    if np.linalg.cond(V) > cond_limit:
        raise IllConditionedVandermonde(
            f"coefficient system condition exceeds {cond_limit:.1e}"
        )
    powers = [np.linalg.matrix_power(A, k) for k in range(n)]

    def beta(dt, _V=V, _lam=lam):
        return np.linalg.solve(_V, np.exp(_lam * dt))

    def ev(t, tau, _powers=powers, _beta=beta):
        b = _beta(t - tau)
        out = sum(bk * Pk for bk, Pk in zip(b, _powers))
        return np.real(out)

    ev.beta = beta  # exposed for coefficient checks
    return StateTransition(evaluator=ev, method="cayley-hamilton", n=n)


def stm_modal(A) -> StateTransition:
    """Propagator through the eigenvector basis; diagonalizable matrices only."""
    A = numkit.require_square(A)
    eig = numkit.eigen(A)
    if not eig.is_diagonalizable:
        raise NotDiagonalizable("matrix has a defective eigenvalue")
    M = eig.right_vectors
    lam = eig.values
    Minv = np.linalg.solve(M, np.eye(A.shape[0]))

    def ev(t, tau, _M=M, _lam=lam, _Mi=Minv):
        return np.real(_M @ np.diag(np.exp(_lam * (t - tau))) @ _Mi)

    return StateTransition(evaluator=ev, method="modal", n=A.shape[0])


# ---------------------------------------------------------------------------
# time-varying propagators


def _segments(t0, t1, breaks):
    """Split [t0, t1] at interior discontinuity points."""
    pts = [t0] + [b for b in breaks if t0 < b < t1] + [t1]
    return list(zip(pts[:-1], pts[1:]))


class _HermiteTable:
    """Dense output for a matrix ODE from nodal values and derivatives."""

    def __init__(self, ts, Us, dUs):
        self.ts = np.asarray(ts)
        self.Us = Us
        self.dUs = dUs

    def __call__(self, t):
        ts = self.ts
        if t <= ts[0]:
            return self.Us[0]
        if t >= ts[-1]:
            return self.Us[-1]
        i = int(np.searchsorted(ts, t, side="right") - 1)
        i = min(i, ts.size - 2)
        h = ts[i + 1] - ts[i]
        s = (t - ts[i]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return (h00 * self.Us[i] + h10 * h * self.dUs[i]
                + h01 * self.Us[i + 1] + h11 * h * self.dUs[i + 1])


def fundamental_matrix_ltv(
    model: LtvModel, t0: float, t1: float, max_step: float = None
) -> StateTransition:
    """Fundamental solution of dx/dt = A(t) x on [t0, t1].

    Classical fourth-order stepping with nodes forced onto the declared
    discontinuity points; evaluation between nodes uses cubic Hermite
    interpolation of the stored solution and its derivative.
    """
    n = model.n
    A = model.A
    span = float(t1) - float(t0)
    if span <= 0:
        raise ValueError("need t1 > t0")
    if max_step is None:
        max_step = span / 800.0
    ts = [t0]
    Us = [np.eye(n)]
    dUs = [numkit.as_matrix(A(t0)) @ Us[0]]
    for a, b in _segments(t0, t1, model.piecewise_continuity_breaks):
        steps = max(2, int(np.ceil((b - a) / max_step)))
        h = (b - a) / steps
        U = Us[-1]
        t = a
        for _ in range(steps):
            k1 = numkit.as_matrix(A(t)) @ U
            k2 = numkit.as_matrix(A(t + h / 2)) @ (U + h / 2 * k1)
            k3 = numkit.as_matrix(A(t + h / 2)) @ (U + h / 2 * k2)
            k4 = numkit.as_matrix(A(t + h)) @ (U + h * k3)
            U = U + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            ts.append(t)
            Us.append(U)
            dUs.append(numkit.as_matrix(A(t)) @ U)
    table = _HermiteTable(ts, Us, dUs)

    def ev(t, tau, _tab=table):
        Ut = _tab(t)
        Utau = _tab(tau)
        try:
            sol = np.linalg.solve(Utau.T, Ut.T).T
        except np.linalg.LinAlgError as exc:
            raise SingularFundamental(str(exc)) from exc
        if not np.all(np.isfinite(sol)):
            raise SingularFundamental("fundamental solution lost invertibility")
        return sol

    return StateTransition(evaluator=ev, method="ltv-fundamental", n=n)


def peano_baker(A_of_t, t0: float, t1: float, iterations: int = 4,
                grid_points: int = 401) -> np.ndarray:
    """Truncated iterated-integral approximation of the propagator.

    Trapezoid quadrature on a uniform grid; iteration k adds the k-fold
    integral term, so constant coefficients reproduce the power series
    through order k exactly.  Accepts either a matrix-valued callable or
    a time-varying model carrying one in its ``A`` attribute.
    """
    if hasattr(A_of_t, "A"):
        A_of_t = A_of_t.A
    taus = np.linspace(float(t0), float(t1), int(grid_points))
    n = numkit.require_square(A_of_t(t0)).shape[0]
    Avals = [numkit.as_matrix(A_of_t(t)) for t in taus]
    phi = [np.eye(n) for _ in taus]
    for _ in range(int(iterations)):
        integrand = [Avals[j] @ phi[j] for j in range(len(taus))]
        new = [np.eye(n)]
        acc = np.zeros((n, n))
        for j in range(1, len(taus)):
            h = taus[j] - taus[j - 1]
            acc = acc + (h / 2.0) * (integrand[j] + integrand[j - 1])
            new.append(np.eye(n) + acc)
        phi = new
    return phi[-1]


# ---------------------------------------------------------------------------
# simulation


def _input_function(u, m):
    if u is None:
        return lambda t: np.zeros(m)
    if callable(u):
        return lambda t: np.asarray(u(t), dtype=float).reshape(m)
    const = np.asarray(u, dtype=float).reshape(m)
    return lambda t: const


def simulate(model, x0, times, u=None, max_step: float = None) -> Trajectory:
    """March the state across the sample grid and record inputs and outputs.

    Constant-coefficient models use the exact interval propagator with a
    Simpson rule for the forced term; time-varying and nonlinear models
    use fixed-step fourth-order integration. A non-finite state stops the
    run early and marks the result truncated.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing with at least two samples")
    if isinstance(model, StateSpace):
        return _simulate_lti(model, x0, times, u, max_step)
    if isinstance(model, LtvModel):
        f = lambda x, v, t: numkit.as_matrix(model.A(t)) @ x + (  # noqa: E731
            numkit.as_matrix(model.B(t)) @ v if model.m else 0.0)
        h = lambda x, v, t: numkit.as_matrix(model.C(t)) @ x + (  # noqa: E731
            numkit.as_matrix(model.D(t)) @ v if model.m else 0.0)
        shell = NonlinearModel(f=f, h=h, n=model.n, m=model.m, p=model.p)
        return _simulate_rk4(shell, x0, times, u, max_step,
                             breaks=model.piecewise_continuity_breaks)
    if isinstance(model, NonlinearModel):
        return _simulate_rk4(model, x0, times, u, max_step, breaks=())
    raise TypeError(f"cannot simulate {type(model).__name__}")


def _simulate_lti(sys: StateSpace, x0, times, u, max_step):
    n, m, p = sys.n, sys.m, sys.p
    uf = _input_function(u, m)
    x = numkit.as_vector(x0).astype(float)
    anorm = float(np.linalg.norm(sys.A, 1)) if n else 0.0
    states = [x.copy()]
    cache = {}

    def props(h):
        key = round(h, 15)
        if key not in cache:
            cache[key] = (numkit.expm(sys.A, h), numkit.expm(sys.A, h / 2.0))
        return cache[key]

    truncated = False
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        if max_step is not None:
            sub = max(1, int(np.ceil(dt / max_step)))
        else:
            sub = max(4, int(np.ceil(dt * max(8.0, 16.0 * anorm))))
        h = dt / sub
        Eh, Eh2 = props(h)
        t = times[k]
        for _ in range(sub):
            if m:
                f0 = sys.B @ uf(t)
                f1 = sys.B @ uf(t + h / 2.0)
                f2 = sys.B @ uf(t + h)
                forced = (h / 6.0) * (Eh @ f0 + 4.0 * (Eh2 @ f1) + f2)
            else:
                forced = 0.0
            x = Eh @ x + forced
            t += h
        if not np.all(np.isfinite(x)):
            truncated = True
            break
        states.append(x.copy())
    states = np.array(states)
    kept = states.shape[0]
    tkeep = times[:kept]
    inputs = np.array([uf(t) for t in tkeep]).reshape(kept, m)
    outputs = np.array(
        [sys.C @ states[i] + (sys.D @ inputs[i] if m else 0.0) for i in range(kept)]
    ).reshape(kept, p)
    return Trajectory(times=tkeep, states=states, inputs=inputs, outputs=outputs,
                      truncated=truncated)


def _simulate_rk4(model: NonlinearModel, x0, times, u, max_step, breaks):
    n, m, p = model.n, model.m, model.p
    uf = _input_function(u, m)
    x = numkit.as_vector(x0).astype(float)
    if max_step is None:
        max_step = (times[-1] - times[0]) / 2000.0

    def f(x_, t_):
        return np.asarray(model.f(x_, uf(t_), t_), dtype=float).reshape(n)

    states = [x.copy()]
    truncated = False
    for k in range(times.size - 1):
        segs = _segments(times[k], times[k + 1], breaks)
        ok = True
        for a, b in segs:
            steps = max(1, int(np.ceil((b - a) / max_step)))
            h = (b - a) / steps
            t = a
            for _ in range(steps):
                k1 = f(x, t)
                k2 = f(x + h / 2 * k1, t + h / 2)
                k3 = f(x + h / 2 * k2, t + h / 2)
                k4 = f(x + h * k3, t + h)
                x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
                if not np.all(np.isfinite(x)):
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            truncated = True
            break
        states.append(x.copy())
    states = np.array(states)
    kept = states.shape[0]
    tkeep = times[:kept]
    inputs = np.array([uf(t) for t in tkeep]).reshape(kept, m)
    outputs = np.array(
        [np.asarray(model.h(states[i], inputs[i], tkeep[i]), dtype=float).reshape(p)
         for i in range(kept)]
    ).reshape(kept, p)
    return Trajectory(times=tkeep, states=states, inputs=inputs, outputs=outputs,
                      truncated=truncated)
