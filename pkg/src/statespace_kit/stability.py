"""Stability verdicts: eigenvalue tests, quadratic certificates, subspaces, BIBO."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfinv

from . import numkit
from .errors import RepeatedEigenvalues, SingularLyapunovOperator
from .model import Equilibrium, NonlinearModel, linearize_at_equilibrium
from .realization import RationalFunction, TransferMatrix

ASYMPTOTICALLY_STABLE = "asymptoticallyStable"
STABLE_ISL = "stableISL"
UNSTABLE = "unstable"


@dataclass(frozen=True)
class StabilityVerdict:
    kind: str
    eigenvalues: np.ndarray
    witnesses: tuple = ()
    multiplicity_deficits: tuple = ()


def lti_stability(A, tol: float = None) -> StabilityVerdict:
    """Eigenvalue trichotomy with a relative dead band around the axis.

    Axis eigenvalues must carry a full set of eigenvectors; a deficit is
    reported as a witness alongside any right-half-plane eigenvalue.
    """
    A = numkit.require_square(A)
    if tol is None:
        tol = 1e-9 * (1.0 + float(np.linalg.norm(A, 2) if A.size else 0.0))
    eig = numkit.eigen(A)
    lam = eig.values
    witnesses = [complex(z) for z in lam if z.real > tol]
    deficits = []
    for z, am, gm in zip(eig.distinct_values, eig.algebraic_multiplicity,
                         eig.geometric_multiplicity):
        if abs(z.real) <= tol and gm < am:
            deficits.append((complex(z), am - gm))
    if witnesses:
        kind = UNSTABLE
    elif deficits:
        kind = UNSTABLE
    elif np.all(lam.real < -tol):
        kind = ASYMPTOTICALLY_STABLE
    else:
        kind = STABLE_ISL
    return StabilityVerdict(
        kind=kind,
        eigenvalues=lam,
        witnesses=tuple(witnesses),
        multiplicity_deficits=tuple(deficits),
    )


# ---------------------------------------------------------------------------
# Lyapunov equation


@dataclass(frozen=True)
class LyapunovCertificate:
    P: np.ndarray
    Q: np.ndarray
    residual: float
    pd_verdict: str


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve A'P + PA = -Q through the stacked linear system.

    Solvable exactly when no two eigenvalues of A are negatives of each
    other. Dense stacking limits this to moderate state dimensions.
    """
    A = numkit.require_square(A)
    Q = numkit.require_square(Q)
    n = A.shape[0]
    if Q.shape[0] != n:
        raise ValueError("Q must match A in size")
    if n > 30:
        raise ValueError("stacked solve is limited to n <= 30")
    lam = numkit.eigen(A).values
    scale = 1.0 + float(np.max(np.abs(lam), initial=0.0))
    for i in range(n):
        for j in range(i, n):
            if abs(lam[i] + lam[j]) <= 1e-9 * scale:
                raise SingularLyapunovOperator(
                    f"eigenvalue pair sums to zero: {lam[i]:.6g}, {lam[j]:.6g}"
                )
    op = np.kron(np.eye(n), A.T) + np.kron(A.T, np.eye(n))
    vecP = np.linalg.solve(op, -Q.reshape(-1, order="F"))
    P = vecP.reshape((n, n), order="F")
    return 0.5 * (P + P.T)


def lyapunov_stability_test(A, Q=None) -> tuple:
    """Quadratic certificate with unit forcing, checked against the spectrum.

    Returns (verdict, certificate). A disagreement between the certificate
    and the eigenvalue trichotomy is a hard internal failure, not a report.
    """
    A = numkit.require_square(A)
    n = A.shape[0]
    Q = np.eye(n) if Q is None else numkit.require_square(Q)
    P = solve_lyapunov(A, Q)
    residual = float(np.linalg.norm(A.T @ P + P @ A + Q))
    report = numkit.is_positive_definite(P)
    cert = LyapunovCertificate(P=P, Q=Q, residual=residual, pd_verdict=report.verdict)
    verdict = lti_stability(A)
    agrees = (report.verdict == "PD") == (verdict.kind == ASYMPTOTICALLY_STABLE)
    if not agrees:
        raise RuntimeError(
            "internal error: quadratic certificate contradicts the eigenvalue test"
        )
    return verdict, cert


# ---------------------------------------------------------------------------
# invariant subspaces


@dataclass(frozen=True)
class StabilitySubspaces:
    stable: np.ndarray
    center: np.ndarray
    unstable: np.ndarray


def stability_subspaces(A, tol: float = None) -> StabilitySubspaces:
    """Real bases of the stable, center, and unstable eigenspaces.

    Simple eigenvalues only; each complex pair contributes the real and
    imaginary parts of one eigenvector.
    """
    A = numkit.require_square(A)
    n = A.shape[0]
    if tol is None:
        tol = 1e-9 * (1.0 + float(np.linalg.norm(A, 2) if A.size else 0.0))
    eig = numkit.eigen(A)
    if len(eig.distinct_values) != n:
        raise RepeatedEigenvalues("subspace split requires simple eigenvalues")
    cols = {"stable": [], "center": [], "unstable": []}
    seen_conj = set()
    order = np.argsort([(z.real, abs(z.imag)) for z in eig.values], axis=0)[:, 0]
    for idx in order:
        z = eig.values[idx]
        v = eig.right_vectors[:, idx]
        if z.real < -tol:
            bucket = "stable"
        elif z.real > tol:
            bucket = "unstable"
        else:
            bucket = "center"
        if abs(z.imag) <= tol * (1 + abs(z)):
            w = np.real(v)
            cols[bucket].append(w / np.linalg.norm(w))
        else:
            key = (round(z.real, 9), round(abs(z.imag), 9))
            if key in seen_conj:
                continue
            seen_conj.add(key)
            re, im = np.real(v), np.imag(v)
            cols[bucket].append(re / np.linalg.norm(re))
            cols[bucket].append(im / np.linalg.norm(im))

    def pack(name):
        c = cols[name]
        return np.column_stack(c) if c else np.zeros((n, 0))

    return StabilitySubspaces(
        stable=pack("stable"), center=pack("center"), unstable=pack("unstable")
    )


# ---------------------------------------------------------------------------
# quadratic certification on a sublevel set


def _halton(index: int, base: int) -> float:
    f = 1.0
    r = 0.0
    i = index
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


@dataclass(frozen=True)
class ScanReport:
    certified: bool
    level: float
    samples: int
    worst_decay: float
    failing_point: np.ndarray | None = None


def quadratic_lyapunov_scan(
    f,
    P,
    level: float,
    samples: int = 10_000,
    margin: float = 1e-9,
) -> ScanReport:
    """Deterministic sampling check that V = x'Px decreases on {V <= level}.

    Points fill the sublevel ellipsoid through a low-discrepancy sequence
    (radius from the first coordinate, direction from inverse-normal
    transformed remaining coordinates). Certification requires the decay
    rate 2 x'P f(x) to clear -margin * |x|^2 at every sample.
    """
    P = numkit.require_square(P)
    n = P.shape[0]
    if numkit.is_positive_definite(P).verdict != "PD":
        raise ValueError("P must be positive definite")
    if n + 1 > len(_PRIMES):
        raise ValueError("state dimension too large for the sampling bases")
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    P_inv_half = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    worst = -np.inf
    failing = None
    certified = True
    for k in range(1, samples + 1):
        u = _halton(k, _PRIMES[0])
        radius = u ** (1.0 / n)
        g = np.array(
            [erfinv(2.0 * _halton(k, _PRIMES[1 + d]) - 1.0) * np.sqrt(2.0)
             for d in range(n)]
        )
        norm = np.linalg.norm(g)
        if norm == 0.0:
            continue
        x = np.sqrt(level) * (P_inv_half @ (radius * g / norm))
        r2 = float(x @ x)
        if r2 == 0.0:
            continue
        decay = 2.0 * float(x @ (P @ np.asarray(f(x), dtype=float).reshape(n)))
        ratio = decay / r2
        worst = max(worst, ratio)
        if decay >= -margin * r2:
            certified = False
            if failing is None:
                failing = x.copy()
    return ScanReport(
        certified=certified,
        level=float(level),
        samples=samples,
        worst_decay=float(worst),
        failing_point=failing if not certified else None,
    )


# ---------------------------------------------------------------------------
# nonlinear verdict by first-order approximation


ASYMP_STABLE = "asympStable"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class LinearizationVerdict:
    kind: str
    eigenvalues: np.ndarray
    linear_model: object


def linearization_verdict(model: NonlinearModel, eq: Equilibrium,
                          tol: float = None) -> LinearizationVerdict:
    """Classify an equilibrium by the eigenvalues of the first-order model.

    Axis eigenvalues leave the nonlinear question open, so the verdict is
    inconclusive rather than forced.
    """
    lin = linearize_at_equilibrium(model, eq)
    if tol is None:
        tol = 1e-7 * (1.0 + float(np.linalg.norm(lin.A, 2) if lin.A.size else 0.0))
    lam = numkit.eigen(lin.A).values
    if np.any(lam.real > tol):
        kind = UNSTABLE
    elif np.all(lam.real < -tol):
        kind = ASYMP_STABLE
    else:
        kind = INCONCLUSIVE
    return LinearizationVerdict(kind=kind, eigenvalues=lam, linear_model=lin)


# ---------------------------------------------------------------------------
# bounded-input bounded-output


@dataclass(frozen=True)
class BiboReport:
    bibo_stable: bool
    poles: np.ndarray
    cancelled_roots: tuple
    unstable_cancellation: bool


def bibo_stability(P, tol: float = 1e-9) -> BiboReport:
    """Pole test over every entry, after cancellation, with hidden-mode flags."""
    if isinstance(P, RationalFunction):
        entries = [P]
    elif isinstance(P, TransferMatrix):
        entries = [P.entry(i, j) for i in range(P.p) for j in range(P.m)]
    else:
        raise TypeError("expected a rational function or transfer matrix")
    poles = []
    cancelled = []
    for e in entries:
        poles.extend(e.poles())
        cancelled.extend(e.cancelled_roots)
    poles = np.asarray(poles, dtype=complex)
    stable = bool(np.all(poles.real < -tol)) if poles.size else True
    bad_cancel = any(np.real(c) >= -tol for c in cancelled)
    return BiboReport(
        bibo_stable=stable,
        poles=poles,
        cancelled_roots=tuple(cancelled),
        unstable_cancellation=bad_cancel,
    )
