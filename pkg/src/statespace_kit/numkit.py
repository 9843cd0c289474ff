"""Dense matrix and polynomial kit used by every other module.

Conventions fixed here for the whole package:

* matrices are numpy arrays (real float64 unless stated otherwise),
* polynomial coefficient arrays are ordered highest degree first,
  with the zero polynomial represented as [0].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BackendFailure,
    IllConditioned,
    NonSquare,
    NotSymmetric,
    Overflow,
    SingularBasis,
)

_EPS = float(np.finfo(float).eps)


# ---------------------------------------------------------------------------
# validation helpers


def as_matrix(A, dtype=float) -> np.ndarray:
    M = np.atleast_2d(np.asarray(A, dtype=dtype))
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    return M


def require_square(A) -> np.ndarray:
    M = as_matrix(A)
    if M.shape[0] != M.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {M.shape}")
    return M


def as_vector(x, dtype=float) -> np.ndarray:
    v = np.asarray(x, dtype=dtype).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


# ---------------------------------------------------------------------------
# eigenstructure


@dataclass(frozen=True)
class EigenStructure:
    """Eigenvalues with multiplicity bookkeeping and right eigenvectors.

    values lists every eigenvalue with its algebraic multiplicity;
    right_vectors holds the corresponding unit eigenvector columns.
    distinct_values / algebraic_multiplicity / geometric_multiplicity are
    parallel per-distinct-eigenvalue arrays.
    """

    values: np.ndarray
    right_vectors: np.ndarray
    distinct_values: np.ndarray
    algebraic_multiplicity: np.ndarray
    geometric_multiplicity: np.ndarray
    is_diagonalizable: bool


def _cluster_eigenvalues(values: np.ndarray, tol: float):
    """Group eigenvalues within tol of each other, keeping first-seen order."""
    reps: list[complex] = []
    counts: list[int] = []
    for v in values:
        for i, r in enumerate(reps):
            if abs(v - r) <= tol:
                # running mean keeps the representative centred
                reps[i] = (r * counts[i] + v) / (counts[i] + 1)
                counts[i] += 1
                break
        else:
            reps.append(complex(v))
            counts.append(1)
    return np.array(reps), np.array(counts)


def eigen(A, tol: float | None = None) -> EigenStructure:
    """Full eigenstructure of a square matrix.

    Conjugate pairing for real input is inherited from the backend solver.
    Geometric multiplicities are rank tests on (A - lambda I).
    """
    M = require_square(A)
    n = M.shape[0]
    try:
        values, vectors = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - backend dependent
        raise BackendFailure(str(exc)) from exc
    scale = max(1.0, float(np.max(np.abs(values))) if n else 1.0)
    if tol is None:
        tol = n * _EPS * scale * 64
    distinct, alg = _cluster_eigenvalues(values, tol)
    # rank test on the shifted matrix must absorb the eigensolver's backward
    # error, which scales with the basis conditioning, not machine epsilon
    geo = np.array(
        [n - rank(M - lam * np.eye(n), tol=1e-8) for lam in distinct], dtype=int
    )
    geo = np.minimum(np.maximum(geo, 1), alg)
    return EigenStructure(
        values=values,
        right_vectors=vectors,
        distinct_values=distinct,
        algebraic_multiplicity=alg,
        geometric_multiplicity=geo,
        is_diagonalizable=bool(np.all(geo == alg)),
    )


def rank(A, tol: float | None = None) -> int:
    """Numerical rank by singular values.

    Default cutoff is n * eps * sigma_max with n the larger dimension.
    """
    M = np.atleast_2d(np.asarray(A))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    if tol is None:
        tol = max(M.shape) * _EPS * float(s[0])
    return int(np.count_nonzero(s > tol))


# ---------------------------------------------------------------------------
# definiteness


@dataclass(frozen=True)
class DefinitenessReport:
    verdict: str  # "PD" | "PSD" | "indefinite"
    leading_minors: np.ndarray
    eigenvalues: np.ndarray


def is_positive_definite(M, sym_tol: float | None = None) -> DefinitenessReport:
    """Classify a symmetric matrix as PD, PSD or indefinite.

    PD is certified by strictly positive leading principal minors; the
    PSD / indefinite split uses the symmetric eigenvalues, since minors
    alone cannot certify semidefiniteness.
    """
    A = require_square(M)
    n = A.shape[0]
    scale = max(1.0, float(np.max(np.abs(A))))
    if sym_tol is None:
        sym_tol = 1e-10 * scale
    if float(np.max(np.abs(A - A.T))) > sym_tol:
        raise NotSymmetric("definiteness test requires a symmetric matrix")
    S = 0.5 * (A + A.T)
    minors = np.array([np.linalg.det(S[: k + 1, : k + 1]) for k in range(n)])
    eigs = np.linalg.eigvalsh(S)
    eig_scale = max(1.0, float(np.max(np.abs(eigs))) if n else 1.0)
    if np.all(minors > 0.0) and eigs[0] > 0.0:
        verdict = "PD"
    elif eigs[0] >= -1e-10 * eig_scale:
        verdict = "PSD"
    else:
        verdict = "indefinite"
    return DefinitenessReport(verdict=verdict, leading_minors=minors, eigenvalues=eigs)


# ---------------------------------------------------------------------------
# matrix exponential


def expm(A, t: float = 1.0) -> np.ndarray:
    """e^{A t} by scaling-and-squaring of the truncated power series.

    The argument is scaled so its norm is at most 1/2, the series is summed
    to machine precision, and the result squared back.
    """
    M = require_square(A)
    n = M.shape[0]
    if t == 0.0:
        return np.eye(n)
    X = M * float(t)
    norm = float(np.linalg.norm(X, ord=np.inf))
    squarings = 0
    if norm > 0.5:
        squarings = int(np.ceil(np.log2(norm / 0.5)))
        X = X / (2.0**squarings)
    term = np.eye(n)
    total = np.eye(n)
    for k in range(1, 60):
        term = term @ X / k
        total = total + term
        if float(np.linalg.norm(term, ord=np.inf)) <= _EPS * float(
            np.linalg.norm(total, ord=np.inf)
        ):
            break
    for _ in range(squarings):
        total = total @ total
    if not np.all(np.isfinite(total)):
        raise Overflow("matrix exponential overflowed the representable range")
    return total


# ---------------------------------------------------------------------------
# bases


def representation(E, x) -> np.ndarray:
    """Coefficients beta with E beta = x for basis columns E."""
    M = require_square(E)
    v = as_vector(x)
    if rank(M) < M.shape[0]:
        raise SingularBasis("basis columns are linearly dependent")
    return np.linalg.solve(M, v)


def basis_grammian_and_reciprocal(V):
    """Inner-product matrix of the basis columns and the reciprocal rows.

    Returns (G, R) with G[i][j] = <v_i, v_j> and R = V^{-1} (so R V = I).
    """
    M = require_square(V)
    if rank(M) < M.shape[0]:
        raise SingularBasis("basis columns are linearly dependent")
    G = M.T @ M
    R = np.linalg.solve(M, np.eye(M.shape[0]))
    return G, R


# ---------------------------------------------------------------------------
# small-scale Jordan-like form


@dataclass(frozen=True)
class JordanLikeForm:
    transform: np.ndarray
    block_spec: tuple  # ((eigenvalue, size), ...)
    form: np.ndarray


def _nullspace(M: np.ndarray, tol: float) -> np.ndarray:
    u, s, vh = np.linalg.svd(M)
    if s.size == 0:
        return np.eye(M.shape[1])
    cutoff = max(tol, max(M.shape) * _EPS * float(s[0]))
    null_dim = M.shape[1] - int(np.count_nonzero(s > cutoff))
    if null_dim == 0:
        return np.zeros((M.shape[1], 0))
    return vh[-null_dim:].conj().T


def jordan_like(A, tol: float = 1e-8) -> JordanLikeForm:
    """Eigenvector-chain canonical form for small (order <= 8) matrices.

    Chains satisfy (A - lambda I) x_{grade k} = x_{grade k-1}.  Intended for
    integer-like matrices only; ambiguous rank decisions raise IllConditioned.
    """
    M = require_square(A)
    n = M.shape[0]
    if n > 8:
        raise ValueError("chain construction is limited to order <= 8")
    es = eigen(M, tol=max(tol, 1e-7 * max(1.0, float(np.max(np.abs(M))))))

    columns: list[np.ndarray] = []
    spec: list[tuple[complex, int]] = []
    for lam, alg in zip(es.distinct_values, es.algebraic_multiplicity):
        N = M.astype(complex) - lam * np.eye(n)
        # null(N^k) dimensions up to stagnation
        powers = [np.eye(n, dtype=complex)]
        null_dims = [0]
        while null_dims[-1] < alg:
            powers.append(powers[-1] @ N)
            dim = n - rank(powers[-1], tol=tol * max(1.0, float(np.linalg.norm(powers[-1]))))
            if len(null_dims) > 1 and dim <= null_dims[-1]:
                raise IllConditioned(
                    "generalized eigenspace dimensions stagnated before reaching "
                    "the algebraic multiplicity"
                )
            null_dims.append(dim)
        max_grade = len(null_dims) - 1
        # blocks of size >= k: null_dims[k] - null_dims[k-1]
        chain_tops: list[tuple[int, np.ndarray]] = []
        chosen: list[np.ndarray] = []
        for k in range(max_grade, 0, -1):
            want = (null_dims[k] - null_dims[k - 1]) - sum(
                1 for g, _ in chain_tops if g > k
            )
            if want <= 0:
                continue
            Nk_null = _nullspace(powers[k], tol)
            # candidates independent of null(N^{k-1}) and of existing chains
            blockers = [_nullspace(powers[k - 1], tol)] if k > 1 else []
            blockers += [c.reshape(-1, 1) for c in chosen]
            proj_basis = (
                np.linalg.qr(np.hstack(blockers))[0] if blockers else None
            )
            picked = 0
            for j in range(Nk_null.shape[1]):
                if picked == want:
                    break
                cand = Nk_null[:, j]
                if proj_basis is not None:
                    cand = cand - proj_basis @ (proj_basis.conj().T @ cand)
                if np.linalg.norm(cand) > max(tol, 1e-6):
                    cand = cand / np.linalg.norm(cand)
                    chain_tops.append((k, cand))
                    # record the whole chain as chosen directions
                    vec = cand
                    chosen.append(vec)
                    for _ in range(k - 1):
                        vec = N @ vec
                        chosen.append(vec)
                    if proj_basis is not None:
                        blockers.append(cand.reshape(-1, 1))
                        proj_basis = np.linalg.qr(np.hstack(blockers))[0]
                    picked += 1
            if picked < want:
                raise IllConditioned(
                    "could not separate eigenvector chains at the given tolerance"
                )
        # longest chains first gives a deterministic block order per eigenvalue
        chain_tops.sort(key=lambda item: -item[0])
        for grade, top in chain_tops:
            chain = [top]
            for _ in range(grade - 1):
                chain.append(N @ chain[-1])
            chain.reverse()  # grade 1 first
            norm = np.linalg.norm(chain[0])
            if norm < tol:
                raise IllConditioned("degenerate chain foot")
            # scale so the grade-1 vector is unit with a positive leading entry
            lead = chain[0][np.argmax(np.abs(chain[0]))]
            scale = norm * (lead / abs(lead))
            columns.extend(v / scale for v in chain)
            spec.append((complex(lam), grade))

    T = np.column_stack(columns)
    if rank(T, tol=None) < n:
        raise IllConditioned("chain vectors do not form a basis")
    form = np.zeros((n, n), dtype=complex)
    pos = 0
    for lam, size in spec:
        for i in range(size):
            form[pos + i, pos + i] = lam
            if i + 1 < size:
                form[pos + i, pos + i + 1] = 1.0
        pos += size
    # drop negligible imaginary parts for real-spectrum input
    if np.max(np.abs(T.imag)) < 1e-9 * max(1.0, np.max(np.abs(T.real))):
        T = T.real.copy()
        form = form.real.copy()
        spec = [(complex(lam).real if abs(complex(lam).imag) < 1e-9 else lam, s) for lam, s in spec]
    recon = T @ form @ np.linalg.inv(T)
    if float(np.max(np.abs(recon - M))) > 1e-6 * max(1.0, float(np.max(np.abs(M)))):
        raise IllConditioned("reconstruction residual exceeds the small-scale guard")
    return JordanLikeForm(transform=T, block_spec=tuple(spec), form=form)


# ---------------------------------------------------------------------------
# characteristic polynomial and resolvent tableau


def char_poly_and_adjugate(A):
    """Characteristic polynomial and the adjugate tableau of (sI - A).

    Returns (a, tableau) where a is the monic characteristic polynomial
    (highest first, length n+1) and tableau is the list T_0..T_{n-1} with
    adj(sI - A) = sum_k s^{n-1-k} T_k.  Classical trace recursion.
    """
    M = require_square(A)
    n = M.shape[0]
    coeffs = [1.0]
    T = np.eye(n)
    tableau = [T]
    for k in range(1, n + 1):
        W = M @ T
        c = -np.trace(W) / k
        coeffs.append(float(c))
        T = W + c * np.eye(n)
        if k < n:
            tableau.append(T)
    return np.array(coeffs), tableau


def char_poly(A) -> np.ndarray:
    return char_poly_and_adjugate(A)[0]


# ---------------------------------------------------------------------------
# polynomial helpers (coefficients highest degree first)


def poly_trim(c, tol: float = 0.0) -> np.ndarray:
    a = np.atleast_1d(np.asarray(c, dtype=complex))
    if np.all(np.abs(a.imag) < 1e-12 * max(1.0, float(np.max(np.abs(a))))):
        a = a.real.astype(float)
    cutoff = tol if tol > 0 else 0.0
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    i = 0
    while i < a.size - 1 and abs(a[i]) <= cutoff * max(1.0, scale):
        i += 1
    out = a[i:]
    if out.size == 1 and out[0] == 0:
        return np.array([0.0])
    return out


def poly_degree(c) -> int:
    a = poly_trim(c)
    if a.size == 1 and a[0] == 0:
        return -1  # zero polynomial
    return a.size - 1


def poly_mul(a, b) -> np.ndarray:
    return np.convolve(np.atleast_1d(a), np.atleast_1d(b))


def poly_add(a, b) -> np.ndarray:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.size < b.size:
        a = np.concatenate([np.zeros(b.size - a.size), a])
    elif b.size < a.size:
        b = np.concatenate([np.zeros(a.size - b.size), b])
    return a + b


def poly_scale(a, s) -> np.ndarray:
    return np.atleast_1d(np.asarray(a)) * s


def poly_eval(a, s):
    return np.polyval(np.atleast_1d(a), s)


def poly_from_roots(roots) -> np.ndarray:
    return np.atleast_1d(np.poly(np.asarray(roots))) if len(roots) else np.array([1.0])


def poly_roots(a) -> np.ndarray:
    c = poly_trim(a)
    if poly_degree(c) < 1:
        return np.array([], dtype=complex)
    return np.roots(c)


def poly_divmod(num, den):
    q, r = np.polydiv(np.atleast_1d(num).astype(float), np.atleast_1d(den).astype(float))
    return np.atleast_1d(q), poly_trim(np.atleast_1d(r))


def poly_reflect(a) -> np.ndarray:
    """Coefficients of p(-s) given those of p(s)."""
    c = np.array(np.atleast_1d(a), dtype=float, copy=True)
    deg = c.size - 1
    for i in range(c.size):
        power = deg - i
        if power % 2 == 1:
            c[i] = -c[i]
    return c
