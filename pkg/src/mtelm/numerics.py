"""Dense matrix kernels shared by the solvers.

Kronecker-structured linear solves through the vec identity, symmetric
positive definite solves, spectral-norm upper bounds and PCA.  Every
function is pure: inputs are never mutated and no state is kept between
calls.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg

from .errors import SingularSystemError, UsageError

#: assembled Kronecker systems up to this many unknowns use a dense factorization
DENSE_ASSEMBLY_LIMIT = 4096
#: condition estimates beyond this raise :class:`SingularSystemError`
CONDITION_LIMIT = 1e14
#: relative tolerance on the symmetry preconditions
SYMMETRY_RTOL = 1e-10
#: multiplicative safety factor applied to the power-iteration estimate
SPECTRAL_SAFETY = 1.01
#: covariance eigendecomposition is used for PCA up to this input dimension
COVARIANCE_DIM_LIMIT = 1024

_CG_RTOL = 1e-10


def _as_float_array(name, a, ndim=None):
    arr = np.asarray(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise UsageError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise UsageError(f"{name} must contain only finite values")
    return arr


def _require_symmetric(name, m):
    if m.shape[0] != m.shape[1]:
        raise UsageError(f"{name} must be square, got shape {m.shape}")
    scale = np.linalg.norm(m)
    if scale and np.linalg.norm(m - m.T) > SYMMETRY_RTOL * scale:
        raise UsageError(f"{name} is not symmetric to within {SYMMETRY_RTOL:g} relative")


def _symmetrize(m):
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class KroneckerSystem:
    """The linear operator ``X -> sum_j S_h[j] @ X @ S_a[j] + shift(X)``.

    ``pairs`` is a sequence of ``(S_a, S_h)`` with ``S_a`` q-by-q and
    ``S_h`` p-by-p, all symmetric.  ``shift`` is either a scalar
    (contributing ``shift * X``) or a symmetric p-by-p matrix
    (contributing ``shift @ X``).  In vectorized form the operator is
    ``sum_j S_a[j] (x) S_h[j] + I (x) shift`` acting on column-major
    ``vec(X)``.
    """

    pairs: tuple
    shift: float | np.ndarray

    def __post_init__(self):
        pairs = []
        p = q = None
        for i, (sa, sh) in enumerate(self.pairs):
            sa = _as_float_array(f"pairs[{i}][0]", sa, ndim=2)
            sh = _as_float_array(f"pairs[{i}][1]", sh, ndim=2)
            _require_symmetric(f"pairs[{i}][0]", sa)
            _require_symmetric(f"pairs[{i}][1]", sh)
            if q is None:
                q, p = sa.shape[0], sh.shape[0]
            elif sa.shape[0] != q or sh.shape[0] != p:
                raise UsageError(
                    f"pairs[{i}] has shape ({sa.shape[0]}, {sh.shape[0]}), "
                    f"expected ({q}, {p})"
                )
            pairs.append((sa, sh))
        object.__setattr__(self, "pairs", tuple(pairs))
        if np.ndim(self.shift) == 0:
            object.__setattr__(self, "shift", float(self.shift))
        else:
            shift = _as_float_array("shift", self.shift, ndim=2)
            _require_symmetric("shift", shift)
            if p is not None and shift.shape[0] != p:
                raise UsageError(
                    f"shift has shape {shift.shape}, expected ({p}, {p})"
                )
            object.__setattr__(self, "shift", shift)

    @property
    def p(self):
        if self.pairs:
            return self.pairs[0][1].shape[0]
        if isinstance(self.shift, np.ndarray):
            return self.shift.shape[0]
        return None

    @property
    def q(self):
        return self.pairs[0][0].shape[0] if self.pairs else None

    def apply(self, x):
        """Evaluate the operator at a p-by-q matrix ``x``."""
        if isinstance(self.shift, np.ndarray):
            out = self.shift @ x
        else:
            out = self.shift * x
        for sa, sh in self.pairs:
            out += sh @ x @ sa
        return out


def _scalar_shift(system):
    """Scalar value of the shift when it acts as a multiple of I, else None."""
    if not isinstance(system.shift, np.ndarray):
        return system.shift
    d = np.diag(system.shift)
    if np.ptp(d) == 0.0 and np.count_nonzero(system.shift - np.diag(d)) == 0:
        return float(d[0])
    return None


def _eigen_core(wh, qh, wa, qa, scalar, rhs):
    denom = wh[:, None] * wa[None, :] + scalar
    dmin, dmax = denom.min(), denom.max()
    if dmin <= 0.0 or dmax / dmin > CONDITION_LIMIT:
        raise SingularSystemError(
            "Kronecker operator is numerically singular "
            f"(eigenvalue range [{dmin:.3e}, {dmax:.3e}] of the shifted pair)"
        )
    return qh @ ((qh.T @ rhs @ qa) / denom) @ qa.T


def _solve_eigen(sa, sh, scalar, rhs):
    wa, qa = np.linalg.eigh(_symmetrize(sa))
    wh, qh = np.linalg.eigh(_symmetrize(sh))
    return _eigen_core(wh, qh, wa, qa, scalar, rhs)


def kron_pair_solve(sh_eig, sa, scalar, rhs):
    """Solve ``S_h X S_a + scalar X = rhs`` given ``eigh(S_h)`` as ``sh_eig``.

    Fast path for repeated solves against a fixed symmetric ``S_h``
    (callers cache the eigendecomposition once); only the small ``S_a``
    is decomposed per call.
    """
    wh, qh = sh_eig
    rhs = _as_float_array("rhs", rhs, ndim=2)
    wa, qa = np.linalg.eigh(_symmetrize(np.asarray(sa, dtype=float)))
    return _eigen_core(wh, qh, wa, qa, float(scalar), rhs)


def _solve_dense(system, rhs, p, q):
    mat = np.zeros((p * q, p * q))
    for sa, sh in system.pairs:
        mat += np.kron(sa, sh)
    if isinstance(system.shift, np.ndarray):
        mat += np.kron(np.eye(q), system.shift)
    else:
        mat += system.shift * np.eye(p * q)
    mat = _symmetrize(mat)
    anorm = np.linalg.norm(mat, 1)
    try:
        factor = scipy.linalg.cho_factor(mat, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "assembled Kronecker operator is not positive definite"
        ) from exc
    (pocon,) = scipy.linalg.get_lapack_funcs(("pocon",), (mat,))
    rcond, info = pocon(factor[0], anorm, uplo=b"L" if factor[1] else b"U")
    if info == 0 and rcond > 0 and 1.0 / rcond > CONDITION_LIMIT:
        raise SingularSystemError(
            "assembled Kronecker operator is numerically singular "
            f"(condition estimate {1.0 / rcond:.3e})"
        )
    x = scipy.linalg.cho_solve(factor, rhs.ravel(order="F"), check_finite=False)
    return x.reshape((p, q), order="F")


def _solve_cg(system, rhs, p, q):
    n = p * q

    def matvec(xv):
        return system.apply(xv.reshape((p, q), order="F")).ravel(order="F")

    op = LinearOperator((n, n), matvec=matvec)
    b = rhs.ravel(order="F")
    x, info = cg(op, b, rtol=_CG_RTOL, atol=0.0, maxiter=10 * n)
    if info != 0:
        raise SingularSystemError(
            f"conjugate gradient failed to reach {_CG_RTOL:g} relative residual "
            f"within {10 * n} iterations (operator singular or ill conditioned)"
        )
    return x.reshape((p, q), order="F")


def kron_vec_solve(system, rhs):
    """Solve ``sum_j S_h[j] X S_a[j] + shift(X) = rhs`` for the p-by-q ``X``.

    Single-pair systems with a scalar shift are solved exactly through a
    two-sided eigendecomposition.  Otherwise systems with at most
    :data:`DENSE_ASSEMBLY_LIMIT` unknowns are assembled densely and
    factorized; larger ones fall back to matrix-free conjugate gradients
    at ``1e-10`` relative residual.
    """
    rhs = _as_float_array("rhs", rhs, ndim=2)
    p, q = rhs.shape
    if system.p is not None and system.p != p:
        raise UsageError(f"rhs has {p} rows, operator expects {system.p}")
    if system.q is not None and system.q != q:
        raise UsageError(f"rhs has {q} columns, operator expects {system.q}")
    if not rhs.any():
        return np.zeros_like(rhs)
    scalar = _scalar_shift(system)
    if len(system.pairs) == 1 and scalar is not None:
        return _solve_eigen(system.pairs[0][0], system.pairs[0][1], scalar, rhs)
    if not system.pairs:
        if scalar is not None:
            if scalar == 0.0:
                raise SingularSystemError("shift term is zero with no Kronecker pairs")
            return rhs / scalar
        return spd_solve(system.shift, rhs)
    if p * q <= DENSE_ASSEMBLY_LIMIT:
        return _solve_dense(system, rhs, p, q)
    return _solve_cg(system, rhs, p, q)


def spd_solve(m, b):
    """Solve ``m @ x = b`` for symmetric positive definite ``m`` via Cholesky.

    ``m`` must be symmetric to within ``1e-10`` relative; it is
    symmetrized before factorization so tiny asymmetries from matrix
    products do not accumulate.
    """
    m = _as_float_array("matrix", m, ndim=2)
    _require_symmetric("matrix", m)
    b = _as_float_array("rhs", b)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    if b.shape[0] != m.shape[0]:
        raise UsageError(f"rhs has {b.shape[0]} rows, matrix expects {m.shape[0]}")
    try:
        factor = scipy.linalg.cho_factor(_symmetrize(m), check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError("matrix is not positive definite") from exc
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    return x[:, 0] if vector else x


def spectral_norm_bound(m):
    """Upper bound on the largest singular value of ``m``.

    Power iteration on the Gram matrix estimates the top singular value
    to high relative accuracy; the result is inflated by the
    :data:`SPECTRAL_SAFETY` factor (1.01) so callers can use it as a
    conservative Lipschitz-style constant.
    """
    m = np.atleast_2d(_as_float_array("matrix", m))
    if m.size == 0 or not m.any():
        return 0.0
    g = m.T @ m if m.shape[1] <= m.shape[0] else m @ m.T
    g = _symmetrize(g)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(g.shape[0])
    v /= np.linalg.norm(v)
    val = prev = 0.0
    for _ in range(10_000):
        w = g @ v
        val = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v fell in the null space; restart from a fresh direction
            v = rng.standard_normal(g.shape[0])
            v /= np.linalg.norm(v)
            prev = 0.0
            continue
        v = w / nw
        if abs(val - prev) <= 1e-13 * max(abs(val), 1e-30):
            break
        prev = val
    return SPECTRAL_SAFETY * float(np.sqrt(max(val, 0.0)))


def pca_reduce(x, target):
    """Center the rows of ``x`` and project onto leading principal directions.

    Parameters
    ----------
    x : (N, n) array
        One sample per row, N >= 2.
    target : int or float
        Integer component count, or a variance fraction in (0, 1] in
        which case the smallest component count reaching that fraction
        is retained.

    Returns
    -------
    projected : (N, p) array
        Centered data projected on the retained directions.
    projection : (n, p) array
        Orthonormal projection columns (apply to centered data).
    explained : float
        Fraction of total variance retained.
    """
    x = _as_float_array("data", x, ndim=2)
    n_samples, n_features = x.shape
    if n_samples < 2:
        raise UsageError("PCA needs at least 2 samples")
    centered = x - x.mean(axis=0)
    if n_features <= COVARIANCE_DIM_LIMIT:
        cov = (centered.T @ centered) / (n_samples - 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = evals[order]
        evecs = evecs[:, order]
    else:
        _, svals, vt = np.linalg.svd(centered, full_matrices=False)
        evals = svals**2 / (n_samples - 1)
        evecs = vt.T
    evals = np.clip(evals, 0.0, None)
    total = float(evals.sum())
    if total <= 0.0:
        raise UsageError("data has zero total variance")
    limit = min(n_samples, n_features)
    if isinstance(target, (bool, np.bool_)):
        raise UsageError("target must be an int dimension or a float fraction")
    if isinstance(target, (int, np.integer)):
        if not 1 <= target <= limit:
            raise UsageError(
                f"target dimension {target} outside [1, min(n_samples, n_features) = {limit}]"
            )
        k = int(target)
    elif isinstance(target, (float, np.floating)):
        if not 0.0 < target <= 1.0:
            raise UsageError(f"variance-fraction target {target} outside (0, 1]")
        fractions = np.cumsum(evals) / total
        k = int(np.searchsorted(fractions, target - 1e-12)) + 1
        k = min(k, limit)
    else:
        raise UsageError("target must be an int dimension or a float fraction")
    projection = evecs[:, :k]
    explained = float(evals[:k].sum() / total)
    return centered @ projection, projection, explained
