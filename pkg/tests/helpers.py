"""Brute-force oracles shared across the test suite.

Everything here is deliberately independent of the library's solver
paths: dense assembly, entrywise finite differences, explicit
constraint matrices.
"""

import numpy as np


def assemble_kron_operator(pairs, shift, p, q):
    """Dense matrix of sum_j S_a[j] (x) S_h[j] + I (x) shift (column-major vec)."""
    mat = np.zeros((p * q, p * q))
    for sa, sh in pairs:
        mat += np.kron(sa, sh)
    if np.ndim(shift) == 0:
        mat += float(shift) * np.eye(p * q)
    else:
        mat += np.kron(np.eye(q), np.asarray(shift, dtype=float))
    return mat


def dense_kron_solve(pairs, shift, rhs):
    """Solve the Kronecker system by explicit assembly and np.linalg.solve."""
    p, q = rhs.shape
    mat = assemble_kron_operator(pairs, shift, p, q)
    x = np.linalg.solve(mat, rhs.ravel(order="F"))
    return x.reshape((p, q), order="F")


def fd_gradient(f, x, step=1e-6):
    """Central-difference gradient of a scalar function at matrix ``x``."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        bump = np.zeros_like(x)
        bump[idx] = step
        grad[idx] = (f(x + bump) - f(x - bump)) / (2.0 * step)
    return grad


def dense_constraint_matrix(cs, t, block_dim):
    """Explicit (|E| * block_dim, block_dim) matrix for agent t's constraints."""
    edges = cs.topology.edges
    mat = np.zeros((len(edges) * block_dim, block_dim))
    eye = np.eye(block_dim)
    for e, (s, j) in enumerate(edges):
        sign = cs.orientations[e]
        rows = slice(e * block_dim, (e + 1) * block_dim)
        if t == s:
            mat[rows] = sign * eye
        elif t == j:
            mat[rows] = -sign * eye
    return mat


def stack_blocks(blocks):
    """Vertically stack a list of equally shaped matrices."""
    return np.concatenate([np.asarray(b, dtype=float) for b in blocks], axis=0)


def principal_angles(a, b):
    """Principal angles between the column spaces of a and b (radians)."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    svals = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(svals, -1.0, 1.0))


def effective_principal_angles(a, b, rank_rtol=1e-8):
    """Principal angles between numerically effective column spaces.

    Directions with singular values below ``rank_rtol`` times the top
    singular value are noise and excluded; both matrices must have the
    same effective rank.
    """
    ua, sa, _ = np.linalg.svd(a, full_matrices=False)
    ub, sb, _ = np.linalg.svd(b, full_matrices=False)
    ka = int(np.sum(sa > rank_rtol * sa[0]))
    kb = int(np.sum(sb > rank_rtol * sb[0]))
    assert ka == kb, f"effective ranks differ: {ka} vs {kb}"
    svals = np.linalg.svd(ua[:, :ka].T @ ub[:, :kb], compute_uv=False)
    return np.arccos(np.clip(svals, -1.0, 1.0))
