"""Reusable direct factorisation of sparse symmetric positive definite matrices.

The matrix is ordered by METIS nested dissection (pymetis) and factorised by
CHOLMOD's supernodal Cholesky (through cvxopt). Without cvxopt, SuperLU in
symmetric mode with diagonal pivoting is used instead, which is an LDL' with
the same pivots. A non-positive pivot is reported as :class:`NotSpdError`
naming the offending row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

try:
    import pymetis
except ImportError:  # pragma: no cover - exercised only without pymetis
    pymetis = None

try:
    import cvxopt
    import cvxopt.cholmod as cholmod
except ImportError:  # pragma: no cover - exercised only without cvxopt
    cvxopt = cholmod = None

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
ND_MIN_SIZE = 200  # below this the ordering costs more than it saves


class NotSpdError(np.linalg.LinAlgError):
    def __init__(self, index: int, pivot: float):
        super().__init__(f"matrix is not positive definite: pivot {pivot:.3e} at index {index}")
        self.index = index
        self.pivot = pivot


def fill_reducing_order(matrix: sp.spmatrix) -> np.ndarray | None:
    """Nested-dissection permutation, or None when pymetis is unavailable or the matrix is small."""
    if pymetis is None or matrix.shape[0] < ND_MIN_SIZE:
        return None
    g = sp.csr_matrix(matrix, copy=True)
    g.setdiag(0)
    g.eliminate_zeros()
    g = (g + g.T).tocsr()  # structural symmetry for METIS
    perm, _ = pymetis.nested_dissection(pymetis.CSRAdjacency(g.indptr, g.indices))
    return np.asarray(perm, dtype=np.int64)


@dataclass(eq=False)
class SpdFactorization:
    matrix: sp.csc_matrix
    perm: np.ndarray | None
    factor: Any           # cvxopt CHOLMOD factor or scipy SuperLU
    backend: str          # "cholmod" or "superlu"

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def _raw_solve(self, b: np.ndarray) -> np.ndarray:
        if self.backend == "cholmod":
            x = cvxopt.matrix(b)
            cholmod.solve(self.factor, x)
            return np.array(x).ravel()
        if self.perm is None:
            return self.factor.solve(b)
        x = np.empty_like(b)
        x[self.perm] = self.factor.solve(b[self.perm])
        return x

    def solve(self, rhs) -> np.ndarray:
        return solve(self, rhs)


def _superlu(A: sp.csc_matrix, perm: np.ndarray | None):
    """SuperLU keeping the (permuted) diagonal as pivots; raises NotSpdError at the first bad pivot."""
    Ap = A if perm is None else A[perm][:, perm].tocsc()
    spec = "COLAMD" if perm is None else "NATURAL"
    try:
        lu = sla.splu(Ap, permc_spec=spec, diag_pivot_thresh=0.0, options=dict(SymmetricMode=True))
    except RuntimeError as exc:  # exactly singular
        raise NotSpdError(-1, 0.0) from exc
    piv = lu.U.diagonal()
    bad = np.flatnonzero(~(piv > 0))
    if bad.size:
        k = int(bad[0])
        col = int(lu.perm_c[k])
        idx = col if perm is None else int(perm[col])
        raise NotSpdError(idx, float(piv[k]))
    return lu


def _cholmod(A: sp.csc_matrix, perm: np.ndarray | None):
    low = sp.tril(A).tocoo()
    n = A.shape[0]
    Ac = cvxopt.spmatrix(low.data, low.row.astype(int), low.col.astype(int), (n, n))
    opts = cholmod.options
    opts["supernodal"] = 2
    opts["postorder"] = True
    if perm is None:
        F = cholmod.symbolic(Ac)
    else:
        F = cholmod.symbolic(Ac, p=cvxopt.matrix(perm.astype(int)))
    cholmod.numeric(Ac, F)
    return F


def factorize(matrix, perm: np.ndarray | None = None) -> SpdFactorization:
    """Factorise an SPD matrix once for many solves.

    ``perm`` reuses a fill-reducing ordering computed for a matrix with the
    same sparsity pattern.
    """
    A = sp.csc_matrix(matrix, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if perm is None:
        perm = fill_reducing_order(A)
    else:
        perm = np.asarray(perm, dtype=np.int64)
        if not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValueError("perm is not a permutation of the matrix rows")
    if cholmod is not None and n > 0:
        try:
            F = _cholmod(A, perm)
        except ArithmeticError:
            # CHOLMOD does not name the failing column; SuperLU does
            _superlu(A, perm)
            raise NotSpdError(-1, float("nan")) from None
        log.debug("cholmod factorisation, n=%d", n)
        return SpdFactorization(A, perm, F, "cholmod")
    lu = _superlu(A, perm)
    log.debug("superlu factorisation, n=%d, nnz(L)=%d", n, lu.L.nnz)
    return SpdFactorization(A, perm, lu, "superlu")


def solve(fact: SpdFactorization, rhs) -> np.ndarray:
    """Solve with one step of iterative refinement if the residual is too large."""
    b = np.asarray(rhs, dtype=float)
    if b.shape != (fact.n,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({fact.n},)")
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros_like(b)
    x = fact._raw_solve(b)
    r = b - fact.matrix @ x
    if np.linalg.norm(r) > RESIDUAL_TOL * nb:
        x = x + fact._raw_solve(r)
    return x
