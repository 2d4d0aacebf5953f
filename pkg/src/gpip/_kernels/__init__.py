"""Hot loops of the rounding code: the compiled core if built, else pure Python.

Set GPIP_PURE_PYTHON=1 to force the fallback. `BACKEND` names the active one.
"""

import importlib
import os
import weakref
from dataclasses import dataclass

import numpy as np

from . import _pykernels

REPAIR_TOL = 5e-10

_ckernels = None
if os.environ.get("GPIP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        _ckernels = importlib.import_module(__name__ + "._ckernels")
    except ImportError:
        _ckernels = None

backend = _ckernels if _ckernels is not None else _pykernels
BACKEND = "cython" if _ckernels is not None else "python"
pykernels = _pykernels
ckernels = _ckernels


def compressed(M: np.ndarray, by_column: bool = False):
    """(indptr, indices, data) of the positive entries, CSR or CSC."""
    M = np.asarray(M, dtype=float)
    if by_column:
        M = M.T
    rows, cols = np.nonzero(M > 0)
    indptr = np.zeros(M.shape[0] + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=M.shape[0]), out=indptr[1:])
    return indptr, cols.astype(np.int64), np.ascontiguousarray(M[rows, cols])


def spmv(csr, z, nrows: int) -> np.ndarray:
    indptr, indices, data = csr
    prod = data * np.asarray(z, dtype=float)[indices]
    out = np.zeros(nrows)
    np.add.at(out, np.repeat(np.arange(nrows), np.diff(indptr)), prod)
    return out


@dataclass(frozen=True, eq=False)
class SparseViews:
    A_csr: tuple
    A_csc: tuple
    B_csr: tuple
    B_csc: tuple
    U_csr: tuple
    U_csc: tuple
    V_csr: tuple
    V_csc: tuple


_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def sparse_views(instance) -> SparseViews:
    """Row and column compressed forms of A, B, U, V, cached per instance."""
    views = _cache.get(instance)
    if views is None:
        parts = {}
        for name in ("A", "B", "U", "V"):
            M = getattr(instance, name)
            parts[name + "_csr"] = compressed(M)
            parts[name + "_csc"] = compressed(M, by_column=True)
        views = SparseViews(**parts)
        _cache[instance] = views
    return views


__all__ = ["BACKEND", "REPAIR_TOL", "backend", "compressed", "sparse_views", "spmv", "SparseViews"]
