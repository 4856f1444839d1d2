"""Linear-matrix-inequality front end for :func:`solve_sdp`.

Problems are written in the natural inequality form

    minimize    c^T y
    subject to  F0_b + sum_i y_i F_ib  in cone_b   for every block b,

with real decision variables ``y``. This is the dual of the standard form
with ``C = F0``, ``A_i = -F_i`` and ``b = -c``.
"""

from __future__ import annotations

import numpy as np

from .ipm import Block, SdpProblem, SdpSolution, solve_sdp


class LmiBuilder:
    def __init__(self):
        self.blocks: list[Block] = []
        self._const: list[np.ndarray] = []
        self._coef: list[dict[int, np.ndarray]] = []
        self._vars: dict[str, slice] = {}
        self._cost: list[float] = []

    @property
    def nvar(self) -> int:
        return len(self._cost)

    def add_variables(self, name: str, count: int, cost=0.0) -> slice:
        if name in self._vars:
            raise ValueError(f"variable group {name!r} already exists")
        sl = slice(self.nvar, self.nvar + count)
        self._vars[name] = sl
        self._cost.extend(np.broadcast_to(np.asarray(cost, dtype=float), (count,)).tolist())
        return sl

    def add_block(self, kind: str, size: int, constant=None) -> int:
        blk = Block(kind, size)
        self.blocks.append(blk)
        shape = (size, size) if kind == "s" else (size,)
        const = np.zeros(shape, dtype=complex if kind == "s" else float)
        if constant is not None:
            const = const + np.asarray(constant)
        self._const.append(const)
        self._coef.append({})
        return len(self.blocks) - 1

    def add_terms(self, block: int, variables: slice, mats: np.ndarray) -> None:
        """Add ``y[variables][k] * mats[k]`` to ``block``."""
        idx = range(*variables.indices(self.nvar))
        mats = np.asarray(mats)
        if len(idx) != mats.shape[0]:
            raise ValueError("need one coefficient matrix per variable")
        coef = self._coef[block]
        for i, F in zip(idx, mats):
            coef[i] = coef[i] + F if i in coef else F.copy()

    def to_problem(self) -> SdpProblem:
        m = self.nvar
        C, A = [], []
        for blk, const, coef in zip(self.blocks, self._const, self._coef):
            Ab = np.zeros((m,) + const.shape, dtype=const.dtype)
            for i, F in coef.items():
                Ab[i] = -F
            C.append(const)
            A.append(Ab)
        return SdpProblem(list(self.blocks), C, A, -np.asarray(self._cost))

    def solve(self, **tols) -> tuple[dict[str, np.ndarray], SdpSolution]:
        """Solve and return variable values by group name plus the raw solution."""
        sol = solve_sdp(self.to_problem(), **tols)
        values = {name: sol.y[sl] for name, sl in self._vars.items()}
        return values, sol


def hermitian_basis(n: int) -> np.ndarray:
    """Real basis of n x n Hermitian matrices, shape ``(n*n, n, n)``.

    Ordering: diagonal entries, then for each ``j < l`` the real part
    ``E_jl + E_lj`` followed by the imaginary part ``i(E_jl - E_lj)``.
    """
    mats = np.zeros((n * n, n, n), dtype=complex)
    k = 0
    for j in range(n):
        mats[k, j, j] = 1.0
        k += 1
    for j in range(n):
        for l in range(j + 1, n):
            mats[k, j, l] = mats[k, l, j] = 1.0
            mats[k + 1, j, l] = 1j
            mats[k + 1, l, j] = -1j
            k += 2
    return mats


def hermitian_from_coords(x: np.ndarray, n: int) -> np.ndarray:
    return np.tensordot(x, hermitian_basis(n), axes=1)
