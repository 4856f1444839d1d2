"""Primal-dual interior-point solver for small dense semidefinite programs.

The primal problem is posed over a product of cones,

    minimize    <C, X>
    subject to  <A_i, X> = b_i,                i = 1..m
                X_b Hermitian PSD   (kind "s")  or  x_b >= 0   (kind "l"),

with dual

    maximize    b^T y
    subject to  C - sum_i y_i A_i = Z,  Z in the same cone.

Hermitian blocks are handled through their real symmetric embedding. Each
iteration takes an HKM search direction with a Mehrotra predictor-corrector
step from an infeasible starting point. Inner products ``<A, X>`` on
Hermitian blocks are ``Re tr(A X)``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .linalg import hermitian_to_real, real_to_hermitian

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITERATIONS = "max-iterations"
NUMERICAL_FAILURE = "numerical-failure"
PRIMAL_INFEASIBLE = "primal-infeasible"
DUAL_INFEASIBLE = "dual-infeasible"


@dataclass(frozen=True)
class Block:
    kind: str  # "s": Hermitian PSD matrix, "l": nonnegative vector
    size: int

    def __post_init__(self):
        if self.kind not in ("s", "l"):
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("block orders must be at least 1")


@dataclass
class SdpProblem:
    """Block-diagonal SDP in primal standard form.

    Attributes:
        blocks: Cone of each block.
        C: Objective data per block, ``(n, n)`` Hermitian or ``(n,)`` real.
        A: Constraint data per block, ``(m, n, n)`` Hermitian or ``(m, n)`` real.
        b: Right-hand sides, length ``m``.
    """

    blocks: list[Block]
    C: list[np.ndarray]
    A: list[np.ndarray]
    b: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        m = self.b.size
        if not (len(self.blocks) == len(self.C) == len(self.A)):
            raise ValueError("blocks, C and A must have one entry per block")
        for blk, Cb, Ab in zip(self.blocks, self.C, self.A):
            n = blk.size
            shape_c = (n, n) if blk.kind == "s" else (n,)
            if Cb.shape != shape_c or Ab.shape != (m,) + shape_c:
                raise ValueError(f"data for a {blk.kind}-block of size {n} has the wrong shape")
            if blk.kind == "s":
                scale = 1.0 + np.abs(Cb).max() + np.abs(Ab).max(initial=0.0)
                asym = max(
                    np.abs(Cb - Cb.conj().T).max(),
                    np.abs(Ab - np.conj(np.swapaxes(Ab, 1, 2))).max(initial=0.0),
                )
                if asym > 1e-12 * scale:
                    raise ValueError("constraint functionals must be Hermitian")

    @property
    def m(self) -> int:
        return self.b.size

    def to_dict(self) -> dict:
        def enc(a):
            a = np.asarray(a)
            return {"re": a.real.tolist(), "im": a.imag.tolist()} if np.iscomplexobj(a) else a.tolist()

        return {
            "blocks": [{"kind": b.kind, "size": b.size} for b in self.blocks],
            "C": [enc(c) for c in self.C],
            "A": [enc(a) for a in self.A],
            "b": self.b.tolist(),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "SdpProblem":
        def dec(a):
            if isinstance(a, dict):
                return np.asarray(a["re"]) + 1j * np.asarray(a["im"])
            return np.asarray(a, dtype=float)

        blocks = [Block(b["kind"], int(b["size"])) for b in record["blocks"]]
        A = []
        for blk, a in zip(blocks, record["A"]):
            arr = dec(a)
            if arr.size == 0:
                arr = arr.reshape((0,) + ((blk.size, blk.size) if blk.kind == "s" else (blk.size,)))
            A.append(arr)
        return cls(blocks, [dec(c) for c in record["C"]], A, np.asarray(record["b"], dtype=float))

    def dump(self, path: str | Path) -> None:
        """Write the problem as JSON, for cross-checking with other solvers."""
        Path(path).write_text(json.dumps(self.to_dict()))


@dataclass
class SdpSolution:
    X: list[np.ndarray]
    y: np.ndarray
    Z: list[np.ndarray]
    primal_objective: float
    dual_objective: float
    relative_gap: float
    primal_infeasibility: float
    dual_infeasibility: float
    iterations: int
    status: str
    history: list[dict] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def diagnostics(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "relative_gap": self.relative_gap,
            "primal_infeasibility": self.primal_infeasibility,
            "dual_infeasibility": self.dual_infeasibility,
        }


class _RealBlocks:
    """Problem data mapped to real symmetric / vector blocks."""

    def __init__(self, problem: SdpProblem):
        self.kinds = []
        self.C = []
        self.A = []
        self.Aflat = []
        for blk, Cb, Ab in zip(problem.blocks, problem.C, problem.A):
            self.kinds.append(blk.kind)
            if blk.kind == "s":
                Ce = hermitian_to_real(Cb)
                Ae = np.stack([hermitian_to_real(a) for a in Ab]) if len(Ab) else np.zeros((0,) + Ce.shape)
                self.C.append(Ce)
                self.A.append(Ae)
                self.Aflat.append(Ae.reshape(Ae.shape[0], -1))
            else:
                self.C.append(np.asarray(Cb, dtype=float))
                self.A.append(np.asarray(Ab, dtype=float))
                self.Aflat.append(np.asarray(Ab, dtype=float))
        self.b = problem.b
        self.m = problem.m
        self.dims = [c.shape[0] for c in self.C]
        self.nu = float(sum(self.dims))

    def A_op(self, Xs) -> np.ndarray:
        out = np.zeros(self.m)
        for Af, X in zip(self.Aflat, Xs):
            out += Af @ X.ravel()
        return out

    def At_op(self, y) -> list[np.ndarray]:
        return [np.tensordot(y, A, axes=1) for A in self.A]


def _inner(Xs, Zs) -> float:
    return float(sum(np.vdot(X, Z).real for X, Z in zip(Xs, Zs)))


def _norm(Xs) -> float:
    return float(np.sqrt(sum(np.vdot(X, X).real for X in Xs)))


def _max_step(X: np.ndarray, dX: np.ndarray, kind: str) -> float:
    """Largest alpha keeping ``X + alpha dX`` in the cone (inf if unbounded)."""
    if kind == "l":
        neg = dX < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-X[neg] / dX[neg]))
    try:
        Lc = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = scipy.linalg.solve_triangular(Lc, np.eye(X.shape[0]), lower=True)
    lam = np.linalg.eigvalsh(Li @ dX @ Li.T)[0]
    return np.inf if lam >= 0 else float(-1.0 / lam)


def _positive_definite(X: np.ndarray, kind: str) -> bool:
    if kind == "l":
        return bool(np.all(X > 0))
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return False
    return True


def _safe_step(X, dX, alpha: float, kinds, shrink: float = 0.8, tries: int = 30) -> float:
    for _ in range(tries):
        if all(_positive_definite(Xb + alpha * d, k) for Xb, d, k in zip(X, dX, kinds)):
            return alpha
        alpha *= shrink
    return 0.0


def _initial_point(data: _RealBlocks):
    X0, Z0 = [], []
    b = np.abs(data.b)
    for kind, Cb, Ab, n in zip(data.kinds, data.C, data.Aflat, data.dims):
        normA = np.linalg.norm(Ab, axis=1) if Ab.shape[0] else np.zeros(1)
        normC = np.linalg.norm(Cb)
        ratio = np.max((1.0 + b) / (1.0 + normA)) if Ab.shape[0] else 1.0
        xi = max(10.0, np.sqrt(n), np.sqrt(n) * ratio)
        eta = max(10.0, np.sqrt(n), normA.max(initial=0.0), normC)
        if kind == "s":
            X0.append(xi * np.eye(n))
            Z0.append(eta * np.eye(n))
        else:
            X0.append(np.full(n, xi))
            Z0.append(np.full(n, eta))
    return X0, np.zeros(data.m), Z0


def _to_user(data: _RealBlocks, Xs, Zs):
    Xo, Zo = [], []
    for kind, X, Z in zip(data.kinds, Xs, Zs):
        if kind == "s":
            # W = emb(X)/2 in the embedded primal, S = emb(Z) in the embedded dual
            Xo.append(2.0 * real_to_hermitian(X))
            Zo.append(real_to_hermitian(Z))
        else:
            Xo.append(X.copy())
            Zo.append(Z.copy())
    return Xo, Zo


def solve_sdp(
    problem: SdpProblem,
    gap_tol: float = 1e-8,
    feas_tol: float = 1e-8,
    max_iter: int = 100,
) -> SdpSolution:
    """Solve ``problem`` to relative gap ``gap_tol`` and infeasibilities ``feas_tol``.

    Relative gap is ``<X, Z> / (1 + |pobj| + |dobj|)``; infeasibilities are
    ``||b - A(X)|| / (1 + ||b||)`` and ``||C - Z - A^T y|| / (1 + ||C||)``.
    A non-optimal status is returned (never raised) together with the last
    iterate when the tolerances cannot be met.
    """
    data = _RealBlocks(problem)
    # the embedded primal variable W maps back to X = 2 * hermitian(W), which
    # satisfies Re tr(A_i X) = <emb(A_i), W>
    b = data.b
    normb = np.linalg.norm(b)
    normC = _norm(data.C)
    X, y, Z = _initial_point(data)
    history: list[dict] = []
    status = MAX_ITERATIONS
    it = 0
    small_steps = 0
    best = None

    def residuals(X, y, Z):
        rp = b - data.A_op(X)
        Aty = data.At_op(y)
        Rd = [Cb - Zb - Ab for Cb, Zb, Ab in zip(data.C, Z, Aty)]
        pobj = _inner(data.C, X)
        dobj = float(b @ y)
        gap = _inner(X, Z)
        relgap = gap / (1.0 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(rp) / (1.0 + normb)
        dinf = _norm(Rd) / (1.0 + normC)
        return rp, Rd, pobj, dobj, gap, relgap, pinf, dinf

    for it in range(max_iter + 1):
        rp, Rd, pobj, dobj, gap, relgap, pinf, dinf = residuals(X, y, Z)
        history.append(dict(iter=it, pobj=pobj, dobj=dobj, relgap=relgap, pinf=pinf, dinf=dinf))
        score = max(relgap / gap_tol, pinf / feas_tol, dinf / feas_tol)
        if best is None or score < best[0]:
            best = (score, it, [x.copy() for x in X], y.copy(), [z.copy() for z in Z],
                    pobj, dobj, relgap, pinf, dinf)
        if relgap <= gap_tol and pinf <= feas_tol and dinf <= feas_tol:
            status = OPTIMAL
            break
        # infeasibility certificates: unbounded dual / primal rays
        if dobj > 1e10 * (1.0 + normC) and _norm([r + c for r, c in zip(Rd, data.C)]) < 1e-6 * dobj:
            status = PRIMAL_INFEASIBLE
            break
        if -pobj > 1e10 * (1.0 + normb) and np.linalg.norm(rp - b) < 1e-6 * (-pobj):
            status = DUAL_INFEASIBLE
            break
        if it == max_iter:
            break
        mu = gap / data.nu

        Zinv = []
        for kind, Zb in zip(data.kinds, Z):
            if kind == "s":
                try:
                    cz = scipy.linalg.cho_factor(Zb, lower=True)
                except np.linalg.LinAlgError:
                    status = NUMERICAL_FAILURE
                    break
                Zi = scipy.linalg.cho_solve(cz, np.eye(Zb.shape[0]))
                Zinv.append((Zi + Zi.T) / 2.0)
            else:
                Zinv.append(1.0 / Zb)
        if status == NUMERICAL_FAILURE:
            break

        # Schur complement M_ij = <A_i, X A_j Z^-1>
        Msc = np.zeros((data.m, data.m))
        for kind, Ab, Af, Xb, Zi in zip(data.kinds, data.A, data.Aflat, X, Zinv):
            if data.m == 0:
                break
            if kind == "s":
                G = np.matmul(np.matmul(Xb, Ab), Zi)
                Msc += Af @ G.reshape(data.m, -1).T
            else:
                Msc += (Af * (Xb * Zi)) @ Af.T
        Msc = (Msc + Msc.T) / 2.0
        solve_M = _factor_schur(Msc)
        if solve_M is None:
            status = NUMERICAL_FAILURE
            break

        XRdZi = [
            Xb @ Rb @ Zi if kind == "s" else Xb * Rb * Zi
            for kind, Xb, Rb, Zi in zip(data.kinds, X, Rd, Zinv)
        ]
        ARd = data.A_op(XRdZi)

        def direction(RcZinv):
            rhs = rp - data.A_op(RcZinv) + ARd
            dy = solve_M(rhs)
            Atdy = data.At_op(dy)
            dZ = [Rb - Ab for Rb, Ab in zip(Rd, Atdy)]
            dX = []
            for kind, Xb, dZb, Zi, RcZ in zip(data.kinds, X, dZ, Zinv, RcZinv):
                if kind == "s":
                    d = RcZ - Xb @ dZb @ Zi
                    dX.append((d + d.T) / 2.0)
                else:
                    dX.append(RcZ - Xb * dZb * Zi)
            return dX, dy, dZ

        # predictor
        dXa, dya, dZa = direction([-Xb for Xb in X])
        ap = min(1.0, min(_max_step(Xb, d, k) for k, Xb, d in zip(data.kinds, X, dXa)))
        ad = min(1.0, min(_max_step(Zb, d, k) for k, Zb, d in zip(data.kinds, Z, dZa)))
        new_gap = _inner([Xb + ap * d for Xb, d in zip(X, dXa)], [Zb + ad * d for Zb, d in zip(Z, dZa)])
        ratio = max(new_gap, 0.0) / gap
        step_min = min(ap, ad)
        if mu > 1e-6:
            expon = 1.0 if step_min < 1.0 / np.sqrt(3.0) else max(1.0, 3.0 * step_min**2)
        else:
            expon = 3.0
        sigma = min(1.0, ratio**expon)

        # corrector
        RcZinv = []
        for kind, Xb, Zi, dxa, dza in zip(data.kinds, X, Zinv, dXa, dZa):
            if kind == "s":
                RcZinv.append(sigma * mu * Zi - Xb - dxa @ dza @ Zi)
            else:
                RcZinv.append(sigma * mu * Zi - Xb - dxa * dza * Zi)
        dX, dy, dZ = direction(RcZinv)

        ap = min(_max_step(Xb, d, k) for k, Xb, d in zip(data.kinds, X, dX))
        ad = min(_max_step(Zb, d, k) for k, Zb, d in zip(data.kinds, Z, dZ))
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        if max(ap, ad) < 1e-10:
            small_steps += 1
            if small_steps >= 3:
                status = NUMERICAL_FAILURE
                break
        else:
            small_steps = 0
        # rounding can push a near-boundary step out of the cone; back off until
        # both iterates are numerically positive definite
        ap = _safe_step(X, dX, ap, data.kinds)
        ad = _safe_step(Z, dZ, ad, data.kinds)
        if ap == 0.0 or ad == 0.0:
            status = NUMERICAL_FAILURE
            break
        history[-1].update(step_primal=ap, step_dual=ad, centering=sigma)
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        y = y + ad * dy
        Z = [Zb + ad * d for Zb, d in zip(Z, dZ)]

    if status != OPTIMAL and status not in (PRIMAL_INFEASIBLE, DUAL_INFEASIBLE) and best is not None:
        _, it_best, X, y, Z, pobj, dobj, relgap, pinf, dinf = best
    Xo, Zo = _to_user(data, X, Z)
    if status != OPTIMAL:
        logger.warning("SDP solver stopped with status %s (relgap %.2e, pinf %.2e, dinf %.2e)",
                       status, relgap, pinf, dinf)
    return SdpSolution(
        X=Xo, y=np.asarray(y), Z=Zo,
        primal_objective=pobj, dual_objective=dobj,
        relative_gap=relgap, primal_infeasibility=pinf, dual_infeasibility=dinf,
        iterations=it, status=status, history=history,
    )


def _factor_schur(Msc: np.ndarray):
    """Return a solver for the Schur system, falling back to a pseudo-inverse."""
    if Msc.shape[0] == 0:
        return lambda r: np.zeros(0)
    try:
        cf = scipy.linalg.cho_factor(Msc, lower=True)

        def solve(r):
            x = scipy.linalg.cho_solve(cf, r)
            # one step of iterative refinement
            return x + scipy.linalg.cho_solve(cf, r - Msc @ x)

        return solve
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(Msc)
    if not np.all(np.isfinite(w)) or w[-1] <= 0:
        return None
    keep = w > 1e-15 * w[-1]
    Vk, wk = V[:, keep], w[keep]
    return lambda r: Vk @ ((Vk.T @ r) / wk)
