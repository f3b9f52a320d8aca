"""Affine matrix expressions over matrix decision variables.

Expressions are kept in operator form: each linear term is L @ X @ R (with
optional transpose of X and optional symmetrization), so assembled
constraints can be checked term by term against their source formulas.
Lowering vectorizes every constraint by svec (off-diagonal entries scaled
by sqrt(2), column-major upper triangle) into a standard-form positive
semidefinite feasibility problem with an adjoined maximize-margin scalar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

__all__ = [
    "svec",
    "smat",
    "svec_dim",
    "MatrixVariable",
    "AffineMatrixExpr",
    "DefinitenessConstraint",
    "LmiProblem",
    "ConeBlock",
    "StandardConicForm",
    "const_expr",
    "var_expr",
    "sym",
    "block",
    "Star",
    "lower",
    "RHO_BOUND",
]

# Upper bound adjoined to every symmetric variable at lowering time
# (X <= RHO_BOUND * I); the constraints are homogeneous in the variables,
# so the bound never removes feasibility, it only keeps maximize-margin
# bounded.
RHO_BOUND = 1e4


def svec_dim(d: int) -> int:
    return d * (d + 1) // 2


def svec(M: np.ndarray) -> np.ndarray:
    """Symmetric vectorization, column-major upper triangle, off-diagonals
    scaled by sqrt(2) so <svec(X), svec(Y)> = trace(XY)."""
    d = M.shape[0]
    out = np.empty(svec_dim(d))
    r2 = np.sqrt(2.0)
    i = 0
    for j in range(d):
        for k in range(j):
            out[i] = M[k, j] * r2
            i += 1
        out[i] = M[j, j]
        i += 1
    return out


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of svec."""
    m = len(v)
    d = int((np.sqrt(8 * m + 1) - 1) / 2 + 0.5)
    if svec_dim(d) != m:
        raise ValueError(f"length {m} is not a svec dimension")
    M = np.zeros((d, d))
    r2i = 1.0 / np.sqrt(2.0)
    i = 0
    for j in range(d):
        for k in range(j):
            M[k, j] = M[j, k] = v[i] * r2i
            i += 1
        M[j, j] = v[i]
        i += 1
    return M


@dataclass(frozen=True)
class MatrixVariable:
    """A symmetric or skew-symmetric matrix decision variable."""

    id: str
    kind: str  # "symmetric" | "skew"
    dim: int

    def __post_init__(self):
        if self.kind not in ("symmetric", "skew"):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def n_free(self) -> int:
        d = self.dim
        return d * (d + 1) // 2 if self.kind == "symmetric" else d * (d - 1) // 2

    def basis(self):
        """Structural basis matrices; a value is sum(c_i * basis_i)."""
        d = self.dim
        mats = []
        if self.kind == "symmetric":
            for j in range(d):
                for i in range(j + 1):
                    E = np.zeros((d, d))
                    E[i, j] = 1.0
                    E[j, i] = 1.0
                    mats.append(E)
        else:
            for j in range(d):
                for i in range(j):
                    E = np.zeros((d, d))
                    E[i, j] = 1.0
                    E[j, i] = -1.0
                    mats.append(E)
        return mats

    def realize(self, coeffs: np.ndarray) -> np.ndarray:
        """Value from free coefficients; skew output is exactly skew."""
        d = self.dim
        X = np.zeros((d, d))
        i = 0
        if self.kind == "symmetric":
            for j in range(d):
                for r in range(j + 1):
                    X[r, j] = coeffs[i]
                    X[j, r] = coeffs[i]
                    i += 1
        else:
            for j in range(d):
                for r in range(j):
                    X[r, j] = coeffs[i]
                    X[j, r] = -coeffs[i]
                    i += 1
        return X


@dataclass(frozen=True)
class _Term:
    """coef * L @ op(X) @ R, optionally symmetrized (+ transpose)."""

    var_id: str
    L: np.ndarray
    R: np.ndarray
    transpose_var: bool = False
    symmetrize: bool = False

    def apply(self, X: np.ndarray) -> np.ndarray:
        Xv = X.T if self.transpose_var else X
        M = self.L @ Xv @ self.R
        return M + M.T if self.symmetrize else M


@dataclass(frozen=True)
class AffineMatrixExpr:
    """constant + sum of linear terms, all of shape (d, d)."""

    d: int
    constant: np.ndarray
    terms: tuple[_Term, ...] = ()

    def __add__(self, other):
        if isinstance(other, AffineMatrixExpr):
            if other.d != self.d:
                raise ValueError("dimension mismatch in expression sum")
            return AffineMatrixExpr(self.d, self.constant + other.constant,
                                    self.terms + other.terms)
        return AffineMatrixExpr(self.d, self.constant + np.asarray(other, float),
                                self.terms)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * (other if isinstance(other, AffineMatrixExpr)
                                else const_expr(np.asarray(other, float)))

    def __mul__(self, c: float):
        c = float(c)
        return AffineMatrixExpr(
            self.d, c * self.constant,
            tuple(_Term(t.var_id, c * t.L, t.R, t.transpose_var, t.symmetrize)
                  for t in self.terms))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def T(self) -> "AffineMatrixExpr":
        return AffineMatrixExpr(
            self.d, self.constant.T.copy(),
            tuple(_Term(t.var_id, t.R.T, t.L.T, not t.transpose_var, False)
                  if not t.symmetrize else t
                  for t in self.terms))

    def evaluate(self, assignment: dict[str, np.ndarray]) -> np.ndarray:
        M = self.constant.copy()
        for t in self.terms:
            M += t.apply(assignment[t.var_id])
        return M

    def variable_ids(self) -> set[str]:
        return {t.var_id for t in self.terms}


def const_expr(M) -> AffineMatrixExpr:
    M = np.asarray(M, float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("constant must be square")
    return AffineMatrixExpr(M.shape[0], M)


def var_expr(var: MatrixVariable, L=None, R=None) -> AffineMatrixExpr:
    """Expression L @ X @ R for variable X (L, R default to identity)."""
    L = np.eye(var.dim) if L is None else np.asarray(L, float)
    R = np.eye(var.dim) if R is None else np.asarray(R, float)
    if L.shape[1] != var.dim or R.shape[0] != var.dim or L.shape[0] != R.shape[1]:
        raise ValueError("operator shapes incompatible with variable")
    d = L.shape[0]
    return AffineMatrixExpr(d, np.zeros((d, d)), (_Term(var.id, L, R),))


def sym(X: AffineMatrixExpr) -> AffineMatrixExpr:
    """X + X^T (the <.>_S symmetrization bracket)."""
    if X.constant.shape[0] != X.constant.shape[1]:
        raise ValueError("sym needs a square expression")
    return X + X.T()


class Star:
    """Placeholder for transpose-filled lower-triangle blocks."""


STAR = Star()


def block(grid) -> AffineMatrixExpr:
    """Assemble a symmetric block expression.

    `grid` is a square nested list of AffineMatrixExpr / arrays / Star; a
    Star at (i, j) below the diagonal is filled with entry (j, i) transposed.
    """
    rows = len(grid)
    cells: list[list[AffineMatrixExpr | None]] = [[None] * rows for _ in range(rows)]
    for i in range(rows):
        if len(grid[i]) != rows:
            raise ValueError("block grid must be square")
        for j in range(rows):
            e = grid[i][j]
            if isinstance(e, Star):
                if j >= i:
                    raise ValueError("Star only allowed below the diagonal")
                continue
            cells[i][j] = e if isinstance(e, AffineMatrixExpr) else const_expr(e)
    # star fill
    for i in range(rows):
        for j in range(rows):
            if isinstance(grid[i][j], Star):
                src = cells[j][i]
                if src is None:
                    raise ValueError(f"Star at ({i},{j}) has no mirror entry")
                cells[i][j] = src.T()
    dims = [None] * rows
    for i in range(rows):
        for j in range(rows):
            if cells[i][j] is not None:
                if dims[i] is None:
                    dims[i] = cells[i][j].d
                elif dims[i] != cells[i][j].d:
                    raise ValueError(f"inconsistent block sizes in row {i}")
    if any(d is None for d in dims):
        raise ValueError("cannot infer a block dimension from an all-None row")
    # square cells only, so column dims equal row dims
    offs = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    D = int(offs[-1])
    constant = np.zeros((D, D))
    terms: list[_Term] = []
    eye = np.eye(D)
    for i in range(rows):
        Ui = eye[:, offs[i]:offs[i + 1]]  # D x d_i embedding
        for j in range(rows):
            e = cells[i][j]
            if e is None:
                continue
            Uj = eye[:, offs[j]:offs[j + 1]]
            constant[offs[i]:offs[i + 1], offs[j]:offs[j + 1]] += e.constant
            for t in e.terms:
                if t.symmetrize:
                    # <L X R>_S embedded off-diagonal splits into two plain terms
                    terms.append(_Term(t.var_id, Ui @ t.L, t.R @ Uj.T, t.transpose_var))
                    terms.append(_Term(t.var_id, Ui @ t.R.T, t.L.T @ Uj.T,
                                       not t.transpose_var))
                else:
                    terms.append(_Term(t.var_id, Ui @ t.L, t.R @ Uj.T, t.transpose_var))
    return AffineMatrixExpr(D, constant, tuple(terms))


@dataclass(frozen=True)
class DefinitenessConstraint:
    """expr < 0 (negative-definite) or expr > 0 (positive-definite)."""

    expr: AffineMatrixExpr
    sense: str  # "negative" | "positive"
    name: str = ""

    def __post_init__(self):
        if self.sense not in ("negative", "positive"):
            raise ValueError(f"unknown sense {self.sense!r}")

    def check_symmetric(self, variables: dict[str, MatrixVariable]):
        """Structural symmetry: constant symmetric, every variable's basis
        maps to a symmetric matrix."""
        e = self.expr
        if not np.allclose(e.constant, e.constant.T, atol=1e-12):
            raise ValueError(f"constraint {self.name!r}: constant not symmetric")
        for vid in sorted(e.variable_ids()):
            v = variables[vid]
            for Bmat in v.basis():
                M = np.zeros((e.d, e.d))
                for t in e.terms:
                    if t.var_id == vid:
                        M += t.apply(Bmat)
                if not np.allclose(M, M.T, atol=1e-10 * max(1.0, np.abs(M).max())):
                    raise ValueError(
                        f"constraint {self.name!r}: term in {vid} not symmetric-producing")


@dataclass
class LmiProblem:
    variables: list[MatrixVariable] = field(default_factory=list)
    constraints: list[DefinitenessConstraint] = field(default_factory=list)

    def add_variable(self, id: str, kind: str, dim: int) -> MatrixVariable:
        if any(v.id == id for v in self.variables):
            raise ValueError(f"duplicate variable id {id!r}")
        v = MatrixVariable(id, kind, dim)
        self.variables.append(v)
        return v

    def var_map(self) -> dict[str, MatrixVariable]:
        return {v.id: v for v in self.variables}

    def add_constraint(self, expr: AffineMatrixExpr, sense: str, name: str = ""):
        c = DefinitenessConstraint(expr, sense, name)
        vm = self.var_map()
        for vid in expr.variable_ids():
            if vid not in vm:
                raise ValueError(f"constraint {name!r} references undeclared {vid!r}")
        c.check_symmetric(vm)
        self.constraints.append(c)

    def assignment(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Realize all variables from the stacked free-scalar vector."""
        out = {}
        off = 0
        for v in self.variables:
            out[v.id] = v.realize(x[off:off + v.n_free])
            off += v.n_free
        return out

    @property
    def n_free(self) -> int:
        return sum(v.n_free for v in self.variables)


@dataclass
class ConeBlock:
    """One PSD block of the lowered form: const + C x (svec space), scaled."""

    name: str
    dim: int
    scale: float
    const: np.ndarray          # svec vector, length dim*(dim+1)//2
    coeffs: sparse.csc_matrix  # svec_dim x m
    is_bound: bool = False     # normalization box, not a stability condition

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return smat(self.const + self.coeffs @ x) * self.scale

    def min_eig(self, x: np.ndarray) -> float:
        """Minimum eigenvalue in the scaled (solver) space."""
        return float(np.linalg.eigvalsh(smat(self.const + self.coeffs @ x)).min())


@dataclass
class StandardConicForm:
    """maximize mu  s.t.  const_i + C_i x  >=  mu I  (PSD) for every block."""

    m: int
    blocks: list[ConeBlock]
    margin: bool
    var_layout: list[tuple[str, str, int, int, int]]  # (id, kind, dim, offset, n_free)


def lower(problem: LmiProblem, margin: bool = True,
          rho: float = RHO_BOUND) -> StandardConicForm:
    """Vectorize a problem into the standard conic feasibility form.

    Negative-definite constraints are negated into the PSD cone.  Every
    symmetric variable gets a box block rho*I - X >= 0 so the margin
    objective stays bounded.  Each block is divided by
    max(1, frobenius(constant)) so margins are comparable across blocks.
    """
    offsets: dict[str, int] = {}
    layout = []
    off = 0
    for v in problem.variables:
        offsets[v.id] = off
        layout.append((v.id, v.kind, v.dim, off, v.n_free))
        off += v.n_free
    m = off
    vm = problem.var_map()

    blocks = []
    for c in problem.constraints:
        sign = -1.0 if c.sense == "negative" else 1.0
        e = c.expr
        const = sign * 0.5 * (e.constant + e.constant.T)
        scale = max(1.0, float(np.linalg.norm(const)))
        sd = svec_dim(e.d)
        cols, rows_i, vals = [], [], []
        for vid in sorted(e.variable_ids()):
            v = vm[vid]
            base_off = offsets[vid]
            for bi, Bmat in enumerate(v.basis()):
                M = np.zeros((e.d, e.d))
                for t in e.terms:
                    if t.var_id == vid:
                        M += t.apply(Bmat)
                col = svec(sign * 0.5 * (M + M.T)) / scale
                nz = np.nonzero(col)[0]
                rows_i.extend(nz.tolist())
                cols.extend([base_off + bi] * len(nz))
                vals.extend(col[nz].tolist())
        C = sparse.csc_matrix((vals, (rows_i, cols)), shape=(sd, m))
        blocks.append(ConeBlock(c.name, e.d, scale, svec(const) / scale, C))

    for v in problem.variables:
        if v.kind != "symmetric":
            continue
        d, sd = v.dim, svec_dim(v.dim)
        const = rho * np.eye(d)
        scale = max(1.0, float(np.linalg.norm(const)))
        cols, rows_i, vals = [], [], []
        for bi, Bmat in enumerate(v.basis()):
            col = svec(-Bmat) / scale
            nz = np.nonzero(col)[0]
            rows_i.extend(nz.tolist())
            cols.extend([offsets[v.id] + bi] * len(nz))
            vals.extend(col[nz].tolist())
        C = sparse.csc_matrix((vals, (rows_i, cols)), shape=(sd, m))
        blocks.append(ConeBlock(f"bound:{v.id}", d, scale, svec(const) / scale, C,
                                is_bound=True))
    return StandardConicForm(m, blocks, margin, layout)
