"""Self-contained barrier interior-point solver for small conic subproblems:
maximize a concave log-det-plus-linear objective over complex Hermitian /
complex vector / real scalar variables subject to affine (in)equalities and
linear matrix inequalities.

Problems are declared at the complex level (ConicSubproblem); solving first
realifies every Hermitian-valued affine map with the standard
[[Re, -Im], [Im, Re]] embedding, eliminates affine equalities through a
nullspace parametrization, and then runs a log-barrier Newton method.  All
arithmetic is deterministic: identical problems produce identical iterates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, null_space, solve_triangular

NEWTON_TOL = 1e-9          # inner stopping threshold on lambda^2 / 2
BARRIER_GROWTH = 10.0
PHASE1_MARGIN = 1e-9


class SolverError(RuntimeError):
    pass


class InfeasibleError(SolverError):
    """Raised when phase-I slack minimization certifies infeasibility."""


# ---------------------------------------------------------------------------
# Realification primitives


def embed_hermitian(h):
    """Complex Hermitian -> real symmetric [[Re, -Im], [Im, Re]] embedding.

    Preserves PSD-ness; determinants square (log-dets double).
    """
    h = np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def extract_hermitian(s):
    """Inverse of embed_hermitian (left inverse on the embedded subspace)."""
    s = np.asarray(s, dtype=float)
    n = s.shape[0] // 2
    re = 0.5 * (s[:n, :n] + s[n:, n:])
    im = 0.5 * (s[n:, :n] - s[:n, n:])
    return re + 1j * im


# ---------------------------------------------------------------------------
# Variable blocks and coordinate packing

KIND_HERMITIAN = "hermitian"
KIND_CVEC = "cvec"
KIND_SCALAR = "scalar"


@dataclass(frozen=True)
class VarBlock:
    name: str
    kind: str
    dim: int
    offset: int
    size: int


def hermitian_size(dim):
    return dim * dim


def pack_hermitian(h):
    """Real coordinates of a Hermitian matrix: diagonal first, then
    (re, im) pairs of the strict upper triangle, row-major."""
    h = np.asarray(h, dtype=complex)
    dim = h.shape[0]
    iu, ju = np.triu_indices(dim, 1)
    upper = h[iu, ju]
    return np.concatenate([
        np.real(np.diag(h)),
        np.column_stack([upper.real, upper.imag]).ravel(),
    ])


def unpack_hermitian(coords, dim):
    h = np.zeros((dim, dim), dtype=complex)
    h[np.diag_indices(dim)] = coords[:dim]
    iu, ju = np.triu_indices(dim, 1)
    pairs = np.asarray(coords[dim:], dtype=float).reshape(-1, 2)
    vals = pairs[:, 0] + 1j * pairs[:, 1]
    h[iu, ju] = vals
    h[ju, iu] = vals.conj()
    return h


def pack_cvec(v):
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag])


def unpack_cvec(coords, dim):
    coords = np.asarray(coords, dtype=float)
    return coords[:dim] + 1j * coords[dim:]


# ---------------------------------------------------------------------------
# Affine maps built by probing user callables on coordinate basis points


@dataclass
class MatrixMap:
    """Affine map x -> offset + sum_g x[coords[g]] * mats[g] (complex d x d)."""

    dim: int
    coords: np.ndarray          # (m,) global coordinate indices
    mats: np.ndarray            # (m, d, d) complex
    offset: np.ndarray          # (d, d) complex

    def evaluate(self, x):
        if len(self.coords) == 0:
            return self.offset.copy()
        return self.offset + np.tensordot(x[self.coords], self.mats, axes=1)


@dataclass
class ScalarMap:
    """Affine functional x -> offset + weights . x[coords] (real)."""

    coords: np.ndarray
    weights: np.ndarray
    offset: float

    def evaluate(self, x):
        if len(self.coords) == 0:
            return self.offset
        return self.offset + float(self.weights @ x[self.coords])

    def dense(self, n):
        a = np.zeros(n)
        a[self.coords] = self.weights
        return a


@dataclass
class IneqSpec:
    affine: ScalarMap
    rhs: float
    neglog_terms: list            # [(coef, MatrixMap)], coef > 0


@dataclass
class ObjectiveSpec:
    linear: ScalarMap
    logdet_terms: list            # [(weight, MatrixMap)], weight > 0
    constant: float = 0.0


class ConicSubproblem:
    """Declarative description of one convex max-det subproblem."""

    def __init__(self):
        self._blocks = {}
        self._order = []
        self.n = 0
        self.objective = None
        self.lmis = []
        self.ineqs = []
        self.eqs = []                 # [(ScalarMap, rhs)]
        self.scalar_bounds = {}

    # -- variable declaration

    def _add_block(self, name, kind, dim, size):
        if name in self._blocks:
            raise ValueError(f"duplicate variable name {name!r}")
        blk = VarBlock(name, kind, dim, self.n, size)
        self._blocks[name] = blk
        self._order.append(name)
        self.n += size
        return blk

    def add_hermitian(self, name, dim):
        return self._add_block(name, KIND_HERMITIAN, dim, hermitian_size(dim))

    def add_cvec(self, name, dim):
        return self._add_block(name, KIND_CVEC, dim, 2 * dim)

    def add_scalar(self, name, lower=None, upper=None):
        blk = self._add_block(name, KIND_SCALAR, 1, 1)
        self.scalar_bounds[name] = (lower, upper)
        if lower is not None:
            m = ScalarMap(np.array([blk.offset]), np.array([-1.0]), 0.0)
            self.ineqs.append(IneqSpec(m, -float(lower), []))
        if upper is not None:
            m = ScalarMap(np.array([blk.offset]), np.array([1.0]), 0.0)
            self.ineqs.append(IneqSpec(m, float(upper), []))
        return blk

    @property
    def blocks(self):
        return [self._blocks[name] for name in self._order]

    def block(self, name):
        return self._blocks[name]

    # -- packing between named complex values and the real coordinate vector

    def zero_values(self):
        vals = {}
        for blk in self.blocks:
            if blk.kind == KIND_HERMITIAN:
                vals[blk.name] = np.zeros((blk.dim, blk.dim), dtype=complex)
            elif blk.kind == KIND_CVEC:
                vals[blk.name] = np.zeros(blk.dim, dtype=complex)
            else:
                vals[blk.name] = 0.0
        return vals

    def pack(self, values):
        x = np.zeros(self.n)
        for blk in self.blocks:
            val = values[blk.name]
            sl = slice(blk.offset, blk.offset + blk.size)
            if blk.kind == KIND_HERMITIAN:
                x[sl] = pack_hermitian(val)
            elif blk.kind == KIND_CVEC:
                x[sl] = pack_cvec(val)
            else:
                x[sl] = float(val)
        return x

    def unpack(self, x):
        vals = {}
        for blk in self.blocks:
            sl = slice(blk.offset, blk.offset + blk.size)
            if blk.kind == KIND_HERMITIAN:
                vals[blk.name] = unpack_hermitian(x[sl], blk.dim)
            elif blk.kind == KIND_CVEC:
                vals[blk.name] = unpack_cvec(x[sl], blk.dim)
            else:
                vals[blk.name] = float(x[sl][0])
        return vals

    # -- affine-map construction by basis probing

    def _unit_values(self, blk, local):
        vals = self.zero_values()
        e = np.zeros(blk.size)
        e[local] = 1.0
        if blk.kind == KIND_HERMITIAN:
            vals[blk.name] = unpack_hermitian(e, blk.dim)
        elif blk.kind == KIND_CVEC:
            vals[blk.name] = unpack_cvec(e, blk.dim)
        else:
            vals[blk.name] = 1.0
        return vals

    def _probe_point(self, depends):
        """Deterministic pseudo-random values over ``depends`` for affinity
        verification of probed callables."""
        rng = np.random.default_rng(0x5EED)
        vals = self.zero_values()
        x = np.zeros(self.n)
        for name in depends:
            blk = self._blocks[name]
            sl = slice(blk.offset, blk.offset + blk.size)
            x[sl] = rng.standard_normal(blk.size)
        for name in depends:
            blk = self._blocks[name]
            sl = slice(blk.offset, blk.offset + blk.size)
            if blk.kind == KIND_HERMITIAN:
                vals[name] = unpack_hermitian(x[sl], blk.dim)
            elif blk.kind == KIND_CVEC:
                vals[name] = unpack_cvec(x[sl], blk.dim)
            else:
                vals[name] = float(x[sl][0])
        return vals, x

    def matrix_map(self, fn, depends):
        """Probe an affine callable values -> complex Hermitian matrix.

        The callable must be affine in the declared variables and
        Hermitian-valued for Hermitian inputs; both are verified.
        """
        offset = np.asarray(fn(self.zero_values()), dtype=complex)
        if offset.ndim != 2 or offset.shape[0] != offset.shape[1]:
            raise ValueError("matrix map must return a square matrix")
        coords, mats = [], []
        for name in depends:
            blk = self._blocks[name]
            for local in range(blk.size):
                delta = np.asarray(fn(self._unit_values(blk, local)),
                                   dtype=complex) - offset
                if np.any(delta != 0.0):
                    coords.append(blk.offset + local)
                    mats.append(delta)
        if coords:
            mats = np.stack(mats)
        else:
            mats = np.zeros((0, offset.shape[0], offset.shape[0]), dtype=complex)
        mmap = MatrixMap(offset.shape[0], np.asarray(coords, dtype=np.intp),
                         mats, offset)
        vals, x = self._probe_point(depends)
        direct = np.asarray(fn(vals), dtype=complex)
        scale = max(np.max(np.abs(direct)), 1.0)
        if np.max(np.abs(direct - mmap.evaluate(x))) > 1e-8 * scale:
            raise ValueError("matrix map callable is not affine in its variables")
        if np.max(np.abs(direct - direct.conj().T)) > 1e-9 * scale:
            raise ValueError("matrix map callable is not Hermitian-valued")
        return mmap

    def scalar_map(self, fn, depends):
        """Probe an affine callable values -> real scalar (affinity verified)."""
        offset = float(fn(self.zero_values()))
        coords, weights = [], []
        for name in depends:
            blk = self._blocks[name]
            for local in range(blk.size):
                delta = float(fn(self._unit_values(blk, local))) - offset
                if delta != 0.0:
                    coords.append(blk.offset + local)
                    weights.append(delta)
        smap = ScalarMap(np.asarray(coords, dtype=np.intp),
                         np.asarray(weights), offset)
        vals, x = self._probe_point(depends)
        direct = float(fn(vals))
        if abs(direct - smap.evaluate(x)) > 1e-8 * max(abs(direct), 1.0):
            raise ValueError("scalar map callable is not affine in its variables")
        return smap

    def constant_scalar(self, value=0.0):
        return ScalarMap(np.zeros(0, dtype=np.intp), np.zeros(0), float(value))

    # -- constraints and objective

    def set_objective(self, linear=None, logdet_terms=(), constant=0.0):
        """Maximize linear(x) + sum_t weight_t * logdet(map_t(x)) + constant."""
        linear = linear if linear is not None else self.constant_scalar()
        terms = list(logdet_terms)
        for weight, mmap in terms:
            if weight <= 0:
                raise ValueError("log-det objective weights must be positive")
        self.objective = ObjectiveSpec(linear, terms, float(constant))

    def add_lmi(self, mmap):
        self.lmis.append(mmap)

    def add_ineq(self, affine, rhs, neglog_terms=()):
        """affine(x) + sum_m coef_m * (-logdet(map_m(x))) <= rhs."""
        terms = list(neglog_terms)
        for coef, mmap in terms:
            if coef <= 0:
                raise ValueError("neg-log constraint coefficients must be positive")
        self.ineqs.append(IneqSpec(affine, float(rhs), terms))

    def add_eq(self, affine, rhs):
        self.eqs.append((affine, float(rhs)))

    # -- diagnostics

    def validate(self):
        """Structural checks: objective present, every matrix map
        Hermitian-valued coefficient-by-coefficient, all data finite."""
        if self.objective is None:
            raise ValueError("objective not set")
        maps = list(self.lmis)
        maps += [m for _, m in self.objective.logdet_terms]
        for spec in self.ineqs:
            maps += [m for _, m in spec.neglog_terms]
        for mmap in maps:
            for mat in (mmap.offset, *mmap.mats):
                scale = max(np.max(np.abs(mat)), 1.0)
                if np.max(np.abs(mat - mat.conj().T)) > 1e-9 * scale:
                    raise ValueError("matrix map is not Hermitian-valued")
                if not np.all(np.isfinite(mat)):
                    raise ValueError("matrix map has non-finite coefficients")
            if np.any(mmap.coords < 0) or np.any(mmap.coords >= self.n):
                raise ValueError("matrix map references unknown coordinates")
        return True

    def describe(self):
        lines = [f"variables (n={self.n} real coords):"]
        for blk in self.blocks:
            lines.append(f"  {blk.name}: {blk.kind} dim={blk.dim} coords={blk.size}")
        if self.objective:
            terms = ", ".join(f"{w:g}*logdet[{m.dim}x{m.dim}]"
                              for w, m in self.objective.logdet_terms)
            lines.append(f"objective: linear + {terms or 'none'}")
        lines.append(f"constraints: {len(self.ineqs)} scalar, {len(self.lmis)} LMI, "
                     f"{len(self.eqs)} equality")
        for i, mmap in enumerate(self.lmis):
            lines.append(f"  LMI[{i}]: dim {mmap.dim}, nnz coords {len(mmap.coords)}")
        return "\n".join(lines)


@dataclass
class SolverResult:
    values: dict
    objective: float
    feas_residual: float
    iterations: int
    status: str                  # optimal | max-iter | infeasible-detected
    gap: float
    history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Realified barrier problem


@dataclass
class _RealBlock:
    coords: np.ndarray           # (m,)
    mats: np.ndarray             # (m, D, D) float64
    offset: np.ndarray           # (D, D)
    weight: float = 1.0

    @property
    def dim(self):
        return self.offset.shape[0]

    def assemble(self, x):
        if len(self.coords) == 0:
            return self.offset.copy()
        return self.offset + np.tensordot(x[self.coords], self.mats, axes=1)

    def chol(self, x):
        try:
            return np.linalg.cholesky(self.assemble(x))
        except np.linalg.LinAlgError:
            return None

    def logdet(self, chol):
        return 2.0 * float(np.sum(np.log(np.diag(chol))))

    def grad_gram(self, chol):
        """(gvec, gram) of logdet at the assembled point: gvec_g =
        tr(F^-1 S_g), gram_gh = tr(F^-1 S_g F^-1 S_h)."""
        m, d = self.mats.shape[0], self.dim
        if m == 0:
            return np.zeros(0), np.zeros((0, 0))
        stacked = self.mats.transpose(1, 0, 2).reshape(d, m * d)
        y = solve_triangular(chol, stacked, lower=True, check_finite=False)
        y = y.reshape(d, m, d).transpose(1, 0, 2)          # Y_g = L^-1 S_g
        yt = y.transpose(2, 0, 1).reshape(d, m * d)        # blocks Y_g^T
        z = solve_triangular(chol, yt, lower=True, check_finite=False)
        v = z.reshape(d, m, d).transpose(1, 2, 0)          # V_g = (L^-1 Y_g^T)^T
        gvec = np.einsum("gii->g", v)
        flat = v.reshape(m, d * d)
        gram = flat @ flat.T
        return gvec, gram


def _embed_real_block(mmap, weight=1.0):
    d = mmap.dim
    mats = np.empty((len(mmap.coords), 2 * d, 2 * d))
    for g in range(len(mmap.coords)):
        mats[g] = embed_hermitian(mmap.mats[g])
    return _RealBlock(mmap.coords.copy(), mats, embed_hermitian(mmap.offset),
                      weight=weight)


@dataclass
class _ScalarLogGroup:
    """Vectorized bundle of 1x1 neg-log terms of one inequality:
    sum_j coefs[j] * (-log(offsets[j] + weights[j] . x[coords]))."""

    coefs: np.ndarray            # (J,)
    offsets: np.ndarray          # (J,)
    coords: np.ndarray           # (u,)
    weights: np.ndarray          # (J, u)

    def args(self, x):
        if len(self.coords) == 0:
            return self.offsets.copy()
        return self.offsets + self.weights @ x[self.coords]


@dataclass
class _IneqData:
    a: np.ndarray                # dense (n,) affine gradient
    b: float                     # effective rhs (offset folded in)
    matlogs: list                # [(coef, _RealBlock)] with embedded dim > 2
    slog: _ScalarLogGroup | None
    sup: np.ndarray = None       # coordinate support, filled in __post_init__

    def __post_init__(self):
        sup = set(np.nonzero(self.a)[0].tolist())
        for _, blk in self.matlogs:
            sup.update(blk.coords.tolist())
        if self.slog is not None:
            sup.update(self.slog.coords.tolist())
        self.sup = np.asarray(sorted(sup), dtype=np.intp)


class BarrierProblem:
    """Realified solve-ready form: minimize -(c.x + sum w logdet F(x)) subject
    to scalar inequalities (with optional convex log terms) and LMIs, on an
    affine subspace when equalities are present."""

    def __init__(self, problem: ConicSubproblem):
        if problem.objective is None:
            raise ValueError("objective not set")
        self.problem = problem
        self.n = problem.n
        self.box = None              # optional (lo, hi) coordinate bounds
        obj = problem.objective
        self.c = obj.linear.dense(self.n)
        self.const = obj.constant + 0.0
        # Halve weights: the embedding doubles every log-det.
        self.obj_blocks = [
            _embed_real_block(mmap, weight=w / 2.0)
            for w, mmap in obj.logdet_terms
        ]
        self.lmi_blocks = [_embed_real_block(m) for m in problem.lmis]
        self.ineqs = []
        for spec in problem.ineqs:
            a = spec.affine.dense(self.n)
            b = spec.rhs - spec.affine.offset
            matlogs, scoefs, soffs, scoords, sweights = [], [], [], set(), []
            for coef, mmap in spec.neglog_terms:
                if mmap.dim == 1:
                    scoefs.append(coef)
                    soffs.append(float(np.real(mmap.offset[0, 0])))
                    scoords.update(mmap.coords.tolist())
                else:
                    matlogs.append((coef / 2.0, _embed_real_block(mmap)))
            slog = None
            if scoefs:
                scoords = np.asarray(sorted(scoords), dtype=np.intp)
                pos = {c: i for i, c in enumerate(scoords)}
                weights = np.zeros((len(scoefs), len(scoords)))
                j = 0
                for coef, mmap in spec.neglog_terms:
                    if mmap.dim != 1:
                        continue
                    for c, mat in zip(mmap.coords, mmap.mats):
                        weights[j, pos[int(c)]] = float(np.real(mat[0, 0]))
                    j += 1
                slog = _ScalarLogGroup(np.asarray(scoefs), np.asarray(soffs),
                                       scoords, weights)
            self.ineqs.append(_IneqData(a, b, matlogs, slog))
        # Equality elimination: x = x_base + basis @ z.
        if problem.eqs:
            rows = np.stack([m.dense(self.n) for m, _ in problem.eqs])
            rhs = np.array([r - m.offset for m, r in problem.eqs])
            sol, residual, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
            if np.linalg.norm(rows @ sol - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
                raise InfeasibleError("equality constraints are inconsistent")
            self.x_base = sol
            self.basis = null_space(rows)
        else:
            self.x_base = None
            self.basis = None
        self.nz = self.n if self.basis is None else self.basis.shape[1]

    # -- coordinate lifting

    def lift(self, z):
        if self.basis is None:
            return z
        return self.x_base + self.basis @ z

    def reduce_point(self, x):
        if self.basis is None:
            return x.copy()
        return self.basis.T @ (x - self.x_base)

    def gap_degree(self):
        deg = len(self.ineqs) + sum(blk.dim for blk in self.lmi_blocks)
        if self.box is not None:
            deg += 2 * self.n
        return deg

    def _box_slacks(self, x):
        lo, hi = self.box
        return x - lo, hi - x

    # -- merit evaluation

    def objective_value(self, x):
        """Max-sense objective in original (complex) units."""
        val = float(self.c @ x) + self.const
        for blk in self.obj_blocks:
            chol = blk.chol(x)
            if chol is None:
                return -np.inf
            val += blk.weight * blk.logdet(chol)
        return val

    def ineq_values(self, x):
        out = []
        for spec in self.ineqs:
            val = float(spec.a @ x) - spec.b
            for coef, blk in spec.matlogs:
                chol = blk.chol(x)
                if chol is None:
                    return None
                val -= coef * blk.logdet(chol)
            if spec.slog is not None:
                args = spec.slog.args(x)
                if np.any(args <= 0.0):
                    return None
                val += float(spec.slog.coefs @ (-np.log(args)))
            out.append(val)
        return out

    def strict_margin(self, x):
        """Smallest slack across all barrier arguments (negative: infeasible)."""
        worst = np.inf
        vals = self.ineq_values(x)
        if vals is None:
            return -np.inf
        for v in vals:
            worst = min(worst, -v)
        for blk in self.lmi_blocks + self.obj_blocks:
            eigmin = float(np.min(np.linalg.eigvalsh(blk.assemble(x))))
            worst = min(worst, eigmin)
        if self.box is not None:
            below, above = self._box_slacks(x)
            worst = min(worst, float(np.min(below)), float(np.min(above)))
        return worst

    def feasibility_residual(self, x):
        vals = self.ineq_values(x)
        worst = 0.0
        if vals is None:
            return np.inf
        for v in vals:
            worst = max(worst, v)
        for blk in self.lmi_blocks:
            eigmin = float(np.min(np.linalg.eigvalsh(blk.assemble(x))))
            worst = max(worst, -eigmin)
        return worst

    def merit(self, z, t):
        """Barrier merit at z, or None outside the domain."""
        x = self.lift(z)
        val = -t * (float(self.c @ x))
        for blk in self.obj_blocks:
            chol = blk.chol(x)
            if chol is None:
                return None
            val -= t * blk.weight * blk.logdet(chol)
        for blk in self.lmi_blocks:
            chol = blk.chol(x)
            if chol is None:
                return None
            val -= blk.logdet(chol)
        for spec in self.ineqs:
            s = self._slack(spec, x)
            if s is None or s <= 0.0:
                return None
            val -= np.log(s)
        if self.box is not None:
            below, above = self._box_slacks(x)
            if np.any(below <= 0.0) or np.any(above <= 0.0):
                return None
            val -= float(np.sum(np.log(below)) + np.sum(np.log(above)))
        return val

    def _slack(self, spec, x):
        s = spec.b - float(spec.a @ x)
        for coef, blk in spec.matlogs:
            chol = blk.chol(x)
            if chol is None:
                return None
            s += coef * blk.logdet(chol)
        if spec.slog is not None:
            args = spec.slog.args(x)
            if np.any(args <= 0.0):
                return None
            s += float(spec.slog.coefs @ np.log(args))
        return s

    def merit_derivatives(self, z, t):
        """(value, grad, hess) of the barrier merit in z coordinates."""
        x = self.lift(z)
        n = self.n
        val = -t * float(self.c @ x)
        grad = -t * self.c.copy()
        hess = np.zeros((n, n))
        for blk in self.obj_blocks:
            chol = blk.chol(x)
            if chol is None:
                return None
            w = t * blk.weight
            val -= w * blk.logdet(chol)
            gvec, gram = blk.grad_gram(chol)
            grad[blk.coords] -= w * gvec
            hess[np.ix_(blk.coords, blk.coords)] += w * gram
        for blk in self.lmi_blocks:
            chol = blk.chol(x)
            if chol is None:
                return None
            val -= blk.logdet(chol)
            gvec, gram = blk.grad_gram(chol)
            grad[blk.coords] -= gvec
            hess[np.ix_(blk.coords, blk.coords)] += gram
        for spec in self.ineqs:
            s = spec.b - float(spec.a @ x)
            grad_s = -spec.a.copy()
            curv = []            # [(coords, psd contribution)] of -hess(s)
            ok = True
            for coef, blk in spec.matlogs:
                chol = blk.chol(x)
                if chol is None:
                    ok = False
                    break
                s += coef * blk.logdet(chol)
                gvec, gram = blk.grad_gram(chol)
                grad_s[blk.coords] += coef * gvec
                curv.append((blk.coords, coef * gram))
            if not ok:
                return None
            if spec.slog is not None:
                args = spec.slog.args(x)
                if np.any(args <= 0.0):
                    return None
                s += float(spec.slog.coefs @ np.log(args))
                scale = spec.slog.coefs / args
                grad_s[spec.slog.coords] += spec.slog.weights.T @ scale
                wmat = spec.slog.weights * np.sqrt(spec.slog.coefs / args ** 2)[:, None]
                curv.append((spec.slog.coords, wmat.T @ wmat))
            if s <= 0.0:
                return None
            val -= np.log(s)
            gs = grad_s[spec.sup]
            grad[spec.sup] -= gs / s
            hess[np.ix_(spec.sup, spec.sup)] += np.outer(gs, gs) / (s * s)
            for coords, gram in curv:
                hess[np.ix_(coords, coords)] += gram / s
        if self.box is not None:
            below, above = self._box_slacks(x)
            if np.any(below <= 0.0) or np.any(above <= 0.0):
                return None
            val -= float(np.sum(np.log(below)) + np.sum(np.log(above)))
            grad += 1.0 / above - 1.0 / below
            hess[np.diag_indices(n)] += 1.0 / below ** 2 + 1.0 / above ** 2
        if self.basis is not None:
            grad = self.basis.T @ grad
            hess = self.basis.T @ hess @ self.basis
        return val, grad, hess


def _newton_direction(hess, grad):
    """Newton step -H^-1 g with Jacobi preconditioning (the barrier mixes
    widely different curvature scales) and escalating jitter on failure."""
    n = hess.shape[0]
    if n == 0:
        return np.zeros(0), 0.0
    diag = np.abs(np.diag(hess))
    precond = 1.0 / np.sqrt(np.maximum(diag, 1e-30))
    scaled = hess * precond[:, None] * precond[None, :]
    g_scaled = grad * precond
    jitter = 0.0
    for _ in range(12):
        try:
            factor = cho_factor(scaled + jitter * np.eye(n), check_finite=False)
            d = -precond * cho_solve(factor, g_scaled, check_finite=False)
            lam2 = float(-grad @ d)
            if np.isfinite(lam2) and lam2 >= 0.0:
                return d, lam2
        except np.linalg.LinAlgError:
            pass
        jitter = max(jitter * 100.0, 1e-14)
    raise SolverError("Newton system could not be factorized")


def _run_barrier(bp, z0, obj_tol, max_iters, early_stop=None, t0=1.0):
    """Minimize the barrier sequence from a strictly feasible z0."""
    z = z0.copy()
    t = t0
    degree = bp.gap_degree()
    total_newton = 0
    history = []
    status = "optimal"
    while True:
        stage_newton = 0
        for _ in range(60):
            if total_newton >= max_iters:
                status = "max-iter"
                break
            out = bp.merit_derivatives(z, t)
            if out is None:
                raise SolverError("iterate left the barrier domain")
            val, grad, hess = out
            d, lam2 = _newton_direction(hess, grad)
            if 0.5 * lam2 <= NEWTON_TOL:
                break
            slope = float(grad @ d)
            step = 1.0
            accepted = False
            while step > 1e-14:
                cand = z + step * d
                mval = bp.merit(cand, t)
                if mval is not None and mval <= val + 0.01 * step * slope:
                    z = cand
                    accepted = True
                    break
                step *= 0.5
            total_newton += 1
            stage_newton += 1
            if not accepted:
                break
            if early_stop is not None and early_stop(bp.lift(z)):
                history.append((t, bp.objective_value(bp.lift(z)), stage_newton))
                return z, total_newton, "optimal", degree / t, history
        history.append((t, bp.objective_value(bp.lift(z)), stage_newton))
        if status == "max-iter":
            break
        if degree / t <= obj_tol or degree == 0:
            break
        t *= BARRIER_GROWTH
    return z, total_newton, status, degree / t, history


def _heuristic_point(bp):
    """Analytic interior guess: identity-scaled Hermitian blocks sized to half
    the tightest trace-type cap (counting every Hermitian block the cap
    touches), zero vectors, bound-respecting scalars."""
    problem = bp.problem
    herm_blocks = [b for b in problem.blocks if b.kind == KIND_HERMITIAN]
    all_diag = np.concatenate([
        np.arange(b.offset, b.offset + b.dim) for b in herm_blocks
    ]) if herm_blocks else np.zeros(0, dtype=np.intp)
    best = np.inf
    for spec in bp.ineqs:
        slope = float(np.sum(spec.a[all_diag])) if len(all_diag) else 0.0
        if slope > 1e-12 and spec.b > 0:
            best = min(best, spec.b / (2.0 * slope))
    x = np.zeros(bp.n)
    for blk in problem.blocks:
        if blk.kind == KIND_HERMITIAN:
            diag_coords = np.arange(blk.offset, blk.offset + blk.dim)
            x[diag_coords] = best if np.isfinite(best) else 1.0
        elif blk.kind == KIND_SCALAR:
            lower, upper = problem.scalar_bounds.get(blk.name, (None, None))
            if lower is not None and upper is not None:
                x[blk.offset] = 0.5 * (lower + upper)
            elif lower is not None:
                x[blk.offset] = lower + 1.0
            elif upper is not None:
                x[blk.offset] = upper - 1.0
    return x


def _phase1_problem(bp):
    """Relaxed copy with one extra slack coordinate s: minimize s subject to
    every barrier argument shifted by +s (scalar slacks, +s I on blocks)."""
    relaxed = BarrierProblem.__new__(BarrierProblem)
    relaxed.problem = bp.problem
    relaxed.n = bp.n + 1
    s_idx = bp.n
    relaxed.c = np.zeros(relaxed.n)
    relaxed.c[s_idx] = -1.0       # maximize -s
    relaxed.const = 0.0
    relaxed.obj_blocks = []

    def extend_block(blk):
        m = len(blk.coords)
        mats = np.empty((m + 1,) + blk.mats.shape[1:])
        if m:
            mats[:m] = blk.mats
        mats[m] = np.eye(blk.dim)
        coords = np.concatenate([blk.coords, [s_idx]]).astype(np.intp)
        return _RealBlock(coords, mats, blk.offset.copy(), weight=blk.weight)

    relaxed.lmi_blocks = [extend_block(b) for b in bp.lmi_blocks]
    relaxed.lmi_blocks += [extend_block(b) for b in bp.obj_blocks]
    relaxed.ineqs = []
    for spec in bp.ineqs:
        a = np.zeros(relaxed.n)
        a[:bp.n] = spec.a
        a[s_idx] = -1.0
        matlogs = [(coef, extend_block(blk)) for coef, blk in spec.matlogs]
        slog = None
        if spec.slog is not None:
            coords = np.concatenate([spec.slog.coords, [s_idx]]).astype(np.intp)
            weights = np.hstack([spec.slog.weights,
                                 np.ones((len(spec.slog.coefs), 1))])
            slog = _ScalarLogGroup(spec.slog.coefs.copy(),
                                   spec.slog.offsets.copy(), coords, weights)
        relaxed.ineqs.append(_IneqData(a, spec.b, matlogs, slog))
    if bp.basis is not None:
        nz = bp.basis.shape[1]
        basis = np.zeros((relaxed.n, nz + 1))
        basis[:bp.n, :nz] = bp.basis
        basis[s_idx, nz] = 1.0
        relaxed.basis = basis
        relaxed.x_base = np.concatenate([bp.x_base, [0.0]])
    else:
        relaxed.basis = None
        relaxed.x_base = None
    relaxed.nz = relaxed.n if relaxed.basis is None else relaxed.basis.shape[1]
    relaxed.box = None               # sized by the caller from the start point
    return relaxed


def _find_strictly_feasible(bp, hint=None, margin=PHASE1_MARGIN, max_iters=400):
    """Strictly feasible x for bp, via hint, heuristic, or phase-I slack
    minimization.  Raises InfeasibleError when the slack optimum stays
    positive."""
    candidates = []
    if hint is not None:
        candidates.append(bp.lift(bp.reduce_point(hint)))
    candidates.append(bp.lift(bp.reduce_point(_heuristic_point(bp))))
    for cand in candidates:
        if bp.strict_margin(cand) >= margin:
            return cand
    relaxed = _phase1_problem(bp)
    # Geometric slack ladder: the fully-relaxed problem is strictly feasible
    # at any base point for large enough s.
    z1 = None
    for base in candidates:
        for slack0 in (1.0, 1e2, 1e4, 1e6, 1e9, 1e12):
            cand = relaxed.reduce_point(np.concatenate([base, [slack0]]))
            if relaxed.strict_margin(relaxed.lift(cand)) >= margin:
                z1 = cand
                break
        if z1 is not None:
            break
    if z1 is None:
        raise SolverError("could not initialize phase-I slack problem")
    # Coordinate box keeps the phase-I merit bounded: slack-coupled
    # coordinates otherwise drift to infinity while s is minimized.
    start = relaxed.lift(z1)
    radius = 1e4 * np.maximum(1.0, np.abs(start))
    relaxed.box = (start - radius, start + radius)

    target = 10.0 * margin

    def done(x_ext):
        return x_ext[-1] <= -target

    z, _, _, _, _ = _run_barrier(relaxed, z1, obj_tol=margin, t0=1.0,
                                 max_iters=max_iters, early_stop=done)
    x_ext = relaxed.lift(z)
    x, slack = x_ext[:bp.n], float(x_ext[-1])
    if slack <= -margin and bp.strict_margin(x) >= margin:
        return x
    raise InfeasibleError(
        f"phase-I terminated with slack {slack:.3e}; problem has no strictly "
        "feasible point at the required margin")


def phase1_feasible_point(problem):
    """Strictly feasible variable values for every barrier argument, or
    InfeasibleError."""
    bp = BarrierProblem(problem)
    x = _find_strictly_feasible(bp)
    return problem.unpack(x)


def solve(problem, initial=None, feas_tol=1e-7, obj_tol=1e-8, max_iters=600,
          t0=1.0):
    """Barrier solve of a ConicSubproblem.

    ``initial`` may carry variable values (dict) used when strictly feasible;
    otherwise phase-I constructs a start.  ``t0`` sets the first barrier
    stage; warm starts near the optimum tolerate (and benefit from) a large
    one.  Returns a SolverResult whose objective is in the original complex
    log-det units.
    """
    bp = BarrierProblem(problem)
    hint = problem.pack(initial) if initial is not None else None
    x0 = _find_strictly_feasible(bp, hint=hint)
    z0 = bp.reduce_point(x0)
    z, iters, status, gap, history = _run_barrier(bp, z0, obj_tol=obj_tol,
                                                  max_iters=max_iters, t0=t0)
    x = bp.lift(z)
    residual = bp.feasibility_residual(x)
    if status == "optimal" and residual > feas_tol:
        status = "max-iter"
    return SolverResult(values=problem.unpack(x),
                        objective=bp.objective_value(x),
                        feas_residual=max(residual, 0.0),
                        iterations=iters,
                        status=status,
                        gap=gap,
                        history=history)
