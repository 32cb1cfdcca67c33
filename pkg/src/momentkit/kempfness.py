"""Integral of the moment map, its minimization, and stability verdicts."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np
from scipy.optimize import linprog, minimize

from . import targets as tg
from .liecore import (
    cartan_decompose,
    expm,
    herm_eig,
    herm_fun,
    length_log,
    norm,
    pairing,
)
from .targets import ExtendedWeight, Linear, Projective, Target

log = logging.getLogger(__name__)

MAX_STEP = 4.0  # cap on the length of a single descent step
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class PsiRecord:
    value: float
    error: float
    s: np.ndarray  # skew-Hermitian generator of the path exp(i t s)
    k: np.ndarray  # unitary prefix dropped by K-invariance
    converged: bool = True


@dataclass
class FlowResult:
    status: str  # Converged | DivergenceWitness | MaxIter
    g: np.ndarray
    point: np.ndarray
    residual: float
    witness: Optional[np.ndarray] = None
    psi_value: float = 0.0
    iterations: int = 0
    trace: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


@dataclass
class StabilityVerdict:
    kind: str  # Stable | Unstable | Inconclusive
    minimizer: Optional[FlowResult] = None
    s: Optional[np.ndarray] = None
    weight: Optional[ExtendedWeight] = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FlowOptions:
    step: float = 1.0
    max_iter: int = 2000
    tol: float = 1e-8
    budget: float = 50.0
    armijo: float = 1e-4
    newton_tol: float = 1e-3  # certified zero must lie this close (Newton step length)


# -- the integral of the moment map --------------------------------------------


def _shift(c, s) -> float:
    return 0.0 if c is None else pairing(np.asarray(c, complex), s).real


def _gauss(f, a: float, b: float) -> float:
    mid, half = (a + b) / 2, (b - a) / 2
    return half * sum(w * f(mid + half * t) for t, w in zip(_GL_NODES, _GL_WEIGHTS))


def adaptive_quad(f, a: float, b: float, tol: float, max_depth: int = 30):
    """Adaptive Gauss-Legendre; the error estimate is the one-level refinement gap."""
    whole = _gauss(f, a, b)
    stack = [(a, b, whole, tol, 0)]
    total, err, ok = 0.0, 0.0, True
    while stack:
        lo, hi, est, tl, depth = stack.pop()
        mid = (lo + hi) / 2
        left, right = _gauss(f, lo, mid), _gauss(f, mid, hi)
        gap = abs(left + right - est)
        floor = 64 * np.finfo(float).eps * (abs(left) + abs(right) + (hi - lo))  # roundoff level
        if gap <= max(tl, floor) or depth >= max_depth:
            ok &= gap <= max(tl, floor)
            total += left + right
            err += gap
        else:
            stack.append((lo, mid, left, tl / 2, depth + 1))
            stack.append((mid, hi, right, tl / 2, depth + 1))
    return total, err, ok


def psi(target: Target, x: np.ndarray, g, quad_tol: float = 1e-9, c=None) -> PsiRecord:
    """``Psi(x, g)`` for the moment map ``mu - c``, by quadrature of lambda_t."""
    g = np.asarray(g, dtype=complex)
    k, h = cartan_decompose(g)
    s = -1j * h
    if norm(h) == 0.0:
        return PsiRecord(0.0, 0.0, s, k)
    shift = _shift(c, s)
    val, err, ok = adaptive_quad(lambda t: tg.lambda_t(target, x, s, t) - shift, 0.0, 1.0, quad_tol)
    if not ok:
        log.warning("psi quadrature did not reach tolerance %.1e (estimate %.1e)", quad_tol, err)
    return PsiRecord(float(val), float(err), s, k, ok)


def psi_value(target: Target, x, g, quad_tol: float = 1e-9, c=None) -> float:
    return psi(target, x, g, quad_tol, c).value


def psi_cocycle_check(target: Target, x, g, h, quad_tol: float = 1e-9, c=None) -> float:
    gx = tg.act(target, g, x)
    lhs = psi_value(target, x, g, quad_tol, c) + psi_value(target, gx, h, quad_tol, c)
    return abs(lhs - psi_value(target, x, np.asarray(h) @ np.asarray(g), quad_tol, c))


def psi_along(target: Target, x, s, ts, quad_tol: float = 1e-10, c=None) -> np.ndarray:
    """``Psi(x, exp(i t s))`` for each t (shares one quadrature per interval)."""
    shift = _shift(c, s)
    out, acc, prev = [], 0.0, 0.0
    for t in sorted(ts):
        if t != prev:
            acc += adaptive_quad(lambda u: tg.lambda_t(target, x, s, u) - shift, prev, t, quad_tol)[0]
            prev = t
        out.append(acc)
    order = np.argsort(np.argsort(ts))
    return np.array(out)[order]


# -- minimization --------------------------------------------------------------


def canonical_center(target: Target, x: np.ndarray) -> np.ndarray:
    """Component of mu(x) along directions acting trivially; constant on G-orbits."""
    m = tg.moment_full(target, x)
    return sum((pairing(m, e).real * e for e in tg.ineffective_basis(target)), np.zeros_like(m))


def _check_center(target: Target, c) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if not target.group.is_central(c):
        raise ValueError("c does not commute with the acting algebra")
    return c


def _grad(target: Target, y, c, eff) -> np.ndarray:
    """Hermitian gradient ``i (mu(y) - c)`` restricted to effective directions."""
    diff = tg.moment_full(target, y) - c
    out = np.zeros_like(diff)
    for b in eff:
        out += pairing(diff, b).real * b
    return 1j * out


def _psi_step(target: Target, y, h: np.ndarray, c) -> float:
    """Psi(y, exp(h)) by fixed Gauss-Legendre; h is small inside the descent."""
    s = -1j * h
    shift = _shift(c, s)
    w, v = herm_eig(h)
    yf = tg.frame(target, y)

    def lam(t):
        et = (v * np.exp(t * w)) @ v.conj().T
        return tg.moment_pair(target, tg.act(target, et, y), s) - shift

    return _gauss(lam, 0.0, 1.0)


def _ineffective_mismatch(target: Target, x, c):
    diff = tg.moment_full(target, x) - c
    worst, direction = 0.0, None
    for e in tg.ineffective_basis(target):
        v = pairing(diff, e).real
        if abs(v) > worst:
            worst, direction = abs(v), -np.sign(v) * e
    return worst, direction


class _GroupTracker:
    """Accumulated group element; switches to extended precision once long.

    Past a modest length the condition number of g exceeds what a float SVD
    resolves, while the divergence budget is stated in the same length units.
    """

    SWITCH = 8.0

    def __init__(self, g: np.ndarray):
        self.g = g
        self.mp = None

    def left_multiply(self, e: np.ndarray):
        if self.mp is not None:
            with mpmath.workdps(_MP_DPS):
                self.mp = mpmath.matrix(e.tolist()) * self.mp
            self.g = _mp_to_np(self.mp)
            return
        self.g = e @ self.g
        if length_log(self.g) > self.SWITCH:
            with mpmath.workdps(_MP_DPS):
                self.mp = mpmath.matrix(self.g.tolist())

    def hermitian_log(self) -> np.ndarray:
        if self.mp is None:
            return cartan_decompose(self.g)[1]
        with mpmath.workdps(_MP_DPS):
            w, v = mpmath.eighe(self.mp.H * self.mp)
            logs = [mpmath.log(x) / 2 for x in w]
            h = v * mpmath.diag(logs) * v.H
        return _mp_to_np(h)

    def length(self) -> float:
        if self.mp is None:
            return length_log(self.g)
        return float(np.linalg.norm(self.hermitian_log()))


_MP_DPS = 120


def _mp_to_np(a) -> np.ndarray:
    return np.array([[complex(a[i, j]) for j in range(a.cols)] for i in range(a.rows)])


def minimize_psi(target: Target, x, c=None, opts: FlowOptions = FlowOptions(), g0=None) -> FlowResult:
    """Descend Psi^{mu-c} along the moment-map flow, accumulating the group element."""
    n = target.dim
    c = canonical_center(target, x) if c is None else _check_center(target, c)
    g = np.eye(n, dtype=complex) if g0 is None else np.asarray(g0, complex)
    y = tg.act(target, g, x)
    eff = tg.effective_basis(target)
    gap, direction = _ineffective_mismatch(target, y, c)
    if gap > opts.tol:
        # a trivially acting direction pairs nontrivially with mu - c: Psi is unbounded below
        return FlowResult("DivergenceWitness", g, y, gap, witness=direction,
                          diagnostics=["central element incompatible with the trivially acting directions"])
    alpha, total_psi, trace = opts.step, 0.0, []
    track = _GroupTracker(g)
    kernel_dim = _kernel_dim(target, y, eff)
    for it in range(opts.max_iter):
        grad = _grad(target, y, c, eff)
        res = float(np.linalg.norm(grad))
        ll = track.length()
        trace.append((it, res, total_psi, ll))
        if res < opts.tol and _newton_length(target, y, c, eff, kernel_dim) <= opts.newton_tol:
            out = FlowResult("Converged", track.g, y, res, psi_value=total_psi, iterations=it, trace=trace)
            out.diagnostics += _simplicity(target, y, eff)
            return out
        while True:
            step = -alpha * grad
            dpsi = _psi_step(target, y, step, c)
            if dpsi <= -opts.armijo * alpha * res**2 or alpha < 1e-12:
                break
            alpha /= 2
        e = herm_fun(step, np.exp)
        track.left_multiply(e)
        y = tg.act(target, e, y)
        total_psi += dpsi
        # curvature of Psi along the accepted step sets the next length (1/kappa is exact on quadratics)
        kappa = 2 * (dpsi + alpha * res**2) / (alpha**2 * res**2) if res > 0 else 0.0
        nxt = 1 / kappa if kappa > 0 else 2 * alpha
        alpha = min(nxt, 2 * alpha, MAX_STEP / max(res, 1e-300))
        if dpsi < 0 and track.length() > opts.budget:
            hlog = track.hermitian_log()
            witness = -1j * hlog / norm(hlog)
            res = float(np.linalg.norm(_grad(target, y, c, eff)))
            trace.append((it + 1, res, total_psi, track.length()))
            return FlowResult("DivergenceWitness", track.g, y, res, witness=witness,
                              psi_value=total_psi, iterations=it + 1, trace=trace)
    res = float(np.linalg.norm(_grad(target, y, c, eff)))
    return FlowResult("MaxIter", track.g, y, res, psi_value=total_psi, iterations=opts.max_iter,
                      trace=trace, diagnostics=[f"max_iter reached with residual {res:.3e}"])


def _hessian(target: Target, y, eff) -> np.ndarray:
    """Hessian of Psi at y in the effective basis, polarized from grad_norm_sq."""
    n = len(eff)
    q = np.empty((n, n))
    for a in range(n):
        q[a, a] = tg.grad_norm_sq(target, y, eff[a])
        for b in range(a + 1, n):
            q[a, b] = q[b, a] = (tg.grad_norm_sq(target, y, eff[a] + eff[b])
                                 - tg.grad_norm_sq(target, y, eff[a] - eff[b])) / 4
    return q


def _kernel_dim(target: Target, y, eff) -> int:
    """Dimension of the infinitesimal stabilizer; constant along the orbit."""
    if not eff:
        return 0
    w = np.linalg.eigvalsh(_hessian(target, y, eff))
    return int(np.sum(w <= 1e-8 * max(1.0, w.max())))


def _newton_length(target: Target, y, c, eff, kernel_dim: int) -> float:
    """Length of the Newton step off the stabilizer.

    A small residual alone does not separate a nearby zero from an orbit that only
    approaches one at infinity: there the Hessian degenerates with the residual and
    the Newton step stays of order one.
    """
    if not eff:
        return 0.0
    diff = tg.moment_full(target, y) - c
    r = np.array([pairing(diff, b).real for b in eff])
    w, v = np.linalg.eigh(_hessian(target, y, eff))
    coef = (v.T @ r)[kernel_dim:]
    with np.errstate(divide="ignore"):
        return float(np.linalg.norm(coef / w[kernel_dim:]))


def _simplicity(target: Target, y, eff) -> list:
    """Report a nontrivial infinitesimal stabilizer at a converged point."""
    if not eff:
        return []
    cols = []
    for b in eff:
        h = 1j * b
        if isinstance(target, Linear):
            v = h @ y
        else:
            m = target.dim
            v = np.concatenate([((np.eye(m) - p) @ h @ p).ravel() for p in tg.projectors(target, y)])
        cols.append(np.concatenate([v.real, v.imag]))
    sv = np.linalg.svd(np.array(cols).T, compute_uv=False)
    if sv.min() < 1e-8 * max(1.0, sv.max()):
        return ["non-simple stabilizer detected"]
    return []


# -- stability -----------------------------------------------------------------


def _torus_generators(target: Target, x) -> list[np.ndarray]:
    """Commuting Hermitian generators adapted to x, all lying in i * (acting algebra)."""
    grp = target.group
    if grp.kind == "torus":
        return [1j * b for b in grp.basis()]
    _, v = herm_eig(1j * tg.moment_full(target, x))
    gens = [np.outer(v[:, j], v[:, j].conj()) for j in range(grp.m)]
    if grp.kind == "SU":
        gens = [gens[j] - gens[j + 1] for j in range(grp.m - 1)]
    return gens


def _weight_rows(target: Target, x, basis: np.ndarray, gens_diag: np.ndarray):
    """Weights (as linear forms in theta) of the support of x in ``basis``."""
    out = []
    if isinstance(target, Linear):
        coef = np.abs(basis.conj().T @ (x / max(np.linalg.norm(x), 1e-300)))
        return [[gens_diag[:, i] for i in np.nonzero(coef > tg.SUPPORT_TOL)[0]]]
    y = basis.conj().T @ tg.frame(target, x)
    m = target.dim
    for r in target.ranks:
        rows = []
        for sub in itertools.combinations(range(m), r):
            if abs(np.linalg.det(y[list(sub), :r])) > tg.SUPPORT_TOL:
                rows.append(gens_diag[:, list(sub)].sum(axis=1))
        out.append(rows)
    return out


def _screen(target: Target, x, c) -> Optional[np.ndarray]:
    """Search the adapted torus for a direction with weight^{mu-c} <= 0."""
    gens = _torus_generators(target, x)
    basis = herm_eig(sum((i + 1) * g for i, g in enumerate(gens)))[1]
    gens_diag = np.array([np.real(np.diag(basis.conj().T @ g @ basis)) for g in gens])
    q = len(gens)
    dead = tg.ineffective_basis(target)
    aeq = [[pairing(-1j * g, e).real for g in gens] for e in dead]
    cvec = np.array([pairing(c, -1j * g).real for g in gens])
    comps = _weight_rows(target, x, basis, gens_diag)
    linear = isinstance(target, Linear)
    taus = [1.0] if linear else list(target.taus)
    nu = 0 if linear else len(comps)
    a_ub, b_ub = [], []
    for k, rows in enumerate(comps):
        for row in rows:
            line = np.zeros(q + nu)
            line[:q] = row
            if not linear:
                line[q + k] = -1.0
            a_ub.append(line)
            b_ub.append(0.0)
    obj = np.concatenate([-cvec, np.array(taus[:nu])])
    bounds = [(-1, 1)] * q + [(None, None)] * nu
    a_eq = [np.concatenate([r, np.zeros(nu)]) for r in aeq] or None
    b_eq = [0.0] * len(aeq) or None
    kw = dict(A_ub=np.array(a_ub) if a_ub else None, b_ub=b_ub or None, A_eq=a_eq, b_eq=b_eq,
              bounds=bounds, method="highs")
    candidates = []
    res = linprog(obj, **kw)
    if res.status == 0 and res.fun < -1e-9:
        candidates.append(res.x[:q])
    else:
        # the sublevel cone {weight <= 0} may still contain a nonzero direction
        a_ub2 = list(a_ub) + [obj]
        b_ub2 = list(b_ub) + [0.0]
        for j in range(q):
            for sgn in (1.0, -1.0):
                d = np.zeros(q + nu)
                d[j] = -sgn
                r2 = linprog(d, A_ub=np.array(a_ub2), b_ub=b_ub2, A_eq=a_eq, b_eq=b_eq,
                             bounds=bounds, method="highs")
                if r2.status == 0 and -r2.fun > 1e-7:
                    candidates.append(r2.x[:q])
                    break
            if candidates:
                break
    for theta in candidates:
        h = sum(t * g for t, g in zip(theta, gens))
        s = -1j * h / norm(h)
        if tg.maximal_weight(target, x, s, c).value <= 1e-9:
            return s
    return None


def stability_test(target: Target, x, c=None, opts: FlowOptions = FlowOptions()) -> StabilityVerdict:
    c = canonical_center(target, x) if c is None else _check_center(target, c)
    gap, direction = _ineffective_mismatch(target, x, c)
    if gap > opts.tol:
        return StabilityVerdict("Unstable", s=direction, weight=tg.maximal_weight(target, x, direction, c),
                                diagnostics={"stage": "central"})
    s = _screen(target, x, c)
    if s is not None:
        return StabilityVerdict("Unstable", s=s, weight=tg.maximal_weight(target, x, s, c),
                                diagnostics={"stage": "screen"})
    result = minimize_psi(target, x, c, opts)
    if result.status == "Converged":
        return StabilityVerdict("Stable", minimizer=result, diagnostics={"stage": "flow",
                                                                       "notes": result.diagnostics})
    if result.status == "DivergenceWitness" and result.witness is not None:
        w = tg.maximal_weight(target, x, result.witness, c)
        if w.value <= 1e-9:
            return StabilityVerdict("Unstable", minimizer=result, s=result.witness, weight=w,
                                    diagnostics={"stage": "flow"})
    return StabilityVerdict("Inconclusive", minimizer=result,
                            diagnostics={"stage": "flow", "status": result.status,
                                         "residual": result.residual})


# -- K-orbit distance ----------------------------------------------------------


def chordal(target: Target, x, y) -> float:
    if isinstance(target, Linear):
        return float(np.linalg.norm(x - y))
    fx, fy = tg.frame(target, x), tg.frame(target, y)
    total = 0.0
    for r in target.ranks:
        ov = abs(np.linalg.det(fx[:, :r].conj().T @ fy[:, :r])) ** 2
        total += max(0.0, 1.0 - ov)
    return float(np.sqrt(total))


def korbit_distance(target: Target, x, y) -> float:
    """Distance between the compact-group orbits through x and y."""
    grp = target.group
    if grp.kind in ("U", "SU"):
        if isinstance(target, Linear):
            if grp.kind == "U" or grp.m >= 2:
                return abs(float(np.linalg.norm(x) - np.linalg.norm(y)))
        elif grp.kind == "U" or grp.m >= 2:
            return 0.0  # unitary groups act transitively on flag manifolds
    w = np.array([np.real(-1j * np.diag(b)) for b in grp.basis()])  # q x m phases
    full_torus = grp.kind == "torus" and np.linalg.matrix_rank(w) == grp.m
    if full_torus and isinstance(target, Projective):
        ov = float(np.sum(np.abs(x) * np.abs(y)))
        return float(np.sqrt(max(0.0, 1.0 - ov**2)))
    if full_torus and isinstance(target, Linear):
        return float(np.linalg.norm(np.abs(x) - np.abs(y)))

    def dist(theta):
        ph = np.exp(1j * (w.T @ theta))
        return chordal(target, ph[:, None] * tg.frame(target, x) if not isinstance(target, (Linear, Projective))
                       else ph * x, y) ** 2

    best = dist(np.zeros(len(w)))
    starts = [np.zeros(len(w))] + [np.full(len(w), a) * np.arange(1, len(w) + 1) for a in np.linspace(0.5, 6.0, 12)]
    for th0 in starts:
        res = minimize(dist, th0, method="BFGS", options={"gtol": 1e-14})
        best = min(best, res.fun)
    return float(np.sqrt(max(best, 0.0)))
