"""Abelian vortex equations on a periodic square lattice.

Conventions (U(1), flat torus of side L, N sites per side, h = L/N):

* covariant derivative ``D = d - iA``; curvature scalar ``B = dA_y/dx - dA_x/dy``
  so that ``Lambda F_A = -i B`` and the total flux is ``2 pi d``;
* moment map of the fibre C: ``mu(phi) = |phi|^2 / 2`` (coefficient of -i);
* central element c is a real scalar (coefficient of -i as well).

The vortex equations read ``dbar_A phi = 0`` and ``B + |phi|^2/2 = c``.  The
degree lives in a fixed Landau-gauge background whose link phases carry the
transition function across x = L; a periodic perturbation ``a`` is added on
top, so the discrete flux is exactly ``2 pi d`` for every state.

Integer degrees of the filtration layer convert to this module through
``FLUX_PER_DEGREE = 2 pi``: a zero section solves the equations exactly when
``c = FLUX_PER_DEGREE * d / area``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

FLUX_PER_DEGREE = 2 * np.pi


@dataclass(frozen=True)
class TorusLattice:
    N: int
    L: float = 1.0

    def __post_init__(self):
        if self.N < 8:
            raise ValueError("need N >= 8")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def area(self) -> float:
        return self.L**2

    def coords(self):
        i = np.arange(self.N) * self.h
        return np.meshgrid(i, i, indexing="ij")


@dataclass(frozen=True)
class U1Connection:
    lattice: TorusLattice
    d: int
    ax: np.ndarray
    ay: np.ndarray

    @classmethod
    def background(cls, lattice: TorusLattice, d: int) -> "U1Connection":
        z = np.zeros((lattice.N, lattice.N))
        return cls(lattice, d, z, z.copy())

    @property
    def b0(self) -> float:
        return FLUX_PER_DEGREE * self.d / self.lattice.area

    def link_phases(self):
        """Total link phases (background + h * a) for x- and y-links."""
        lat = self.lattice
        n, h = lat.N, lat.h
        i = np.arange(n)[:, None] * np.ones((1, n))
        th_y = self.b0 * h * h * i
        th_x = np.zeros((n, n))
        th_x[-1, :] = -FLUX_PER_DEGREE * self.d * np.arange(n) / n
        return th_x + h * self.ax, th_y + h * self.ay


@dataclass
class Section:
    phi: np.ndarray


@dataclass(frozen=True)
class YmhBreakdown:
    total: float
    curvature_term: float
    kinetic_term: float
    potential_term: float
    residual_term: float
    dbar_term: float
    topological_term: float


def _xp(f):  # f(i+1, j)
    return np.roll(f, -1, axis=0)


def _yp(f):  # f(i, j+1)
    return np.roll(f, -1, axis=1)


def _xm(f):
    return np.roll(f, 1, axis=0)


def _ym(f):
    return np.roll(f, 1, axis=1)


def curvature(conn: U1Connection) -> np.ndarray:
    """Plaquette field ``B``: background constant plus the discrete curl of a."""
    h = conn.lattice.h
    curl = (conn.ax + _xp(conn.ay) - _yp(conn.ax) - conn.ay) / h
    return conn.b0 + curl


def total_flux(conn: U1Connection) -> float:
    return float(curvature(conn).sum() * conn.lattice.h**2)


def d_A(conn: U1Connection, phi: np.ndarray):
    """Forward covariant differences ``(D_x phi, D_y phi)`` at each site."""
    h = conn.lattice.h
    th_x, th_y = conn.link_phases()
    return (np.exp(-1j * th_x) * _xp(phi) - phi) / h, (np.exp(-1j * th_y) * _yp(phi) - phi) / h


def split(u: np.ndarray, v: np.ndarray):
    """Complex-linear and antilinear parts; returns (|del|^2, |dbar|^2, dbar) densities.

    ``dbar = (u + i v)/2`` is the z-bar component; the pointwise norms satisfy
    ``|del|^2 + |dbar|^2 = |u|^2 + |v|^2`` exactly.
    """
    plus, minus = u + 1j * v, u - 1j * v
    return np.abs(minus) ** 2 / 2, np.abs(plus) ** 2 / 2, plus / 2


def moment(phi: np.ndarray) -> np.ndarray:
    return np.abs(phi) ** 2 / 2


def plaquette_moment(phi: np.ndarray) -> np.ndarray:
    """Moment map averaged over the four corners of plaquette (i, j)."""
    mu = moment(phi)
    return (mu + _xp(mu) + _yp(mu) + _xp(_yp(mu))) / 4


def dbar_density(conn: U1Connection, phi: np.ndarray) -> np.ndarray:
    """``|dbar phi|^2`` averaged over the four forward/backward pairings of (D_x, D_y).

    A single one-sided pairing leaves an O(h) defect in the Weitzenbock
    identity; the average is centred on the plaquette and the defect is O(h^2).
    The summed ``|del|^2 + |dbar|^2`` still equals the kinetic term exactly.
    """
    u, v = d_A(conn, phi)
    th_x, th_y = conn.link_phases()
    # backward differences at site p, expressed in the frame of p
    ub = _xm(np.exp(1j * th_x) * u)
    vb = _ym(np.exp(1j * th_y) * v)
    acc = np.zeros(phi.shape)
    for a in (u, ub):
        for b in (v, vb):
            acc += split(a, b)[1]
    return acc / 4


def ymh(conn: U1Connection, phi: np.ndarray, c: float) -> YmhBreakdown:
    lat = conn.lattice
    w = lat.h**2
    b = curvature(conn)
    u, v = d_A(conn, phi)
    mu = moment(phi)
    curv = float(np.sum(b**2) * w)
    kin = float(np.sum(np.abs(u) ** 2 + np.abs(v) ** 2) * w)
    pot = float(np.sum((c - mu) ** 2) * w)
    resid = float(np.sum((b + plaquette_moment(phi) - c) ** 2) * w)
    dbar = float(np.sum(dbar_density(conn, phi)) * w)
    topo = topological_term(conn, c)
    return YmhBreakdown(curv + kin + pot, curv, kin, pot, resid, dbar, topo)


def topological_term(conn: U1Connection, c: float) -> float:
    """``2 int <Lambda F, c> + 2 int Phi^*[omega]``; the second vanishes for a linear fibre.

    Every section of a line bundle is homotopic to the zero section, where
    both derivative terms and the moment map vanish, so the class term is 0.
    """
    return 2.0 * c * FLUX_PER_DEGREE * conn.d


def decomposition_check(conn: U1Connection, phi: np.ndarray, c: float) -> float:
    br = ymh(conn, phi, c)
    rhs = br.residual_term + 2 * br.dbar_term + br.topological_term
    return abs(br.total - rhs)


def bogomolov_lattice(conn: U1Connection, phi: np.ndarray, c: float) -> float:
    """Lattice value of ``int <Lambda F, c> + int Phi^*[omega]`` (half the topological term)."""
    h2 = conn.lattice.h**2
    return float(c * curvature(conn).sum() * h2)


def gauge_transform(conn: U1Connection, phi: np.ndarray, chi: np.ndarray):
    h = conn.lattice.h
    ax = conn.ax + (_xp(chi) - chi) / h
    ay = conn.ay + (_yp(chi) - chi) / h
    return replace(conn, ax=ax, ay=ay), np.exp(1j * chi) * phi


# -- smooth test data ---------------------------------------------------------


def smooth_section(lattice: TorusLattice, d: int, amp: float = 1.0, width: float = 0.18,
                   x0: float = 0.5, images: int = 6) -> np.ndarray:
    """Sampled smooth section with the degree-d transition ``phi(x+L, y) = e^{i B0 L y} phi``."""
    L = lattice.L
    x, y = lattice.coords()
    b0 = FLUX_PER_DEGREE * d / lattice.area
    out = np.zeros_like(x, dtype=complex)
    for n in range(-images, images + 1):
        xs = x - n * L
        g = np.exp(-((xs - x0 * L) ** 2) / (2 * (width * L) ** 2)) * (1 + 0.3 * np.cos(2 * np.pi * y / L)
                                                                      + 0.2j * np.sin(2 * np.pi * y / L))
        out += np.exp(1j * b0 * n * L * y) * g
    return amp * out


def landau_section(lattice: TorusLattice, d: int, k: int = 0, images: int = 8) -> np.ndarray:
    """Continuum holomorphic section of degree d >= 1 sampled on the sites.

    ``sum_n exp(-B0 (x - x0 - nL)^2 / 2 + i B0 (nL + x0) y)`` with ``x0 = kL/d``;
    every term satisfies ``(D_x + i D_y) phi = 0`` in the Landau gauge.
    """
    if d < 1:
        raise ValueError("holomorphic sections need d >= 1")
    L = lattice.L
    x, y = lattice.coords()
    b0 = FLUX_PER_DEGREE * d / lattice.area
    x0 = k * L / d
    out = np.zeros_like(x, dtype=complex)
    for n in range(-images, images + 1):
        out += np.exp(-b0 * (x - x0 - n * L) ** 2 / 2 + 1j * b0 * (n * L + x0) * y)
    return out


def smooth_perturbation(lattice: TorusLattice, amp: float = 0.7):
    """Periodic link fields sampled at link midpoints."""
    L, h = lattice.L, lattice.h
    x, y = lattice.coords()
    k = 2 * np.pi / L
    ax = amp * (np.sin(k * y) + 0.5 * np.cos(k * (x + h / 2) + 2 * k * y))
    ay = amp * (np.cos(k * x) - 0.4 * np.sin(k * x + k * (y + h / 2)))
    return ax, ay


def smooth_state(lattice: TorusLattice, d: int, amp: float = 1.0):
    ax, ay = smooth_perturbation(lattice)
    return U1Connection(lattice, d, ax, ay), smooth_section(lattice, d, amp)


# -- solver -------------------------------------------------------------------


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-7
    max_iter: int = 5000
    seed: int = 0
    polish: bool = True
    zero_section: bool = False
    init_amp: Optional[float] = None


@dataclass
class SolveResult:
    status: str  # Solution | NoSolution | MaxIter
    conn: Optional[U1Connection] = None
    phi: Optional[np.ndarray] = None
    residuals: dict = field(default_factory=dict)
    reason: str = ""
    bound: Optional[float] = None
    trace: list = field(default_factory=list)


def equation_residuals(conn: U1Connection, phi: np.ndarray, c: float) -> dict:
    b = curvature(conn)
    u, v = d_A(conn, phi)
    _, _, dbar = split(u, v)
    return {
        "moment": float(np.abs(b + moment(phi) - c).max()),
        "dbar": float(np.abs(dbar).max()),
    }


def _objective(conn0: U1Connection, z: np.ndarray, c: float):
    """Non-topological part ``||B + mu - c||^2 + 2 ||dbar phi||^2`` and its gradient."""
    lat = conn0.lattice
    n, h = lat.N, lat.h
    ax, ay = z[: n * n].reshape(n, n), z[n * n: 2 * n * n].reshape(n, n)
    phi = (z[2 * n * n: 3 * n * n] + 1j * z[3 * n * n:]).reshape(n, n)
    conn = replace(conn0, ax=ax, ay=ay)
    th_x, th_y = conn.link_phases()
    ex, ey = np.exp(-1j * th_x), np.exp(-1j * th_y)
    tx, ty = ex * _xp(phi), ey * _yp(phi)
    w = (tx - phi) / h + 1j * (ty - phi) / h  # = u + i v = 2 dbar
    r = curvature(conn) + moment(phi) - c
    h2 = h * h
    f = h2 * (np.sum(r**2) + np.sum(np.abs(w) ** 2))
    g_ax = 2 * h * (r - _ym(r)) + 2 * h2 * np.real(np.conj(w) * (-1j * tx))
    g_ay = 2 * h * (_xm(r) - r) + 2 * h2 * np.real(np.conj(w) * ty)
    g_phi = 2 * h2 * r * phi
    g_phi += 2 * h * (-(1 - 1j) * w + _xm(np.conj(ex) * w) - 1j * _ym(np.conj(ey) * w))
    grad = np.concatenate([g_ax.ravel(), g_ay.ravel(), g_phi.real.ravel(), g_phi.imag.ravel()])
    return float(f), grad


def _pack(conn: U1Connection, phi: np.ndarray) -> np.ndarray:
    return np.concatenate([conn.ax.ravel(), conn.ay.ravel(), phi.real.ravel(), phi.imag.ravel()])


def _unpack(conn0: U1Connection, z: np.ndarray):
    n = conn0.lattice.N
    ax, ay = z[: n * n].reshape(n, n), z[n * n: 2 * n * n].reshape(n, n)
    phi = (z[2 * n * n: 3 * n * n] + 1j * z[3 * n * n:]).reshape(n, n)
    return replace(conn0, ax=ax.copy(), ay=ay.copy()), phi


def mean_constraint(lattice: TorusLattice, d: int, c: float):
    """``c * area - 2 pi d = int |phi|^2/2 >= 0``; returns the slack."""
    return c * lattice.area - FLUX_PER_DEGREE * d


def bb_descent(fun, z0: np.ndarray, max_iter: int, monitor=None, every: int = 25):
    """Gradient descent with Barzilai-Borwein steps and nonmonotone backtracking.

    ``monitor(it, z, f)`` runs every ``every`` iterations; returning True stops.
    """
    z = z0.copy()
    f, g = fun(z)
    step = 1e-3 / max(1.0, np.linalg.norm(g))
    history = [f]
    it = 0
    for it in range(max_iter):
        if monitor is not None and it % every == 0 and monitor(it, z, f):
            break
        ref = max(history[-10:])
        while True:
            zn = z - step * g
            fn, gn = fun(zn)
            if fn <= ref - 1e-4 * step * np.dot(g, g) or step < 1e-16:
                break
            step /= 2
        s, yv = zn - z, gn - g
        sy = float(np.dot(s, yv))
        step = float(np.dot(s, s)) / sy if sy > 0 else step * 2
        z, f, g = zn, fn, gn
        history.append(f)
    return z, f, it


def solve(lattice: TorusLattice, d: int, c: float, opts: SolveOptions = SolveOptions()) -> SolveResult:
    slack = mean_constraint(lattice, d, c)
    bound = FLUX_PER_DEGREE * d / lattice.area
    conn0 = U1Connection.background(lattice, d)
    zero = np.zeros((lattice.N, lattice.N), complex)
    balanced = abs(slack) <= 1e-12 * max(1.0, abs(c) * lattice.area)
    if opts.zero_section or balanced:
        if balanced:
            return SolveResult("Solution", conn0, zero, equation_residuals(conn0, zero, c), bound=bound)
        return SolveResult("NoSolution", reason="zero section requires c = 2 pi d / area", bound=bound)
    if slack < 0:
        return SolveResult("NoSolution", reason="degree bound", bound=bound)
    if d < 0:
        return SolveResult("NoSolution", reason="negative degree admits no nonzero holomorphic section",
                           bound=bound)
    if d == 0:
        const = np.full((lattice.N, lattice.N), np.sqrt(2 * c), complex)
        return SolveResult("Solution", conn0, const, equation_residuals(conn0, const, c), bound=bound)

    rng = np.random.default_rng(opts.seed)
    amp = opts.init_amp if opts.init_amp is not None else np.sqrt(2 * slack / lattice.area)
    phi0 = smooth_section(lattice, d, 1.0, x0=rng.uniform(0.3, 0.7))
    phi0 *= amp / np.sqrt(np.mean(np.abs(phi0) ** 2))
    fun = lambda z: _objective(conn0, z, c)  # noqa: E731
    trace: list = []

    def monitor(it, z, f):
        cn, ph = _unpack(conn0, z)
        r = equation_residuals(cn, ph, c)
        trace.append({"iter": it, "objective": f, **r, "flux": total_flux(cn)})
        return max(r.values()) < opts.tol

    z, f, it = bb_descent(fun, _pack(conn0, phi0), opts.max_iter, monitor)
    if opts.polish and not monitor(it, z, f):
        # quasi-Newton finish; the BB phase has already left the nonlinear regime
        from scipy.optimize import minimize

        out = minimize(fun, z, jac=True, method="L-BFGS-B",
                       options={"maxiter": opts.max_iter, "maxcor": 30, "ftol": 0.0, "gtol": 1e-14})
        z, f, it = out.x, float(out.fun), it + int(out.nit)
        monitor(it, z, f)
    conn, phi = _unpack(conn0, z)
    res = equation_residuals(conn, phi, c)
    res["objective"] = f
    res["iterations"] = it
    if max(res["moment"], res["dbar"]) < opts.tol:
        return SolveResult("Solution", conn, phi, res, bound=bound, trace=trace)
    return SolveResult("MaxIter", conn, phi, res, bound=bound, trace=trace,
                       reason="objective stalled above tolerance (lattice too coarse for the vortex core?)")


# -- serialization --------------------------------------------------------------


def save_state(path, conn: U1Connection, phi: np.ndarray):
    """Flat float64 binary (a_x, a_y, re phi, im phi; row-major) plus a JSON header."""
    path = Path(path)
    lat = conn.lattice
    header = {"N": lat.N, "L": lat.L, "d": conn.d, "dtype": "float64",
              "field_order": ["a_x", "a_y", "re_phi", "im_phi"], "layout": "row-major"}
    path.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True))
    _pack(conn, phi).astype("<f8").tofile(path.with_suffix(".bin"))


def load_state(path):
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    lat = TorusLattice(header["N"], header["L"])
    z = np.fromfile(path.with_suffix(".bin"), dtype="<f8")
    return _unpack(U1Connection.background(lat, header["d"]), z)
