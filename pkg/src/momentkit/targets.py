"""Kähler targets with a unitary action: points, moment maps, flows, weights.

Sign and scale convention
-------------------------
Write ``H = i s`` for ``s`` skew-Hermitian (so H is Hermitian).  The flow of
``s`` is ``x -> exp(t H) x`` and the moment pairings are

* linear space:            ``<mu(x), s> = x^* H x / 2``
* projective / Grassmann:  ``<mu(x), s> = tau * Tr(P H)``   (P = orthogonal projector)
* flag:                    ``sum_k tau_k Tr(P_k H)``

With these choices ``lambda_t`` is nondecreasing along the flow and its limit
equals the closed-form maximal weights (``max`` of the eigenvalues of H on the
support for projective space, the intersection-dimension formula for
Grassmannians).  As matrices, the moment element is ``-i tau P``
(resp. ``-(i/2) x x^*``) projected onto the acting algebra.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .liecore import (
    AnchorRep,
    DimensionError,
    ParityError,
    eigen_flag,
    herm_eig,
    herm_fun,
    is_skew,
    pairing,
)

SUPPORT_TOL = 1e-10


@dataclass(frozen=True)
class Linear:
    group: AnchorRep

    @property
    def dim(self) -> int:
        return self.group.m


@dataclass(frozen=True)
class Projective:
    group: AnchorRep
    tau: float = 1.0  # experimental: the projective case has no weight of its own

    @property
    def dim(self) -> int:
        return self.group.m

    @property
    def ranks(self) -> tuple:
        return (1,)

    @property
    def taus(self) -> tuple:
        return (float(self.tau),)


@dataclass(frozen=True)
class Grassmann:
    k: int
    group: AnchorRep
    tau: float = 1.0

    def __post_init__(self):
        if not 0 < self.k < self.group.m:
            raise DimensionError("need 0 < k < R")
        if self.tau <= 0:
            raise ValueError("tau must be positive")

    @property
    def dim(self) -> int:
        return self.group.m

    @property
    def ranks(self) -> tuple:
        return (self.k,)

    @property
    def taus(self) -> tuple:
        return (float(self.tau),)


@dataclass(frozen=True)
class Flag:
    ranks: tuple
    group: AnchorRep
    taus: tuple = field(default=())

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        taus = tuple(float(t) for t in self.taus) or (1.0,) * len(ranks)
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "taus", taus)
        if not ranks or any(a >= b for a, b in zip(ranks, ranks[1:])):
            raise DimensionError("flag ranks must be strictly increasing")
        if ranks[0] <= 0 or ranks[-1] >= self.group.m:
            raise DimensionError("flag ranks must lie strictly between 0 and R")
        if len(taus) != len(ranks) or min(taus) <= 0:
            raise ValueError("one positive tau per flag step is required")

    @property
    def dim(self) -> int:
        return self.group.m


Target = Union[Linear, Projective, Grassmann, Flag]
PlaneTarget = (Projective, Grassmann, Flag)


@dataclass(frozen=True)
class ExtendedWeight:
    """A maximal weight: finite real or +inf (``status`` says which)."""

    value: float
    error: Optional[float] = None
    status: str = "finite"  # finite | infinite | inconclusive

    @classmethod
    def infinite(cls) -> "ExtendedWeight":
        return cls(float("inf"), None, "infinite")

    @property
    def is_infinite(self) -> bool:
        return self.status == "infinite"


# -- points ------------------------------------------------------------------


def make_point(target: Target, data) -> np.ndarray:
    """Normalize raw data into a valid point of ``target``."""
    a = np.asarray(data, dtype=complex)
    n = target.dim
    if isinstance(target, Linear):
        if a.shape != (n,):
            raise DimensionError(f"expected a vector of length {n}")
        return a
    if isinstance(target, Projective):
        a = a.reshape(-1)
        if a.shape != (n,):
            raise DimensionError(f"expected a vector of length {n}")
        nrm = np.linalg.norm(a)
        if nrm <= 1e-300 or not np.isfinite(nrm):
            raise ValueError("homogeneous vector is zero")
        return a / nrm
    top = target.ranks[-1]
    if a.ndim == 1:
        a = a.reshape(n, -1)
    if a.shape != (n, top):
        raise DimensionError(f"expected an {n} x {top} frame")
    q, r = np.linalg.qr(a)
    if np.abs(np.diag(r)).min() <= 1e-12 * max(1.0, np.abs(r).max()):
        raise ValueError("frame columns are linearly dependent")
    return q


def frame(target: Target, x: np.ndarray) -> np.ndarray:
    return x.reshape(-1, 1) if isinstance(target, Projective) else x


def _unframe(target: Target, y: np.ndarray) -> np.ndarray:
    return y[:, 0] if isinstance(target, Projective) else y


def projectors(target: Target, x: np.ndarray) -> list[np.ndarray]:
    y = frame(target, x)
    return [y[:, :r] @ y[:, :r].conj().T for r in target.ranks]


def random_point(target: Target, rng: np.random.Generator) -> np.ndarray:
    n = target.dim
    if isinstance(target, (Linear, Projective)):
        return make_point(target, rng.normal(size=n) + 1j * rng.normal(size=n))
    top = target.ranks[-1]
    return make_point(target, rng.normal(size=(n, top)) + 1j * rng.normal(size=(n, top)))


# -- action and moment map ---------------------------------------------------


def act(target: Target, g, x: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.shape != (target.dim, target.dim):
        raise DimensionError("group element does not match the target dimension")
    if isinstance(target, Linear):
        return g @ x
    y = g @ frame(target, x)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError("action overflowed")
    if isinstance(target, Projective):
        nrm = np.linalg.norm(y)
        if nrm <= 1e-300:
            raise FloatingPointError("homogeneous vector underflowed to zero")
        return (y / nrm)[:, 0]
    q, _ = np.linalg.qr(y)  # QR keeps the nested spans of leading columns
    return q


def _hermitian_of(target: Target, s) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    if s.shape != (target.dim, target.dim):
        raise DimensionError("generator does not match the target dimension")
    if not is_skew(s, 1e-10):
        raise ParityError("generator must be skew-Hermitian")
    h = 1j * s
    return (h + h.conj().T) / 2


def moment_pair(target: Target, x: np.ndarray, s) -> float:
    h = _hermitian_of(target, s)
    if isinstance(target, Linear):
        return float(0.5 * np.vdot(x, h @ x).real)
    return float(sum(t * np.trace(p @ h).real for t, p in zip(target.taus, projectors(target, x))))


def moment_full(target: Target, x: np.ndarray) -> np.ndarray:
    """Moment map as an element of u(m), before restricting to the acting algebra."""
    if isinstance(target, Linear):
        return -0.5j * np.outer(x, x.conj())
    return -1j * sum(t * p for t, p in zip(target.taus, projectors(target, x)))


def project_algebra(group: AnchorRep, a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=complex)
    for b in group.basis():
        out += pairing(a, b).real * b
    return out


def moment_element(target: Target, x: np.ndarray) -> np.ndarray:
    return project_algebra(target.group, moment_full(target, x))


def ineffective_basis(target: Target, tol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormal basis of acting directions that move no point at all."""
    basis = target.group.basis()
    if not basis:
        return []
    m = target.dim
    rows = []
    for b in basis:
        img = b.copy()
        if not isinstance(target, Linear):  # scalars act trivially on planes
            img = img - np.trace(img) / m * np.eye(m)
        rows.append(np.concatenate([img.real.ravel(), img.imag.ravel()]))
    a = np.array(rows).T
    _, sv, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(sv > tol))
    out = []
    for coeffs in vh[rank:]:
        v = sum(c * b for c, b in zip(coeffs, basis))
        out.append(v / np.sqrt(pairing(v, v).real))
    return out


def effective_basis(target: Target, tol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormal basis of the complement of the ineffective directions."""
    basis = target.group.basis()
    dead = ineffective_basis(target, tol)
    out: list[np.ndarray] = []
    for b in basis:
        v = b - sum(pairing(b, d).real * d for d in dead)
        for e in out:
            v = v - pairing(v, e).real * e
        n = np.sqrt(pairing(v, v).real)
        if n > 1e-8:
            out.append(v / n)
    return out


# -- flows -------------------------------------------------------------------


def _graded_plane_flow(y: np.ndarray, h: np.ndarray, t: float) -> np.ndarray:
    """Orthonormal basis of ``exp(tH) span(y)``, stable for large ``t``.

    Columns are first rotated so that each has a well-defined leading
    eigenvalue cluster; every column is then rescaled by its own leading
    exponential, which keeps the computation free of overflow and of the
    cancellation that a plain QR of ``expm(tH) y`` suffers.
    """
    if t < 0:
        h, t = -h, -t
    w, v = herm_eig(h)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    z = v.conj().T @ y
    groups = _clusters_desc(w)
    remaining = z
    blocks = []
    for grp in groups:
        if remaining.shape[1] == 0:
            break
        sub = remaining[grp, :]
        _, sv, wh = np.linalg.svd(sub)
        rr = int(np.sum(sv > SUPPORT_TOL))
        rot = remaining @ wh.conj().T
        if rr:
            blocks.append((rot[:, :rr], float(np.mean(w[grp]))))
        remaining = rot[:, rr:].copy()
        remaining[grp, :] = 0.0
    cols = []
    for b, lead in blocks:
        cols.append(b * np.exp(np.minimum(t * (w - lead), 0.0))[:, None])
    out = v @ np.hstack(cols)
    q, _ = np.linalg.qr(out)
    return q


def _clusters_desc(w: np.ndarray, rtol: float = 1e-8) -> list[list[int]]:
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    groups: list[list[int]] = []
    for i, val in enumerate(w):
        if groups and abs(val - w[groups[-1][-1]]) <= rtol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _nested_frame(planes: Sequence[np.ndarray]) -> np.ndarray:
    cur = planes[0]
    for q in planes[1:]:
        comp = q - cur @ (cur.conj().T @ q)
        u, _, _ = np.linalg.svd(comp, full_matrices=False)
        cur = np.hstack([cur, u[:, : q.shape[1] - cur.shape[1]]])
    return cur


def flow(target: Target, x: np.ndarray, s, t: float) -> np.ndarray:
    """Point reached at time ``t`` by the gradient flow of ``<mu, s>``."""
    h = _hermitian_of(target, s)
    if t == 0:
        return x.copy()
    if isinstance(target, Linear):
        with np.errstate(over="ignore", invalid="ignore"):
            return herm_fun(t * h, np.exp) @ x
    y = frame(target, x)
    planes = [_graded_plane_flow(y[:, :r], h, t) for r in target.ranks]
    return _unframe(target, _nested_frame(planes))


def lambda_t(target: Target, x: np.ndarray, s, t: float) -> float:
    xt = flow(target, x, s, t)
    if isinstance(target, Linear) and not np.all(np.isfinite(xt)):
        return float("inf")
    return moment_pair(target, xt, s)


def grad_norm_sq(target: Target, x: np.ndarray, s) -> float:
    """Squared length of the gradient of ``<mu, s>``; equals d/dt lambda_t."""
    h = _hermitian_of(target, s)
    if isinstance(target, Linear):
        return float(np.linalg.norm(h @ x) ** 2)
    total = 0.0
    m = target.dim
    for t, p in zip(target.taus, projectors(target, x)):
        total += 2.0 * t * np.linalg.norm((np.eye(m) - p) @ h @ p) ** 2
    return float(total)


def lambda_curve(target: Target, x: np.ndarray, s, ts: Sequence[float]) -> np.ndarray:
    return np.array([lambda_t(target, x, s, t) for t in ts])


# -- maximal weights -----------------------------------------------------------


def _intersection_dim(y: np.ndarray, e: np.ndarray) -> int:
    if e.shape[1] == 0:
        return 0
    sv = np.linalg.svd(np.hstack([y, e]), compute_uv=False)
    return y.shape[1] + e.shape[1] - int(np.sum(sv > SUPPORT_TOL))


def grassmann_weight(y: np.ndarray, h: np.ndarray) -> float:
    """``dim(pi) l_r + sum_j dim(pi & E_j) (l_j - l_{j+1})`` for the plane span(y)."""
    fl = eigen_flag(h)
    lam = fl.eigenvalues
    val = y.shape[1] * lam[-1]
    for j in range(len(lam) - 1):
        val += _intersection_dim(y, fl.bases[j]) * (lam[j] - lam[j + 1])
    return float(val)


def maximal_weight(target: Target, x: np.ndarray, s, c=None) -> ExtendedWeight:
    """Closed-form maximal weight of ``s`` at ``x`` for the moment map ``mu - c``."""
    h = _hermitian_of(target, s)
    shift = 0.0 if c is None else pairing(np.asarray(c, complex), s).real
    if isinstance(target, Linear):
        nrm = np.linalg.norm(x)
        if nrm == 0:
            return ExtendedWeight(-shift)
        w, v = herm_eig(h)
        coef = np.abs(v.conj().T @ (x / nrm))
        scale = max(1.0, float(np.abs(w).max(initial=0.0)))
        if np.any((coef > SUPPORT_TOL) & (w > 1e-8 * scale)):
            return ExtendedWeight.infinite()
        return ExtendedWeight(-shift)
    y = frame(target, x)
    val = sum(t * grassmann_weight(y[:, :r], h) for t, r in zip(target.taus, target.ranks))
    return ExtendedWeight(float(val) - shift)


def projective_weight(x: np.ndarray, h: np.ndarray) -> float:
    """``max{l_k : x_k != 0}`` in an eigenbasis of H."""
    w, v = herm_eig(h)
    coef = np.abs(v.conj().T @ (x / np.linalg.norm(x)))
    return float(w[coef > SUPPORT_TOL].max())


def numeric_maximal_weight(
    target: Target,
    x: np.ndarray,
    s,
    t_max: float = 50.0,
    slope_tol: float = 1e-8,
    diverge: float = 1e8,
    c=None,
) -> ExtendedWeight:
    """Maximal weight as the large-time value of ``lambda_t``."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    shift = 0.0 if c is None else pairing(np.asarray(c, complex), s).real
    if isinstance(target, Linear):
        # e^{tH} lifts roundoff along positive eigenvalues by up to e^{t max l}, so the
        # flow runs in an eigenbasis with sub-floor components dropped (as in the closed form)
        w, v = herm_eig(_hermitian_of(target, s))
        coef = v.conj().T @ x
        coef[np.abs(coef) <= SUPPORT_TOL * np.linalg.norm(x)] = 0
        with np.errstate(over="ignore", invalid="ignore"):
            xt = v @ (np.exp(t_max * w) * coef)
        if not np.all(np.isfinite(xt)):
            return ExtendedWeight.infinite()
    else:
        xt = flow(target, x, s, t_max)
    val = moment_pair(target, xt, s)
    slope = grad_norm_sq(target, xt, s)
    if not np.isfinite(val) or (val > diverge and slope > slope_tol):
        return ExtendedWeight.infinite()
    if slope < slope_tol:
        return ExtendedWeight(val - shift, error=slope)
    return ExtendedWeight(val - shift, error=slope, status="inconclusive")
