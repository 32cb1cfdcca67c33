"""Matrix Lie group and Lie algebra numerics for U(m) / GL(m, C).

Every algebra element is carried as an m x m complex matrix in the anchor
representation.  The invariant pairing is ``<s, t> = Tr(s t^*)``; for two
skew-Hermitian matrices it is real and positive definite, so the compact
algebra is identified with its dual and dual vectors are never stored.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

ATOL = 1e-12
CLUSTER_RTOL = 1e-8


class DimensionError(ValueError):
    pass


class SingularMatrixError(ValueError):
    pass


class ParityError(ValueError):
    pass


@dataclass(frozen=True)
class AnchorRep:
    """Compact group acting through the anchor space C^m.

    ``kind`` is one of ``"U"`` (all of u(m)), ``"SU"`` (traceless part) or
    ``"torus"``.  For a torus, each row of ``weights`` (length m) gives one
    generator ``diag(i * row)``; the default is the maximal diagonal torus.
    """

    m: int
    kind: str = "U"
    weights: Optional[tuple] = None

    def __post_init__(self):
        if self.m < 1:
            raise DimensionError("anchor dimension must be >= 1")
        if self.kind not in ("U", "SU", "torus"):
            raise ValueError(f"unknown anchor kind {self.kind!r}")
        if self.weights is not None:
            w = np.atleast_2d(np.asarray(self.weights, dtype=float))
            if w.shape[1] != self.m:
                raise DimensionError("weight rows must have length m")
            object.__setattr__(self, "weights", tuple(map(tuple, w.tolist())))

    @property
    def weight_matrix(self) -> np.ndarray:
        if self.weights is None:
            return np.eye(self.m)
        return np.array(self.weights, dtype=float)

    def basis(self) -> list[np.ndarray]:
        """Orthonormal basis (for ``pairing``) of the compact algebra."""
        if self.kind == "torus":
            gens = [1j * np.diag(row).astype(complex) for row in self.weight_matrix]
            return orthonormalize(gens)
        m = self.m
        out = []
        for a in range(m):
            e = np.zeros((m, m), complex)
            e[a, a] = 1j
            out.append(e)
        for a in range(m):
            for b in range(a + 1, m):
                e = np.zeros((m, m), complex)
                e[a, b], e[b, a] = 1, -1
                out.append(e / np.sqrt(2))
                e = np.zeros((m, m), complex)
                e[a, b], e[b, a] = 1j, 1j
                out.append(e / np.sqrt(2))
        if self.kind == "SU":
            ident = 1j * np.eye(m) / np.sqrt(m)
            out = [b - pairing(b, ident).real * ident for b in out]
            return orthonormalize(out)
        return out

    def is_central(self, c: np.ndarray, tol: float = ATOL) -> bool:
        return all(np.abs(c @ b - b @ c).max() <= tol for b in self.basis())


def orthonormalize(mats: Sequence[np.ndarray], tol: float = 1e-10) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for m in mats:
        v = m.astype(complex).copy()
        for b in out:
            v = v - pairing(v, b).real * b
        n = norm(v)
        if n > tol:
            out.append(v / n)
    return out


@dataclass(frozen=True)
class AlgebraElement:
    mat: np.ndarray
    parity: str = field(default="general")

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        object.__setattr__(self, "mat", mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError("algebra element must be square")
        if self.parity == "skew" and not is_skew(mat):
            raise ParityError("matrix is not skew-Hermitian")
        if self.parity == "hermitian" and not is_hermitian(mat):
            raise ParityError("matrix is not Hermitian")


@dataclass(frozen=True)
class EigenFlag:
    eigenvalues: tuple
    ranks: tuple
    bases: tuple  # cumulative orthonormal bases, one m x rank matrix per step

    @property
    def basis(self) -> np.ndarray:
        return self.bases[-1]


def is_skew(a: np.ndarray, tol: float = ATOL) -> bool:
    return bool(np.abs(a + a.conj().T).max(initial=0.0) <= tol * max(1.0, np.abs(a).max(initial=0.0)))


def is_hermitian(a: np.ndarray, tol: float = ATOL) -> bool:
    return bool(np.abs(a - a.conj().T).max(initial=0.0) <= tol * max(1.0, np.abs(a).max(initial=0.0)))


def _as_mat(x) -> np.ndarray:
    return x.mat if isinstance(x, AlgebraElement) else np.asarray(x, dtype=complex)


def pairing(s, t) -> complex:
    s, t = _as_mat(s), _as_mat(t)
    if s.shape != t.shape:
        raise DimensionError(f"shape mismatch {s.shape} vs {t.shape}")
    return complex(np.vdot(t, s))  # sum s_ij conj(t_ij) = Tr(s t^*)


def norm(s) -> float:
    s = _as_mat(s)
    return float(np.sqrt(max(pairing(s, s).real, 0.0)))


def herm_eig(h: np.ndarray):
    h = (h + h.conj().T) / 2
    return np.linalg.eigh(h)


def herm_fun(h: np.ndarray, f) -> np.ndarray:
    w, v = herm_eig(h)
    return (v * f(w)) @ v.conj().T


def expm(a: np.ndarray) -> np.ndarray:
    """Exponential; eigendecomposition for normal input, Pade otherwise."""
    a = np.asarray(a, dtype=complex)
    if np.abs(a @ a.conj().T - a.conj().T @ a).max(initial=0.0) <= 1e-12 * max(1.0, np.abs(a).max()) ** 2:
        if is_hermitian(a):
            return herm_fun(a, np.exp)
        if is_skew(a):
            w, v = herm_eig(-1j * a)
            return (v * np.exp(1j * w)) @ v.conj().T
    from scipy.linalg import expm as _expm

    return _expm(a)


def cartan_decompose(g) -> tuple[np.ndarray, np.ndarray]:
    """Polar split ``g = k @ expm(s)`` with k unitary and s Hermitian."""
    g = _as_mat(g)
    u, sig, vh = np.linalg.svd(g)
    if sig.min() <= 1e-300 or sig.min() / sig.max() < 1e-15:
        raise SingularMatrixError("group element is (numerically) singular")
    k = u @ vh
    v = vh.conj().T
    s = (v * np.log(sig)) @ vh
    return k, (s + s.conj().T) / 2


def length_log(g) -> float:
    """Frobenius norm of the Hermitian logarithm of g."""
    g = _as_mat(g)
    sig = np.linalg.svd(g, compute_uv=False)
    if sig.min() <= 1e-300:
        raise SingularMatrixError("group element is singular")
    return float(np.sqrt(np.sum(np.log(sig) ** 2)))


def _cluster(values: np.ndarray, rtol: float = CLUSTER_RTOL) -> list[list[int]]:
    scale = max(1.0, float(np.abs(values).max(initial=0.0)))
    groups: list[list[int]] = []
    for i, v in enumerate(values):
        if groups and abs(v - values[groups[-1][-1]]) <= rtol * scale:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def eigen_flag(chi) -> EigenFlag:
    chi = _as_mat(chi)
    if not is_hermitian(chi, 1e-10):
        raise ParityError("eigen_flag needs a Hermitian matrix")
    w, v = herm_eig(chi)
    groups = _cluster(w)
    eigs, ranks, bases = [], [], []
    for grp in groups:
        eigs.append(float(np.mean(w[grp])))
        ranks.append(grp[-1] + 1)
        bases.append(v[:, : grp[-1] + 1])
    return EigenFlag(tuple(eigs), tuple(ranks), tuple(bases))


def coordinate_projection(r: int, m: int) -> np.ndarray:
    p = np.zeros((m, m), complex)
    p[:r, :r] = np.eye(r)
    return p


def antidominant_compose(z: float, ranks: Sequence[int], weights: Sequence[float], m: int) -> np.ndarray:
    """Hermitian ``z I + sum_j w_j (pi_j - (R_j/m) I)`` with all ``w_j < 0``."""
    ranks = list(ranks)
    if len(ranks) != len(weights):
        raise ValueError("one weight per rank is required")
    if any(w >= 0 for w in weights):
        raise ValueError("antidominant weights must be negative")
    if any(not 0 < r < m for r in ranks) or any(a >= b for a, b in zip(ranks, ranks[1:])):
        raise ValueError("ranks must be strictly increasing inside (0, m)")
    out = z * np.eye(m, dtype=complex)
    for r, w in zip(ranks, weights):
        out += w * (coordinate_projection(r, m) - (r / m) * np.eye(m))
    return out


def random_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_skew(m: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return (z - z.conj().T) / 2


def random_invertible(m: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    h = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return random_unitary(m, rng) @ herm_fun((h + h.conj().T) * scale / 2, np.exp)


def to_json_matrix(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def from_json_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2:  # a plain real matrix is accepted too
        return arr.astype(complex)
    return arr[..., 0] + 1j * arr[..., 1]


def from_json_vector(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        return arr.astype(complex)
    return arr[..., 0] + 1j * arr[..., 1]
