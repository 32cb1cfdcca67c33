"""Exact slope-stability arithmetic for filtrations of a bundle over a curve.

Degrees are integers in line-bundle units (first Chern numbers); the volume of
the curve is fixed to 1.  Everything here is exact
rational arithmetic (``gmpy2.mpq``, which compares and hashes like ``fractions.Fraction``).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from gmpy2 import mpq as Q
from typing import Iterable, Sequence

VOL = Q(1)

NEGATIVE_GRID = (Q(-1), Q(-1, 2), Q(-2), Q(-3))
Z_GRID = (Q(-1), Q(0), Q(1))


class InvariantError(ValueError):
    pass


def _q(x) -> Q:
    return x if isinstance(x, Q) else Q(x)


@dataclass(frozen=True)
class BundleData:
    R: int
    d: int

    def __post_init__(self):
        if self.R < 1:
            raise InvariantError("rank must be positive")


@dataclass(frozen=True)
class SectionFiltration:
    ranks: tuple = ()
    degrees: tuple = ()
    taus: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        object.__setattr__(self, "taus", tuple(_q(t) for t in self.taus))
        if not len(self.ranks) == len(self.degrees) == len(self.taus):
            raise InvariantError("ranks, degrees and taus must have equal length")
        if any(a >= b for a, b in zip(self.ranks, self.ranks[1:])):
            raise InvariantError("filtration ranks must increase strictly")
        if any(t <= 0 for t in self.taus):
            raise InvariantError("weights tau must be positive")

    def check(self, bundle: BundleData):
        if self.ranks and (self.ranks[0] <= 0 or self.ranks[-1] >= bundle.R):
            raise InvariantError("filtration ranks must lie in (0, R)")


@dataclass(frozen=True)
class Subobject:
    rank: int
    degree: int
    meets: tuple = ()  # rk(V_k & V^1) for each filtration step

    def __post_init__(self):
        object.__setattr__(self, "meets", tuple(int(m) for m in self.meets))


@dataclass(frozen=True)
class ParabolicWeights:
    z: Q
    ranks: tuple  # R^1 < ... < R^{r-1}
    degrees: tuple  # deg(V^j)
    m: tuple  # negative weights m_j

    def __post_init__(self):
        object.__setattr__(self, "z", _q(self.z))
        object.__setattr__(self, "m", tuple(_q(x) for x in self.m))
        if any(x >= 0 for x in self.m):
            raise InvariantError("antidominant weights must be negative")
        if not len(self.ranks) == len(self.degrees) == len(self.m):
            raise InvariantError("one rank, degree and weight per flag step")
        if any(a >= b for a, b in zip(self.ranks, self.ranks[1:])):
            raise InvariantError("flag ranks must increase strictly")


def check_subobject(bundle: BundleData, filt: SectionFiltration, sub: Subobject):
    if not 0 < sub.rank < bundle.R:
        raise InvariantError("subobject rank must lie in (0, R)")
    if len(sub.meets) != len(filt.ranks):
        raise InvariantError("one intersection rank per filtration step")
    prev_meet, prev_rank = 0, 0
    for r_k, mk in zip(filt.ranks, sub.meets):
        if not max(0, r_k + sub.rank - bundle.R) <= mk <= min(r_k, sub.rank):
            raise InvariantError("intersection rank outside the dimension bounds")
        if mk < prev_meet or mk - prev_meet > r_k - prev_rank:
            raise InvariantError("intersection ranks incompatible with the nesting")
        prev_meet, prev_rank = mk, r_k


def central_c(bundle: BundleData, filt: SectionFiltration) -> Q:
    """The only central value for which the filtration can be stable."""
    filt.check(bundle)
    return (bundle.d + sum(t * r for t, r in zip(filt.taus, filt.ranks))) / (bundle.R * VOL)


def sub_slope(filt: SectionFiltration, sub: Subobject) -> Q:
    return (sub.degree + sum(t * m for t, m in zip(filt.taus, sub.meets))) / Q(sub.rank)


def slope_test(bundle: BundleData, filt: SectionFiltration, sub: Subobject) -> str:
    check_subobject(bundle, filt, sub)
    lhs, rhs = sub_slope(filt, sub), central_c(bundle, filt)
    if lhs < rhs:
        return "StrictPass"
    return "Equality" if lhs == rhs else "Violated"


def deg_pair(bundle: BundleData, pw: ParabolicWeights) -> Q:
    R, d = bundle.R, bundle.d
    return pw.z * d + sum(m * (dj - Q(rj, R) * d) for m, rj, dj in zip(pw.m, pw.ranks, pw.degrees))


def eigenvalues(bundle: BundleData, pw: ParabolicWeights) -> list[Q]:
    """Distinct ascending eigenvalues of ``z I + sum m_j (pi_j - R^j/R I)``."""
    R = bundle.R
    top = pw.z - sum(m * Q(rj, R) for m, rj in zip(pw.m, pw.ranks))
    out = [top]
    for m in reversed(pw.m):
        out.insert(0, out[0] + m)
    return out


def deg_pair_eigen(d: int, eigs: Sequence[Q], flag_degrees: Sequence[int]) -> Q:
    """Degree in eigenvalue form: ``l_r deg V + sum_k (l_k - l_{k+1}) deg V^{l_k}``."""
    val = eigs[-1] * d
    for k in range(len(eigs) - 1):
        val += (eigs[k] - eigs[k + 1]) * flag_degrees[k]
    return val


def weight_integral(bundle: BundleData, filt: SectionFiltration, pw: ParabolicWeights, meets) -> Q:
    """Integrated maximal weight of the section, tau-weighted over the filtration.

    ``meets[k][j]`` is ``rk(V_k & V^j)``.
    """
    R = bundle.R
    top = pw.z - sum(m * Q(rj, R) for m, rj in zip(pw.m, pw.ranks))
    total = Q(0)
    for k, (tau, rk) in enumerate(zip(filt.taus, filt.ranks)):
        total += tau * (rk * top + sum(m * meets[k][j] for j, m in enumerate(pw.m)))
    return total * VOL


def total_degree(bundle: BundleData, filt: SectionFiltration, pw: ParabolicWeights, meets, c=None) -> Q:
    c = central_c(bundle, filt) if c is None else _q(c)
    central = -pw.z * c * bundle.R * VOL  # <i chi, c> Vol(X)
    return deg_pair(bundle, pw) + weight_integral(bundle, filt, pw, meets) + central


def z_coefficient(bundle: BundleData, filt: SectionFiltration):
    """Coefficient of z in ``total_degree`` as a sympy expression in c, and its root.

    The coefficient is read off the implemented ``total_degree`` (affine in z and
    c), then solved symbolically.
    """
    import sympy

    meets = [[] for _ in filt.ranks]

    def coef(cv) -> Q:
        one = total_degree(bundle, filt, ParabolicWeights(1, (), (), ()), meets, cv)
        zero = total_degree(bundle, filt, ParabolicWeights(0, (), (), ()), meets, cv)
        return one - zero

    a, b = coef(0), coef(0) - coef(1)
    c = sympy.symbols("c")
    expr = sympy.Rational(a.numerator, a.denominator) - sympy.Rational(b.numerator, b.denominator) * c
    (root,) = sympy.solve(sympy.Eq(expr, 0), c)
    return expr, Q(int(root.p), int(root.q))


def enumerate_subobjects(bundle: BundleData, filt: SectionFiltration, deg_bound: int) -> Iterable[Subobject]:
    R = bundle.R
    for r1 in range(1, R):
        ranges = [range(max(0, rk + r1 - R), min(rk, r1) + 1) for rk in filt.ranks]
        for meets in itertools.product(*ranges):
            try:
                check_subobject(bundle, filt, Subobject(r1, 0, meets))
            except InvariantError:
                continue
            for d1 in range(-deg_bound, deg_bound + 1):
                yield Subobject(r1, d1, meets)


def _compatible(a: Subobject, b: Subobject) -> bool:
    if a.rank >= b.rank:
        return False
    return all(ma <= mb and mb - ma <= b.rank - a.rank for ma, mb in zip(a.meets, b.meets))


@dataclass
class EquivalenceReport:
    equivalent: bool
    grid_positive: bool
    slopes_pass: bool
    n_subobjects: int
    n_grid_points: int
    destabilizing: list
    counterexamples: list
    grid_nonstrict_equals_slope_equality: bool
    coefficient_test: bool
    chain_grid_misses: list = field(default_factory=list)


def equivalence_brute(
    bundle: BundleData,
    filt: SectionFiltration,
    deg_bound: int = 3,
    max_chain: int = 1,
    m_grid: Sequence[Q] = NEGATIVE_GRID,
    z_grid: Sequence[Q] = Z_GRID,
) -> EquivalenceReport:
    """Compare [total degree > 0 on the weight grid] with [all slope tests pass]."""
    if bundle.R > 4 or deg_bound > 3 or any(t.denominator > 4 for t in filt.taus):
        raise InvariantError("equivalence_brute is limited to R <= 4, |deg| <= 3, tau denominators <= 4")
    filt.check(bundle)
    subs = list(enumerate_subobjects(bundle, filt, deg_bound))
    verdicts = {sub: slope_test(bundle, filt, sub) for sub in subs}
    slopes_pass = all(v == "StrictPass" for v in verdicts.values())
    destabilizing = [s for s, v in verdicts.items() if v != "StrictPass"]
    c = central_c(bundle, filt)

    chains = [(s,) for s in subs]
    for length in range(2, max_chain + 1):
        chains = chains + [
            ch + (s,) for ch in chains if len(ch) == length - 1 for s in subs if _compatible(ch[-1], s)
        ]
    grid_positive, npts, counter, grid_misses = True, 0, [], []
    nonstrict_match, coeff_ok = True, True
    for ch in chains:
        ms_all = list(itertools.product(m_grid, repeat=len(ch)))
        meets = [[s.meets[k] for s in ch] for k in range(len(filt.ranks))]
        chain_nonstrict = False
        vals = []
        for z in z_grid:
            for ms in ms_all:
                pw = ParabolicWeights(z, tuple(s.rank for s in ch), tuple(s.degree for s in ch), ms)
                vals.append(total_degree(bundle, filt, pw, meets, c))
        npts += len(vals)
        if any(v <= 0 for v in vals):
            grid_positive = False
            chain_nonstrict = True
        chain_ok = all(verdicts[s] == "StrictPass" for s in ch)
        if chain_ok == chain_nonstrict:
            # for longer chains a finite grid bounded away from 0 cannot see a small
            # positive ray coefficient; those are decided by the coefficient test
            (counter if len(ch) == 1 else grid_misses).append({"chain": ch, "slope_ok": chain_ok})
        if len(ch) == 1:
            any_equality = verdicts[ch[0]] == "Equality"
            if any_equality != all(v == 0 for v in vals):
                nonstrict_match = False
        # ray coefficients: total degree is sum_j m_j * coef_j once c is central
        for j, s in enumerate(ch):
            coef = s.rank * (sub_slope(filt, s) - c)
            if (coef < 0) != (verdicts[s] == "StrictPass"):
                coeff_ok = False
    return EquivalenceReport(
        equivalent=grid_positive == slopes_pass and not counter and coeff_ok,
        grid_positive=grid_positive,
        slopes_pass=slopes_pass,
        n_subobjects=len(subs),
        n_grid_points=npts,
        destabilizing=destabilizing,
        counterexamples=counter,
        grid_nonstrict_equals_slope_equality=nonstrict_match,
        coefficient_test=coeff_ok,
        chain_grid_misses=grid_misses,
    )


def is_stable(bundle: BundleData, filt: SectionFiltration, deg_bound: int = 3) -> bool:
    return all(slope_test(bundle, filt, s) == "StrictPass" for s in enumerate_subobjects(bundle, filt, deg_bound))


def bogomolov_residual(bundle: BundleData, filt: SectionFiltration, base_dim: int = 1) -> Q:
    """``deg(V) c - sum tau_k deg(V_k)`` on a curve (the ch_2 term vanishes there)."""
    if base_dim != 1:
        raise InvariantError("only curves are supported; ch_2 is not modelled")
    c = central_c(bundle, filt)
    return bundle.d * c - sum(t * d for t, d in zip(filt.taus, filt.degrees))


def bogomolov_report(bundle: BundleData, filt: SectionFiltration) -> dict:
    r = bogomolov_residual(bundle, filt)
    return {"residual": r, "no_solution_expected": r < 0}


def enumerate_filtrations(R: int, deg_bound: int, taus: Sequence[Q], max_steps: int = 2):
    """Small-instance grid of filtrations for exhaustive checks."""
    for nsteps in range(0, max_steps + 1):
        for ranks in itertools.combinations(range(1, R), nsteps):
            for degs in itertools.product(range(-deg_bound, deg_bound + 1), repeat=nsteps):
                for ts in itertools.product(taus, repeat=nsteps):
                    yield SectionFiltration(ranks, degs, ts)


def fmt(q: Q) -> str:
    return f"{q.numerator}/{q.denominator}"
