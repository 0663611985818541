"""Piecewise expanding circle maps with explicit branch structure.

A map is a finite list of monotone branches on half-open arcs [u, v) that
tile [0, 1).  Each branch is either affine, x -> s*x + c (mod 1), or
sine-perturbed, x -> s*x + c + a*sin(2*pi*x) (mod 1).  Both forms have
closed-form derivatives and monotone, invertible lifts, so preimages are
exact (affine) or solvable to ~1e-12 by safeguarded Newton (sine).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Circle points closer than this are treated as equal when classifying
# branch junctions as continuous.
CONTINUITY_TOL = 1e-12

# Grid density per interval for the C2 norms in neighborhood_distance.
NEIGHBORHOOD_GRID = 4096


class MapFormError(ValueError):
    """Raised for malformed branch structures (non-tiling, non-expanding)."""


def wrap(x):
    """Reduce a point to the fundamental domain [0, 1)."""
    return x - math.floor(x)


def circle_dist(x: float, y: float) -> float:
    """Shortest arc distance between two circle points."""
    d = abs(x - y) % 1.0
    return min(d, 1.0 - d)


@dataclass(frozen=True)
class BranchSpec:
    """One monotone branch on the half-open arc [lo, hi).

    The lift s*x + c + a*sin(2*pi*x) must have a derivative of constant
    sign and modulus > 1 on the closed arc.
    """

    lo: float
    hi: float
    slope: float
    offset: float = 0.0
    amplitude: float = 0.0

    @property
    def is_affine(self) -> bool:
        return self.amplitude == 0.0

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def lift(self, x):
        """Branch lift (no mod-1 reduction); valid on a neighborhood of [lo, hi]."""
        if self.amplitude == 0.0:
            return self.slope * x + self.offset
        return self.slope * x + self.offset + self.amplitude * np.sin(TWO_PI * x)

    def deriv(self, x):
        if self.amplitude == 0.0:
            return self.slope * np.ones_like(np.asarray(x, dtype=float))
        return self.slope + TWO_PI * self.amplitude * np.cos(TWO_PI * x)

    def deriv2(self, x):
        if self.amplitude == 0.0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return -(TWO_PI ** 2) * self.amplitude * np.sin(TWO_PI * x)

    def deriv_range(self) -> tuple[float, float]:
        """(min, max) of f' over the closed arc, by extremal calculus on cos."""
        xs = [self.lo, self.hi]
        for c in (0.0, 0.5, 1.0):
            if self.lo < c < self.hi:
                xs.append(c)
        vals = [float(self.deriv(x)) for x in xs]
        return min(vals), max(vals)

    def deriv2_range(self) -> tuple[float, float]:
        """(min, max) of f'' over the closed arc."""
        xs = [self.lo, self.hi]
        for c in (0.25, 0.75):
            if self.lo < c < self.hi:
                xs.append(c)
        vals = [float(self.deriv2(x)) for x in xs]
        return min(vals), max(vals)

    @property
    def increasing(self) -> bool:
        dmin, _ = self.deriv_range()
        return dmin > 0


def _solve_lift(branch: BranchSpec, targets: np.ndarray) -> np.ndarray:
    """Solve lift(x) = t on [lo, hi] for each target (vectorized).

    Affine branches are exact; sine branches use 30 bisection steps
    followed by 4 clipped Newton steps (residual well below 1e-12).
    """
    if branch.is_affine:
        return (targets - branch.offset) / branch.slope
    lo = np.full_like(targets, branch.lo)
    hi = np.full_like(targets, branch.hi)
    inc = branch.increasing
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        val = branch.lift(mid)
        less = (val < targets) if inc else (val > targets)
        lo = np.where(less, mid, lo)
        hi = np.where(less, hi, mid)
    x = 0.5 * (lo + hi)
    for _ in range(4):
        x = x - (branch.lift(x) - targets) / branch.deriv(x)
        x = np.clip(x, branch.lo, branch.hi)
    return x


@dataclass(frozen=True)
class PiecewiseMap:
    """Circle map assembled from branches whose domains tile [0, 1)."""

    branches: tuple[BranchSpec, ...]

    def __post_init__(self):
        bs = tuple(self.branches)
        if not bs:
            raise MapFormError("map needs at least one branch")
        if bs[0].lo != 0.0 or bs[-1].hi != 1.0:
            raise MapFormError("branch domains must tile [0, 1)")
        for a, b in zip(bs, bs[1:]):
            if a.hi != b.lo:
                raise MapFormError("branch domains must be contiguous")
        for b in bs:
            if not (b.lo < b.hi):
                raise MapFormError("empty branch domain")
            dmin, dmax = b.deriv_range()
            if dmin > 0:
                lam = dmin
            elif dmax < 0:
                lam = -dmax
            else:
                raise MapFormError("branch derivative changes sign (not monotone)")
            if lam <= 1.0:
                raise MapFormError(f"branch expansion {lam} <= 1")
        object.__setattr__(self, "branches", bs)

    @property
    def marked_points(self) -> tuple[float, ...]:
        """Branch domain endpoints, used as correspondence marks."""
        return tuple(b.lo for b in self.branches)

    @property
    def d_marked(self) -> float:
        pts = self.marked_points
        if len(pts) == 1:
            return 1.0
        gaps = [pts[i + 1] - pts[i] for i in range(len(pts) - 1)]
        gaps.append(1.0 - pts[-1] + pts[0])
        return min(gaps)

    def branch_index(self, x: float) -> int:
        los = [b.lo for b in self.branches]
        return bisect_right(los, x) - 1

    def branch_of(self, x: float) -> BranchSpec:
        return self.branches[self.branch_index(x)]

    def eval(self, x: float) -> float:
        """f(x) for a single point x in [0, 1)."""
        return wrap(float(self.branch_of(x).lift(x)))

    def eval_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        los = np.array([b.lo for b in self.branches])
        idx = np.searchsorted(los, xs, side="right") - 1
        out = np.empty_like(xs)
        for i, b in enumerate(self.branches):
            m = idx == i
            if np.any(m):
                out[m] = b.lift(xs[m])
        return out - np.floor(out)

    def derivs(self, x: float) -> tuple[float, float]:
        """(f'(x), f''(x)) from the branch owning x (one-sided at junctions)."""
        b = self.branch_of(x)
        return float(b.deriv(x)), float(b.deriv2(x))

    def is_continuous(self) -> bool:
        return len(discontinuities(self)) == 0

    def branch_offsets(self, branch: BranchSpec) -> range:
        """Integer shifts k such that {y + k} may intersect the branch image."""
        flo = float(branch.lift(branch.lo))
        fhi = float(branch.lift(branch.hi))
        lo, hi = min(flo, fhi), max(flo, fhi)
        return range(math.floor(lo) - 1, math.ceil(hi) + 1)

    def inverse_branches(self, y: float) -> list[tuple[int, float, float]]:
        """All preimages of the circle point y.

        Returns (branch id, x, |f'(x)|) per preimage, honoring the
        half-open domain convention: the lift image of [lo, hi) is
        [lift(lo), lift(hi)) for increasing branches.
        """
        out = []
        for i, b in enumerate(self.branches):
            flo = float(b.lift(b.lo))
            fhi = float(b.lift(b.hi))
            inc = b.increasing
            for k in self.branch_offsets(b):
                t = y + k
                if inc:
                    ok = flo <= t < fhi
                else:
                    ok = fhi < t <= flo
                if not ok:
                    continue
                x = float(_solve_lift(b, np.array([t]))[0])
                if x >= 1.0:
                    x -= 1.0
                out.append((i, x, abs(float(b.deriv(x)))))
        return out


@dataclass(frozen=True)
class MapAnalysis:
    """Global analytic quantities of a piecewise expanding map."""

    lambda_min: float
    M0: float
    A: float
    C1: float
    omega: tuple[float, ...]
    d_omega: float
    sup_d2: float
    branch_data: tuple[tuple[float, float], ...]  # (min |f'|, length) per branch


def discontinuities(m: PiecewiseMap, tol: float = CONTINUITY_TOL) -> tuple[float, ...]:
    """Branch junctions where the one-sided limits genuinely differ."""
    pts = []
    bs = m.branches
    n = len(bs)
    for i in range(n):
        p = bs[i].lo
        left = bs[i - 1]
        right = bs[i]
        lv = wrap(float(left.lift(p if i > 0 else 1.0)))
        rv = wrap(float(right.lift(p)))
        if circle_dist(lv, rv) > tol:
            pts.append(p)
    return tuple(pts)


def analyze(m: PiecewiseMap) -> MapAnalysis:
    """Expansion bounds, variation-inequality coefficient, and discontinuity data.

    The coefficient is A = sup|f''| / (inf|f'|)^2 + 2 * max over branches of
    (sup 1/|f'|) / |I|; C1 bounds the Lipschitz constant of log|f'| by
    sup|f''| / inf|f'|.
    """
    lam = math.inf
    m0 = 0.0
    sup_d2 = 0.0
    second = 0.0
    branch_data = []
    for b in m.branches:
        dmin, dmax = b.deriv_range()
        bl = min(abs(dmin), abs(dmax))
        bh = max(abs(dmin), abs(dmax))
        lam = min(lam, bl)
        m0 = max(m0, bh)
        lo2, hi2 = b.deriv2_range()
        sup_d2 = max(sup_d2, abs(lo2), abs(hi2))
        second = max(second, (1.0 / bl) / b.length)
        branch_data.append((bl, b.length))
    if lam <= 1.0:
        raise MapFormError(f"map expansion inf|f'| = {lam} <= 1")
    omega = discontinuities(m)
    if not omega:
        d_omega = math.inf
    elif len(omega) == 1:
        d_omega = 1.0
    else:
        gaps = [omega[i + 1] - omega[i] for i in range(len(omega) - 1)]
        gaps.append(1.0 - omega[-1] + omega[0])
        d_omega = min(gaps)
    return MapAnalysis(
        lambda_min=lam,
        M0=m0,
        A=sup_d2 / lam ** 2 + 2.0 * second,
        C1=sup_d2 / lam,
        omega=omega,
        d_omega=d_omega,
        sup_d2=sup_d2,
        branch_data=tuple(branch_data),
    )


def _aligned_shift(marks_f, marks_g) -> tuple[int, float]:
    """Cyclic pairing of marked points minimizing the worst arc distance."""
    k = len(marks_g)
    best_shift, best = 0, math.inf
    for r in range(k):
        d = max(circle_dist(marks_f[(i + r) % k], marks_g[i]) for i in range(k))
        if d < best:
            best, best_shift = d, r
    return best_shift, best


def neighborhood_distance(f: PiecewiseMap, g: PiecewiseMap,
                          grid: int = NEIGHBORHOOD_GRID) -> float:
    """Smallest radius eps* with f eps*-near g; math.inf if incomparable.

    eps* is the max of (i) the arc distances between corresponding marked
    points and (ii) the per-interval C2 norms (sup|h| + sup|h'| + sup|h''|)
    of f o xi - g, where xi maps each arc of g affinely onto the matching
    arc of f.  Incomparable when branch counts differ or eps* reaches a
    quarter of the minimal gap between g's genuine discontinuities.
    """
    if len(f.branches) != len(g.branches):
        return math.inf
    cap = 0.25 * analyze(g).d_omega
    marks_g = g.marked_points
    marks_f = f.marked_points
    shift, part1 = _aligned_shift(marks_f, marks_g)
    if part1 >= cap:
        return math.inf
    k = len(marks_g)
    worst = part1
    for i in range(k):
        gb = g.branches[i]
        fb = f.branches[(i + shift) % k]
        len_g = gb.length
        len_f = fb.length
        sigma = len_f / len_g
        xs = gb.lo + len_g * np.linspace(0.0, 1.0, grid + 1)
        # Anchor xi at the left marks; the last arc of f may be traversed
        # beyond 1.0, where the analytic lift still applies.
        y0 = fb.lo
        ys = y0 + sigma * (xs - gb.lo)
        gv = gb.lift(xs)
        fv = fb.lift(ys)
        h = fv - gv
        h = h - round(float(h[0]))
        h = np.abs(h)
        h1 = np.abs(sigma * fb.deriv(ys) - gb.deriv(xs))
        h2 = np.abs(sigma ** 2 * fb.deriv2(ys) - gb.deriv2(xs))
        worst = max(worst, float(h.max() + h1.max() + h2.max()))
        if worst >= cap:
            return math.inf
    return worst


# --- Builders for the map families used throughout ---------------------------


def affine_map(slope: float, offset: float = 0.0,
               marks: tuple[float, ...] | None = None) -> PiecewiseMap:
    """x -> slope*x + offset (mod 1).

    Default marks are the natural breakpoints {0} plus the interior points
    where the lift crosses an integer, so each branch image stays within
    one unit interval.
    """
    if marks is None:
        pts = {0.0}
        k_lo = math.floor(offset)
        k_hi = math.ceil(slope + offset)
        for k in range(k_lo, k_hi + 1):
            x = (k - offset) / slope
            if 0.0 < x < 1.0:
                pts.add(x)
        marks = tuple(sorted(pts))
    cuts = list(marks) + [1.0]
    return PiecewiseMap(tuple(
        BranchSpec(cuts[i], cuts[i + 1], slope, offset) for i in range(len(marks))
    ))


def sine_map(slope: float, amplitude: float, offset: float = 0.0,
             marks: tuple[float, ...] = (0.0, 0.5)) -> PiecewiseMap:
    """x -> slope*x + offset + amplitude*sin(2 pi x) (mod 1)."""
    cuts = list(marks) + [1.0]
    return PiecewiseMap(tuple(
        BranchSpec(cuts[i], cuts[i + 1], slope, offset, amplitude)
        for i in range(len(marks))
    ))


def doubling_map() -> PiecewiseMap:
    return affine_map(2.0, marks=(0.0, 0.5))


def slope25_map() -> PiecewiseMap:
    """x -> 2.5 x (mod 1) on its three natural branches."""
    return affine_map(2.5)


def slope3_two_branch() -> PiecewiseMap:
    return affine_map(3.0, marks=(0.0, 0.5))


def two_slope_wrap_map() -> PiecewiseMap:
    """3x mod 1 on [0, 1/2), 2.5x + 0.1 mod 1 on [1/2, 1); discontinuous."""
    return PiecewiseMap((
        BranchSpec(0.0, 0.5, 3.0),
        BranchSpec(0.5, 1.0, 2.5, 0.1),
    ))


def map_to_dict(m: PiecewiseMap) -> dict:
    return {
        "branches": [
            {"lo": b.lo, "hi": b.hi, "slope": b.slope,
             "offset": b.offset, "amplitude": b.amplitude}
            for b in m.branches
        ]
    }


def map_from_dict(spec: dict) -> PiecewiseMap:
    """Build a map from a config dict (named form or explicit branches)."""
    if "branches" in spec:
        return PiecewiseMap(tuple(
            BranchSpec(b["lo"], b["hi"], b["slope"],
                       b.get("offset", 0.0), b.get("amplitude", 0.0))
            for b in spec["branches"]
        ))
    form = spec.get("form", "affine")
    marks = spec.get("marks")
    if marks is not None:
        marks = tuple(float(x) for x in marks)
    if form == "affine":
        return affine_map(spec["slope"], spec.get("offset", 0.0), marks)
    if form == "sine":
        return sine_map(spec["slope"], spec["amplitude"], spec.get("offset", 0.0),
                        marks if marks is not None else (0.0, 0.5))
    if form == "doubling":
        return doubling_map()
    if form == "slope25":
        return slope25_map()
    if form == "slope3-two-branch":
        return slope3_two_branch()
    if form == "two-slope-wrap":
        return two_slope_wrap_map()
    raise MapFormError(f"unknown map form {form!r}")
