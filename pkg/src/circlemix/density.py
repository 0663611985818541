"""Probability densities on a uniform circle grid.

A density is a nonnegative piecewise-linear periodic function given by its
samples at x_i = i/G (G a power of two), with unit trapezoidal integral.
On this periodic uniform grid the trapezoid rule reduces to the sample
mean, and the total variation of the interpolant is the exact cyclic sum
of |differences|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INTEGRAL_TOL = 1e-9


def _check_grid(G: int) -> None:
    if G < 2 or (G & (G - 1)) != 0:
        raise ValueError(f"grid size {G} must be a power of two >= 2")


@dataclass(frozen=True, eq=False)
class Density:
    """Unit-mass density sampled on the grid i/G."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        _check_grid(arr.shape[0] if arr.ndim == 1 else 0)
        if np.any(arr < 0.0):
            raise ValueError("density samples must be nonnegative")
        total = float(arr.mean())
        if abs(total - 1.0) > INTEGRAL_TOL:
            raise ValueError(f"density integral {total} is not 1 within {INTEGRAL_TOL}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    # --- construction ---------------------------------------------------

    @classmethod
    def from_samples(cls, samples) -> "Density":
        """Normalize arbitrary nonnegative samples to unit integral."""
        arr = np.asarray(samples, dtype=float)
        total = float(arr.mean())
        if total <= 0.0:
            raise ValueError("cannot normalize: integral <= 0")
        return cls(arr / total)

    @classmethod
    def uniform(cls, G: int) -> "Density":
        return cls(np.ones(G))

    @classmethod
    def sine(cls, G: int, k: int = 1, amplitude: float = 0.5) -> "Density":
        if not abs(amplitude) < 1.0:
            raise ValueError("sine preset needs |amplitude| < 1")
        x = np.arange(G) / G
        return cls(1.0 + amplitude * np.sin(2.0 * math.pi * k * x))

    @classmethod
    def cosine(cls, G: int, k: int = 1, amplitude: float = 0.4) -> "Density":
        if not abs(amplitude) < 1.0:
            raise ValueError("cosine preset needs |amplitude| < 1")
        x = np.arange(G) / G
        return cls(1.0 + amplitude * np.cos(2.0 * math.pi * k * x))

    @classmethod
    def step(cls, G: int, levels) -> "Density":
        """Piecewise-constant levels on equal arcs, normalized."""
        levels = np.asarray(levels, dtype=float)
        if np.any(levels < 0.0):
            raise ValueError("step levels must be nonnegative")
        idx = (np.arange(G) * len(levels)) // G
        return cls.from_samples(levels[idx])

    @classmethod
    def from_function(cls, G: int, fn) -> "Density":
        return cls.from_samples(fn(np.arange(G) / G))

    @classmethod
    def random_bv(cls, G: int, a: float, rng: np.random.Generator) -> "Density":
        """Seeded rough test density with total variation ~0.9*a (<= a).

        Random plateaus (some pinned to zero) plus fine-scale noise give a
        raw profile whose variation exceeds the target; blending toward
        the uniform density scales variation linearly without touching the
        integral or nonnegativity.
        """
        if a <= 0:
            raise ValueError("variation bound must be positive")
        n_plateau = int(rng.integers(4, 10))
        cuts = np.sort(rng.integers(0, G, n_plateau))
        levels = rng.uniform(0.0, 2.0, n_plateau)
        levels[rng.uniform(size=n_plateau) < 0.2] = 0.0
        idx = np.searchsorted(cuts, np.arange(G), side="right") % n_plateau
        raw = levels[idx] + rng.uniform(0.3, 1.0) * rng.uniform(0.0, 1.0, G)
        mean = raw.mean()
        if mean <= 0.0:
            raw = np.ones(G)
            mean = 1.0
        raw = raw / mean
        v = float(np.abs(np.diff(raw, append=raw[:1])).sum())
        theta = min(1.0, 0.9 * a / v) if v > 0 else 0.0
        return cls(1.0 + theta * (raw - 1.0))

    # --- basic quantities -------------------------------------------------

    @property
    def G(self) -> int:
        return self.samples.shape[0]

    def grid(self) -> np.ndarray:
        return np.arange(self.G) / self.G

    def integral(self) -> float:
        """Trapezoidal integral over the circle (= sample mean on this grid)."""
        return float(self.samples.mean())

    def l1_distance(self, other: "Density") -> float:
        if self.G != other.G:
            raise ValueError("mismatched grid sizes")
        return float(np.abs(self.samples - other.samples).mean())

    def variation(self) -> float:
        """Exact total variation of the piecewise-linear interpolant."""
        s = self.samples
        return float(np.abs(np.roll(s, -1) - s).sum())

    def min_value(self) -> float:
        return float(self.samples.min())

    def interp(self, xs: np.ndarray) -> np.ndarray:
        """Periodic linear interpolation at arbitrary circle points."""
        G = self.G
        pos = np.asarray(xs, dtype=float) * G
        i0 = np.floor(pos).astype(np.int64) % G
        frac = pos - np.floor(pos)
        s = self.samples
        return s[i0] * (1.0 - frac) + s[(i0 + 1) % G] * frac

    def bin_masses(self, B: int) -> np.ndarray:
        """Exact per-bin integrals of the interpolant over [j/B, (j+1)/B)."""
        G = self.G
        if B < 1 or G % B != 0:
            raise ValueError("B must divide G")
        m = G // B
        s = self.samples
        blocks = s.reshape(B, m)
        right_edges = s[(np.arange(1, B + 1) * m) % G]
        return (blocks.sum(axis=1) - 0.5 * blocks[:, 0] + 0.5 * right_edges) / G

    # --- cone / matching primitives --------------------------------------

    def ratio_class_L(self, eps_loc: float) -> float:
        """Least L with |phi(x)/phi(y) - 1| <= L d(x,y) over grid pairs with
        circular distance < eps_loc.  +inf if any sample vanishes."""
        if not 0.0 < eps_loc < 0.25:
            raise ValueError("eps_loc must lie in (0, 1/4)")
        s = self.samples
        if np.any(s <= 0.0):
            return math.inf
        G = self.G
        kmax = math.ceil(eps_loc * G) - 1
        best = 0.0
        for k in range(1, kmax + 1):
            d = k / G
            r = np.roll(s, -k) / s
            m = max(float(np.abs(r - 1.0).max()), float(np.abs(1.0 / r - 1.0).max()))
            best = max(best, m / d)
        return best

    def match_subtract(self, kappa: float, fraction: float) -> "Density":
        """(phi - fraction*kappa) / (1 - fraction*kappa).

        The subtracted constant must not exceed the minimum, so the result
        stays a nonnegative unit-mass density.
        """
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        c = fraction * kappa
        if c <= 0.0:
            raise ValueError("subtracted amount must be positive")
        if c > self.min_value():
            raise ValueError(
                f"subtraction {c} exceeds the density minimum {self.min_value()}")
        if c >= 1.0:
            raise ValueError("subtracted amount must be < 1")
        return Density((self.samples - c) / (1.0 - c))

    # --- serialization ----------------------------------------------------

    def to_csv(self, path) -> None:
        xs = self.grid()
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("x,value\n")
            for x, v in zip(xs, self.samples):
                fh.write("%.17g,%.17g\n" % (x, v))

    @classmethod
    def from_csv(cls, path) -> "Density":
        vals = []
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline()
            if not header.startswith("x,"):
                raise ValueError("bad density CSV header")
            for line in fh:
                _, v = line.rstrip("\n").split(",")
                vals.append(float(v))
        return cls(np.array(vals))
