"""Arithmetic for twisted SL(2,C) matrix loops.

A loop is a 2x2 complex matrix Laurent polynomial in the circle variable
lambda.  It is held in a dual representation:

* a finite coefficient table ``{degree: 2x2 array}`` on which products,
  adjoints and lambda-derivatives act exactly, and
* optional samples on an equispaced circle grid, used for pointwise
  operations with unbounded coefficient support (inversion, positivity
  tests) and recovered to coefficients by a DFT.

The twisting convention: diagonal entries are even functions of lambda,
off-diagonal entries are odd.  Twistedness is *checked* where a contract
needs it (``require_twisted``), not enforced at construction, so constant
unitary matrices and other untwisted data can share the type.

All values are immutable by convention; every operation returns a new
object, so loops are safe to share across threads.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularOnCircle

DEFAULT_BAND = 32      # coefficients kept on each side of degree 0
DEFAULT_GRID_M = 256   # circle sample count
DROP_TOL = 1e-14       # coefficient norms below this are dropped

ID2 = np.eye(2, dtype=complex)
ZERO2 = np.zeros((2, 2), dtype=complex)


def mat2(a11, a12, a21, a22):
    return np.array([[a11, a12], [a21, a22]], dtype=complex)


def fro(m):
    """Frobenius norm, also for stacked (..., 2, 2) arrays."""
    return np.sqrt((np.abs(m) ** 2).sum(axis=(-2, -1)))


class CircleGrid:
    """M equally spaced points exp(2*pi*i*m/M) on the unit circle."""

    def __init__(self, m):
        if m < 2 or m % 2 != 0:
            raise ValueError("grid size must be a positive even integer")
        self.m = m
        self.theta = 2.0 * np.pi * np.arange(m) / m
        self.points = np.exp(1j * self.theta)

    def nyquist_ok(self, min_deg, max_deg):
        return self.m >= 2 * (max_deg - min_deg) + 2

    def __eq__(self, other):
        return isinstance(other, CircleGrid) and other.m == self.m

    def __repr__(self):
        return f"CircleGrid(m={self.m})"


class LoopMatrix:
    """2x2 matrix Laurent polynomial with optional circle samples.

    Parameters
    ----------
    coeffs : dict
        Map degree -> (2, 2) complex array.  Copied and cleaned of entries
        below ``DROP_TOL`` (dropped mass is recorded).
    samples, grid : optional
        Cached values on ``grid.points``; must agree with the coefficients
        (see ``check_consistency``).
    """

    def __init__(self, coeffs, samples=None, grid=None, dropped_mass=0.0):
        clean = {}
        dropped = float(dropped_mass)
        for n, m in coeffs.items():
            a = np.asarray(m, dtype=complex)
            if a.shape != (2, 2):
                raise ValueError("coefficients must be 2x2")
            nrm = fro(a)
            if nrm < DROP_TOL:
                dropped += nrm
            else:
                clean[int(n)] = a.copy()
        self.coeffs = clean
        self.dropped_mass = dropped
        if samples is not None and grid is None:
            raise ValueError("samples require a grid")
        self.samples = None if samples is None else np.asarray(samples, dtype=complex)
        self.grid = grid

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, m):
        return cls({0: m})

    @classmethod
    def identity(cls):
        return cls({0: ID2})

    @classmethod
    def zero(cls):
        return cls({})

    @classmethod
    def from_samples(cls, samples, grid, band=None, drop=DROP_TOL):
        """Recover a loop from circle samples by DFT.

        The degrees kept are ``[-band, band]`` intersected with the grid's
        resolvable range [-M/2, M/2).  Mass in dropped bins is reported on
        the result, which also keeps the exact samples.
        """
        samples = np.asarray(samples, dtype=complex)
        m = grid.m
        if samples.shape != (m, 2, 2):
            raise ValueError("samples must have shape (M, 2, 2)")
        bins = np.fft.fft(samples, axis=0) / m  # bins[k] ~ coefficient of deg k mod M
        if band is None:
            band = m // 2
        band = min(band, m // 2)
        coeffs = {}
        dropped = 0.0
        for k in range(m):
            deg = k if k < m // 2 else k - m
            nrm = fro(bins[k])
            if abs(deg) > band:
                dropped += nrm
                continue
            if nrm >= drop:
                coeffs[deg] = bins[k]
            else:
                dropped += nrm
        return cls(coeffs, samples=samples, grid=grid, dropped_mass=dropped)

    # -- basic queries ---------------------------------------------------------

    @property
    def min_deg(self):
        return min(self.coeffs) if self.coeffs else 0

    @property
    def max_deg(self):
        return max(self.coeffs) if self.coeffs else 0

    def coeff(self, n):
        return self.coeffs.get(n, ZERO2)

    def coeff_norm(self):
        """Sum of Frobenius norms of the coefficients (Wiener-style size)."""
        return sum(float(fro(c)) for c in self.coeffs.values())

    def eval(self, lam):
        """Evaluate sum_n coeffs[n] * lam**n; lam may be an array."""
        lam = np.asarray(lam, dtype=complex)
        out = np.zeros(lam.shape + (2, 2), dtype=complex)
        for n, c in self.coeffs.items():
            out += np.multiply.outer(lam ** n, c)
        return out

    def with_samples(self, grid=None):
        """Return a copy carrying samples on ``grid`` (default module grid)."""
        if self.samples is not None and (grid is None or grid == self.grid):
            return self
        grid = grid or CircleGrid(DEFAULT_GRID_M)
        return LoopMatrix(self.coeffs, samples=self.eval(grid.points), grid=grid,
                          dropped_mass=self.dropped_mass)

    def check_consistency(self, tol=1e-12):
        """Relative sup mismatch between samples and coefficient evaluation."""
        if self.samples is None:
            return 0.0
        direct = self.eval(self.grid.points)
        scale = max(float(fro(self.samples).max()), 1.0)
        err = float(fro(direct - self.samples).max()) / scale
        if err > tol:
            raise ValueError(f"sample/coefficient mismatch {err:.3e} > {tol:g}")
        return err

    def __repr__(self):
        degs = sorted(self.coeffs)
        return f"LoopMatrix(degrees={degs}, samples={'yes' if self.samples is not None else 'no'})"


def omega():
    """The lower-cell representative [[0, -lambda], [1/lambda, 0]]."""
    return LoopMatrix({1: mat2(0, -1, 0, 0), -1: mat2(0, 0, 1, 0)})


# -- core operations ----------------------------------------------------------


def loop_mul(a, b, band=None):
    """Cauchy product of coefficient tables.

    The result is truncated to degrees [-band, band] (``DEFAULT_BAND`` when
    band is None); the norm of everything discarded, including sub-DROP_TOL
    entries, is reported as ``dropped_mass`` on the result.
    """
    if band is None:
        band = DEFAULT_BAND
    acc = {}
    for na, ca in a.coeffs.items():
        for nb, cb in b.coeffs.items():
            n = na + nb
            prod = ca @ cb
            if n in acc:
                acc[n] = acc[n] + prod
            else:
                acc[n] = prod
    dropped = 0.0
    kept = {}
    for n, c in acc.items():
        if abs(n) > band:
            dropped += float(fro(c))
        else:
            kept[n] = c
    samples = grid = None
    if a.samples is not None and b.samples is not None and a.grid == b.grid:
        samples = a.samples @ b.samples
        grid = a.grid
    out = LoopMatrix(kept, dropped_mass=dropped)
    if samples is not None and out.min_deg >= -band and out.max_deg <= band:
        out.samples = samples
        out.grid = grid
    return out


def loop_add(a, b, scale=1.0):
    acc = dict(a.coeffs)
    for n, c in b.coeffs.items():
        acc[n] = acc.get(n, ZERO2) + scale * c
    return LoopMatrix(acc)


def loop_scale(a, s):
    return LoopMatrix({n: s * c for n, c in a.coeffs.items()})


def loop_eval(a, lam):
    return a.eval(lam)


def loop_inverse(a, grid=None, band=None):
    """Pointwise inversion on circle samples, recovered by DFT.

    Raises SingularOnCircle when any sample determinant falls below 1e-13.
    """
    aw = a.with_samples(grid)
    det = (aw.samples[:, 0, 0] * aw.samples[:, 1, 1]
           - aw.samples[:, 0, 1] * aw.samples[:, 1, 0])
    small = np.abs(det).min()
    if small < 1e-13:
        raise SingularOnCircle(f"|det| = {small:.3e} at a circle sample")
    inv = np.empty_like(aw.samples)
    inv[:, 0, 0] = aw.samples[:, 1, 1]
    inv[:, 1, 1] = aw.samples[:, 0, 0]
    inv[:, 0, 1] = -aw.samples[:, 0, 1]
    inv[:, 1, 0] = -aw.samples[:, 1, 0]
    inv /= det[:, None, None]
    return LoopMatrix.from_samples(inv, aw.grid, band=band)


def loop_star(a):
    """Coefficient at n = adjoint of the coefficient at -n.

    On the unit circle this is the pointwise conjugate transpose.
    """
    coeffs = {-n: c.conj().T for n, c in a.coeffs.items()}
    samples = grid = None
    if a.samples is not None:
        samples = a.samples.conj().transpose(0, 2, 1)
        grid = a.grid
    out = LoopMatrix(coeffs)
    out.samples, out.grid = samples, grid
    return out


def lambda_derivative(a):
    """Exact d/dlambda on the coefficient table."""
    return LoopMatrix({n - 1: n * c for n, c in a.coeffs.items() if n != 0})


def loop_dist(a, b, grid=None):
    """Sup of Frobenius distance over circle samples."""
    grid = grid or CircleGrid(DEFAULT_GRID_M)
    return float(fro(a.eval(grid.points) - b.eval(grid.points)).max())


# -- twisting ------------------------------------------------------------------


def parity_defect(a):
    """Largest entry violating the twisted zero pattern."""
    worst = 0.0
    for n, c in a.coeffs.items():
        if n % 2 == 0:
            worst = max(worst, abs(c[0, 1]), abs(c[1, 0]))
        else:
            worst = max(worst, abs(c[0, 0]), abs(c[1, 1]))
    return worst


def is_twisted(a, tol=1e-12):
    return parity_defect(a) <= tol


def require_twisted(a, tol=1e-12, what="loop"):
    d = parity_defect(a)
    if d > tol:
        raise ValueError(f"{what} is not twisted: parity defect {d:.3e}")


# -- text dump/load -------------------------------------------------------------


def dump_coeffs(a, path):
    """One line per degree: n followed by 8 reals (row-major re, im)."""
    with open(path, "w") as fh:
        for n in sorted(a.coeffs):
            c = a.coeffs[n]
            vals = []
            for i in range(2):
                for j in range(2):
                    vals.append(c[i, j].real)
                    vals.append(c[i, j].imag)
            fh.write(str(n) + " " + " ".join(f"{v:.17g}" for v in vals) + "\n")


def load_coeffs(path):
    coeffs = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 9:
                raise ValueError(f"bad coefficient line: {line!r}")
            n = int(parts[0])
            v = [float(p) for p in parts[1:]]
            coeffs[n] = mat2(v[0] + 1j * v[1], v[2] + 1j * v[3],
                             v[4] + 1j * v[5], v[6] + 1j * v[7])
    return LoopMatrix(coeffs)
