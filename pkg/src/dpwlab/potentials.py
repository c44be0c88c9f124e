"""The off-diagonal potential family, gauges, and the k = -2 reduction chain.

A potential here is the dz-coefficient of a holomorphic connection form,
evaluated pointwise in (z, lambda).  Pointwise evaluation keeps gauge
identities exact in floating point even for gauges whose lambda-dependence
is not polynomial (the Omega^(1/4) factors of the reduction chain), while
``loop_value`` recovers a coefficient table by DFT whenever a banded view
is wanted.

Branch conventions: sqrt(z), log(z), sqrt(Omega) and Omega^(+-1/4) use
principal branches; working domains are kept off the negative real axis
in z.  See ``OmegaData``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BranchPointHit, SingularGauge, ZeroC
from .loops import CircleGrid, DEFAULT_GRID_M, LoopMatrix, fro

_OFF = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def _inv2(m):
    """Batched 2x2 inverse via the adjugate; m has shape (..., 2, 2)."""
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    small = np.abs(det).min()
    if small < 1e-13:
        raise SingularGauge(f"|det| = {small:.3e} at an evaluation point")
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out / det[..., None, None]


def _broadcast22(lam, build):
    """Assemble a (..., 2, 2) array from four scalar/array entry factories."""
    lam = np.asarray(lam, dtype=complex)
    out = np.zeros(lam.shape + (2, 2), dtype=complex)
    for (i, j), v in build.items():
        out[..., i, j] = v
    return out


class Potential:
    """dz-coefficient of a connection form; callable on (z, lambda).

    ``fn(z, lam)`` must accept a complex scalar z and scalar or array lam
    and return an array of shape lam.shape + (2, 2).
    """

    def __init__(self, fn, k=None, c=None, describe="potential"):
        self._fn = fn
        self.k = k
        self.c = c
        self.describe = describe

    def eval(self, z, lam):
        return self._fn(z, lam)

    def loop_value(self, z, grid=None, band=None):
        """Banded coefficient view at fixed z, recovered on a circle grid."""
        grid = grid or CircleGrid(DEFAULT_GRID_M)
        return LoopMatrix.from_samples(self.eval(z, grid.points), grid, band=band)

    def __repr__(self):
        return f"Potential({self.describe})"


class GaugeLoop:
    """Positive gauge loop with a hand-coded analytic z-derivative.

    Both ``value`` and ``dz_value`` are callables on (z, lam) returning
    (..., 2, 2) arrays.  The derivative is analytic per gauge; use
    ``derivative_defect`` to cross-check it against central differences.
    """

    def __init__(self, value, dz_value, describe="gauge"):
        self._value = value
        self._dz = dz_value
        self.describe = describe

    def eval(self, z, lam):
        return self._value(z, lam)

    def dz_eval(self, z, lam):
        return self._dz(z, lam)

    def loop_value(self, z, grid=None, band=None):
        grid = grid or CircleGrid(DEFAULT_GRID_M)
        return LoopMatrix.from_samples(self.eval(z, grid.points), grid, band=band)

    def derivative_defect(self, z_samples, lam_samples, eps=1e-5):
        """Sup distance between dz_value and a central difference."""
        worst = 0.0
        for z in np.atleast_1d(z_samples):
            fd = (self.eval(z + eps, lam_samples) - self.eval(z - eps, lam_samples)) / (2 * eps)
            worst = max(worst, float(fro(fd - self.dz_eval(z, lam_samples)).max()))
        return worst

    def positivity_defect(self, z, grid=None):
        """Mass the gauge carries on negative lambda degrees at z."""
        loop = self.loop_value(z, grid)
        return sum(float(fro(c)) for n, c in loop.coeffs.items() if n < 0)

    def __repr__(self):
        return f"GaugeLoop({self.describe})"


def identity_gauge():
    eye = np.eye(2, dtype=complex)

    def value(z, lam):
        lam = np.asarray(lam, dtype=complex)
        return np.broadcast_to(eye, lam.shape + (2, 2)).copy()

    def dz(z, lam):
        lam = np.asarray(lam, dtype=complex)
        return np.zeros(lam.shape + (2, 2), dtype=complex)

    return GaugeLoop(value, dz, "id")


def constant_diagonal_gauge(mu):
    """diag(mu, 1/mu), z-independent."""
    mu = complex(mu)

    def value(z, lam):
        return _broadcast22(lam, {(0, 0): mu, (1, 1): 1.0 / mu})

    def dz(z, lam):
        lam = np.asarray(lam, dtype=complex)
        return np.zeros(lam.shape + (2, 2), dtype=complex)

    return GaugeLoop(value, dz, f"diag({mu:g}, 1/{mu:g})" if mu.imag == 0 else "diag(mu,1/mu)")


# -- the z^k family -------------------------------------------------------------


def make_xi(k, c):
    """lambda^{-1} [[0, 1], [c z^k, 0]] dz."""
    k = int(k)
    c = complex(c)
    if c == 0:
        raise ZeroC("the potential constant c must be nonzero")

    def fn(z, lam):
        lam = np.asarray(lam, dtype=complex)
        return _broadcast22(lam, {(0, 1): 1.0 / lam, (1, 0): c * z ** k / lam})

    return Potential(fn, k=k, c=c, describe=f"xi_k(k={k}, c={c})")


def vacuum():
    """The constant off-diagonal potential; its surface is the round cylinder."""
    return make_xi(0, 1.0)


# -- gauge action and coordinate changes ----------------------------------------


def apply_gauge(xi, p):
    """p^{-1} xi p + p^{-1} dp, evaluated pointwise."""

    def fn(z, lam):
        pv = p.eval(z, lam)
        pinv = _inv2(pv)
        return pinv @ xi.eval(z, lam) @ pv + pinv @ p.dz_eval(z, lam)

    return Potential(fn, describe=f"({xi.describe}) gauged by {p.describe}")


def invert_z(xi):
    """Pullback under z -> 1/z: value(1/z) * d(1/z)/dz = -value(1/z)/z^2."""

    def fn(z, lam):
        return -xi.eval(1.0 / z, lam) / z ** 2

    return Potential(fn, describe=f"({xi.describe}) pulled back by z->1/z")


def scale_z(xi, alpha):
    """Pullback under z -> alpha*z."""
    alpha = complex(alpha)

    def fn(z, lam):
        return alpha * xi.eval(alpha * z, lam)

    return Potential(fn, describe=f"({xi.describe}) pulled back by z->{alpha}*z")


@dataclass(frozen=True)
class CoordinateScale:
    """The coordinate change z = alpha * w used alongside a constant gauge."""
    alpha: complex


def normalize_c(xi):
    """Remove the constant from a k = -1 potential by gauge + rescaling.

    With p = diag(mu, 1/mu) the potential becomes
    lambda^{-1} [[0, mu^{-2}], [c mu^2 / z, 0]] dz, and pulling back under
    z = alpha*w multiplies the upper entry by alpha while leaving the lower
    1/w shape.  Solving mu^{-2} alpha = 1 and c mu^2 = 1 gives
    mu = c^{-1/2}, alpha = 1/c.
    """
    if xi.k != -1:
        raise ValueError("normalize_c expects the k = -1 potential")
    c = complex(xi.c)
    mu = 1.0 / np.sqrt(c)  # principal branch
    alpha = 1.0 / c
    gauge = constant_diagonal_gauge(mu)
    normalized = scale_z(apply_gauge(xi, gauge), alpha)
    normalized.k, normalized.c = -1, 1.0
    return normalized, gauge, CoordinateScale(alpha)


# -- the degree shift k <-> -k-4 -------------------------------------------------


def shift_gauge():
    """[[i/z, 0], [-i*lambda, -i*z]]; det = 1, positive, twisted."""

    def value(z, lam):
        return _broadcast22(lam, {(0, 0): 1j / z, (1, 0): -1j * lam, (1, 1): -1j * z})

    def dz(z, lam):
        return _broadcast22(lam, {(0, 0): -1j / z ** 2, (1, 1): -1j + 0 * lam})

    return GaugeLoop(value, dz, "degree-shift gauge")


@dataclass
class KEquivalenceReport:
    k: int
    partner: int
    c: complex
    n_samples: int
    max_residual: float

    def passed(self, tol=1e-10):
        return self.max_residual < tol


def k_equivalence_certificate(k, c, n_samples=100, seed=0, rng=None):
    """Residuals of the claimed equivalence between degrees k and -k-4.

    Pulls xi_k back under z -> 1/z, applies the degree-shift gauge, and
    compares with xi_{-k-4} at random (z, lambda) samples.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    partner = -k - 4
    candidate = apply_gauge(invert_z(make_xi(k, c)), shift_gauge())
    target = make_xi(partner, c)
    worst = 0.0
    for _ in range(n_samples):
        z = rng.uniform(0.6, 1.4) * np.exp(1j * rng.uniform(-np.pi, np.pi))
        lam = np.exp(1j * rng.uniform(0, 2 * np.pi))
        worst = max(worst, float(fro(candidate.eval(z, lam) - target.eval(z, lam))))
    return KEquivalenceReport(k=k, partner=partner, c=complex(c),
                              n_samples=n_samples, max_residual=worst)


# -- the five-gauge reduction of k = -2 ------------------------------------------


class OmegaData:
    """Omega(lambda) = 1 + lambda^2/(4c) with principal fractional powers."""

    def __init__(self, c):
        self.c = complex(c)

    def omega(self, lam):
        lam = np.asarray(lam, dtype=complex)
        w = 1.0 + lam ** 2 / (4.0 * self.c)
        small = np.abs(w).min()
        if small < 1e-8:
            raise BranchPointHit(f"|Omega| = {small:.3e} on the working lambda set")
        return w

    def pow(self, lam, p):
        return self.omega(lam) ** p


def _gauge_p1():
    def value(z, lam):
        return _broadcast22(lam, {(0, 0): 1.0 + 0 * lam, (1, 0): -lam / (2 * z),
                                  (1, 1): 1.0 + 0 * lam})

    def dz(z, lam):
        return _broadcast22(lam, {(1, 0): lam / (2 * z ** 2)})

    return GaugeLoop(value, dz, "p1: shear by -lambda/(2z)")


def _gauge_p2():
    def value(z, lam):
        s = np.sqrt(z)
        return _broadcast22(lam, {(0, 0): s + 0 * lam, (1, 1): 1.0 / s + 0 * lam})

    def dz(z, lam):
        s = np.sqrt(z)
        return _broadcast22(lam, {(0, 0): 0.5 / s + 0 * lam,
                                  (1, 1): -0.5 / (s * z) + 0 * lam})

    return GaugeLoop(value, dz, "p2: diag(sqrt(z), 1/sqrt(z))")


def _gauge_p3(c):
    mu = complex(c) ** (-0.25)
    return constant_diagonal_gauge(mu)


def _gauge_p4(om):
    sc = np.sqrt(om.c)

    def value(z, lam):
        lam = np.asarray(lam, dtype=complex)
        u = lam / (2 * sc)
        return _broadcast22(lam, {(0, 0): om.pow(lam, 0.25),
                                  (0, 1): -u * om.pow(lam, -0.25),
                                  (1, 0): -u * om.pow(lam, 0.25),
                                  (1, 1): om.pow(lam, 0.75)})

    def dz(z, lam):
        lam = np.asarray(lam, dtype=complex)
        return np.zeros(lam.shape + (2, 2), dtype=complex)

    return GaugeLoop(value, dz, "p4: Omega mixing (z-independent)")


def _gauge_p5(om):
    sc = np.sqrt(om.c)

    def phi(z, lam):
        return sc * (1.0 - om.pow(lam, 0.5)) * np.log(z) / lam

    def value(z, lam):
        ph = phi(z, lam)
        ch, sh = np.cosh(ph), np.sinh(ph)
        return _broadcast22(lam, {(0, 0): ch, (0, 1): sh, (1, 0): sh, (1, 1): ch})

    def dz(z, lam):
        ph = phi(z, lam)
        dph = sc * (1.0 - om.pow(lam, 0.5)) / (lam * z)
        ch, sh = np.cosh(ph), np.sinh(ph)
        return _broadcast22(lam, {(0, 0): dph * sh, (0, 1): dph * ch,
                                  (1, 0): dph * ch, (1, 1): dph * sh})

    return GaugeLoop(value, dz, "p5: exp of the off-diagonal log correction")


@dataclass
class Section5Chain:
    c: float
    final: Potential
    gauges: list
    stages: list = field(repr=False)

    def final_residual(self, z_samples, lam_samples):
        """Sup distance of the final potential from sqrt(c)/(z*lambda) * offdiag(1,1)."""
        sc = np.sqrt(self.c)
        worst = 0.0
        for z in np.atleast_1d(z_samples):
            lam = np.asarray(lam_samples, dtype=complex)
            want = np.multiply.outer(sc / (lam * z), _OFF)
            worst = max(worst, float(fro(self.final.eval(z, lam) - want).max()))
        return worst


def section5_chain(c):
    """Apply the five reduction gauges to the k = -2 potential.

    Requires c > 0.  The chain ends at sqrt(c) * lambda^{-1} offdiag(1,1)
    dz/z; evaluation raises BranchPointHit if a lambda sample lands on a
    zero of Omega (only possible when c = 1/4 and lambda = +-i).
    """
    c = float(c)
    if c <= 0:
        raise ValueError("the reduction chain assumes c > 0")
    om = OmegaData(c)
    gauges = [_gauge_p1(), _gauge_p2(), _gauge_p3(c), _gauge_p4(om), _gauge_p5(om)]
    stages = [make_xi(-2, c)]
    for g in gauges:
        stages.append(apply_gauge(stages[-1], g))
    return Section5Chain(c=c, final=stages[-1], gauges=gauges, stages=stages)


def reduced_potential(c):
    """The endpoint of the reduction chain, sqrt(c) lambda^{-1} offdiag(1,1) dz/z."""
    sc = np.sqrt(float(c))

    def fn(z, lam):
        lam = np.asarray(lam, dtype=complex)
        return np.multiply.outer(sc / (lam * z), _OFF)

    return Potential(fn, describe=f"reduced k=-2 potential, c={c}")
