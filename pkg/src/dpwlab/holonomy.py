"""Path integration of dL = L*xi in the punctured plane.

The integrator is an embedded Dormand-Prince 5(4) pair with a standard
proportional step controller.  States are (..., 2, 2) complex arrays, so a
whole circle grid of lambda values can be advanced in one batched run (the
per-lambda systems are independent; sharing the step sequence only makes
the controller conservative).  The determinant is monitored along the way
and never renormalized.

Monodromy of a loop about the origin is reported on a full lambda circle
grid together with distances to +-id, traces, and a spectral estimate of
the t-derivative (lambda = exp(i t)).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import StepUnderflow
from .loops import CircleGrid, fro
from .potentials import _inv2

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                   187 / 2100, 1 / 40])

MIN_STEP = 1e-14


class BranchTracker:
    """Continuous determination of log z along a path.

    Steps must be small enough that consecutive points subtend less than
    pi at the origin, which the adaptive integrator guarantees in practice.
    """

    def __init__(self, z_start, log_start=None):
        self.z = complex(z_start)
        self.log = complex(np.log(self.z)) if log_start is None else complex(log_start)
        self.log0 = self.log

    def advance(self, z_new):
        z_new = complex(z_new)
        self.log += complex(np.log(z_new / self.z))
        self.z = z_new
        return self.log

    @property
    def delta(self):
        """Accumulated change of log z since the start."""
        return self.log - self.log0


@dataclass(frozen=True)
class LineSegment:
    z0: complex
    z1: complex

    def point(self, s):
        return self.z0 + s * (self.z1 - self.z0)

    def velocity(self, s):
        return self.z1 - self.z0

    def min_abs(self):
        d = self.z1 - self.z0
        den = abs(d) ** 2
        if den == 0:
            return abs(self.z0)
        s = -(self.z0.real * d.real + self.z0.imag * d.imag) / den
        s = min(1.0, max(0.0, s))
        return abs(self.point(s))


@dataclass(frozen=True)
class ArcSegment:
    center: complex
    radius: float
    t0: float
    t1: float

    def point(self, s):
        t = self.t0 + s * (self.t1 - self.t0)
        return self.center + self.radius * np.exp(1j * t)

    def velocity(self, s):
        t = self.t0 + s * (self.t1 - self.t0)
        return 1j * self.radius * (self.t1 - self.t0) * np.exp(1j * t)

    def min_abs(self):
        if self.center == 0:
            return self.radius
        # closest point of the full circle to the origin, if the arc reaches it
        phi = np.angle(-self.center)
        span = abs(self.t1 - self.t0)
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        if span >= 2 * np.pi:
            reach = True
        else:
            k = np.floor((lo - phi) / (2 * np.pi))
            reach = any(lo <= phi + 2 * np.pi * (k + j) <= hi for j in (0, 1, 2))
        best = min(abs(self.point(0.0)), abs(self.point(1.0)))
        if reach:
            best = min(best, abs(abs(self.center) - self.radius))
        return best


class PathSpec:
    """Contiguous segments in C \\ {0} with a clearance requirement."""

    def __init__(self, segments, eps_path=1e-3):
        if not segments:
            raise ValueError("empty path")
        for a, b in zip(segments, segments[1:]):
            if abs(a.point(1.0) - b.point(0.0)) > 1e-12:
                raise ValueError("segments are not contiguous")
        clearance = min(s.min_abs() for s in segments)
        if clearance < eps_path:
            raise ValueError(
                f"path clearance {clearance:.3e} below eps_path {eps_path:g}")
        self.segments = list(segments)
        self.eps_path = eps_path

    @property
    def base_point(self):
        return self.segments[0].point(0.0)

    @property
    def end_point(self):
        return self.segments[-1].point(1.0)

    def is_closed(self, tol=1e-12):
        return abs(self.base_point - self.end_point) < tol

    def winding_number(self):
        """Turns about the origin, from a branch-tracked sampling."""
        tracker = BranchTracker(self.base_point)
        for seg in self.segments:
            if isinstance(seg, ArcSegment):
                n = max(16, int(8 * abs(seg.t1 - seg.t0)) + 1)
            else:
                n = 16
            for s in np.linspace(0, 1, n + 1)[1:]:
                tracker.advance(seg.point(s))
        return tracker.delta.imag / (2 * np.pi)

    @classmethod
    def circle(cls, z0, turns=1, eps_path=1e-3):
        """Counterclockwise loop(s) at radius |z0| starting from z0."""
        r = abs(z0)
        t0 = np.angle(z0)
        return cls([ArcSegment(0.0, r, t0, t0 + 2 * np.pi * turns)], eps_path=eps_path)

    @classmethod
    def line(cls, z0, z1, eps_path=1e-3):
        return cls([LineSegment(z0, z1)], eps_path=eps_path)


@dataclass
class IntegrationResult:
    endpoint: np.ndarray
    det_drift: float
    n_steps: int
    n_rejected: int
    log_end: complex


def _segment_rhs(xi, seg, lam):
    def rhs(s, y):
        z = seg.point(s)
        return (y @ xi.eval(z, lam)) * seg.velocity(s)
    return rhs


def _advance_segment(rhs, y, tol, min_step, tracker=None, seg=None):
    """One adaptive DP5(4) sweep over s in [0, 1]."""
    s = 0.0
    h = 0.1
    n_acc = n_rej = 0
    k = [None] * 7
    while s < 1.0:
        h = min(h, 1.0 - s)
        if h < min_step:
            raise StepUnderflow(f"step {h:.3e} below {min_step:g}")
        k[0] = rhs(s, y)
        for i in range(1, 7):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_DP_A[i]))
            k[i] = rhs(s + _DP_C[i] * h, yi)
        y5 = y + h * sum(b * k[j] for j, b in enumerate(_DP_B5) if b != 0.0)
        y4 = y + h * sum(b * k[j] for j, b in enumerate(_DP_B4) if b != 0.0)
        scale = tol * max(1.0, float(fro(y).max()))
        err = float(fro(y5 - y4).max()) / scale
        if err <= 1.0:
            s += h
            y = y5
            n_acc += 1
            if tracker is not None:
                tracker.advance(seg.point(s))
        else:
            n_rej += 1
        factor = 0.9 * (1.0 / err) ** 0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
    return y, n_acc, n_rej


def integrate(xi, path, l0, lam, tol=1e-10, min_step=MIN_STEP):
    """Endpoint of the solution of dL = L*xi along ``path`` with L(start) = l0.

    ``lam`` may be a scalar or an array; with an array the state is batched
    as (..., 2, 2) and the step controller uses the worst error over the
    batch.  Determinant drift is measured, never corrected.
    """
    lam = np.asarray(lam, dtype=complex)
    y = np.asarray(l0, dtype=complex)
    if y.shape == (2, 2) and lam.shape != ():
        y = np.broadcast_to(y, lam.shape + (2, 2)).copy()
    det0 = np.linalg.det(y)
    # paths leading in from the origin (holomorphic potentials) carry no branch
    tracker = BranchTracker(path.base_point) if path.base_point != 0 else None
    steps = rejected = 0
    for seg in path.segments:
        rhs = _segment_rhs(xi, seg, lam)
        y, na, nr = _advance_segment(rhs, y, tol, min_step, tracker, seg)
        steps += na
        rejected += nr
    drift = float(np.abs(np.linalg.det(y) - det0).max())
    log_end = tracker.log if tracker is not None else complex("nan")
    return IntegrationResult(endpoint=y, det_drift=drift, n_steps=steps,
                             n_rejected=rejected, log_end=log_end)


def spectral_t_derivative(values):
    """d/dt of smooth circle-grid data via the FFT; values is (M, ...)."""
    m = values.shape[0]
    freq = np.fft.fftfreq(m, d=1.0 / m)  # integer frequencies, signed
    hat = np.fft.fft(values, axis=0)
    shape = (m,) + (1,) * (values.ndim - 1)
    return np.fft.ifft(1j * freq.reshape(shape) * hat, axis=0)


@dataclass
class MonodromyReport:
    grid: CircleGrid
    z0: complex
    matrices: np.ndarray      # (M, 2, 2)
    dist_plus: np.ndarray     # ||M - id||_F per sample
    dist_minus: np.ndarray    # ||M + id||_F per sample
    traces: np.ndarray
    det_defect: np.ndarray
    dmat_dt: np.ndarray       # (M, 2, 2), spectral d/dt

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "M11re", "M11im", "M12re", "M12im",
                        "M21re", "M21im", "M22re", "M22im",
                        "rho_plus", "rho_minus", "trace_re", "trace_im",
                        "dt_norm"])
            for m in range(self.grid.m):
                mat = self.matrices[m]
                row = [self.grid.theta[m]]
                for i in range(2):
                    for j in range(2):
                        row += [mat[i, j].real, mat[i, j].imag]
                row += [self.dist_plus[m], self.dist_minus[m],
                        self.traces[m].real, self.traces[m].imag,
                        float(fro(self.dmat_dt[m]))]
                w.writerow([f"{v:.17g}" for v in row])


def _initial_data(l0, grid):
    if l0 is None:
        return np.broadcast_to(np.eye(2, dtype=complex), (grid.m, 2, 2)).copy()
    if callable(l0):
        return np.stack([np.asarray(l0(lam), dtype=complex) for lam in grid.points])
    arr = np.asarray(l0, dtype=complex)
    if arr.shape == (2, 2):
        return np.broadcast_to(arr, (grid.m, 2, 2)).copy()
    if arr.shape != (grid.m, 2, 2):
        raise ValueError("initial data must be (2,2), (M,2,2) or callable")
    return arr.copy()


def monodromy(xi, z0, grid, l0=None, tol=1e-10, turns=1):
    """Monodromy report for the loop |z| = |z0| traversed counterclockwise.

    The matrices are endpoint * l0^{-1} per lambda grid sample.  The base
    point convention is z0 on the positive real axis; moving the base point
    conjugates every matrix by the connecting parallel transport.
    """
    l0m = _initial_data(l0, grid)
    path = PathSpec.circle(z0, turns=turns)
    res = integrate(xi, path, l0m, grid.points, tol=tol)
    mats = res.endpoint @ _inv2(l0m)
    eye = np.eye(2, dtype=complex)
    return MonodromyReport(
        grid=grid, z0=complex(z0), matrices=mats,
        dist_plus=fro(mats - eye), dist_minus=fro(mats + eye),
        traces=np.trace(mats, axis1=-2, axis2=-1),
        det_defect=np.abs(np.linalg.det(mats) - 1.0),
        dmat_dt=spectral_t_derivative(mats),
    )


def grid_index(grid, lam0, tol=1e-9):
    idx = int(np.argmin(np.abs(grid.points - lam0)))
    if abs(grid.points[idx] - lam0) > tol:
        raise ValueError(f"lambda0 = {lam0} is not on the grid")
    return idx


def closing_residual(report, lam0):
    """(rho_plus, rho_minus, delta) at a grid point lambda0.

    The surface closes at lambda0 iff min(rho_plus, rho_minus) and delta
    are both below the closing tolerance (see ``closes_at``).
    """
    idx = grid_index(report.grid, lam0)
    return (float(report.dist_plus[idx]), float(report.dist_minus[idx]),
            float(fro(report.dmat_dt[idx])))


def closes_at(report, lam0, tol_close=1e-6):
    rho_p, rho_m, delta = closing_residual(report, lam0)
    return min(rho_p, rho_m) < tol_close and delta < tol_close
