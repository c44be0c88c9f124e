"""Frame-to-ambient-space evaluation.

The su(2) <-> R^3 identification is fixed once: a traceless matrix S
corresponds to coordinates x via

    S = i * (x1 * sigma1 + x2 * sigma2 + x3 * sigma3),
    x_j = -Re(tr(i * S * sigma_j)) / 2.

With this choice the identity frame maps to (0, 0, -1/(2H)).  The
identification is a convention; every geometric check in the test suite
uses basis-invariant quantities (distances, radii, curvatures).

The Minkowski variant keeps the same extraction and tags x3 as the
timelike coordinate; it is only exercised with externally supplied
analytic frames, since no noncompact splitting is validated here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotUnitary, Singular
from .holonomy import spectral_t_derivative
from .loops import fro, lambda_derivative, loop_eval

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_PAULI = np.stack([SIGMA1, SIGMA2, SIGMA3])


@dataclass(frozen=True)
class AmbientPoint:
    x1: float
    x2: float
    x3: float
    signature: str = "euclidean"   # "euclidean" | "minkowski" (x3 timelike)

    def as_array(self):
        return np.array([self.x1, self.x2, self.x3])


def point_from_matrix(s, signature="euclidean"):
    """Coordinates of a (nearly) traceless matrix under the fixed basis."""
    x = -0.5 * np.real(np.trace(1j * s[..., None, :, :] @ _PAULI, axis1=-2, axis2=-1))
    if x.ndim == 1:
        return AmbientPoint(float(x[0]), float(x[1]), float(x[2]), signature)
    return x  # batched (..., 3) coordinate array


def matrix_from_point(p):
    x = p.as_array() if isinstance(p, AmbientPoint) else np.asarray(p)
    return 1j * np.tensordot(x, _PAULI, axes=(-1, 0))


def _lambda_derivative_at(f, lam0):
    """d/dlambda of a loop at lam0, spectrally from samples when present."""
    if f.samples is not None:
        # d/dlambda = d/dt / (i lambda) on the circle
        dt = spectral_t_derivative(f.samples)
        m = f.grid.m
        t0 = np.angle(lam0) % (2 * np.pi)
        idx = int(round(t0 / (2 * np.pi / m))) % m
        if abs(f.grid.theta[idx] - t0) < 1e-12 or \
           abs(f.grid.theta[idx] - t0 + 2 * np.pi) < 1e-12:
            df_dt = dt[idx]
        else:
            # trigonometric interpolation off the grid
            hat = np.fft.fft(dt, axis=0) / m
            freq = np.fft.fftfreq(m, d=1.0 / m)
            df_dt = np.tensordot(np.exp(1j * freq * t0), hat, axes=(0, 0))
        return df_dt / (1j * lam0)
    return loop_eval(lambda_derivative(f), lam0)


def _frame_value_at(f, lam0):
    if f.samples is not None:
        m = f.grid.m
        t0 = np.angle(lam0) % (2 * np.pi)
        idx = int(round(t0 / (2 * np.pi / m))) % m
        if abs(f.grid.theta[idx] - t0) < 1e-12 or \
           abs(f.grid.theta[idx] - t0 + 2 * np.pi) < 1e-12:
            return f.samples[idx]
        hat = np.fft.fft(f.samples, axis=0) / m
        freq = np.fft.fftfreq(m, d=1.0 / m)
        return np.tensordot(np.exp(1j * freq * t0), hat, axes=(0, 0))
    return loop_eval(f, lam0)


def sym_bobenko(f, h_mean, lam0=1.0, signature="euclidean", unitary_tol=1e-6):
    """CMC immersion value -i/(2H) [F sigma3 F^{-1} - 2 lambda dF F^{-1}].

    ``f`` is a frame loop; its lambda-derivative is taken spectrally from
    circle samples when available, otherwise exactly from coefficients.
    The bracket is checked traceless to 1e-8.
    """
    h_mean = float(h_mean)
    if h_mean == 0:
        raise ValueError("mean curvature must be nonzero")
    fm = _frame_value_at(f, lam0)
    defect = float(fro(fm.conj().T @ fm - np.eye(2)))
    if defect > unitary_tol:
        raise NotUnitary(f"frame at lambda0 has unitarity defect {defect:.3e}")
    df = _lambda_derivative_at(f, lam0)
    finv = np.linalg.inv(fm)
    s = (-1j / (2 * h_mean)) * (fm @ SIGMA3 @ finv - 2 * lam0 * df @ finv)
    if abs(np.trace(s)) > 1e-8 * max(1.0, float(fro(s))):
        raise ValueError(f"bracket is not traceless: {abs(np.trace(s)):.3e}")
    return point_from_matrix(s, signature=signature)


def sym_points_from_samples(f_samples, grid, h_mean, lam0):
    """Batched Sym-Bobenko over stacked frames (..., M, 2, 2) on a grid.

    Returns (..., 3) Euclidean coordinates.  This is the surface module's
    hot path: one FFT along the lambda axis serves both the value and the
    t-derivative at lam0.
    """
    m = grid.m
    hat = np.fft.fft(f_samples, axis=-3) / m
    freq = np.fft.fftfreq(m, d=1.0 / m)
    t0 = np.angle(lam0) % (2 * np.pi)
    phases = np.exp(1j * freq * t0)
    fm = np.einsum("m,...mij->...ij", phases, hat)
    df_dt = np.einsum("m,...mij->...ij", 1j * freq * phases, hat)
    df = df_dt / (1j * lam0)
    finv = np.linalg.inv(fm)
    s = (-1j / (2 * h_mean)) * (fm @ SIGMA3 @ finv - 2 * lam0 * (df @ finv))
    return point_from_matrix(s)


def sym_sl2r(f, lam0=1.0):
    """Timelike constant-negative-curvature value -i lambda dF F^{-1}."""
    fm = _frame_value_at(f, lam0)
    if abs(np.linalg.det(fm)) < 1e-13:
        raise Singular("frame is singular at lambda0")
    df = _lambda_derivative_at(f, lam0)
    s = -1j * lam0 * (df @ np.linalg.inv(fm))
    return point_from_matrix(s, signature="minkowski")


def translational_period(m, dt_m, f_point, h_mean=None, realform="su2"):
    """Image of a surface point under the deck transformation.

    For the unitary real forms: tau*f = M f M^{-1} + H^{-1} (dM/dt) M^{-1};
    the noncompact Sym variant uses a minus sign and no curvature factor.
    """
    m = np.asarray(m, dtype=complex)
    dt_m = np.asarray(dt_m, dtype=complex)
    fm = matrix_from_point(f_point)
    minv = np.linalg.inv(m)
    if realform in ("su2", "su11"):
        if h_mean is None:
            raise ValueError("the CMC period formula needs the mean curvature")
        out = m @ fm @ minv + (1.0 / h_mean) * (dt_m @ minv)
    elif realform == "sl2r":
        out = m @ fm @ minv - dt_m @ minv
    else:
        raise ValueError(f"unknown real form {realform!r}")
    sig = f_point.signature if isinstance(f_point, AmbientPoint) else "euclidean"
    return point_from_matrix(out, signature=sig)
