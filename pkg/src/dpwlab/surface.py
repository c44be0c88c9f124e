"""Grid orchestration: integrate the connection, split, map to space.

The pipeline per lambda-circle sample: integrate dL = L*xi along a radial
ray and then along angular arcs, split each grid value L(z, .) into a
unitary frame and a positive factor, differentiate the frame spectrally
in lambda, and evaluate the immersion formula at lambda0.  Frames are
computed on the whole lambda grid even though the surface lives at a
single lambda0, because the spectral derivative needs the neighbors.

Sign and unit conventions: default mean curvature 1/2 makes the vacuum
cylinder have radius 1; curvature estimates are reported with the normal
oriented to match the sign of the target (the orientation flip, when
applied, is recorded).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import CellBoundary, DegenerateMetric, NotInBigCell
from .factorization import _iwasawa_su2_samples, iwasawa_su11
from .holonomy import ArcSegment, LineSegment, _advance_segment, _segment_rhs, \
    spectral_t_derivative
from .loops import CircleGrid, LoopMatrix, fro
from .potentials import _inv2
from .sym import AmbientPoint, point_from_matrix, sym_points_from_samples, \
    translational_period


@dataclass(frozen=True)
class DomainGrid:
    """Polar grid on an annulus or sector; theta may wind multiply."""
    r0: float
    r1: float
    n_r: int
    n_theta: int
    theta0: float = 0.0
    theta1: float = 2.0 * np.pi
    from_zero: bool = False   # lead the integration in from z = 0 (k >= 0 only)

    def __post_init__(self):
        if self.r0 <= 0 or self.r1 < self.r0:
            raise ValueError("need 0 < r0 <= r1")
        if self.n_r < 1 or self.n_theta < 1:
            raise ValueError("need at least one cell in each direction")

    @property
    def r_values(self):
        return np.linspace(self.r0, self.r1, self.n_r)

    @property
    def theta_values(self):
        return np.linspace(self.theta0, self.theta1, self.n_theta + 1)

    @classmethod
    def annulus(cls, r0, r1, n_r, n_theta, turns=1.0):
        return cls(r0, r1, n_r, n_theta, theta1=2.0 * np.pi * turns)

    @classmethod
    def disk(cls, r1, n_r, n_theta):
        """Punctured-disk grid with the initial value carried in from 0."""
        return cls(r1 / n_r, r1, n_r, n_theta, from_zero=True)

    @classmethod
    def sector(cls, r0, r1, theta_span, n_r, n_theta, from_zero=False):
        return cls(r0, r1, n_r, n_theta, theta1=theta_span, from_zero=from_zero)

    def seam_turns(self):
        """Integer winding of the seam, or None when the span is not closed."""
        span = self.theta1 - self.theta0
        k = round(span / (2.0 * np.pi))
        if k >= 1 and abs(span - 2.0 * np.pi * k) < 1e-9:
            return k
        return None


@dataclass
class SurfaceMesh:
    points: np.ndarray           # (n_r, n_theta+1, 3)
    r_values: np.ndarray
    theta_values: np.ndarray
    lambda0: complex
    h_mean: float
    signature: str
    potential: str
    m_lambda: int
    defect_table: np.ndarray | None = None
    seam_start: np.ndarray | None = field(default=None, repr=False)  # (n_r, M, 2, 2)
    seam_end: np.ndarray | None = field(default=None, repr=False)
    lambda_grid: CircleGrid | None = None
    det_drift: float = 0.0

    def sup_defect(self):
        return float(self.defect_table.max()) if self.defect_table is not None else None


def _integrate_line(xi, z0, z1, state, lams, tol):
    seg = LineSegment(z0, z1)
    y, _, _ = _advance_segment(_segment_rhs(xi, seg, lams), state, tol, 1e-14)
    return y


def _integrate_arc(xi, radius, t0, t1, state, lams, tol):
    seg = ArcSegment(0.0, radius, t0, t1)
    y, _, _ = _advance_segment(_segment_rhs(xi, seg, lams), state, tol, 1e-14)
    return y


def _initial_states(xi, grid, init, lamgrid, tol):
    lams = lamgrid.points
    base = grid.r0 * np.exp(1j * grid.theta0)
    eye = np.broadcast_to(np.eye(2, dtype=complex), (lamgrid.m, 2, 2)).copy()
    if init is None:
        if grid.from_zero:
            return _integrate_line(xi, 0.0, base, eye, lams, tol)
        return eye
    if hasattr(init, "eval") and hasattr(init, "n_z"):  # Frobenius-style solution
        log_z = np.log(grid.r0) + 1j * grid.theta0
        return np.asarray(init.eval(base, lams, log_z=log_z), dtype=complex)
    if callable(init):
        return np.stack([np.asarray(init(lam), dtype=complex) for lam in lams])
    arr = np.asarray(init, dtype=complex)
    if arr.shape == (2, 2):
        return np.broadcast_to(arr, (lamgrid.m, 2, 2)).copy()
    if arr.shape != (lamgrid.m, 2, 2):
        raise ValueError("initial data must be (2,2), (M,2,2), callable or a solution")
    return arr.copy()


def _split_row(row_states, lamgrid, realform):
    """Iwasawa-split every grid value of a row; returns frame samples."""
    n_t = row_states.shape[0]
    frames = np.empty_like(row_states)
    for j in range(n_t):
        if realform == "su2":
            f_s, _, _ = _iwasawa_su2_samples(row_states[j], lamgrid)
        elif realform == "su11":
            loop = LoopMatrix.from_samples(row_states[j], lamgrid)
            pair, report = iwasawa_su11(loop)
            if pair is None:
                if report.cell == "boundary":
                    raise CellBoundary("splitting pivot too small to classify")
                raise NotInBigCell(f"grid point left the top cell ({report.cell})")
            f_s = pair.f.samples
        else:
            raise ValueError(f"unknown real form {realform!r}")
        frames[j] = f_s
    return frames


def generate(xi, grid, init=None, h_mean=0.5, lam0=1.0, realform="su2",
             m_lambda=32, ode_tol=1e-10, keep_frames=False):
    """Run the full pipeline over a polar grid and return the mesh.

    For potentials holomorphic at 0 use ``init=None`` with a ``from_zero``
    grid (identity initial value at the origin); for the k = -1 potential
    pass the regular-singular-point solution as ``init``.
    """
    lamgrid = CircleGrid(m_lambda)
    lams = lamgrid.points
    state = _initial_states(xi, grid, init, lamgrid, ode_tol)
    det0 = np.linalg.det(state)
    r_vals = grid.r_values
    t_vals = grid.theta_values
    n_r, n_t = len(r_vals), len(t_vals)
    signature = "euclidean" if realform == "su2" else "minkowski"

    radial_states = [state]
    z_prev = grid.r0 * np.exp(1j * grid.theta0)
    for r in r_vals[1:]:
        z_next = r * np.exp(1j * grid.theta0)
        radial_states.append(_integrate_line(xi, z_prev, z_next,
                                             radial_states[-1], lams, ode_tol))
        z_prev = z_next

    points = np.empty((n_r, n_t, 3))
    seam_start = np.empty((n_r, lamgrid.m, 2, 2), dtype=complex)
    seam_end = np.empty_like(seam_start)
    drift = 0.0
    frames_all = np.empty((n_r, n_t, lamgrid.m, 2, 2), dtype=complex) if keep_frames else None
    for i, r in enumerate(r_vals):
        row = np.empty((n_t, lamgrid.m, 2, 2), dtype=complex)
        row[0] = radial_states[i]
        for j in range(1, n_t):
            row[j] = _integrate_arc(xi, r, t_vals[j - 1], t_vals[j],
                                    row[j - 1], lams, ode_tol)
        drift = max(drift, float(np.abs(np.linalg.det(row[-1]) - det0).max()))
        frames = _split_row(row, lamgrid, realform)
        if keep_frames:
            frames_all[i] = frames
        seam_start[i] = frames[0]
        seam_end[i] = frames[-1]
        points[i] = sym_points_from_samples(frames, lamgrid, h_mean, lam0)

    defect = None
    if grid.seam_turns() is not None:
        defect = np.linalg.norm(points[:, -1, :] - points[:, 0, :], axis=-1)
    mesh = SurfaceMesh(points=points, r_values=r_vals, theta_values=t_vals,
                       lambda0=complex(lam0), h_mean=float(h_mean),
                       signature=signature, potential=xi.describe,
                       m_lambda=m_lambda, defect_table=defect,
                       seam_start=seam_start, seam_end=seam_end,
                       lambda_grid=lamgrid, det_drift=drift)
    if keep_frames:
        mesh.frames = frames_all
    return mesh


def _interp_circle(values, grid, lam0):
    """Trigonometric interpolation of (M, ...) circle data at lam0."""
    m = grid.m
    hat = np.fft.fft(values, axis=0) / m
    freq = np.fft.fftfreq(m, d=1.0 / m)
    t0 = np.angle(lam0) % (2 * np.pi)
    return np.tensordot(np.exp(1j * freq * t0), hat, axes=(0, 0))


@dataclass
class ClosureReport:
    sup_defect: float
    table: np.ndarray            # geometric seam defect per radius
    predicted_table: np.ndarray  # defect predicted from the frame monodromy
    prediction_error: np.ndarray  # |tau*f - f(end)| per radius
    mesh: SurfaceMesh = field(repr=False, default=None)


def closure_defect(xi, grid, init=None, h_mean=0.5, lam0=1.0, realform="su2",
                   m_lambda=32, ode_tol=1e-10):
    """Seam defect of the generated surface, cross-validated.

    The geometric defect sup_i |f(r_i, theta1) - f(r_i, theta0)| is
    compared against the deck-transformation prediction computed from the
    frame monodromy M_i = F_end F_start^{-1} and its spectral t-derivative.
    """
    if grid.seam_turns() is None:
        raise ValueError("closure defect needs a closed angular span")
    mesh = generate(xi, grid, init=init, h_mean=h_mean, lam0=lam0,
                    realform=realform, m_lambda=m_lambda, ode_tol=ode_tol)
    n_r = len(mesh.r_values)
    pred = np.empty(n_r)
    perr = np.empty(n_r)
    for i in range(n_r):
        mono = mesh.seam_end[i] @ _inv2(mesh.seam_start[i])   # (M, 2, 2)
        dmono = spectral_t_derivative(mono)
        m0 = _interp_circle(mono, mesh.lambda_grid, lam0)
        dm0 = _interp_circle(dmono, mesh.lambda_grid, lam0)
        f0 = AmbientPoint(*mesh.points[i, 0], signature=mesh.signature)
        tau_f = translational_period(m0, dm0, f0, h_mean=h_mean,
                                     realform=realform)
        pred[i] = np.linalg.norm(tau_f.as_array() - mesh.points[i, 0])
        perr[i] = np.linalg.norm(tau_f.as_array() - mesh.points[i, -1])
    return ClosureReport(sup_defect=float(mesh.defect_table.max()),
                         table=mesh.defect_table, predicted_table=pred,
                         prediction_error=perr, mesh=mesh)


# -- discrete mean curvature ---------------------------------------------------------


def verify_cmc(mesh, h_target=None, margin=3):
    """Mean-curvature field from first/second fundamental forms.

    Central differences in the grid parameters (r, theta); returns the
    estimate grid and the worst interior deviation from ``h_target``
    (default: the mesh's target).  The normal orientation is flipped to
    match the sign of the target when needed; CMC magnitude is unaffected.
    """
    if h_target is None:
        h_target = mesh.h_mean
    f = mesh.points
    u, v = mesh.r_values, mesh.theta_values
    if len(u) < 2 * margin + 3 or len(v) < 2 * margin + 3:
        raise ValueError("grid too small for the requested interior margin")
    fu = np.gradient(f, u, axis=0)
    fv = np.gradient(f, v, axis=1)
    fuu = np.gradient(fu, u, axis=0)
    fuv = np.gradient(fu, v, axis=1)
    fvv = np.gradient(fv, v, axis=1)
    e = (fu * fu).sum(-1)
    ff = (fu * fv).sum(-1)
    g = (fv * fv).sum(-1)
    den = e * g - ff ** 2
    interior = (slice(margin, -margin), slice(margin, -margin))
    if den[interior].min() < 1e-12:
        raise DegenerateMetric(f"metric determinant {den[interior].min():.3e}")
    nvec = np.cross(fu, fv)
    nvec /= np.maximum(np.linalg.norm(nvec, axis=-1, keepdims=True), 1e-300)
    ll = (fuu * nvec).sum(-1)
    mm = (fuv * nvec).sum(-1)
    nn = (fvv * nvec).sum(-1)
    h_est = (e * nn - 2 * ff * mm + g * ll) / (2 * den)
    flipped = False
    med = np.median(h_est[interior])
    if h_target != 0 and med * h_target < 0:
        h_est = -h_est
        flipped = True
    max_dev = float(np.abs(h_est[interior] - h_target).max())
    return CmcReport(h_grid=h_est, max_deviation=max_dev, flipped=flipped,
                     margin=margin)


@dataclass
class CmcReport:
    h_grid: np.ndarray
    max_deviation: float
    flipped: bool
    margin: int


# -- cylinder fitting (used by tests and the CLI summary) -----------------------------


@dataclass
class CylinderFit:
    center: np.ndarray
    direction: np.ndarray
    radius: float
    rms: float


def fit_cylinder(points):
    """Least-squares circular cylinder through a point cloud.

    Axis direction is seeded from the principal directions of the cloud;
    the best of the three seeded fits is returned.
    """
    from scipy.optimize import least_squares

    pts = points.reshape(-1, 3)
    ctr = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - ctr, full_matrices=False)

    def unpack(q):
        th, ph = q[0], q[1]
        d = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        c = q[2:5]
        return d, c, q[5]

    def resid(q):
        d, c, r = unpack(q)
        rel = pts - c
        rel -= np.outer(rel @ d, d)
        return np.linalg.norm(rel, axis=1) - r

    best = None
    for axis in vt:
        th = np.arccos(np.clip(axis[2], -1, 1))
        ph = np.arctan2(axis[1], axis[0])
        rel = pts - ctr
        rel0 = rel - np.outer(rel @ axis, axis)
        r0 = np.linalg.norm(rel0, axis=1).mean()
        q0 = np.array([th, ph, *ctr, r0])
        sol = least_squares(resid, q0, method="lm", max_nfev=2000)
        rms = float(np.sqrt(np.mean(sol.fun ** 2)))
        if best is None or rms < best.rms:
            d, c, r = unpack(sol.x)
            best = CylinderFit(center=c, direction=d / np.linalg.norm(d),
                               radius=float(abs(r)), rms=rms)
    return best


# -- export ---------------------------------------------------------------------------


def export_mesh(mesh, base_path):
    """Write base_path.obj (v + quad f lines) and base_path.csv (raw points)."""
    base = str(base_path)
    n_r, n_t, _ = mesh.points.shape
    obj_path, csv_path = base + ".obj", base + ".csv"
    with open(obj_path, "w") as fh:
        for i in range(n_r):
            for j in range(n_t):
                x, y, z = mesh.points[i, j]
                fh.write(f"v {x:.17g} {y:.17g} {z:.17g}\n")
        for i in range(n_r - 1):
            for j in range(n_t - 1):
                a = i * n_t + j + 1
                b = i * n_t + j + 2
                c = (i + 1) * n_t + j + 2
                d = (i + 1) * n_t + j + 1
                fh.write(f"f {a} {b} {c} {d}\n")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "r", "theta", "x1", "x2", "x3"])
        for i in range(n_r):
            for j in range(n_t):
                w.writerow([i, j, f"{mesh.r_values[i]:.17g}",
                            f"{mesh.theta_values[j]:.17g}",
                            *(f"{c:.17g}" for c in mesh.points[i, j])])
    return obj_path, csv_path


def load_mesh_points(csv_path):
    """Points and grid parameters back from an exported CSV."""
    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["i", "j"]:
            raise ValueError("not a mesh CSV")
        for rec in reader:
            rows.append((int(rec[0]), int(rec[1]), float(rec[2]), float(rec[3]),
                         float(rec[4]), float(rec[5]), float(rec[6])))
    n_r = max(r[0] for r in rows) + 1
    n_t = max(r[1] for r in rows) + 1
    points = np.empty((n_r, n_t, 3))
    r_vals = np.empty(n_r)
    t_vals = np.empty(n_t)
    for i, j, r, t, x, y, z in rows:
        points[i, j] = (x, y, z)
        r_vals[i] = r
        t_vals[j] = t
    return points, r_vals, t_vals


def export_defect_table(report, path):
    """CSV of (radius, geometric defect, predicted defect)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "defect", "predicted"])
        mesh = report.mesh
        for r, d, p in zip(mesh.r_values, report.table, report.predicted_table):
            w.writerow([f"{r:.17g}", f"{d:.17g}", f"{p:.17g}"])
