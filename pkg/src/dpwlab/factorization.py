"""Unitary/positive loop splitting via matrix spectral factorization.

The splitting L = F * B (F unitary on the circle, B a normalized positive
loop) is reduced to the positive-definite spectral factorization of
Q = star(L) * L: since F drops out of star(L)L, finding B with
star(B)B = Q and B, B^{-1} both positive loops recovers F = L B^{-1}.

The factorization itself is a Bauer-type finite-section method: the deep
rows of the Cholesky factor of the banded block-Toeplitz sections
[R_{i-j}] of the transposed symbol R = Q^T converge geometrically to the
coefficients of the minimum-phase factor.  A positive Laurent polynomial
symbol of band b has a polynomial factor of the same degree, so the band
never grows.  Sections start at four times the band and double until the
reconstruction residual stabilizes.

An indefinite (J-weighted) variant for the noncompact real form is
provided as an experimental best effort with pivot-sign cell detection;
it is round-trip tested only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotPositive
from .loops import CircleGrid, DEFAULT_GRID_M, LoopMatrix, fro, loop_star

J_MINK = np.diag([1.0, -1.0]).astype(complex)


@dataclass
class IwasawaPair:
    f: LoopMatrix
    b: LoopMatrix
    residual: float

    def unitarity_defect(self):
        s = self.f.samples
        return float(fro(s.conj().transpose(0, 2, 1) @ s - np.eye(2)).max())


@dataclass
class CellReport:
    cell: str                   # "B1" | "B2" | "boundary"
    pivot_signs: list           # (sign of p1, sign of p2) per elimination step


def _q_coeffs_checked(q, pd_floor=1e-10):
    """Validate star-symmetry and pointwise positivity; return samples."""
    qs = q.with_samples()
    s = qs.samples
    herm = float(fro(s - s.conj().transpose(0, 2, 1)).max())
    if herm > 1e-9 * max(1.0, float(fro(s).max())):
        raise ValueError(f"symbol is not star-symmetric on samples ({herm:.3e})")
    eig = np.linalg.eigvalsh(0.5 * (s + s.conj().transpose(0, 2, 1)))
    if eig.min() <= pd_floor:
        raise NotPositive(f"minimum sample eigenvalue {eig.min():.3e}")
    return qs


def _bauer_sections(r_blocks, band, k_sections):
    """Last block row of the Cholesky factor of [R_{i-j}]_{i,j<K}.

    ``r_blocks[d]`` is the block at offset d >= 0 (the Hermitian symbol
    supplies d < 0).  Returns G_n for n = 0..band.
    """
    n = 2 * k_sections
    bw = 2 * band + 1
    ab = np.zeros((bw + 1, n), dtype=complex)
    for d in range(band + 1):
        blk = r_blocks[d]
        for a in range(2):
            for b in range(2):
                k = 2 * d + a - b
                if k < 0:
                    continue
                cols = np.arange(k_sections - d) * 2 + b
                ab[k, cols] = blk[a, b]
    try:
        cb = scipy.linalg.cholesky_banded(ab, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositive(str(exc)) from exc
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - alias
        raise NotPositive(str(exc)) from exc
    g = np.zeros((band + 1, 2, 2), dtype=complex)
    for nn in range(band + 1):
        for a in range(2):
            for b in range(2):
                k = 2 * nn + a - b
                if 0 <= k <= bw:
                    g[nn, a, b] = cb[k, 2 * (k_sections - 1 - nn) + b]
    return g


def spectral_factorize(q, stable_tol=1e-12, max_doublings=8):
    """Normalized positive factor B with star(B) * B = Q.

    Q must be star-symmetric and pointwise positive definite on its
    circle samples.  B is a positive loop of the same band, normalized so
    B(0) is upper triangular with positive real diagonal; B and its
    inverse are both positive loops (minimum phase).
    """
    qs = _q_coeffs_checked(q)
    band = max(qs.max_deg, -qs.min_deg, 0)
    r_blocks = [np.asarray(qs.coeff(d)).T.copy() for d in range(band + 1)]
    k = max(4 * max(band, 1), 8)
    prev = None
    best = None
    for _ in range(max_doublings):
        g = _bauer_sections(r_blocks, band, k)
        coeffs = {n: g[n].T for n in range(band + 1)}
        b = LoopMatrix(coeffs)
        bs = b.eval(qs.grid.points)
        res = float(fro(bs.conj().transpose(0, 2, 1) @ bs - qs.samples).max())
        if best is None or res < best[1]:
            best = (b, res)
        if prev is not None and abs(prev - res) < stable_tol:
            break
        prev = res
        k *= 2
    b, res = best
    b.samples = b.eval(qs.grid.points)
    b.grid = qs.grid
    return b


def iwasawa_su2(l, grid=None):
    """Global splitting L = F * B for the compact real form.

    Cannot fail on genuine input: Q = star(L)L is positive definite at
    every sample whenever L is invertible there, so NotPositive signals
    corrupted data.
    """
    lw = l.with_samples(grid)
    f_s, b, res = _iwasawa_su2_samples(lw.samples, lw.grid)
    f = LoopMatrix.from_samples(f_s, lw.grid)
    return IwasawaPair(f=f, b=b, residual=res)


def _iwasawa_su2_samples(l_samples, grid):
    """Low-level splitting on (M, 2, 2) samples; returns (F samples, B, residual)."""
    q_s = l_samples.conj().transpose(0, 2, 1) @ l_samples
    q = LoopMatrix.from_samples(q_s, grid)
    b = spectral_factorize(q)
    bs = b.samples
    det = bs[:, 0, 0] * bs[:, 1, 1] - bs[:, 0, 1] * bs[:, 1, 0]
    binv = np.empty_like(bs)
    binv[:, 0, 0] = bs[:, 1, 1]
    binv[:, 1, 1] = bs[:, 0, 0]
    binv[:, 0, 1] = -bs[:, 0, 1]
    binv[:, 1, 0] = -bs[:, 1, 0]
    binv /= det[:, None, None]
    f_s = l_samples @ binv
    res = float(fro(f_s @ bs - l_samples).max())
    return f_s, b, res


# -- experimental indefinite splitting ----------------------------------------------


def random_unitary_loop(rng, grid, band=2, scale=0.4):
    """Random twisted loop into the compact form, via exp of an
    anti-star-symmetric traceless generator sampled on the circle."""
    coeffs = {0: np.diag([1j, -1j]) * rng.standard_normal() * scale}
    for n in range(1, band + 1):
        w = scale / (1 + n) ** 2
        if n % 2 == 0:
            a = w * (rng.standard_normal() + 1j * rng.standard_normal())
            up = np.diag([a, -a])
        else:
            b = w * (rng.standard_normal() + 1j * rng.standard_normal())
            cc = w * (rng.standard_normal() + 1j * rng.standard_normal())
            up = np.array([[0, b], [cc, 0]], dtype=complex)
        coeffs[n] = up
        coeffs[-n] = -up.conj().T
    gen = LoopMatrix(coeffs)
    samples = np.stack([scipy.linalg.expm(m) for m in gen.eval(grid.points)])
    return LoopMatrix.from_samples(samples, grid)


def random_positive_loop(rng, grid, band=2, scale=0.4):
    """Random normalized positive loop: exp of a traceless polynomial
    generator whose constant term is real diagonal."""
    t = rng.standard_normal() * scale
    coeffs = {0: np.diag([t, -t]).astype(complex)}
    for n in range(1, band + 1):
        w = scale / (1 + n) ** 2
        a = w * (rng.standard_normal() + 1j * rng.standard_normal())
        b = w * (rng.standard_normal() + 1j * rng.standard_normal())
        if n % 2 == 0:
            coeffs[n] = np.diag([a, -a])
        else:
            coeffs[n] = np.array([[0, a], [b, 0]], dtype=complex)
    gen = LoopMatrix(coeffs)
    samples = np.stack([scipy.linalg.expm(m) for m in gen.eval(grid.points)])
    return LoopMatrix.from_samples(samples, grid)


def _hyperbolic_pivot(p, tol=1e-8):
    """Factor a Hermitian 2x2 block as W J W^H with W lower triangular,
    positive diagonal.  Returns (W, signs) or (None, signs)."""
    p1 = p[0, 0].real
    signs = [int(np.sign(p1))]
    if abs(p1) < tol:
        return None, ["boundary"]
    if p1 < 0:
        return None, signs
    w11 = np.sqrt(p1)
    w21 = p[1, 0] / w11
    p2 = (abs(w21) ** 2 - p[1, 1].real)
    signs.append(int(np.sign(p2)))
    if abs(p2) < tol:
        return None, signs[:1] + ["boundary"]
    if p2 < 0:
        return None, signs
    w22 = np.sqrt(p2)
    w = np.array([[w11, 0.0], [w21, w22]], dtype=complex)
    return w, signs


def iwasawa_su11(l, grid=None, k_sections=None):
    """Experimental splitting for the signature-(1,1) real form.

    Factors star(L) J L = star(B) J B by a block UL-style hyperbolic
    elimination; success requires every pivot block to have signature
    (+, -), which tags the top cell B1.  A sign failure returns no pair
    and the tag B2; a pivot too small to classify returns "boundary".
    """
    lw = l.with_samples(grid)
    r_s = lw.samples.conj().transpose(0, 2, 1) @ (J_MINK @ lw.samples)
    r = LoopMatrix.from_samples(r_s, lw.grid)
    band = max(r.max_deg, -r.min_deg, 0)
    k = k_sections or max(4 * max(band, 1), 8)
    # dense block Toeplitz of the symbol itself (no transpose: we factor
    # T = U J U^H with U block upper triangular and read B off the top row)
    t = np.zeros((2 * k, 2 * k), dtype=complex)
    for i in range(k):
        for j in range(k):
            d = i - j
            if abs(d) <= band:
                blk = r.coeff(d) if d >= 0 else r.coeff(-d).conj().T
                t[2 * i:2 * i + 2, 2 * j:2 * j + 2] = blk
    u = np.zeros_like(t)
    signs_trace = []
    work = t.copy()
    for rblk in range(k - 1, -1, -1):
        sl = slice(2 * rblk, 2 * rblk + 2)
        w, signs = _hyperbolic_pivot(work[sl, sl])
        signs_trace.append(tuple(signs))
        if w is None:
            cell = "boundary" if "boundary" in signs else "B2"
            return None, CellReport(cell=cell, pivot_signs=signs_trace)
        u[sl, sl] = w
        winv_hj = np.linalg.inv(w.conj().T) @ J_MINK   # (J W^H)^{-1}
        for sblk in range(rblk):
            ss = slice(2 * sblk, 2 * sblk + 2)
            u[ss, sl] = work[ss, sl] @ winv_hj
        for sblk in range(rblk):
            ss = slice(2 * sblk, 2 * sblk + 2)
            for s2 in range(rblk):
                s2s = slice(2 * s2, 2 * s2 + 2)
                work[ss, s2s] -= u[ss, sl] @ J_MINK @ u[s2s, sl].conj().T
    b_coeffs = {}
    for n in range(band + 1):
        blk = u[0:2, 2 * n:2 * n + 2].conj().T
        b_coeffs[n] = blk
    b = LoopMatrix(b_coeffs)
    bs = b.eval(lw.grid.points)
    det = bs[:, 0, 0] * bs[:, 1, 1] - bs[:, 0, 1] * bs[:, 1, 0]
    binv = np.empty_like(bs)
    binv[:, 0, 0] = bs[:, 1, 1]
    binv[:, 1, 1] = bs[:, 0, 0]
    binv[:, 0, 1] = -bs[:, 0, 1]
    binv[:, 1, 0] = -bs[:, 1, 0]
    binv /= det[:, None, None]
    f_s = lw.samples @ binv
    res = float(fro(f_s.conj().transpose(0, 2, 1) @ (J_MINK @ f_s) - J_MINK).max())
    f = LoopMatrix.from_samples(f_s, lw.grid)
    pair = IwasawaPair(f=f, b=b, residual=res)
    return pair, CellReport(cell="B1", pivot_signs=signs_trace)
