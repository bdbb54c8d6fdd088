"""Computer-assisted validation of a numerical zero by the radii polynomial.

All bounds are computed in outward-rounded interval arithmetic and returned
as float upper bounds.  The approximate inverse ``A`` is a float matrix on the
Galerkin block plus explicit diagonal tails; its entries are exact binary
numbers, so only the data depending on ``xbar`` and on the irrational
constants needs enclosures.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import interval as iv
from . import seqspace as sq
from .interval import ComplexBox, RealInterval
from .problem import (
    I_CONST,
    Layout,
    ProblemParams,
    ReferenceOrbit,
    StateX,
    apply_Mj,
    fourier_map,
    jacobian_galerkin,
)
from .seqspace import CoeffSeq

log = logging.getLogger(__name__)

DEFAULT_R_STAR = 1e-6


class ValidationError(RuntimeError):
    """Raised for violated preconditions (not for a failed proof)."""


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------


@dataclass
class ApproxDerivative:
    """``A_dagger``: the Galerkin Jacobian plus the diagonal derivative tails."""

    finite_block: np.ndarray
    params: ProblemParams

    def tail_factor(self, kind: str, ell: int) -> complex:
        """Diagonal entry acting on mode ``|ell| >= m`` of a ``kind`` block."""
        if abs(ell) < self.params.m:
            raise ValueError("tail acts only on |ell| >= m")
        scale = self.params.omega**2 if kind == "v" else 1.0
        return 1j * ell * scale


@dataclass
class ApproxInverse:
    """``A``: float inverse of the Galerkin Jacobian plus ``1/(i l)``-type tails."""

    finite_block: np.ndarray
    params: ProblemParams

    def tail_factor(self, kind: str, ell: int) -> complex:
        if abs(ell) < self.params.m:
            raise ValueError("tail acts only on |ell| >= m")
        scale = self.params.omega**2 if kind == "v" else 1.0
        return 1.0 / (1j * ell * scale)

    def apply_tail(self, c: CoeffSeq, kind: str) -> CoeffSeq:
        """Tail action on a sequence: modes ``|l| < m`` are dropped."""
        out = sq.solve_D_tail(c, self.params.m)
        if kind == "v":
            out = out * (1.0 / self.params.omega**2)
        return out

    def abs_upper(self) -> np.ndarray:
        return ComplexBox.from_complex(self.finite_block).abs_upper()


def build_operators(xbar: StateX, params: ProblemParams, ref: ReferenceOrbit):
    """Float Jacobian at ``xbar`` and its numerical inverse."""
    DF = jacobian_galerkin(xbar.to_vector(params.m), params, ref)
    try:
        A = np.linalg.inv(DF)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("Galerkin Jacobian is numerically singular") from exc
    if not np.all(np.isfinite(A)):
        raise ValidationError("Galerkin Jacobian is numerically singular")
    # one Newton-Schulz sweep roughly halves the residual of the LU inverse
    A = A + A @ (np.eye(len(A)) - DF @ A)
    return ApproxDerivative(DF, params), ApproxInverse(A, params)


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------


def _row_col_weights(lay: Layout, nu: float):
    """Upper bounds of row weights ``nu^|l|`` and column weights ``nu^-|s|``."""
    ns = lay.n + 2
    nseq = lay.n + 5
    m = lay.m
    w_seq = sq.weights_upper(nu, m - 1)
    inv = sq.inv_weights_upper(nu, m - 1)
    inv_seq = inv[np.abs(np.arange(-(m - 1), m))]
    row = np.concatenate([np.ones(ns), np.tile(w_seq, nseq)])
    col = np.concatenate([np.ones(ns), np.tile(inv_seq, nseq)])
    return row, col


def _reduce_columns(vec: np.ndarray, lay: Layout) -> float:
    """Sum over scalar columns plus, per sequence block, the max over modes."""
    ns = lay.n + 2
    total = [iv.sum_up(vec[:ns])] if ns else []
    blocks = vec[ns:].reshape(lay.n + 5, lay.L)
    total.append(iv.sum_up(np.max(blocks, axis=1)))
    return float(iv.sum_up(np.array(total)))


def mixed_row_norms(absmat: np.ndarray, lay: Layout, nu: float) -> np.ndarray:
    """Operator-norm bounds of each row block of a nonnegative Galerkin matrix.

    Returns ``n + 2`` values for the scalar rows followed by ``n + 5`` values
    for the sequence blocks.  Scalar columns use plain absolute values and
    sequence columns are measured against the dual weights ``nu^-|s|``.
    """
    row, col = _row_col_weights(lay, nu)
    W = iv.mul_up(iv.mul_up(absmat, row[:, None]), col[None, :])
    ns = lay.n + 2
    out = [_reduce_columns(W[i], lay) for i in range(ns)]
    for b in range(lay.n + 5):
        sl = lay.seq(b)
        out.append(_reduce_columns(iv.sum_up(W[sl], axis=0), lay))
    return np.array(out)


def mixed_norm(absmat: np.ndarray, lay: Layout, nu: float) -> float:
    return float(np.max(mixed_row_norms(absmat, lay, nu)))


def _box_vector(scalars: list, seqs: list[CoeffSeq], m: int) -> ComplexBox:
    parts = [iv.as_box(s).reshape(-1) for s in scalars]
    parts += [iv.as_box(sq.project(c, m).coeffs) for c in seqs]
    return ComplexBox.concatenate(parts)


def _block_norms(vec_abs: np.ndarray, lay: Layout, nu: float) -> np.ndarray:
    """Norms of each component of a flat nonnegative vector (same layout as rows)."""
    ns = lay.n + 2
    w_seq = sq.weights_upper(nu, lay.m - 1)
    seq = vec_abs[ns:].reshape(lay.n + 5, lay.L)
    seq_norms = iv.sum_up(iv.mul_up(seq, w_seq[None, :]), axis=1)
    return np.concatenate([vec_abs[:ns], seq_norms])


# --------------------------------------------------------------------------
# the four bounds
# --------------------------------------------------------------------------


def _interval_state(xbar: StateX) -> StateX:
    return xbar if xbar.is_interval else xbar.to_interval()


def _tail_sum(c: CoeffSeq, m: int, nu: float, scale_lo: float) -> float:
    """Upper bound of ``sum_{|l| >= m} |c_l| nu^|l| / (|l| scale)``."""
    if c.N < m:
        return 0.0
    ell = c.modes()
    mask = np.abs(ell) >= m
    mags = c.coeffs.abs_upper()[mask] if c.is_interval else np.abs(c.coeffs[mask])
    w = sq.weights_upper(nu, c.N)[mask]
    denom = iv.down(np.abs(ell[mask]).astype(float) * scale_lo)
    return float(iv.sum_up(iv.div_up(iv.mul_up(mags, w), denom)))


def bound_Y0(xbar: StateX, A: ApproxInverse, params: ProblemParams, ref: ReferenceOrbit) -> float:
    """Upper bound of ``||A F(xbar)||_X``."""
    m, nu = params.m, params.nu
    lay = Layout(params.n, m)
    const = params.constants(True)
    F = fourier_map(_interval_state(xbar), params, ref, const)
    Fm = _box_vector([F.eta, F.gamma], F.sequences(), m)
    AF = iv.matmul(A.finite_block, Fm).abs_upper()
    comps = _block_norms(AF, lay, nu)
    ns = params.n + 2
    omega2_lo = float(const.omega2.lo)
    tails = np.zeros(params.n + 5)
    for p in range(3):
        if F.f[p].N >= m:
            tails[p] = _tail_sum(F.f[p], m, nu, 1.0)
        tails[3 + p] = _tail_sum(F.g[p], m, nu, omega2_lo)
    for j in range(params.n - 1):
        tails[6 + j] = _tail_sum(F.h[j], m, nu, 1.0)
    comps[ns:] = iv.add_up(comps[ns:], tails)
    return float(np.max(comps))


def bound_Z0(A: ApproxInverse, Adag: ApproxDerivative | None, params: ProblemParams,
             xbar: StateX | None = None, ref: ReferenceOrbit | None = None) -> float:
    """Mixed norm of ``I - A^(m) DF^(m)``; the derivative is re-enclosed from ``xbar``.

    The tails of ``A`` and ``A_dagger`` are exact inverses, so only the finite
    block contributes.  When ``xbar`` is given the Jacobian is evaluated in
    interval arithmetic; otherwise the float matrix of ``Adag`` is taken as exact.
    """
    lay = Layout(params.n, params.m)
    if xbar is not None:
        if ref is None:
            raise ValueError("ref is required with xbar")
        DF = jacobian_galerkin(_interval_state(xbar), params, ref, interval=True)
    else:
        DF = Adag.finite_block
    B = iv.matmul(A.finite_block, DF)
    B = iv.as_box(np.eye(lay.size)) - B
    return mixed_norm(B.abs_upper(), lay, params.nu)


@dataclass
class _SeqData:
    """Interval data of ``xbar`` shared by the Z1 and Z2 bounds."""

    u: list
    v: list
    w: list
    alpha: ComplexBox
    lam: ComplexBox
    mu: list
    mv: list


def _seq_data(xbar: StateX, params: ProblemParams) -> _SeqData:
    x = _interval_state(xbar)
    mu = [apply_Mj(x.u, j, params) for j in range(1, params.n)]
    mv = [apply_Mj(x.v, j, params) for j in range(1, params.n)]
    return _SeqData(list(x.u), list(x.v), list(x.w), x.alpha, x.lam, mu, mv)


def _abs(z) -> float:
    return float(iv.as_box(z).abs_upper())


def _z1_body(j: int, d: _SeqData, params: ProblemParams, inv_nu_m: float, recip_m: float):
    """Contributions of body ``j`` to the Z1 bound."""
    m, nu = params.m, params.nu
    ip = I_CONST
    wj = d.w[j - 1]
    mu, mv = d.mu[j - 1], d.mv[j - 1]
    w2 = sq.convolve(wj, wj)
    w3 = sq.convolve(w2, wj)
    norm_w = sq.norm_nu(wj, nu)
    norm_mu = [sq.norm_nu(c, nu) for c in mu]
    norm_mv = [sq.norm_nu(c, nu) for c in mv]

    # gamma row: tails of w_j and u enter through the value at t = 0
    W = wj.coeffs.sum()
    P = [c.coeffs.sum() for c in mu]
    S = P[0] * P[0] + P[1] * P[1] + P[2] * P[2]
    aW, aS = _abs(W), _abs(S)
    inner = iv.add_up(iv.mul_up(aW, aS), iv.mul_up(iv.mul_up(aW, aW), sum(iv.mul_up(_abs(P[p]), ip[p]) for p in range(3))))
    z_alpha = float(iv.mul_up(iv.mul_up(2.0, inv_nu_m), iv.up(inner)))

    psi_w3 = sq.psi_bounds(w3, m, nu)
    z_v = [iv.add_up(iv.mul_up(ip[p], psi_w3), iv.mul_up(3.0, sq.psi_bounds(sq.convolve(mu[p], w2), m, nu)))
           for p in range(3)]

    abs_alpha = _abs(d.alpha[j - 1])
    z_w = iv.mul_up(iv.mul_up(3.0, abs_alpha), sq.psi_bounds(w2, m, nu))
    for p in range(3):
        prod = sq.convolve(w2, sq.convolve(mu[p], mv[p]))
        z_w = iv.add_up(z_w, iv.mul_up(3.0, sq.psi_bounds(prod, m, nu)))
        both = iv.add_up(sq.psi_bounds(sq.convolve(w3, mv[p]), m, nu), sq.psi_bounds(sq.convolve(w3, mu[p]), m, nu))
        z_w = iv.add_up(z_w, iv.mul_up(ip[p], both))

    nw2 = iv.mul_up(norm_w, norm_w)
    nw3 = iv.mul_up(nw2, norm_w)
    # tail rows of h_j
    s = iv.add_up(nw3, iv.mul_up(iv.mul_up(3.0, abs_alpha), nw2))
    for p in range(3):
        s = iv.add_up(s, iv.mul_up(iv.mul_up(3.0, nw2), iv.mul_up(norm_mu[p], norm_mv[p])))
        s = iv.add_up(s, iv.mul_up(iv.mul_up(ip[p], nw3), iv.add_up(norm_mu[p], norm_mv[p])))
    delta_w = float(iv.mul_up(recip_m, s))

    # per-body pieces of the v tail rows
    v_tail = [
        iv.mul_up(3.0, iv.add_up(nw3, iv.mul_up(norm_mu[0], nw2))),
        iv.mul_up(3.0, iv.add_up(nw3, iv.mul_up(norm_mu[1], nw2))),
        iv.add_up(iv.mul_up(2.0, nw3), iv.mul_up(iv.mul_up(3.0, norm_mu[2]), nw2)),
    ]
    return z_alpha, z_v, z_w, delta_w, v_tail


def bound_Z1(xbar: StateX, A: ApproxInverse, params: ProblemParams, ref: ReferenceOrbit,
             threads: int = 1, details: dict | None = None) -> float:
    """Upper bound of ``||A (DF(xbar) - A_dagger)||`` from the uniform vector ``z_hat``."""
    m, nu, n = params.m, params.nu, params.n
    if m <= ref.m1:
        raise ValidationError(f"Z1 needs m > m1 (got m={m}, m1={ref.m1})")
    lay = Layout(n, m)
    const = params.constants(True)
    d = _seq_data(xbar, params)
    inv_nu_m = float(sq.inv_weights_upper(nu, m)[m])
    recip_m = float(iv.div_up(1.0, float(m)))
    omega2_lo = float(const.omega2.lo)
    recip_m_om2 = float(iv.div_up(1.0, iv.down(m * omega2_lo)))

    bodies = range(1, n)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda j: _z1_body(j, d, params, inv_nu_m, recip_m), bodies))
    else:
        results = [_z1_body(j, d, params, inv_nu_m, recip_m) for j in bodies]

    zhat = np.zeros(lay.size)
    zv = [np.zeros(lay.L) for _ in range(3)]
    for j, (z_alpha, z_v, z_w, _, _) in zip(bodies, results):
        zhat[lay.alpha(j)] = z_alpha
        for p in range(3):
            zv[p] = iv.add_up(zv[p], z_v[p])
        zhat[lay.w(j)] = z_w
    for p in range(3):
        zhat[lay.v(p)] = zv[p]

    xi = iv.matmul_up(A.abs_upper(), zhat)
    comps = _block_norms(xi, lay, nu)

    # tail rows
    norm_u = [sq.norm_nu(c, nu) for c in d.u]
    norm_v = [sq.norm_nu(c, nu) for c in d.v]
    lam = [_abs(d.lam[i]) for i in range(3)]
    linear = iv.add_up(float(const.two_omega_sqrt_s1.hi), float(const.s1.hi))
    body_sum = [iv.sum_up(np.array([r[4][p] for r in results])) for p in range(3)]
    dv = [
        iv.sum_up(np.array([linear, norm_u[1], lam[0], lam[1], norm_v[0], body_sum[0]])),
        iv.sum_up(np.array([linear, norm_u[0], lam[0], lam[1], norm_v[1], body_sum[1]])),
        iv.sum_up(np.array([lam[1], norm_v[2], body_sum[2]])),
    ]
    delta = np.zeros(n + 5)
    delta[0:3] = recip_m
    delta[3:6] = [float(iv.mul_up(recip_m_om2, x)) for x in dv]
    delta[6:] = [r[3] for r in results]
    ns = n + 2
    comps[ns:] = iv.add_up(comps[ns:], delta)
    if details is not None:
        details.update(zhat_alpha=[r[0] for r in results], delta=delta.tolist(), components=comps.tolist())
    return float(np.max(comps))


def operator_norm_A(A: ApproxInverse, params: ProblemParams) -> float:
    """``||A||`` on X: finite mixed norm plus the diagonal tail, per row block."""
    lay = Layout(params.n, params.m)
    rows = mixed_row_norms(A.abs_upper(), lay, params.nu)
    ns = params.n + 2
    recip_m = float(iv.div_up(1.0, float(params.m)))
    omega2_lo = float(params.constants(True).omega2.lo)
    tails = np.zeros(len(rows))
    tails[ns : ns + 3] = recip_m
    tails[ns + 3 : ns + 6] = iv.div_up(1.0, iv.down(params.m * omega2_lo))
    tails[ns + 6 :] = recip_m
    return float(np.max(iv.add_up(rows, tails)))


def bound_Z2(xbar: StateX, A: ApproxInverse, params: ProblemParams, r_star: float = DEFAULT_R_STAR,
             norm_A: float | None = None) -> float:
    """Upper bound of ``||A D^2F(c)||`` for all ``c`` in the ``r_star`` ball."""
    if r_star <= 0:
        raise ValueError("r_star must be positive")
    nu, n = params.nu, params.n
    ip = I_CONST
    x = _interval_state(xbar)
    nu_ = [sq.norm_nu(c, nu) for c in x.u]
    nv_ = [sq.norm_nu(c, nu) for c in x.v]

    def dhat(nrm):
        return [
            iv.add_up(iv.add_up(iv.mul_up(2.0, nrm[0]), nrm[1]), iv.mul_up(3.0, r_star)),
            iv.add_up(iv.add_up(nrm[0], iv.mul_up(2.0, nrm[1])), iv.mul_up(3.0, r_star)),
            iv.add_up(iv.mul_up(2.0, nrm[2]), iv.mul_up(2.0, r_star)),
        ]

    du, dv = dhat(nu_), dhat(nv_)
    candidates = []
    what = [iv.add_up(sq.norm_nu(c, nu), r_star) for c in x.w]
    for j in range(1, n):
        wh = what[j - 1]
        wh2 = iv.mul_up(wh, wh)
        wh3 = iv.mul_up(wh2, wh)
        za = 0.0
        for p in range(3):
            za = iv.add_up(za, iv.mul_up(2.0, iv.mul_up(du[p], du[p])))
            za = iv.add_up(za, iv.mul_up(iv.mul_up(8.0, wh), iv.mul_up(ip[p], du[p])))
            za = iv.add_up(za, iv.mul_up(2.0 * ip[p] * ip[p], wh2))
        candidates.append(za)
        zw = 0.0
        for p in range(3):
            zw = iv.add_up(zw, iv.mul_up(iv.mul_up(6.0, wh), iv.mul_up(du[p], dv[p])))
            zw = iv.add_up(zw, iv.mul_up(iv.mul_up(6.0, wh2), iv.mul_up(ip[p], iv.add_up(du[p], dv[p]))))
            zw = iv.add_up(zw, iv.mul_up(2.0 * ip[p] * ip[p], wh3))
        tail = iv.add_up(iv.add_up(wh, _abs(x.alpha[j - 1])), r_star)
        zw = iv.add_up(zw, iv.mul_up(iv.mul_up(6.0, wh), tail))
        candidates.append(zw)
    for p in range(3):
        zv = 0.0
        for j in range(1, n):
            wh = what[j - 1]
            zv = iv.add_up(zv, iv.add_up(iv.mul_up(ip[p], iv.mul_up(wh, wh)), iv.mul_up(du[p], wh)))
        candidates.append(iv.add_up(4.0, iv.mul_up(6.0, zv)))
    if norm_A is None:
        norm_A = operator_norm_A(A, params)
    return float(iv.mul_up(norm_A, max(candidates)))


# --------------------------------------------------------------------------
# radii polynomial
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundSet:
    Y0: float
    Z0: float
    Z1: float
    Z2: float
    r_star: float = DEFAULT_R_STAR

    def __post_init__(self):
        for name in ("Y0", "Z0", "Z1", "Z2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite nonnegative float, got {v}")


class RadiiFailure(RuntimeError):
    """No radius satisfies the radii polynomial inequality."""


def radii_polynomial(bounds: BoundSet, r) -> RealInterval:
    """Interval enclosure of ``p(r) = Z2 r^2 + (Z1 + Z0 - 1) r + Y0``."""
    r = iv.as_interval(r)
    Z2, Z1, Z0, Y0 = (iv.as_interval(getattr(bounds, k)) for k in ("Z2", "Z1", "Z0", "Y0"))
    return Z2 * r * r + (Z1 + Z0 - 1.0) * r + Y0


def contraction_rate(bounds: BoundSet, r) -> RealInterval:
    """Enclosure of ``Z2 r + Z1 + Z0``."""
    return iv.as_interval(bounds.Z2) * iv.as_interval(r) + bounds.Z1 + bounds.Z0


def radii_solve(bounds: BoundSet) -> RealInterval:
    """Validated radius interval ``[r0_lo, r0_hi]`` with ``p < 0`` on all of it.

    ``r0_lo`` sits one percent above the smaller root, ``r0_hi`` one percent
    below the larger root (or at ``r_star``).  Negativity at both ends is
    checked in interval arithmetic; convexity of ``p`` covers the inside.
    """
    Y0, Z0, Z1, Z2 = bounds.Y0, bounds.Z0, bounds.Z1, bounds.Z2
    b = 1.0 - (Z0 + Z1)
    if not b > 0:
        raise RadiiFailure(f"Z0 + Z1 = {Z0 + Z1:.6g} >= 1")
    if Z2 > 0:
        disc = b * b - 4.0 * Z2 * Y0
        if not disc > 0:
            raise RadiiFailure(f"discriminant {disc:.6g} <= 0 (Y0={Y0:.3e}, Z2={Z2:.3e})")
        sq_disc = np.sqrt(disc)
        # numerically stable pair of roots
        r_upper = (b + sq_disc) / (2.0 * Z2)
        r_lower = 2.0 * Y0 / (b + sq_disc)
    else:
        r_upper = np.inf
        r_lower = Y0 / b
    lo = max(r_lower * (1.0 + 1e-2), np.finfo(float).tiny)
    if lo > bounds.r_star:
        raise RadiiFailure(f"smaller root {r_lower:.3e} exceeds r_star {bounds.r_star:.3e}")
    hi = min(r_upper * (1.0 - 1e-2), bounds.r_star)
    if hi < lo:
        raise RadiiFailure(f"roots too close: [{r_lower:.3e}, {r_upper:.3e}]")
    for r in (lo, hi):
        if not radii_polynomial(bounds, r).hi < 0:
            raise RadiiFailure(f"p({r:.6e}) is not verified negative")
        if not contraction_rate(bounds, r).hi < 1:
            raise RadiiFailure(f"Z2 r + Z1 + Z0 is not verified < 1 at r = {r:.6e}")
    return RealInterval(lo, hi)


def nondegeneracy(bounds: BoundSet, r0) -> float:
    """Upper bound ``1 / (1 - (Z2 r0 + Z1 + Z0))`` of the inverse derivative norm."""
    r0 = float(iv.as_interval(r0).hi)
    rate = contraction_rate(bounds, r0)
    if not rate.hi < 1:
        raise ValueError("Z2 r0 + Z1 + Z0 must be < 1")
    return float((1.0 / (1.0 - rate)).hi)


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------


def xbar_digest(xbar: StateX, params: ProblemParams) -> str:
    from .solver import state_document

    text = sq.canonical_json(state_document(xbar, params))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class Certificate:
    params: dict
    xbar_sha: str
    Y0: float | None = None
    Z0: float | None = None
    Z1: float | None = None
    Z2: float | None = None
    r_star: float = DEFAULT_R_STAR
    r0_lo: float | None = None
    r0_hi: float | None = None
    nondegen: float | None = None
    verified: bool = False
    failure_reason: str | None = None
    xbar_file: str | None = None
    timestamp: str = field(default="")

    @property
    def bounds(self) -> BoundSet | None:
        if None in (self.Y0, self.Z0, self.Z1, self.Z2):
            return None
        return BoundSet(self.Y0, self.Z0, self.Z1, self.Z2, self.r_star)

    @property
    def r0(self) -> RealInterval | None:
        return None if self.r0_lo is None else RealInterval(self.r0_lo, self.r0_hi)

    def statement(self) -> str:
        if not self.verified:
            return f"validation failed: {self.failure_reason}"
        return (
            f"there is a unique real zero within X-distance {self.r0_lo:.3e} of xbar "
            f"(unique up to radius {self.r0_hi:.3e}); its unfolding parameters vanish"
        )

    def as_dict(self, with_timestamp: bool = True) -> dict:
        d = asdict(self)
        if not with_timestamp:
            d.pop("timestamp")
        return d

    def to_json(self, with_timestamp: bool = True) -> str:
        return json.dumps(self.as_dict(with_timestamp), sort_keys=True, indent=1)


def validate(xbar: StateX, params: ProblemParams, ref: ReferenceOrbit, r_star: float = DEFAULT_R_STAR,
             threads: int = 1, xbar_file: str | None = None) -> Certificate:
    """Run all bounds and the radii polynomial; never raises on a failed proof."""
    if not params.resonance.is_simple:
        raise ValidationError(f"resonance {params.resonance.kind.value} is not admissible")
    if xbar.real_defect() != 0.0 and not xbar.is_interval:
        raise ValidationError(f"xbar is not sigma-symmetric (defect {xbar.real_defect():.3e})")
    if ref.m1 >= params.m:
        raise ValidationError(f"reference orbit support m1={ref.m1} must be < m={params.m}")
    cert = Certificate(
        params=params.as_dict(),
        xbar_sha=xbar_digest(xbar, params),
        r_star=r_star,
        xbar_file=xbar_file,
        timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    )
    try:
        Adag, A = build_operators(xbar, params, ref)
    except ValidationError as exc:
        cert.failure_reason = str(exc)
        return cert
    xbox = xbar.to_interval()
    cert.Y0 = bound_Y0(xbox, A, params, ref)
    log.info("Y0 = %.3e", cert.Y0)
    cert.Z0 = bound_Z0(A, Adag, params, xbox, ref)
    log.info("Z0 = %.3e", cert.Z0)
    cert.Z1 = bound_Z1(xbox, A, params, ref, threads=threads)
    log.info("Z1 = %.3e", cert.Z1)
    cert.Z2 = bound_Z2(xbox, A, params, r_star)
    log.info("Z2 = %.3e", cert.Z2)
    try:
        r0 = radii_solve(cert.bounds)
    except RadiiFailure as exc:
        cert.failure_reason = str(exc)
        return cert
    cert.r0_lo, cert.r0_hi = float(r0.lo), float(r0.hi)
    cert.nondegen = nondegeneracy(cert.bounds, cert.r0_lo)
    cert.verified = True
    return cert
