"""The symmetric n-body choreography problem as a zero-finding problem.

The n-th body ``u = (u1, u2, u3)`` lives in a frame rotating with the
polygon equilibrium; every other body is obtained from ``u`` by a rotation and
a time shift.  The chord reciprocals ``w_j`` are extra unknowns that turn the
gravitational nonlinearity into polynomials, and the scalars ``lam`` and
``alpha`` unfold the phase conditions and the initial conditions on ``w``.

Every map here is written once and runs on float sequences (Newton) or on
interval sequences (validation); the backend follows the inputs.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import interval as iv
from . import seqspace as sq
from .interval import ComplexBox, RealInterval
from .seqspace import CoeffSeq, SeqVec

# moduli bounds for the rows of M_jl: |row 1|,|row 2| <= 3 and |row 3| <= 2
I_CONST = (3.0, 3.0, 2.0)


# --------------------------------------------------------------------------
# parameters and constants
# --------------------------------------------------------------------------


def compute_s1(n: int, interval: bool = False):
    """``s1 = 1/4 * sum_{j=1}^{n-1} 1/sin(j*pi/n)``.

    Returns a float, or a :class:`RealInterval` enclosure if ``interval``.
    """
    if n < 3:
        raise ValueError("need at least 3 bodies")
    enclosure = _s1_enclosure(n)
    if interval:
        return enclosure
    return float(enclosure.mid())


@functools.lru_cache(maxsize=None)
def _s1_enclosure(n: int) -> RealInterval:
    # 120-bit rigorous interval sum, then outward rounding to doubles
    ctx = mpmath.iv
    saved, ctx.prec = ctx.prec, 120
    try:
        total = ctx.mpf(0)
        for j in range(1, n):
            total += 1 / ctx.sin(ctx.pi * j / n)
        total /= 4
    finally:
        ctx.prec = saved
    lo = float(np.nextafter(float(total.a), -np.inf))
    hi = float(np.nextafter(float(total.b), np.inf))
    return RealInterval(lo, hi)


class ResonanceKind(str, enum.Enum):
    SIMPLE = "simple-choreography"
    MULTIPLE = "multiple"
    QUASIPERIODIC = "quasiperiodic-excluded"


@dataclass(frozen=True)
class Resonance:
    kind: ResonanceKind
    k_tilde: int
    h: int

    @property
    def is_simple(self) -> bool:
        return self.kind is ResonanceKind.SIMPLE


def check_resonance(n: int, k: int, p: int, q: int) -> Resonance:
    """Classify the p:q resonance for the symmetry index k.

    Integer p, q always give a rational frequency ratio, so the quasiperiodic
    class is never returned here.
    """
    if p < 1 or q < 1:
        raise ValueError("p and q must be positive")
    h = math.gcd(n, k)
    d = k * q - p
    if d == 0:
        return Resonance(ResonanceKind.SIMPLE, k, h)
    if math.gcd(p, q) != 1:
        raise ValueError(f"p={p} and q={q} are not coprime")
    if d % n != 0:
        return Resonance(ResonanceKind.MULTIPLE, k, h)
    q_inv = pow(q, -1, p) if p > 1 else 0
    return Resonance(ResonanceKind.SIMPLE, k - d * q_inv, h)


@dataclass(frozen=True)
class ProblemParams:
    n: int
    k: int
    p: int
    q: int
    m: int
    nu: float = 1.0
    omega_value: float | None = None  # overrides sqrt(s1) p/q during continuation

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("need n >= 3")
        if not 1 <= self.k <= self.n - 1:
            raise ValueError("k must lie in 1..n-1")
        if self.m < 2:
            raise ValueError("need m >= 2")
        if self.nu < 1:
            raise ValueError("need nu >= 1")
        check_resonance(self.n, self.k, self.p, self.q)

    @property
    def zeta(self) -> float:
        return 2 * math.pi / self.n

    @property
    def s1(self) -> float:
        return compute_s1(self.n)

    @property
    def omega(self) -> float:
        return float(self.constants(True).omega.mid())

    @property
    def period(self) -> float:
        """Physical period ``2 pi / omega``."""
        return float((iv.iv_pi() * 2.0 / self.constants(True).omega).mid())

    @property
    def resonance(self) -> Resonance:
        return check_resonance(self.n, self.k, self.p, self.q)

    @property
    def size(self) -> int:
        return 2 * self.m * (self.n + 5) - 3

    def with_m(self, m: int) -> "ProblemParams":
        return dataclasses.replace(self, m=m)

    def with_omega(self, omega: float | None) -> "ProblemParams":
        return dataclasses.replace(self, omega_value=omega)

    def constants(self, interval: bool = False) -> "Constants":
        return _constants(self.n, self.p, self.q, interval, self.omega_value)

    def as_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "p": self.p, "q": self.q, "m": self.m, "nu": self.nu}


@dataclass(frozen=True)
class Constants:
    """Scalars entering g: floats for Newton, intervals for validation."""

    s1: object
    sqrt_s1: object
    omega: object
    omega2: object
    two_omega_sqrt_s1: object


@functools.lru_cache(maxsize=None)
def _constants(n: int, p: int, q: int, interval: bool, omega_value: float | None = None) -> Constants:
    s1 = compute_s1(n, interval=True)
    sqrt_s1 = iv.iv_sqrt(s1)
    if omega_value is None:
        omega = sqrt_s1 * iv.as_interval(float(p)) / iv.as_interval(float(q))
    else:
        omega = iv.as_interval(float(omega_value))
    omega2 = omega * omega
    tw = omega * sqrt_s1 * 2.0
    if interval:
        return Constants(s1, sqrt_s1, omega, omega2, tw)
    mid = lambda x: float(x.mid())  # noqa: E731
    # recompute the float products from float values so Newton is self-consistent
    om = mid(omega)
    return Constants(mid(s1), mid(sqrt_s1), om, om * om, 2.0 * om * mid(sqrt_s1))


# --------------------------------------------------------------------------
# the delay/rotation operators M_j
# --------------------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def _m_entries_float(n: int, k: int, j: int, N: int):
    a, b, c = _m_entries_box(n, k, j, N)
    return a.mid(), b.mid(), c.mid()


@functools.lru_cache(maxsize=256)
def _m_entries_box(n: int, k: int, j: int, N: int):
    ell = np.arange(-N, N + 1)
    # e^{i j k l zeta} with the phase reduced exactly mod n
    r = (j * k * ell) % n
    se, ce = iv.sincos_2pi_frac(r, n)
    e = ComplexBox(ce, se)
    sj, cj = iv.sincos_2pi_frac(np.array([j % n]), n)
    sj, cj = sj[0], cj[0]
    a = 1.0 - e * cj
    b = e * sj
    c = 1.0 - e
    return a, b, c


def m_entries(params: ProblemParams, j: int, N: int, interval: bool = False):
    """Per-mode entries ``(A_l, B_l, C_l)`` for ``l = -N..N``.

    ``M_jl = [[A, B, 0], [-B, A, 0], [0, 0, C]]``.
    """
    if not 1 <= j <= params.n - 1:
        raise ValueError("j must lie in 1..n-1")
    if interval:
        return _m_entries_box(params.n, params.k, j, N)
    return _m_entries_float(params.n, params.k, j, N)


def m_matrix(params: ProblemParams, j: int, ell: int) -> np.ndarray:
    """The 3x3 float matrix ``M_jl``."""
    N = abs(ell)
    a, b, c = (x[ell + N] for x in m_entries(params, j, N))
    return np.array([[a, b, 0], [-b, a, 0], [0, 0, c]], dtype=complex)


def _modewise(seq: CoeffSeq, factor) -> CoeffSeq:
    return CoeffSeq(seq.coeffs * factor)


def apply_Mj(u: SeqVec, j: int, params: ProblemParams) -> SeqVec:
    """``(M_j u)_l = M_jl u_l`` mode by mode."""
    N = max(c.N for c in u)
    u1, u2, u3 = (c.pad(N) for c in u)
    interval = any(c.is_interval for c in u)
    a, b, c = m_entries(params, j, N, interval)
    return SeqVec(
        [
            _modewise(u1, a) + _modewise(u2, b),
            _modewise(u2, a) - _modewise(u1, b),
            _modewise(u3, c),
        ]
    )


# --------------------------------------------------------------------------
# state containers
# --------------------------------------------------------------------------


def _scalars(x, interval: bool):
    if interval:
        return x if isinstance(x, ComplexBox) else ComplexBox.from_complex(np.asarray(x, dtype=complex))
    return np.asarray(x, dtype=complex)


@dataclass
class StateX:
    """Unknown ``x = (lam, alpha, u, v, w)``."""

    lam: object
    alpha: object
    u: SeqVec
    v: SeqVec
    w: SeqVec

    @property
    def n(self) -> int:
        return len(self.w) + 1

    @property
    def is_interval(self) -> bool:
        return isinstance(self.lam, ComplexBox)

    def sequences(self) -> list[CoeffSeq]:
        return [*self.u, *self.v, *self.w]

    def to_vector(self, m: int) -> np.ndarray:
        """Flatten the Galerkin part into the layout ``[lam, alpha, u, v, w]``."""
        parts = [np.asarray(self.lam, dtype=complex), np.asarray(self.alpha, dtype=complex)]
        parts += [sq.project(c, m).coeffs for c in self.sequences()]
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, vec: np.ndarray, n: int, m: int) -> "StateX":
        vec = np.asarray(vec, dtype=complex)
        L = 2 * m - 1
        if len(vec) != 2 * m * (n + 5) - 3:
            raise ValueError("vector length does not match n and m")
        lam, alpha = vec[:3].copy(), vec[3 : n + 2].copy()
        seqs = [CoeffSeq(vec[n + 2 + i * L : n + 2 + (i + 1) * L].copy()) for i in range(n + 5)]
        return cls(lam, alpha, SeqVec(seqs[:3]), SeqVec(seqs[3:6]), SeqVec(seqs[6:]))

    def galerkin(self, m: int) -> "StateX":
        """Sequences truncated or zero-padded to exactly the modes ``|l| < m``."""
        fit = lambda c: sq.project(c, m).pad(m - 1)  # noqa: E731
        return StateX(self.lam, self.alpha, SeqVec(map(fit, self.u)), SeqVec(map(fit, self.v)),
                      SeqVec(map(fit, self.w)))

    def to_interval(self) -> "StateX":
        return StateX(
            _scalars(self.lam, True),
            _scalars(self.alpha, True),
            SeqVec(c.to_interval() for c in self.u),
            SeqVec(c.to_interval() for c in self.v),
            SeqVec(c.to_interval() for c in self.w),
        )

    def sigma(self) -> "StateX":
        """Conjugate reflection of every sequence and conjugation of scalars."""
        return StateX(
            np.conj(self.lam),
            np.conj(self.alpha),
            SeqVec(sq.conj_reflect(c) for c in self.u),
            SeqVec(sq.conj_reflect(c) for c in self.v),
            SeqVec(sq.conj_reflect(c) for c in self.w),
        )

    def symmetrized(self) -> "StateX":
        return StateX(
            np.real(self.lam).astype(complex),
            np.real(self.alpha).astype(complex),
            SeqVec(sq.symmetrize(c) for c in self.u),
            SeqVec(sq.symmetrize(c) for c in self.v),
            SeqVec(sq.symmetrize(c) for c in self.w),
        )

    def real_defect(self) -> float:
        """Sup distance to the real subspace (0 for real states)."""
        d = [np.max(np.abs(np.imag(self.lam)), initial=0.0), np.max(np.abs(np.imag(self.alpha)), initial=0.0)]
        for c in self.sequences():
            d.append(float(np.max(np.abs(c.coeffs - np.conj(c.coeffs[::-1])))))
        return float(max(d))

    def norm_X(self, nu: float) -> float:
        vals = [np.max(np.abs(self.lam)), np.max(np.abs(self.alpha))]
        vals += [sq.norm_nu(c, nu) for c in self.sequences()]
        return float(max(vals))

    def copy(self) -> "StateX":
        return StateX(
            np.array(self.lam, dtype=complex),
            np.array(self.alpha, dtype=complex),
            SeqVec(CoeffSeq(c.coeffs.copy()) for c in self.u),
            SeqVec(CoeffSeq(c.coeffs.copy()) for c in self.v),
            SeqVec(CoeffSeq(c.coeffs.copy()) for c in self.w),
        )


@dataclass
class YVec:
    """Value of the Fourier map: ``(eta, gamma, f, g, h)``."""

    eta: object
    gamma: object
    f: SeqVec
    g: SeqVec
    h: SeqVec

    def sequences(self) -> list[CoeffSeq]:
        return [*self.f, *self.g, *self.h]

    def to_vector(self, m: int) -> np.ndarray:
        parts = [np.asarray(self.eta, dtype=complex), np.asarray(self.gamma, dtype=complex)]
        parts += [sq.project(c, m).coeffs for c in self.sequences()]
        return np.concatenate(parts)

    def sigma(self) -> "YVec":
        return YVec(
            np.conj(self.eta),
            np.conj(self.gamma),
            SeqVec(sq.conj_reflect(c) for c in self.f),
            SeqVec(sq.conj_reflect(c) for c in self.g),
            SeqVec(sq.conj_reflect(c) for c in self.h),
        )


@dataclass(frozen=True)
class ReferenceOrbit:
    """Frozen orbit defining the phase conditions."""

    utilde: SeqVec
    m1: int = field(default=0)

    @classmethod
    def from_u(cls, u: SeqVec, m1: int) -> "ReferenceOrbit":
        """Keep the modes ``|l| < m1`` of ``u`` (midpoints if intervals)."""
        return cls(SeqVec(sq.project(c.mid(), m1) for c in u), m1)

    def __post_init__(self):
        if self.m1 == 0:
            object.__setattr__(self, "m1", self.utilde[0].N + 1)


def default_reference(u: SeqVec, m: int) -> ReferenceOrbit:
    return ReferenceOrbit.from_u(u, m - 1)


# --------------------------------------------------------------------------
# the Fourier map
# --------------------------------------------------------------------------


def _sum_all(c: CoeffSeq):
    """``sum_l c_l`` (value of the series at t = 0)."""
    return c.coeffs.sum()


def _coef0_of_product(a: CoeffSeq, b: CoeffSeq):
    """``(a * b)_0 = sum_l a_l b_{-l}`` without forming the full product."""
    N = min(a.N, b.N)
    aa = a.coeffs[a.N - N : a.N + N + 1]
    bb = b.coeffs[b.N - N : b.N + N + 1]
    if isinstance(aa, ComplexBox) or isinstance(bb, ComplexBox):
        return _box_dot(aa, bb[::-1])
    return np.dot(aa, bb[::-1])


def _box_dot(a, b):
    """Rigorous dot product of two 1-d (box or float) arrays."""
    if not isinstance(a, ComplexBox):
        a = np.asarray(a)
    if not isinstance(b, ComplexBox):
        b = np.asarray(b)
    # treat as a 1x K matrix times a K vector
    a2 = a.reshape(1, -1)
    return iv.matmul(a2, b)[0]


def eta(u: SeqVec, ref: ReferenceOrbit):
    """Phase conditions (rotation, time shift, vertical translation)."""
    ut = ref.utilde
    e1 = _coef0_of_product(u[1], ut[0]) - _coef0_of_product(u[0], ut[1])
    e2 = (
        _coef0_of_product(u[0], sq.differentiate(ut[0]))
        + _coef0_of_product(u[1], sq.differentiate(ut[1]))
        + _coef0_of_product(u[2], sq.differentiate(ut[2]))
    )
    e3 = u[2][0]
    return _stack([e1, e2, e3])


def _stack(values):
    if any(isinstance(v, ComplexBox) for v in values):
        boxes = [iv.as_box(v).reshape(1) for v in values]
        return ComplexBox.concatenate(boxes)
    return np.array(values, dtype=complex)


def gamma(u: SeqVec, w: SeqVec, params: ProblemParams):
    """Initial-condition defects ``w_j(0)^2 |(M_j u)(0)|^2 - 1``."""
    out = []
    for j in range(1, params.n):
        mu = apply_Mj(u, j, params)
        W = _sum_all(w[j - 1])
        P = [_sum_all(c) for c in mu]
        S = P[0] * P[0] + P[1] * P[1] + P[2] * P[2]
        out.append(W * W * S - 1.0)
    return _stack(out)


def map_f(u: SeqVec, v: SeqVec) -> SeqVec:
    return SeqVec(sq.differentiate(a) - b for a, b in zip(u, v, strict=True))


def _jbar(a: SeqVec) -> SeqVec:
    """``Jbar a = (-a2, a1, 0)``."""
    return SeqVec([-a[1], a[0], a[2] * 0.0])


def map_g(lam, u: SeqVec, v: SeqVec, w: SeqVec, params: ProblemParams, const: Constants | None = None) -> SeqVec:
    """Second-order equation for the n-th body (velocity form)."""
    interval = any(c.is_interval for c in [*u, *v, *w]) or isinstance(lam, ComplexBox)
    if const is None:
        const = params.constants(interval)
    jv = _jbar(v)
    ju = _jbar(u)
    out = []
    for p in range(3):
        term = sq.differentiate(v[p]) * const.omega2 + jv[p] * const.two_omega_sqrt_s1
        if p < 2:
            term = term - u[p] * const.s1
        term = term + ju[p] * lam[0] + v[p] * lam[1]
        if p == 2:
            term = term + sq.delta(0) * lam[2]
        out.append(term)
    for j in range(1, params.n):
        mu = apply_Mj(u, j, params)
        w3 = sq.power(w[j - 1], 3)
        for p in range(3):
            out[p] = out[p] + sq.convolve(mu[p], w3)
    return SeqVec(out)


def map_h(alpha, u: SeqVec, v: SeqVec, w: SeqVec, params: ProblemParams) -> SeqVec:
    """Differential equations satisfied by the chord reciprocals."""
    out = []
    for j in range(1, params.n):
        mu = apply_Mj(u, j, params)
        mv = apply_Mj(v, j, params)
        Q = sq.convolve(mu[0], mv[0]) + sq.convolve(mu[1], mv[1]) + sq.convolve(mu[2], mv[2])
        w3 = sq.power(w[j - 1], 3)
        out.append(sq.differentiate(w[j - 1]) + sq.convolve(w3, Q) + w3 * alpha[j - 1])
    return SeqVec(out)


def fourier_map(x: StateX, params: ProblemParams, ref: ReferenceOrbit, const: Constants | None = None) -> YVec:
    """Full map ``F(x) = (eta, gamma, f, g, h)`` with exact support growth."""
    return YVec(
        eta(x.u, ref),
        gamma(x.u, x.w, params),
        map_f(x.u, x.v),
        map_g(x.lam, x.u, x.v, x.w, params, const),
        map_h(x.alpha, x.u, x.v, x.w, params),
    )


def galerkin_map(xvec: np.ndarray, params: ProblemParams, ref: ReferenceOrbit) -> np.ndarray:
    """Projected map on the flat Galerkin vector."""
    x = StateX.from_vector(xvec, params.n, params.m)
    return fourier_map(x, params, ref).to_vector(params.m)


# --------------------------------------------------------------------------
# Jacobian of the Galerkin map
# --------------------------------------------------------------------------


def toeplitz(a: CoeffSeq, m: int) -> np.ndarray:
    """Matrix of ``b -> project(a * b, m)`` on vectors of ``2m - 1`` modes.

    Entry ``[l, s]`` is ``a_{l-s}`` for ``|l|, |s| < m``.
    """
    a = a.pad(2 * (m - 1))
    ell = np.arange(-(m - 1), m)
    idx = ell[:, None] - ell[None, :] + a.N
    return a.coeffs[idx]


class Layout:
    """Index bookkeeping for the flat unknown / equation vector."""

    def __init__(self, n: int, m: int):
        self.n, self.m = n, m
        self.L = 2 * m - 1
        self.size = 2 * m * (n + 5) - 3

    def lam(self, i: int) -> int:
        return i

    def alpha(self, j: int) -> int:
        """Index of ``alpha_j`` (j = 1..n-1)."""
        return 3 + j - 1

    def seq(self, block: int) -> slice:
        """Slice of the ``block``-th sequence (0..n+4: u1..u3, v1..v3, w1..)."""
        start = self.n + 2 + block * self.L
        return slice(start, start + self.L)

    def u(self, p: int) -> slice:
        return self.seq(p)

    def v(self, p: int) -> slice:
        return self.seq(3 + p)

    def w(self, j: int) -> slice:
        """Slice of ``w_j`` (j = 1..n-1)."""
        return self.seq(6 + j - 1)

    # equation rows share the same layout
    eta = lam
    gamma = alpha
    f = u
    g = v
    h = w

    def block_of(self, index: int) -> tuple[str, int]:
        """Which block an index belongs to: ('scalar', i) or ('seq', b)."""
        if index < self.n + 2:
            return "scalar", index
        return "seq", (index - self.n - 2) // self.L

    def seq_mode(self, index: int) -> int:
        return (index - self.n - 2) % self.L - (self.m - 1)


def jacobian_galerkin(xvec, params: ProblemParams, ref: ReferenceOrbit, interval: bool = False):
    """Exact derivative of :func:`galerkin_map`.

    ``xvec`` is a flat vector or a :class:`StateX`.  With ``interval=True`` the
    state is promoted to boxes and the result is a :class:`ComplexBox` matrix
    enclosing the true Jacobian.
    """
    n, m = params.n, params.m
    lay = Layout(n, m)
    const = params.constants(interval)
    x = xvec if isinstance(xvec, StateX) else StateX.from_vector(xvec, n, m)
    x = x.galerkin(m)
    if interval:
        x = x if x.is_interval else x.to_interval()
        J = ComplexBox.zeros((lay.size, lay.size))
    else:
        J = np.zeros((lay.size, lay.size), dtype=complex)
    ell = np.arange(-(m - 1), m)
    dmat = 1j * ell
    ut = [sq.project(c, m).pad(m - 1) for c in ref.utilde]
    if interval:
        ut = [c.to_interval() for c in ut]

    # eta rows: derivative of (a * b)_0 w.r.t. a_s is b_{-s}
    J[0, lay.u(0)] = -ut[1].coeffs[::-1]
    J[0, lay.u(1)] = ut[0].coeffs[::-1]
    for p in range(3):
        J[1, lay.u(p)] = sq.differentiate(ut[p]).coeffs[::-1]
    J[2, lay.u(2).start + m - 1] = 1.0

    # f rows
    for p in range(3):
        rows = np.arange(lay.f(p).start, lay.f(p).stop)
        J[rows, np.arange(lay.u(p).start, lay.u(p).stop)] = dmat
        J[rows, np.arange(lay.v(p).start, lay.v(p).stop)] = -1.0

    # g rows: linear part
    u, v, w = x.u, x.v, x.w
    lam, alpha = x.lam, x.alpha
    idx = lambda sl: np.arange(sl.start, sl.stop)  # noqa: E731
    for p in range(3):
        J[idx(lay.g(p)), idx(lay.v(p))] += const.omega2 * dmat + lam[1]
        if p < 2:
            J[idx(lay.g(p)), idx(lay.u(p))] += -const.s1
    # Jbar v and lam1 Jbar u: row 1 gets -(.)_2, row 2 gets +(.)_1
    J[idx(lay.g(0)), idx(lay.v(1))] += -const.two_omega_sqrt_s1
    J[idx(lay.g(1)), idx(lay.v(0))] += const.two_omega_sqrt_s1
    J[idx(lay.g(0)), idx(lay.u(1))] += -lam[0]
    J[idx(lay.g(1)), idx(lay.u(0))] += lam[0]
    # lambda columns
    J[idx(lay.g(0)), 0] = -u[1].coeffs
    J[idx(lay.g(1)), 0] = u[0].coeffs
    for p in range(3):
        J[idx(lay.g(p)), 1] = v[p].coeffs
    J[lay.g(2).start + m - 1, 2] = 1.0

    for j in range(1, n):
        a, b, c = m_entries(params, j, m - 1, interval)
        Mpq = [[a, b, 0 * a], [-b, a, 0 * a], [0 * a, 0 * a, c]]
        mu = apply_Mj(u, j, params)
        mv = apply_Mj(v, j, params)
        wj = w[j - 1]
        w2 = sq.convolve(wj, wj)
        w3 = sq.convolve(w2, wj)
        T_w3 = toeplitz(w3, m)
        T_3w2 = toeplitz(3.0 * w2, m)
        # g: u-columns through M_j, w-columns through w^3
        for pr in range(3):
            for qc in range(3):
                if pr != qc and (pr == 2 or qc == 2):
                    continue
                J[lay.g(pr), lay.u(qc)] += T_w3 * Mpq[pr][qc][None, :]
            J[lay.g(pr), lay.w(j)] += toeplitz(sq.convolve(mu[pr], 3.0 * w2), m)

        # gamma row
        W = _sum_all(wj)
        P = [_sum_all(cc) for cc in mu]
        S = sum(pp * pp for pp in P)
        J[lay.gamma(j), lay.w(j)] = 2 * W * S
        for qc in range(3):
            col = sum(2 * P[pr] * Mpq[pr][qc] for pr in range(3))
            J[lay.gamma(j), lay.u(qc)] = W * W * col

        # h_j rows
        Q = sq.convolve(mu[0], mv[0]) + sq.convolve(mu[1], mv[1]) + sq.convolve(mu[2], mv[2])
        rows = lay.h(j)
        J[rows, lay.w(j)] += toeplitz(sq.convolve(3.0 * w2, Q), m) + alpha[j - 1] * T_3w2
        for pr in range(3):
            T_v = toeplitz(sq.convolve(w3, mv[pr]), m)
            T_u = toeplitz(sq.convolve(w3, mu[pr]), m)
            for qc in range(3):
                if pr != qc and (pr == 2 or qc == 2):
                    continue
                J[rows, lay.u(qc)] += T_v * Mpq[pr][qc][None, :]
                J[rows, lay.v(qc)] += T_u * Mpq[pr][qc][None, :]
        J[rows, lay.alpha(j)] = sq.project(w3, m).coeffs
        J[idx(rows), idx(lay.w(j))] += dmat
    return J


# --------------------------------------------------------------------------
# time-domain residual of the original delay equations
# --------------------------------------------------------------------------


def dde_residual(u: SeqVec, params: ProblemParams, t) -> np.ndarray:
    """Residual of the gravitational delay equations at times ``t``.

    Returns an array of shape ``(len(t), 3)``; the equations are used in their
    second-order form with the real parts of the Fourier series.
    """
    t = np.asarray(t, dtype=float)
    const = params.constants(False)
    om, s1, sq_s1 = const.omega, const.s1, const.sqrt_s1
    pos = np.stack([sq.evaluate(c, t).real for c in u], axis=-1)
    vel = np.stack([sq.evaluate(sq.differentiate(c), t).real for c in u], axis=-1)
    acc = np.stack([sq.evaluate(sq.differentiate(sq.differentiate(c)), t).real for c in u], axis=-1)
    jbar = lambda a: np.stack([-a[..., 1], a[..., 0], np.zeros_like(a[..., 0])], axis=-1)  # noqa: E731
    ibar = np.array([1.0, 1.0, 0.0])
    res = om**2 * acc + 2 * om * sq_s1 * jbar(vel) - s1 * ibar * pos
    zeta = params.zeta
    for j in range(1, params.n):
        shift = j * params.k * zeta
        other = np.stack([sq.evaluate(c, t + shift).real for c in u], axis=-1)
        cj, sj = math.cos(j * zeta), math.sin(j * zeta)
        rot = np.stack([cj * other[:, 0] - sj * other[:, 1], sj * other[:, 0] + cj * other[:, 1], other[:, 2]], axis=-1)
        d = pos - rot
        r = np.linalg.norm(d, axis=-1)
        res = res + d / r[:, None] ** 3
    return res
