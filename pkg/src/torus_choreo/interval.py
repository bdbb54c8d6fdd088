"""Outward-rounded interval arithmetic on numpy arrays.

Real intervals are stored as ``lo``/``hi`` float arrays and every elementwise
operation is followed by a one-ulp outward step with :func:`numpy.nextafter`.
Under IEEE round-to-nearest each basic operation is within half an ulp of the
exact result, so the step yields a valid enclosure without touching the FPU
rounding mode (nothing here is thread-sensitive).

Long reductions (sums, dot products, convolutions, matrix products) are done
in midpoint-radius form with the classical a priori bound
``|fl(sum x_i y_i) - sum x_i y_i| <= gamma_K * sum |x_i y_i|`` plus an
underflow term, which holds for any summation order and with or without FMA.

Complex intervals are rectangles (:class:`ComplexBox`).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

UNIT_ROUNDOFF = 2.0**-53
ETA = 2.0**-1074  # smallest positive subnormal

_PI_LO = 3.141592653589793  # float(pi) < pi
_PI_HI = float(np.nextafter(_PI_LO, np.inf))

_TAYLOR_ORDER = 21


def down(x):
    return np.nextafter(x, -np.inf)


def up(x):
    return np.nextafter(x, np.inf)


def _gamma(k):
    """Upper bound of gamma_k = k u / (1 - k u), padded for its own rounding."""
    ku = (k + 2) * UNIT_ROUNDOFF
    if ku >= 0.5:
        raise OverflowError("reduction too long for a priori error bound")
    return ku / (1.0 - ku) / (1.0 - ku) * (1.0 + 1e-10)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise OverflowError("interval enclosure is not finite")


# --------------------------------------------------------------------------
# upward-rounded helpers for nonnegative floats
# --------------------------------------------------------------------------


def add_up(a, b):
    return up(np.add(a, b))


def mul_up(a, b):
    return up(np.multiply(a, b))


def div_up(a, b):
    """Upper bound of a/b for a >= 0, b > 0."""
    return up(np.divide(a, b))


def sum_up(x, axis=None):
    """Upper bound of the exact sum of nonnegative ``x``."""
    x = np.asarray(x, dtype=float)
    k = x.size if axis is None else x.shape[axis]
    s = np.sum(x, axis=axis)
    return up(s * (1.0 + _gamma(k)))


def matmul_up(a, b):
    """Upper bound of the exact product of nonnegative matrices/vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    k = a.shape[-1]
    c = a @ b
    return up(c * (1.0 + 2.0 * _gamma(k)) + 2.0 * k * ETA)


def pow_up(x, k):
    """Upper bound of x**k for x >= 0 and integer k >= 0."""
    r = 1.0
    for _ in range(k):
        r = mul_up(r, x)
    return r


# --------------------------------------------------------------------------
# real intervals
# --------------------------------------------------------------------------


class RealInterval:
    """Array of closed real intervals ``[lo, hi]``."""

    __slots__ = ("lo", "hi")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, lo, hi=None):
        lo = np.array(lo, dtype=float)
        hi = lo.copy() if hi is None else np.array(hi, dtype=float)
        lo, hi = np.broadcast_arrays(lo, hi)
        if np.any(lo > hi):
            raise ValueError("interval with lo > hi")
        _check_finite(lo, hi)
        self.lo = np.array(lo)
        self.hi = np.array(hi)

    @classmethod
    def _raw(cls, lo, hi):
        obj = cls.__new__(cls)
        _check_finite(lo, hi)
        obj.lo = lo
        obj.hi = hi
        return obj

    @classmethod
    def zeros(cls, shape):
        return cls._raw(np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_midrad(cls, mid, rad):
        mid = np.asarray(mid, dtype=float)
        rad = np.asarray(rad, dtype=float)
        return cls._raw(down(mid - rad), up(mid + rad))

    @property
    def shape(self):
        return self.lo.shape

    @property
    def ndim(self):
        return self.lo.ndim

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, idx):
        return RealInterval._raw(self.lo[idx], self.hi[idx])

    def __setitem__(self, idx, value):
        value = as_interval(value)
        self.lo[idx] = value.lo
        self.hi[idx] = value.hi

    def copy(self):
        return RealInterval._raw(self.lo.copy(), self.hi.copy())

    def reshape(self, *shape):
        return RealInterval._raw(self.lo.reshape(*shape), self.hi.reshape(*shape))

    @property
    def T(self):
        return RealInterval._raw(self.lo.T, self.hi.T)

    def mid(self):
        return 0.5 * self.lo + 0.5 * self.hi

    def width(self):
        return up(self.hi - self.lo)

    def midrad(self):
        m = self.mid()
        r = up(np.maximum(m - self.lo, self.hi - m))
        return m, r

    def mag(self):
        """Upper bound of |x| over the interval (float array)."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self):
        """Lower bound of |x| over the interval."""
        return np.where((self.lo <= 0) & (self.hi >= 0), 0.0, np.minimum(np.abs(self.lo), np.abs(self.hi)))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (self.lo <= x) & (x <= self.hi)

    def encloses(self, other):
        other = as_interval(other)
        return (self.lo <= other.lo) & (other.hi <= self.hi)

    def __repr__(self):
        if self.ndim == 0:
            return f"RealInterval([{self.lo!r}, {self.hi!r}])"
        return f"RealInterval(shape={self.shape})"

    def __neg__(self):
        return RealInterval._raw(-self.hi, -self.lo)

    def __add__(self, other):
        if isinstance(other, ComplexBox):
            return NotImplemented
        if _is_complex_array(other):
            return as_box(self).__add__(other)
        other = as_interval(other)
        return RealInterval._raw(down(self.lo + other.lo), up(self.hi + other.hi))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ComplexBox):
            return NotImplemented
        if _is_complex_array(other):
            return as_box(self).__sub__(other)
        other = as_interval(other)
        return RealInterval._raw(down(self.lo - other.hi), up(self.hi - other.lo))

    def __rsub__(self, other):
        if _is_complex_array(other):
            return as_box(other) - self
        return as_interval(other) - self

    def __mul__(self, other):
        if isinstance(other, ComplexBox):
            return NotImplemented
        if _is_complex_array(other):
            return as_box(self).__mul__(other)
        other = as_interval(other)
        p = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        lo = np.minimum(np.minimum(p[0], p[1]), np.minimum(p[2], p[3]))
        hi = np.maximum(np.maximum(p[0], p[1]), np.maximum(p[2], p[3]))
        return RealInterval._raw(down(lo), up(hi))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ComplexBox):
            return NotImplemented
        if _is_complex_array(other):
            return as_box(self).__truediv__(other)
        other = as_interval(other)
        if np.any((other.lo <= 0) & (other.hi >= 0)):
            raise ZeroDivisionError("division by an interval containing zero")
        q = (self.lo / other.lo, self.lo / other.hi, self.hi / other.lo, self.hi / other.hi)
        lo = np.minimum(np.minimum(q[0], q[1]), np.minimum(q[2], q[3]))
        hi = np.maximum(np.maximum(q[0], q[1]), np.maximum(q[2], q[3]))
        return RealInterval._raw(down(lo), up(hi))

    def __rtruediv__(self, other):
        if _is_complex_array(other):
            return as_box(other) / self
        return as_interval(other) / self

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only nonnegative integer powers are supported")
        if k == 0:
            return RealInterval._raw(np.ones(self.shape), np.ones(self.shape))
        if k % 2 == 0:
            a = RealInterval._raw(self.mig(), self.mag())
        else:
            a = self
        r = a
        for _ in range(k - 1):
            r = r * a
        return r

    def sum(self, axis=None):
        """Enclosure of the exact sum along ``axis``."""
        k = self.lo.size if axis is None else self.lo.shape[axis]
        g = _gamma(k)
        slo = np.sum(self.lo, axis=axis)
        shi = np.sum(self.hi, axis=axis)
        elo = up(np.sum(np.abs(self.lo), axis=axis) * g)
        ehi = up(np.sum(np.abs(self.hi), axis=axis) * g)
        return RealInterval._raw(down(slo - elo), up(shi + ehi))


def _is_complex_array(x) -> bool:
    return not isinstance(x, (RealInterval, ComplexBox)) and np.iscomplexobj(np.asarray(x))


def as_interval(x):
    if isinstance(x, RealInterval):
        return x
    if isinstance(x, ComplexBox):
        raise TypeError("cannot convert a complex box to a real interval")
    if isinstance(x, Fraction):
        return _fraction_interval(x)
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        raise TypeError("complex value where a real interval is expected")
    return RealInterval._raw(np.array(arr, dtype=float), np.array(arr, dtype=float))


def _fraction_interval(fr):
    """Tight enclosure of a rational number."""
    f = float(fr)
    lo = f if Fraction(f) <= fr else float(down(f))
    hi = f if Fraction(f) >= fr else float(up(f))
    return RealInterval._raw(np.array(lo), np.array(hi))


def iv_add(a, b):
    return as_interval(a) + as_interval(b)


def iv_sub(a, b):
    return as_interval(a) - as_interval(b)


def iv_mul(a, b):
    return as_interval(a) * as_interval(b)


def iv_div(a, b):
    return as_interval(a) / as_interval(b)


def iv_sqrt(a):
    a = as_interval(a)
    if np.any(a.lo < 0):
        raise ValueError("square root of an interval with negative part")
    lo = np.maximum(down(np.sqrt(a.lo)), 0.0)
    return RealInterval._raw(lo, up(np.sqrt(a.hi)))


def iv_pi():
    """Enclosure of pi: the two floats adjacent to it."""
    return RealInterval._raw(np.array(_PI_LO), np.array(_PI_HI))


def iv_hull(a, b):
    a, b = as_interval(a), as_interval(b)
    return RealInterval._raw(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))


# --------------------------------------------------------------------------
# sine and cosine
# --------------------------------------------------------------------------


def _taylor_sincos(r):
    """sin/cos enclosures for an interval r with |r| <= pi/4 (+ slack)."""
    rmag = float(np.max(r.mag())) if r.lo.size else 0.0
    if rmag > 0.8:
        raise ValueError("reduced argument outside the Taylor range")
    r2 = r * r
    # Horner on the truncated series; the remainder is bounded separately
    s = as_interval(0.0)
    c = as_interval(0.0)
    for k in range(_TAYLOR_ORDER // 2, -1, -1):
        # sin: sum (-1)^k r^(2k+1)/(2k+1)!, cos: sum (-1)^k r^(2k)/(2k)!
        s = s * r2 + _fraction_interval(Fraction((-1) ** k, math.factorial(2 * k + 1)))
        c = c * r2 + _fraction_interval(Fraction((-1) ** k, math.factorial(2 * k)))
    s = s * r
    # Lagrange remainders: |r|^(N+1)/(N+1)! with N the last retained degree
    ns = 2 * (_TAYLOR_ORDER // 2) + 1
    nc = 2 * (_TAYLOR_ORDER // 2)
    rem_s = up(up(rmag ** (ns + 2) * (1 + 1e-12)) / math.factorial(ns + 2))
    rem_c = up(up(rmag ** (nc + 2) * (1 + 1e-12)) / math.factorial(nc + 2))
    s = s + RealInterval(-rem_s, rem_s)
    c = c + RealInterval(-rem_c, rem_c)
    return _clip_unit(s), _clip_unit(c)


def _clip_unit(x):
    return RealInterval._raw(np.maximum(x.lo, -1.0), np.minimum(x.hi, 1.0))


def _apply_quadrant(s, c, quad):
    quad = np.asarray(quad) % 4
    sin_lo = np.select([quad == 0, quad == 1, quad == 2, quad == 3], [s.lo, c.lo, -s.hi, -c.hi])
    sin_hi = np.select([quad == 0, quad == 1, quad == 2, quad == 3], [s.hi, c.hi, -s.lo, -c.lo])
    cos_lo = np.select([quad == 0, quad == 1, quad == 2, quad == 3], [c.lo, -s.hi, -c.hi, s.lo])
    cos_hi = np.select([quad == 0, quad == 1, quad == 2, quad == 3], [c.hi, -s.lo, -c.lo, s.hi])
    return RealInterval._raw(sin_lo, sin_hi), RealInterval._raw(cos_lo, cos_hi)


def iv_sincos(theta):
    """Enclosures of (sin theta, cos theta) for a (thin-ish) interval theta.

    The argument is reduced by the nearest multiple of pi/2 using the pi
    enclosure, so the result width grows with |theta|.  For rational multiples
    of pi prefer :func:`sincos_2pi_frac`, which reduces exactly.
    """
    theta = as_interval(theta)
    if np.any(theta.width() > 0.5):
        raise ValueError("iv_sincos expects intervals narrower than 0.5")
    quad = np.rint(theta.mid() / (np.pi / 2)).astype(np.int64)
    half_pi = iv_pi() * 0.5
    r = theta - RealInterval(quad.astype(float)) * half_pi
    s, c = _taylor_sincos(r)
    return _apply_quadrant(s, c, quad)


def sincos_2pi_frac(num, den):
    """Enclosures of sin and cos of 2*pi*num/den for integer arrays num, den.

    Reduction modulo the full turn and to the nearest quadrant happens in exact
    integer arithmetic; only an angle of modulus <= pi/4 reaches the series.
    """
    num = np.asarray(num, dtype=np.int64)
    den = np.broadcast_to(np.asarray(den, dtype=np.int64), num.shape)
    if np.any(den <= 0):
        raise ValueError("denominator must be positive")
    # angle = 2 pi num/den = (pi/2) * (4 num/den); quad = round(4 num/den)
    four = 4 * (num % den)
    quad = (2 * four + den) // (2 * den)
    resid_num = four - quad * den  # angle - quad*pi/2 = (pi/2) * resid_num/den
    frac = RealInterval._raw(
        np.array([float(_fraction_interval(Fraction(int(a), int(b))).lo) for a, b in zip(resid_num.ravel(), den.ravel())]).reshape(num.shape),
        np.array([float(_fraction_interval(Fraction(int(a), int(b))).hi) for a, b in zip(resid_num.ravel(), den.ravel())]).reshape(num.shape),
    )
    r = frac * (iv_pi() * 0.5)
    s, c = _taylor_sincos(r)
    # exact zeros where the reduced angle is exactly zero
    zero = resid_num == 0
    if np.any(zero):
        s.lo[zero] = 0.0
        s.hi[zero] = 0.0
        c.lo[zero] = 1.0
        c.hi[zero] = 1.0
    return _apply_quadrant(s, c, quad)


# --------------------------------------------------------------------------
# complex boxes
# --------------------------------------------------------------------------


class ComplexBox:
    """Array of complex rectangles ``re + i*im``."""

    __slots__ = ("re", "im")
    __array_ufunc__ = None

    def __init__(self, re, im=None):
        self.re = as_interval(re)
        self.im = as_interval(np.zeros(self.re.shape)) if im is None else as_interval(im)
        if self.re.shape != self.im.shape:
            self.re, self.im = (
                RealInterval._raw(*np.broadcast_arrays(self.re.lo, self.re.hi)),
                self.im,
            )
            shape = np.broadcast_shapes(self.re.shape, self.im.shape)
            self.re = RealInterval._raw(np.broadcast_to(self.re.lo, shape).copy(), np.broadcast_to(self.re.hi, shape).copy())
            self.im = RealInterval._raw(np.broadcast_to(self.im.lo, shape).copy(), np.broadcast_to(self.im.hi, shape).copy())

    @classmethod
    def from_complex(cls, z):
        z = np.asarray(z, dtype=complex)
        return cls(RealInterval(z.real.copy()), RealInterval(z.imag.copy()))

    @classmethod
    def zeros(cls, shape):
        return cls(RealInterval.zeros(shape), RealInterval.zeros(shape))

    @classmethod
    def concatenate(cls, boxes, axis=0):
        re_lo = np.concatenate([b.re.lo for b in boxes], axis=axis)
        re_hi = np.concatenate([b.re.hi for b in boxes], axis=axis)
        im_lo = np.concatenate([b.im.lo for b in boxes], axis=axis)
        im_hi = np.concatenate([b.im.hi for b in boxes], axis=axis)
        return cls(RealInterval._raw(re_lo, re_hi), RealInterval._raw(im_lo, im_hi))

    @property
    def shape(self):
        return self.re.shape

    @property
    def ndim(self):
        return self.re.ndim

    def __len__(self):
        return len(self.re)

    def __getitem__(self, idx):
        return ComplexBox(self.re[idx], self.im[idx])

    def __setitem__(self, idx, value):
        value = as_box(value)
        self.re[idx] = value.re
        self.im[idx] = value.im

    def copy(self):
        return ComplexBox(self.re.copy(), self.im.copy())

    def reshape(self, *shape):
        return ComplexBox(self.re.reshape(*shape), self.im.reshape(*shape))

    @property
    def T(self):
        return ComplexBox(self.re.T, self.im.T)

    def mid(self):
        return self.re.mid() + 1j * self.im.mid()

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return self.re.contains(z.real) & self.im.contains(z.imag)

    def width(self):
        return np.maximum(self.re.width(), self.im.width())

    def abs_upper(self):
        """Upper bound of the modulus over each box (float array)."""
        a = self.re.mag()
        b = self.im.mag()
        return up(np.sqrt(up(up(a * a) + up(b * b))))

    def conj(self):
        return ComplexBox(self.re, -self.im)

    def __repr__(self):
        if self.ndim == 0:
            return f"ComplexBox({self.re!r}, {self.im!r})"
        return f"ComplexBox(shape={self.shape})"

    def __neg__(self):
        return ComplexBox(-self.re, -self.im)

    def __add__(self, other):
        other = as_box(other)
        return ComplexBox(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_box(other)
        return ComplexBox(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return as_box(other) - self

    def __mul__(self, other):
        if isinstance(other, RealInterval) or _is_real_number(other):
            other = as_interval(other)
            return ComplexBox(self.re * other, self.im * other)
        other = as_box(other)
        re = self.re * other.re - self.im * other.im
        im = self.re * other.im + self.im * other.re
        return ComplexBox(re, im)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, RealInterval) or _is_real_number(other):
            other = as_interval(other)
            return ComplexBox(self.re / other, self.im / other)
        other = as_box(other)
        den = other.re * other.re + other.im * other.im
        return (self * other.conj()) * (as_interval(1.0) / den)

    def __rtruediv__(self, other):
        return as_box(other) / self

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)) or k < 1:
            raise ValueError("only positive integer powers are supported")
        r = self
        for _ in range(k - 1):
            r = r * self
        return r

    def sum(self, axis=None):
        return ComplexBox(self.re.sum(axis=axis), self.im.sum(axis=axis))


def _is_real_number(x):
    if isinstance(x, (RealInterval, ComplexBox)):
        return False
    arr = np.asarray(x)
    return not np.iscomplexobj(arr)


def as_box(x):
    if isinstance(x, ComplexBox):
        return x
    if isinstance(x, RealInterval):
        return ComplexBox(x, RealInterval.zeros(x.shape))
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        return ComplexBox.from_complex(arr)
    return ComplexBox(as_interval(arr), RealInterval.zeros(arr.shape))


def iv_abs_upper(z):
    """Float upper bound of |z| for a complex box (or plain number)."""
    return as_box(z).abs_upper()


def box_from_midrad(mid_re, rad_re, mid_im, rad_im):
    return ComplexBox(RealInterval.from_midrad(mid_re, rad_re), RealInterval.from_midrad(mid_im, rad_im))


# --------------------------------------------------------------------------
# midpoint-radius reductions
# --------------------------------------------------------------------------


def _real_midrad(x):
    """(mid, rad) float arrays for a real operand (interval or float)."""
    if isinstance(x, RealInterval):
        return x.midrad()
    x = np.asarray(x, dtype=float)
    return x, np.zeros_like(x)


def _parts(x):
    """Split an operand into midrad real and imaginary parts."""
    if isinstance(x, ComplexBox):
        return _real_midrad(x.re), _real_midrad(x.im)
    if isinstance(x, RealInterval):
        return _real_midrad(x), (np.zeros(x.shape), np.zeros(x.shape))
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return _real_midrad(x.real.copy()), _real_midrad(x.imag.copy())
    return _real_midrad(x), (np.zeros(x.shape), np.zeros(x.shape))


def _real_reduce(op, a, b):
    """Enclose op(A, B) for op in {convolve, matmul} on midrad real operands.

    Returns (mid, rad) where rad already includes rounding of every term.
    """
    (am, ar), (bm, br) = a, b
    if op == "conv":
        prod = np.convolve
        k = min(am.size, bm.size)
    else:
        prod = np.matmul
        k = am.shape[-1]
    g = _gamma(k)
    mid = prod(am, bm)
    aam = np.abs(am)
    abm = np.abs(bm)
    # rounding error of mid: gamma_k |A||B| (+ underflow)
    s = prod(aam, abm)
    err = s * (1.0 + g) * g + 2.0 * k * ETA
    rad = err
    if np.any(br) or np.any(ar):
        t = prod(aam, br) + prod(ar, abm + br)
        rad = rad + t * (1.0 + 2.0 * g) + 2.0 * k * ETA
    return mid, up(rad * (1.0 + 4.0 * UNIT_ROUNDOFF))


def _combine(terms_plus, terms_minus):
    """Sum midrad terms with signs; rounding of the final additions included."""
    mid = 0.0
    rad = 0.0
    n_terms = 0
    for m, r in terms_plus:
        mid = mid + m
        rad = rad + r
        n_terms += 1
    for m, r in terms_minus:
        mid = mid - m
        rad = rad + r
        n_terms += 1
    # at most n_terms-1 roundings in mid; each is bounded by u|partial sums|
    mag = 0.0
    for m, _ in list(terms_plus) + list(terms_minus):
        mag = mag + np.abs(m)
    rad = rad + mag * (n_terms * UNIT_ROUNDOFF * 1.01)
    return np.asarray(mid, dtype=float), up(np.asarray(rad, dtype=float) * (1.0 + 4.0 * n_terms * UNIT_ROUNDOFF))


def _complex_reduce(op, a, b):
    (ar, ai), (br, bi) = _parts(a), _parts(b)
    has_ai = np.any(ai[0]) or np.any(ai[1])
    has_bi = np.any(bi[0]) or np.any(bi[1])
    rr = _real_reduce(op, ar, br)
    re_minus = [_real_reduce(op, ai, bi)] if (has_ai and has_bi) else []
    re = _combine([rr], re_minus)
    im_terms = []
    if has_bi:
        im_terms.append(_real_reduce(op, ar, bi))
    if has_ai:
        im_terms.append(_real_reduce(op, ai, br))
    if im_terms:
        im = _combine(im_terms, [])
    else:
        im = (np.zeros_like(re[0]), np.zeros_like(re[0]))
    return box_from_midrad(re[0], re[1], im[0], im[1])


def convolve(a, b):
    """Rigorous enclosure of the full discrete convolution of two 1-d arrays."""
    return _complex_reduce("conv", a, b)


def matmul(a, b):
    """Rigorous enclosure of a matrix(-vector) product."""
    return _complex_reduce("matmul", a, b)
