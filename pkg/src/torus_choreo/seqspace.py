"""Two-sided Fourier coefficient sequences in the weighted space l1_nu.

A :class:`CoeffSeq` stores the modes ``-N..N`` of a finitely supported
sequence.  The storage is either a complex ndarray (fast, non-rigorous path)
or a :class:`~torus_choreo.interval.ComplexBox` (rigorous path); every
operation in this module accepts both and keeps the backend of its inputs.
"""

from __future__ import annotations

import functools
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import interval as iv
from .interval import ComplexBox, RealInterval


def _is_box(x) -> bool:
    return isinstance(x, ComplexBox)


class CoeffSeq:
    """Finitely supported sequence ``(c_l)`` with ``c_l = 0`` for ``|l| > N``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        if not _is_box(coeffs):
            coeffs = np.array(coeffs, dtype=complex)
        if coeffs.ndim != 1 or len(coeffs) % 2 == 0:
            raise ValueError("coefficient array must be 1-d with odd length")
        self.coeffs = coeffs

    @property
    def N(self) -> int:
        return (len(self.coeffs) - 1) // 2

    support_radius = N

    @property
    def is_interval(self) -> bool:
        return _is_box(self.coeffs)

    def modes(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, ell: int):
        if abs(ell) > self.N:
            return ComplexBox.zeros(()) if self.is_interval else 0j
        return self.coeffs[ell + self.N]

    def __repr__(self):
        kind = "interval" if self.is_interval else "float"
        return f"CoeffSeq(N={self.N}, {kind})"

    def mid(self) -> "CoeffSeq":
        return CoeffSeq(self.coeffs.mid() if self.is_interval else self.coeffs.copy())

    def to_interval(self) -> "CoeffSeq":
        if self.is_interval:
            return self
        return CoeffSeq(ComplexBox.from_complex(self.coeffs))

    def pad(self, N: int) -> "CoeffSeq":
        """Same sequence stored with support radius ``max(N, self.N)``."""
        extra = N - self.N
        if extra <= 0:
            return self
        if self.is_interval:
            z = ComplexBox.zeros(extra)
            return CoeffSeq(ComplexBox.concatenate([z, self.coeffs, z]))
        return CoeffSeq(np.pad(self.coeffs, extra))

    def _aligned(self, other):
        other = as_seq(other)
        N = max(self.N, other.N)
        return self.pad(N).coeffs, other.pad(N).coeffs

    def __add__(self, other):
        a, b = self._aligned(other)
        return CoeffSeq(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._aligned(other)
        return CoeffSeq(a - b)

    def __rsub__(self, other):
        return as_seq(other) - self

    def __neg__(self):
        return CoeffSeq(-self.coeffs)

    def __mul__(self, scalar):
        """Multiplication by a scalar (use :func:`convolve` for products)."""
        if isinstance(scalar, CoeffSeq):
            return convolve(self, scalar)
        if self.is_interval or isinstance(scalar, (RealInterval, ComplexBox)):
            return CoeffSeq(iv.as_box(self.coeffs) * scalar)
        return CoeffSeq(self.coeffs * scalar)

    __rmul__ = __mul__


def as_seq(x) -> CoeffSeq:
    return x if isinstance(x, CoeffSeq) else CoeffSeq(x)


class SeqVec(tuple):
    """Fixed-length tuple of :class:`CoeffSeq` components."""

    def __new__(cls, components: Iterable[CoeffSeq]):
        return super().__new__(cls, (as_seq(c) for c in components))

    def __add__(self, other):
        return SeqVec(a + b for a, b in zip(self, other, strict=True))

    def __sub__(self, other):
        return SeqVec(a - b for a, b in zip(self, other, strict=True))

    def __neg__(self):
        return SeqVec(-a for a in self)

    def __mul__(self, scalar):
        return SeqVec(a * scalar for a in self)

    __rmul__ = __mul__


def zeros(N: int, interval: bool = False) -> CoeffSeq:
    if interval:
        return CoeffSeq(ComplexBox.zeros(2 * N + 1))
    return CoeffSeq(np.zeros(2 * N + 1, dtype=complex))


def delta(N: int = 0, value=1.0) -> CoeffSeq:
    """Sequence with ``c_0 = value`` and zeros elsewhere."""
    c = np.zeros(2 * N + 1, dtype=complex)
    c[N] = value
    return CoeffSeq(c)


def from_modes(values: dict[int, complex], N: int | None = None) -> CoeffSeq:
    """Build a sequence from a ``{mode: value}`` mapping."""
    if N is None:
        N = max((abs(k) for k in values), default=0)
    c = np.zeros(2 * N + 1, dtype=complex)
    for k, v in values.items():
        c[k + N] = v
    return CoeffSeq(c)


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def _nu_powers(nu: float, K: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.empty(K + 1)
    hi = np.empty(K + 1)
    p = iv.as_interval(1.0)
    x = iv.as_interval(nu)
    for k in range(K + 1):
        lo[k], hi[k] = float(p.lo), float(p.hi)
        p = p * x
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def nu_powers(nu: float, K: int) -> RealInterval:
    """Enclosures of ``nu**k`` for ``k = 0..K``."""
    lo, hi = _nu_powers(float(nu), int(K))
    return RealInterval(lo, hi)


def weights_upper(nu: float, N: int) -> np.ndarray:
    """Upper bounds of ``nu**|l|`` for ``l = -N..N``."""
    _, hi = _nu_powers(float(nu), int(N))
    return hi[np.abs(np.arange(-N, N + 1))]


def inv_weights_upper(nu: float, K: int) -> np.ndarray:
    """Upper bounds of ``nu**-k`` for ``k = 0..K``."""
    lo, _ = _nu_powers(float(nu), int(K))
    return iv.div_up(1.0, lo)


def _check_nu(nu: float) -> None:
    if nu < 1:
        raise ValueError(f"weight nu must be >= 1, got {nu}")


def norm_nu(c: CoeffSeq, nu: float) -> float:
    """Weighted norm ``sum |c_l| nu^|l|``.

    For interval sequences the result is a rigorous upper bound.
    """
    _check_nu(nu)
    c = as_seq(c)
    # pair l with -l so that the value is invariant (bitwise) under reflection
    N = c.N
    if c.is_interval:
        mags = c.coeffs.abs_upper()
        paired = np.concatenate([mags[N : N + 1], iv.add_up(mags[N + 1 :], mags[N - 1 :: -1] if N else mags[:0])])
        return float(iv.sum_up(iv.mul_up(paired, weights_upper(nu, N)[N:])))
    mags = np.abs(c.coeffs)
    paired = np.concatenate([mags[N : N + 1], mags[N + 1 :] + mags[N - 1 :: -1] if N else mags[:0]])
    return float(np.sum(paired * float(nu) ** np.arange(N + 1)))


# --------------------------------------------------------------------------
# algebra
# --------------------------------------------------------------------------


def convolve(a: CoeffSeq, b: CoeffSeq) -> CoeffSeq:
    """Discrete convolution; the support radius of the result is ``a.N + b.N``."""
    a, b = as_seq(a), as_seq(b)
    if a.is_interval or b.is_interval:
        return CoeffSeq(iv.convolve(a.coeffs, b.coeffs))
    return CoeffSeq(np.convolve(a.coeffs, b.coeffs))


def power(a: CoeffSeq, k: int) -> CoeffSeq:
    """``a * a * ... * a`` (k factors), evaluated left to right."""
    if k < 1:
        raise ValueError("power needs k >= 1")
    r = a
    for _ in range(k - 1):
        r = convolve(r, a)
    return r


def differentiate(c: CoeffSeq) -> CoeffSeq:
    """``(Dc)_l = i l c_l``."""
    c = as_seq(c)
    ell = c.modes().astype(float)
    if c.is_interval:
        box = c.coeffs
        # i*l*(x + iy) = -l*y + i*l*x; multiplication by an integer is exact
        return CoeffSeq(ComplexBox(-box.im * ell, box.re * ell))
    return CoeffSeq(1j * ell * c.coeffs)


def solve_D_tail(c: CoeffSeq, m: int) -> CoeffSeq:
    """Apply ``1/(i l)`` to the modes ``|l| >= m``; lower modes are dropped."""
    if m < 1:
        raise ValueError("solve_D_tail needs m >= 1")
    c = as_seq(c)
    ell = c.modes()
    tail = np.abs(ell) >= m
    if c.is_interval:
        out = ComplexBox.zeros(len(c))
        if np.any(tail):
            box = c.coeffs[tail]
            inv = iv.as_interval(1.0) / iv.as_interval(ell[tail].astype(float))
            # (x + iy)/(i l) = y/l - i x/l
            out[tail] = ComplexBox(box.im * inv, -(box.re * inv))
        return CoeffSeq(out)
    out = np.zeros(len(c), dtype=complex)
    out[tail] = c.coeffs[tail] / (1j * ell[tail])
    return CoeffSeq(out)


def project(c: CoeffSeq, m: int) -> CoeffSeq:
    """Keep the modes ``|l| < m`` (support radius ``m - 1``)."""
    if m < 1:
        raise ValueError("project needs m >= 1")
    c = as_seq(c).pad(m - 1)
    lo = c.N - (m - 1)
    return CoeffSeq(c.coeffs[lo : lo + 2 * m - 1])


def include(vec, m: int) -> CoeffSeq:
    """Embed a vector of the ``2m - 1`` modes ``-(m-1)..(m-1)`` as a sequence."""
    if len(vec) != 2 * m - 1:
        raise ValueError(f"expected {2 * m - 1} modes, got {len(vec)}")
    return CoeffSeq(vec.copy() if _is_box(vec) else np.array(vec, dtype=complex))


def conj_reflect(c: CoeffSeq) -> CoeffSeq:
    """``sigma(c)_l = conj(c_{-l})``."""
    c = as_seq(c)
    if c.is_interval:
        return CoeffSeq(c.coeffs[::-1].conj())
    return CoeffSeq(np.conj(c.coeffs[::-1]))


def symmetrize(c: CoeffSeq) -> CoeffSeq:
    """Projection onto the real (sigma-fixed) subspace."""
    c = as_seq(c)
    return CoeffSeq(0.5 * (c.coeffs + np.conj(c.coeffs[::-1])))


def evaluate(c: CoeffSeq, t):
    """``sum_l c_l exp(i l t)`` at a scalar or array of times."""
    c = as_seq(c)
    coeffs = c.mid().coeffs
    t = np.asarray(t, dtype=float)
    phase = np.exp(1j * np.multiply.outer(t, c.modes()))
    return phase @ coeffs


def psi_bounds(abar: CoeffSeq, m: int, nu: float) -> np.ndarray:
    """Upper bounds of ``Psi_l(abar)`` for every ``l = -(m-1)..(m-1)``.

    ``Psi_l(a) = max |a_{l-s}| / nu^|s|`` over ``s`` in
    ``[l-N, -m]`` and ``[m, l+N]``; empty ranges contribute 0.
    """
    _check_nu(nu)
    abar = as_seq(abar)
    N = abar.N
    if abar.is_interval:
        mags = abar.coeffs.abs_upper()
    else:
        mags = np.abs(abar.coeffs)
    inv_w = inv_weights_upper(nu, N + m)
    out = np.zeros(2 * m - 1)
    for i, ell in enumerate(range(-(m - 1), m)):
        best = 0.0
        # s in [m, l+N]: index l-s runs from l-m down to -N
        if ell + N >= m:
            s = np.arange(m, ell + N + 1)
            best = max(best, float(np.max(iv.mul_up(mags[ell - s + N], inv_w[s]))))
        # s in [l-N, -m]
        if ell - N <= -m:
            s = np.arange(ell - N, -m + 1)
            best = max(best, float(np.max(iv.mul_up(mags[ell - s + N], inv_w[-s]))))
        out[i] = best
    return out


def psi_bound(abar: CoeffSeq, ell: int, m: int, nu: float) -> float:
    if abs(ell) >= m:
        raise ValueError(f"psi_bound needs |ell| < m, got ell={ell}, m={m}")
    return float(psi_bounds(abar, m, nu)[ell + m - 1])


# --------------------------------------------------------------------------
# coefficient files
# --------------------------------------------------------------------------


def _fmt(values: np.ndarray) -> list[float]:
    return [float(f"{v:.17g}") for v in values]


def coeff_document(components: dict[str, CoeffSeq], m: int, meta: dict | None = None,
                   scalars: dict[str, Sequence[complex]] | None = None) -> dict:
    """JSON-ready document for named sequences projected to ``m`` modes."""
    doc: dict = {"m": int(m)}
    if meta:
        doc.update(meta)
    for name, seq in components.items():
        c = project(seq, m).mid().coeffs
        doc[name] = {"re": _fmt(c.real), "im": _fmt(c.imag)}
    for name, vals in (scalars or {}).items():
        vals = np.asarray(vals, dtype=complex)
        doc[name] = {"re": _fmt(vals.real), "im": _fmt(vals.imag)}
    return doc


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1)


def write_coefficients(path, components: dict[str, CoeffSeq], m: int, meta: dict | None = None,
                       scalars: dict[str, Sequence[complex]] | None = None) -> str:
    text = canonical_json(coeff_document(components, m, meta, scalars))
    Path(path).write_text(text + "\n")
    return text


def read_coefficients(path) -> dict:
    """Parse a coefficient file into ``{"m": m, name: CoeffSeq | ndarray, ...}``.

    Entries whose arrays have length ``2m - 1`` become sequences; other
    ``re``/``im`` pairs (scalar blocks) become complex arrays.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read coefficient file {path}: {exc}") from exc
    if not isinstance(doc, dict) or "m" not in doc:
        raise ValueError(f"coefficient file {path} has no 'm' field")
    m = int(doc["m"])
    out: dict = {"m": m}
    for name, val in doc.items():
        if isinstance(val, dict) and set(val) >= {"re", "im"}:
            re = np.asarray(val["re"], dtype=float)
            im = np.asarray(val["im"], dtype=float)
            if re.shape != im.shape:
                raise ValueError(f"component {name}: re/im length mismatch")
            z = re + 1j * im
            out[name] = CoeffSeq(z) if len(z) == 2 * m - 1 else z
        elif name != "m":
            out[name] = val
    return out
