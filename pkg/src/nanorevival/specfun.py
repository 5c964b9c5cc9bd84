"""Special functions: Wigner-3j symbols, rotor matrix elements, scaled Bessel I.

The rank-2 families ``(j' 2 j; m 0 -m)`` and ``(j 2 j; m1 +-2 m3)`` are the
only 3j symbols the dynamics ever needs.  They are evaluated from closed
forms (square roots of rational polynomials), which keep full double
precision at ``j ~ 1e5`` where a log-gamma Racah sum has cancelled most of
its digits.  Everything else goes through the general Racah sum.

Angular conventions: ``beta`` is the polar angle measured from the field
polarization and ``alpha`` the azimuth; ``|jm>`` are the spherical harmonics
``Y_jm(beta, alpha)`` with the Condon-Shortley phase.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from scipy.special import ive

from .errors import ValidationError

# ive() results below this are treated as underflowed and recomputed.
_IVE_TINY = 1e-290
# Below z**2 < (n + 1) the small-argument power series is used on fallback,
# otherwise the uniform (Debye) large-order expansion.
_SERIES_SWITCH = 1.0


def _twice(x) -> int:
    """Return ``2x`` as an int, refusing anything that is not a half-integer."""
    if isinstance(x, Fraction):
        t = 2 * x
        if t.denominator != 1:
            raise ValidationError(f"{x} is not a half-integer")
        return int(t)
    t = 2.0 * float(x)
    r = round(t)
    if abs(t - r) > 1e-9:
        raise ValidationError(f"{x} is not a half-integer")
    return int(r)


def _selection_ok(tj, tm) -> bool:
    j1, j2, j3 = tj
    m1, m2, m3 = tm
    if min(tj) < 0:
        return False
    if m1 + m2 + m3 != 0:
        return False
    for j, m in zip(tj, tm):
        if abs(m) > j or (j + m) % 2:
            return False
    if (j1 + j2 + j3) % 2:
        return False
    if j3 > j1 + j2 or j3 < abs(j1 - j2):
        return False
    if m1 == m2 == m3 == 0 and ((j1 + j2 + j3) // 2) % 2:
        return False
    return True


def _lfact(n2: int) -> float:
    """``ln((n2/2)!)`` for a doubled integer argument."""
    return math.lgamma(n2 // 2 + 1)


def _racah_exact(a, b, c, x, y, z, kmin, kmax) -> float:
    """Racah sum in exact rational arithmetic (doubled arguments)."""
    f = lambda n2: math.factorial(n2 // 2)
    pref = Fraction(
        f(a + b - c) * f(a - b + c) * f(-a + b + c)
        * f(a + x) * f(a - x) * f(b + y) * f(b - y) * f(c + z) * f(c - z),
        f(a + b + c + 2),
    )
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        k2 = 2 * k
        den = (f(k2) * f(c - b + k2 + x) * f(c - a + k2 - y)
               * f(a + b - c - k2) * f(a - k2 - x) * f(b - k2 + y))
        total += Fraction(-1 if k % 2 else 1, den)
    if total == 0:
        return 0.0
    phase = -1.0 if ((a - b - z) // 2) % 2 else 1.0
    return phase * math.copysign(math.sqrt(float(pref * total * total)), total)


# Above this value of j1 + j2 + j3 the exact rational Racah sum gets slow and
# the log-gamma evaluation takes over.
EXACT_RACAH_LIMIT = 600


def racah_3j(j1, j2, j3, m1, m2, m3) -> float:
    """General Wigner-3j symbol from the Racah sum.

    Exact rational arithmetic up to ``j1 + j2 + j3 = EXACT_RACAH_LIMIT``,
    log-gamma terms with an exactly rounded sum beyond.
    """
    tj = (_twice(j1), _twice(j2), _twice(j3))
    tm = (_twice(m1), _twice(m2), _twice(m3))
    if not _selection_ok(tj, tm):
        return 0.0
    a, b, c = tj
    x, y, z = tm
    if a + b + c <= 2 * EXACT_RACAH_LIMIT:
        kmin = max(0, (b - c - x) // 2, (a - c + y) // 2)
        kmax = min((a + b - c) // 2, (a - x) // 2, (b + y) // 2)
        return _racah_exact(a, b, c, x, y, z, kmin, kmax)
    log_pref = 0.5 * (
        _lfact(a + b - c) + _lfact(a - b + c) + _lfact(-a + b + c) - _lfact(a + b + c + 2)
        + _lfact(a + x) + _lfact(a - x) + _lfact(b + y) + _lfact(b - y)
        + _lfact(c + z) + _lfact(c - z)
    )
    kmin = max(0, (b - c - x) // 2, (a - c + y) // 2)
    kmax = min((a + b - c) // 2, (a - x) // 2, (b + y) // 2)
    logs, signs = [], []
    for k in range(kmin, kmax + 1):
        k2 = 2 * k
        logs.append(-(
            _lfact(k2) + _lfact(c - b + k2 + x) + _lfact(c - a + k2 - y)
            + _lfact(a + b - c - k2) + _lfact(a - k2 - x) + _lfact(b - k2 + y)
        ))
        signs.append(-1.0 if k % 2 else 1.0)
    if not logs:
        return 0.0
    top = max(logs)
    total = math.fsum(s * math.exp(l - top) for s, l in zip(signs, logs))
    phase = -1.0 if ((a - b - z) // 2) % 2 else 1.0
    return phase * total * math.exp(top + log_pref)


def _threej_j2j_m0(j: int, m: int) -> float:
    """``(j 2 j; m 0 -m)``."""
    num = j * (j + 1) - 3 * m * m
    den = math.sqrt((2 * j - 1) * j * (j + 1) * (2 * j + 1) * (2 * j + 3))
    sign = -1.0 if (j + m + 1) % 2 else 1.0
    return sign * num / den


def _threej_jp2_m0(j: int, m: int) -> float:
    """``(j+2 2 j; m 0 -m)``."""
    num = 6 * (j - m + 2) * (j - m + 1) * (j + m + 2) * (j + m + 1)
    den = (2 * j + 5) * (2 * j + 4) * (2 * j + 3) * (2 * j + 2) * (2 * j + 1)
    sign = -1.0 if (j + m) % 2 else 1.0
    return sign * math.sqrt(num / den)


def _threej_j2j_dm2(j: int, m: int) -> float:
    """``(j 2 j; -m-2 2 m)``."""
    p = (j - m) * (j - m - 1) * (j + m + 1) * (j + m + 2)
    den = 2.0 * math.sqrt(j * (j + 1) * (2 * j - 1) * (2 * j + 1) * (2 * j + 3))
    sign = -1.0 if (j + m) % 2 else 1.0
    return sign * math.sqrt(6 * p) / den


def _closed_form(tj, tm):
    """Closed-form value for the rank-2 families, or None if not applicable."""
    if any(t % 2 for t in tj):
        return None
    js = [t // 2 for t in tj]
    ms = [t // 2 for t in tm]
    for shift in range(3):
        # cyclic column permutations leave the symbol unchanged
        if js[(1 + shift) % 3] != 2:
            continue
        a, c = js[shift % 3], js[(2 + shift) % 3]
        ma, mb, mc = ms[shift % 3], ms[(1 + shift) % 3], ms[(2 + shift) % 3]
        if mb == 0:
            if a == c:
                return _threej_j2j_m0(a, ma)
            if a == c + 2:
                return _threej_jp2_m0(c, ma)
            if c == a + 2:
                # odd column swap with even j-sum: no sign
                return _threej_jp2_m0(a, mc)
        elif mb == 2 and a == c:
            return _threej_j2j_dm2(a, mc)
        elif mb == -2 and a == c:
            # flipping every m gives (-1)^(2j+2) = 1
            return _threej_j2j_dm2(a, -mc)
        return None
    return None


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    """Wigner-3j symbol ``(j1 j2 j3; m1 m2 m3)``; zero when selection rules fail."""
    tj = (_twice(j1), _twice(j2), _twice(j3))
    tm = (_twice(m1), _twice(m2), _twice(m3))
    if not _selection_ok(tj, tm):
        return 0.0
    value = _closed_form(tj, tm)
    if value is not None:
        return value
    return racah_3j(j1, j2, j3, m1, m2, m3)


def cos2_element(j: int, j_prime: int, m: int) -> float:
    """``<j m| cos^2 beta |j' m>`` via the rank-2 3j-symbol expansion."""
    if abs(m) > min(j, j_prime):
        return 0.0
    if abs(j - j_prime) not in (0, 2):
        return 0.0
    sign = -1.0 if m % 2 else 1.0
    value = (2.0 * sign * math.sqrt((2 * j_prime + 1) * (2 * j + 1))
             * wigner3j(j_prime, 2, j, 0, 0, 0) * wigner3j(j_prime, 2, j, m, 0, -m))
    if j == j_prime:
        value += 1.0
    return value / 3.0


def sin2cos2_element(j: int, m: int, m_prime: int) -> float:
    """``<j m| sin^2 beta cos^2 alpha |j m'>`` (within one j shell).

    Uses ``sin^2 b cos^2 a = (1 - cos^2 b)/2 + sin^2 b cos(2a)/2`` with
    ``sin^2 b cos 2a = 2 sqrt(2 pi/15) (Y_22 + Y_2,-2)``.
    """
    if abs(m) > j or abs(m_prime) > j:
        return 0.0
    if m == m_prime:
        return 0.5 * (1.0 - cos2_element(j, j, m))
    if abs(m - m_prime) != 2:
        return 0.0
    sign = -1.0 if m % 2 else 1.0
    y2 = (math.sqrt(2.0 / 3.0) * (2 * j + 1) * sign
          * wigner3j(j, 2, j, 0, 0, 0) * wigner3j(j, 2, j, -m, m - m_prime, m_prime))
    return 0.5 * y2


# -- vectorized closed forms used on the hot paths ---------------------------

def cos2_diag(j, m):
    """``<j m|cos^2|j m>`` for arrays of ``j`` and ``m``."""
    j = np.asarray(j, dtype=float)
    m = np.asarray(m, dtype=float)
    return 1.0 / 3.0 + (2.0 / 3.0) * (j * (j + 1.0) - 3.0 * m * m) / ((2.0 * j - 1.0) * (2.0 * j + 3.0))


def cos2_offdiag(j, m):
    """``<j m|cos^2|j+2 m>`` for arrays of ``j`` and ``m`` (zero where ``|m| > j``)."""
    j = np.asarray(j, dtype=float)
    m = np.asarray(m, dtype=float)
    num = ((j + 1.0) ** 2 - m * m) * ((j + 2.0) ** 2 - m * m)
    den = (2.0 * j + 1.0) * (2.0 * j + 3.0) ** 2 * (2.0 * j + 5.0)
    return np.where(np.abs(m) <= j, np.sqrt(np.clip(num, 0.0, None) / den), 0.0)


def sin2cos2_diag(j, m):
    return 0.5 * (1.0 - cos2_diag(j, m))


def sin2cos2_step(j, m):
    """``<j m+2| sin^2 beta cos^2 alpha |j m>`` for arrays (zero outside the shell)."""
    j = np.asarray(j, dtype=float)
    m = np.asarray(m, dtype=float)
    p = (j - m) * (j - m - 1.0) * (j + m + 1.0) * (j + m + 2.0)
    ok = (m >= -j) & (m + 2.0 <= j)
    den = 2.0 * (2.0 * j - 1.0) * (2.0 * j + 3.0)
    return np.where(ok, -np.sqrt(np.clip(p, 0.0, None)) / den, 0.0)


# -- modified Bessel function -------------------------------------------------

def _debye_log_ive(nu: float, x: float) -> float:
    """Uniform large-order expansion of ``ln(I_nu(x) e^-x)``."""
    z = x / nu
    s = math.sqrt(1.0 + z * z)
    p = 1.0 / s
    p2 = p * p
    u1 = p * (3.0 - 5.0 * p2) / 24.0
    u2 = p2 * (81.0 - 462.0 * p2 + 385.0 * p2 * p2) / 1152.0
    u3 = p * p2 * (30375.0 - 369603.0 * p2 + 765765.0 * p2**2 - 425425.0 * p2**3) / 414720.0
    u4 = p2 * p2 * (4465125.0 - 94121676.0 * p2 + 349922430.0 * p2**2
                    - 446185740.0 * p2**3 + 185910725.0 * p2**4) / 39813120.0
    series = 1.0 + u1 / nu + u2 / nu**2 + u3 / nu**3 + u4 / nu**4
    # nu*eta - x with eta = s + ln(z/(1+s)), written without cancellation
    expo = nu * (1.0 / (s + z) - math.asinh(1.0 / z))
    return expo - 0.5 * math.log(2.0 * math.pi * nu) - 0.25 * math.log1p(z * z) + math.log(series)


def _series_log_ive(n: int, x: float) -> float:
    q = 0.25 * x * x
    term, terms, k = 1.0, [1.0], 0
    while True:
        k += 1
        term *= q / (k * (n + k))
        terms.append(term)
        if term < 1e-17 * terms[0] or k > 500:
            break
    return n * math.log(0.5 * x) - math.lgamma(n + 1.0) + math.log(math.fsum(terms)) - x


def log_bessel_i_scaled(n: int, z: float) -> float:
    """``ln(I_n(z) e^-z)`` for integer order ``n`` and ``z >= 0``.

    Returns ``-inf`` for ``z = 0, n != 0``.  Stays finite where ``I_n`` itself
    over- or underflows.
    """
    n = abs(int(n))
    z = float(z)
    if z < 0 or math.isnan(z):
        raise ValidationError("log_bessel_i_scaled needs z >= 0")
    if z == 0.0:
        return 0.0 if n == 0 else -math.inf
    v = float(ive(n, z))
    if _IVE_TINY < v < math.inf:
        return math.log(v)
    if z * z < _SERIES_SWITCH * (n + 1) or n == 0:
        return _series_log_ive(n, z)
    return _debye_log_ive(float(n), z)


def log_bessel_i_scaled_array(n, z) -> np.ndarray:
    """Vectorized :func:`log_bessel_i_scaled`."""
    n = np.abs(np.asarray(n, dtype=np.int64))
    z = np.asarray(z, dtype=float)
    n, z = np.broadcast_arrays(n, z)
    if np.any(z < 0):
        raise ValidationError("log_bessel_i_scaled needs z >= 0")
    with np.errstate(divide="ignore"):
        v = ive(n, z)
        out = np.log(v)
    bad = ~((v > _IVE_TINY) & np.isfinite(v))
    if np.any(bad):
        out = np.array(out, dtype=float)
        for idx in zip(*np.nonzero(bad)):
            out[idx] = log_bessel_i_scaled(int(n[idx]), float(z[idx]))
    return out
