"""Periodic-grid fields, unitary FFTs and Fourier multipliers.

The physical box is ``[-L, L)^N`` sampled with ``n`` points per axis.  Wave
numbers are ``xi_k = pi k / L`` in the signed FFT ordering, so the Nyquist
mode is carried as ``k = -n/2``.  Transforms use the unitary (``ortho``)
normalisation, which makes Plancherel exact:

    sum |u_j|^2 == sum |u_hat_k|^2

and every continuum integral is the grid sum times the cell volume
``(2L/n)^N``.
"""

from __future__ import annotations

import enum
import functools
import math
import os
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .errors import BadResolution, InadmissiblePower, WrongRepresentation

__all__ = [
    "Params",
    "Rep",
    "Field",
    "WaveNumbers",
    "make_grid",
    "wavenumbers",
    "coordinates",
    "fft_workers",
    "to_spectral",
    "to_physical",
    "as_physical",
    "as_spectral",
    "apply_symbol",
    "norms",
    "l2_norm",
    "hs_norm",
    "lp_norm",
    "gradient",
    "laplacian",
    "dealias",
    "dealias_mask",
    "outer_shell_max",
    "physical_field",
    "pad_spectral",
    "biharmonic_propagator",
]


def fft_workers():
    """Thread count for scipy.fft, read from ``BNLS_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("BNLS_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Params:
    """Problem description: dimension, power, box and resolution."""

    N: int
    p: float
    L: float
    n: int
    s_c: float
    mu: float

    @property
    def dx(self):
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self):
        return self.dx**self.N

    @property
    def shape(self):
        return (self.n,) * self.N

    @property
    def sc_exponent(self):
        """(2 - s_c)/s_c, the mass exponent of the scale-invariant products."""
        return self.mu / self.s_c

    @property
    def gn_exponent(self):
        """N(p-1)/4, the power of ||Delta u||_2 in the GN inequality."""
        return self.N * (self.p - 1.0) / 4.0


def make_grid(N, p, n, L):
    """Validate ``(N, p, n, L)`` and build a :class:`Params`."""
    N = int(N)
    p = float(p)
    L = float(L)
    if N not in (1, 2, 3):
        raise InadmissiblePower(f"dimension N={N} not supported (1, 2 or 3)")
    lower = 1.0 + 8.0 / N
    if not p > lower:
        raise InadmissiblePower(
            f"p={p} is not L2-supercritical for N={N} (need p > {lower})"
        )
    if N > 4 and not p < 1.0 + 8.0 / (N - 4):
        raise InadmissiblePower(f"p={p} is not H2-subcritical for N={N}")
    if isinstance(n, bool) or int(n) != n or n < 4 or (int(n) & (int(n) - 1)):
        raise BadResolution(f"n={n} must be a power of two >= 4")
    if not L > 0:
        raise BadResolution(f"box half-period L={L} must be positive")
    s_c = N / 2.0 - 4.0 / (p - 1.0)
    mu = 2.0 - s_c
    if not 0.0 < s_c < 2.0:
        raise InadmissiblePower(f"s_c={s_c} outside (0, 2)")
    return Params(N=N, p=p, L=L, n=int(n), s_c=s_c, mu=mu)


@dataclass(frozen=True, eq=False)
class WaveNumbers:
    """Per-axis frequencies and cached |xi|^2, |xi|^4 arrays."""

    axes: tuple
    odd_axes: tuple
    k2: np.ndarray
    k4: np.ndarray
    kmag: np.ndarray
    mask: np.ndarray

    def component(self, j, N, odd=False):
        """Broadcastable xi_j array for axis ``j``.

        ``odd=True`` zeroes the Nyquist frequency, as needed for first
        derivatives so that real fields keep real derivatives.
        """
        shape = [1] * N
        shape[j] = -1
        return (self.odd_axes if odd else self.axes)[j].reshape(shape)


@functools.lru_cache(maxsize=16)
def _wavenumbers(N, n, L):
    k_int = np.fft.fftfreq(n, 1.0 / n)
    xi = np.pi / L * k_int
    axes = tuple(xi.copy() for _ in range(N))
    xi_odd = xi.copy()
    xi_odd[n // 2] = 0.0
    odd_axes = tuple(xi_odd.copy() for _ in range(N))
    for a in axes + odd_axes:
        a.setflags(write=False)
    grids = np.meshgrid(*axes, indexing="ij")
    k2 = np.zeros((n,) * N)
    for g in grids:
        k2 += g * g
    k4 = k2 * k2
    cutoff = n / 3.0
    mask = np.ones((n,) * N, dtype=bool)
    for g in np.meshgrid(*([k_int] * N), indexing="ij"):
        mask &= np.abs(g) <= cutoff
    for arr in (k2, k4, mask):
        arr.setflags(write=False)
    kmag = np.sqrt(k2)
    kmag.setflags(write=False)
    return WaveNumbers(axes=axes, odd_axes=odd_axes, k2=k2, k4=k4, kmag=kmag, mask=mask)


def wavenumbers(prm):
    return _wavenumbers(prm.N, prm.n, prm.L)


@functools.lru_cache(maxsize=16)
def _coordinates(N, n, L):
    x = -L + (2.0 * L / n) * np.arange(n)
    grids = tuple(np.meshgrid(*([x] * N), indexing="ij"))
    for g in grids:
        g.setflags(write=False)
    return grids


def coordinates(prm):
    """Tuple of N coordinate arrays on ``[-L, L)^N``."""
    return _coordinates(prm.N, prm.n, prm.L)


class Rep(enum.Enum):
    PHYSICAL = "physical"
    SPECTRAL = "spectral"


@dataclass(frozen=True, eq=False)
class Field:
    data: np.ndarray
    rep: Rep
    params: Params

    def __post_init__(self):
        if self.data.shape != self.params.shape:
            raise ValueError(
                f"field shape {self.data.shape} does not match grid {self.params.shape}"
            )

    def with_data(self, data, rep=None):
        return replace(self, data=data, rep=self.rep if rep is None else rep)


def physical_field(data, prm):
    return Field(np.asarray(data, dtype=complex), Rep.PHYSICAL, prm)


def to_spectral(f):
    if f.rep is not Rep.PHYSICAL:
        raise WrongRepresentation("to_spectral expects a physical field")
    data = sfft.fftn(f.data, norm="ortho", workers=fft_workers())
    return Field(data, Rep.SPECTRAL, f.params)


def to_physical(f):
    if f.rep is not Rep.SPECTRAL:
        raise WrongRepresentation("to_physical expects a spectral field")
    data = sfft.ifftn(f.data, norm="ortho", workers=fft_workers())
    return Field(data, Rep.PHYSICAL, f.params)


def as_physical(f):
    return f if f.rep is Rep.PHYSICAL else to_physical(f)


def as_spectral(f):
    return f if f.rep is Rep.SPECTRAL else to_spectral(f)


def apply_symbol(f, m):
    """Multiply a spectral field by a Fourier multiplier.

    ``m`` is either a callable evaluated on the |xi| array or an array already
    sampled on the spectral grid.
    """
    if f.rep is not Rep.SPECTRAL:
        raise WrongRepresentation("apply_symbol expects a spectral field")
    if callable(m):
        m = m(wavenumbers(f.params).kmag)
    return f.with_data(f.data * m)


def l2_norm(f):
    return math.sqrt(f.params.cell_volume * float(np.sum(np.abs(f.data) ** 2)))


def hs_norm(f, s):
    """Homogeneous Sobolev norm with weight |xi|^{2s}; ``hs_norm(f, 0) == l2_norm(f)``."""
    if s == 0:
        return l2_norm(f)
    fh = as_spectral(f).data
    weight = wavenumbers(f.params).k2 ** s
    return math.sqrt(f.params.cell_volume * float(np.sum(weight * np.abs(fh) ** 2)))


def lp_norm(f, q):
    if q < 1:
        raise ValueError(f"lp_norm needs q >= 1, got {q}")
    u = as_physical(f).data
    total = f.params.cell_volume * float(np.sum(np.abs(u) ** q))
    return total ** (1.0 / q)


def norms(f, s=2.0, q=None):
    """Dictionary with ``l2``, ``hs`` (order ``s``) and ``lp`` (order ``q``, default p+1)."""
    if not 0.0 <= s <= 2.0:
        raise ValueError(f"Sobolev order s={s} outside [0, 2]")
    q = f.params.p + 1.0 if q is None else q
    return {"l2": l2_norm(f), "hs": hs_norm(f, s), "lp": lp_norm(f, q)}


def gradient(f):
    """Spectral gradient; returns N physical fields."""
    prm = f.params
    fh = as_spectral(f).data
    wn = wavenumbers(prm)
    out = []
    for j in range(prm.N):
        dj = sfft.ifftn(
            1j * wn.component(j, prm.N, odd=True) * fh, norm="ortho", workers=fft_workers()
        )
        out.append(Field(dj, Rep.PHYSICAL, prm))
    return out


def laplacian(f):
    """Spectral Laplacian, returned in the representation of ``f``."""
    g = apply_symbol(as_spectral(f), -wavenumbers(f.params).k2)
    return g if f.rep is Rep.SPECTRAL else to_physical(g)


def dealias_mask(prm):
    return wavenumbers(prm).mask


def dealias(f):
    """2/3 rule: zero every coefficient with some |k_j| > n/3."""
    if f.rep is not Rep.SPECTRAL:
        raise WrongRepresentation("dealias expects a spectral field")
    return f.with_data(np.where(dealias_mask(f.params), f.data, 0.0))


def outer_shell_max(f, fraction=0.1):
    """Largest |u| over points with some |x_j| > (1 - fraction) L."""
    prm = f.params
    u = np.abs(as_physical(f).data)
    shell = np.zeros(prm.shape, dtype=bool)
    for x in coordinates(prm):
        shell |= np.abs(x) > (1.0 - fraction) * prm.L
    return float(u[shell].max()) if shell.any() else 0.0


def pad_spectral(fh, n, m):
    """Zero-pad (m > n) or truncate (m < n) a unitary spectrum per axis.

    The returned coefficients represent the same trigonometric interpolant
    on the new grid, with the unitary scaling adjusted.
    """
    if m == n:
        return fh.copy()
    out = fh
    for axis in range(fh.ndim):
        out = _resize_axis(out, axis, n, m)
    return out * (m / n) ** (fh.ndim / 2.0)


def _resize_axis(a, axis, n, m):
    # The Nyquist coefficient is split evenly between +/- half on padding and
    # folded back on truncation, so real fields stay real.
    a = np.moveaxis(a, axis, 0)
    h = min(n, m) // 2
    if m > n:
        out = np.zeros((m,) + a.shape[1:], dtype=complex)
        out[:h] = a[:h]
        out[m - h + 1 :] = a[n - h + 1 :]
        out[h] = 0.5 * a[h]
        out[m - h] = 0.5 * a[h]
    else:
        out = np.empty((m,) + a.shape[1:], dtype=complex)
        out[:h] = a[:h]
        out[h + 1 :] = a[n - h + 1 :]
        out[h] = a[h] + a[n - h]
    return np.moveaxis(out, 0, axis)


@functools.lru_cache(maxsize=32)
def _propagator(N, n, L, tau):
    m = np.exp(1j * tau * _wavenumbers(N, n, L).k4)
    m.setflags(write=False)
    return m


def biharmonic_propagator(prm, tau):
    """Symbol of exp(i tau Delta^2), i.e. exp(i tau |xi|^4), cached per (grid, tau)."""
    return _propagator(prm.N, prm.n, prm.L, float(tau))
