"""Functionals evaluated on fields and along trajectories.

Conventions (focusing case, p the nonlinearity power):

    M(u) = ||u||_2^2
    E(u) = ||Delta u||_2^2 / 2 - ||u||_{p+1}^{p+1} / (p+1)
    ME   = M(u)^e E(u),  K = ||u||_2^e ||Delta u||_2,  e = (2 - s_c)/s_c

"kinetic" is ||Delta u||_2^2 and "potential" is ||u||_{p+1}^{p+1}.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.fft as sfft

from .errors import InsufficientSnapshots
from .spectral import (
    Field,
    Rep,
    as_physical,
    as_spectral,
    _coordinates,
    biharmonic_propagator,
    fft_workers,
    make_grid,
    wavenumbers,
)

__all__ = [
    "Classification",
    "TrajectoryRecord",
    "TrajectoryMonitor",
    "CSV_COLUMNS",
    "mass",
    "kinetic",
    "potential",
    "energy",
    "h2_norm",
    "scale_invariants",
    "rescale",
    "classify",
    "coercivity_gap",
    "energy_bounds_check",
    "smoothstep9",
    "cutoff",
    "virial_A",
    "virial_rhs",
    "virial_closure",
    "localized_until",
    "z_exponent",
    "z_increment",
    "z_cumulative",
    "scattering_profile",
    "scatter_score",
    "fit_delta0",
    "fit_C_delta",
    "record_rows",
]

CLASSIFICATION_BAND = 1e-6


def _spec(u):
    return as_spectral(u).data


def _phys(u):
    return as_physical(u).data


def mass(u):
    return u.params.cell_volume * float(np.sum(np.abs(u.data) ** 2))


def kinetic(u):
    """||Delta u||_2^2, evaluated spectrally."""
    uh = _spec(u)
    return u.params.cell_volume * float(
        np.sum(wavenumbers(u.params).k4 * np.abs(uh) ** 2)
    )


def potential(u):
    """||u||_{p+1}^{p+1} by grid quadrature."""
    return u.params.cell_volume * float(
        np.sum(np.abs(_phys(u)) ** (u.params.p + 1.0))
    )


def energy(u, kappa=1.0):
    return 0.5 * kinetic(u) - kappa * potential(u) / (u.params.p + 1.0)


def h2_norm(u):
    """Inhomogeneous H^2 norm with weight (1 + |xi|^2)^2."""
    uh = _spec(u)
    w = (1.0 + wavenumbers(u.params).k2) ** 2
    return math.sqrt(u.params.cell_volume * float(np.sum(w * np.abs(uh) ** 2)))


def _invariants(m, e, kin, prm):
    ex = prm.sc_exponent
    return m**ex * e, math.sqrt(m) ** ex * math.sqrt(kin)


def scale_invariants(u, gs=None):
    """Return ``{"ME": M^e E, "K": ||u||_2^e ||Delta u||_2}``.

    ``gs`` is accepted for symmetry with :func:`classify`; the products do
    not depend on it.
    """
    kin = kinetic(u)
    e = 0.5 * kin - potential(u) / (u.params.p + 1.0)
    ME, K = _invariants(mass(u), e, kin, u.params)
    return {"ME": ME, "K": K}


def rescale(u, lam):
    """u_lam(x) = lam^{4/(p-1)} u(lam x) sampled on the box shrunk by ``lam``.

    The samples on the new grid coincide with the old ones up to the
    amplitude factor, so no interpolation is involved.
    """
    prm = u.params
    new = make_grid(prm.N, prm.p, prm.n, prm.L / lam)
    data = lam ** (4.0 / (prm.p - 1.0)) * _phys(u)
    return Field(np.array(data, dtype=complex), Rep.PHYSICAL, new)


class Classification(enum.Enum):
    GLOBAL_SCATTERING = "GlobalScattering"
    ABOVE_THRESHOLD = "AboveThreshold"
    BOUNDARY = "Boundary"
    UNCLASSIFIED = "Unclassified"


def classify(u0, gs, band=CLASSIFICATION_BAND):
    """Place initial data in the mass-energy / mass-kinetic dichotomy."""
    inv = scale_invariants(u0)
    th = gs.thresholds
    dME = (inv["ME"] - th.ME_crit) / abs(th.ME_crit)
    dK = (inv["K"] - th.K_crit) / th.K_crit
    if abs(dME) <= band or abs(dK) <= band:
        return Classification.BOUNDARY
    if dME > 0:
        return Classification.UNCLASSIFIED
    if dK < 0:
        return Classification.GLOBAL_SCATTERING
    return Classification.ABOVE_THRESHOLD


def _gap_factor(prm):
    return prm.N * (prm.p - 1.0) / (4.0 * (prm.p + 1.0))


def coercivity_gap(u):
    """||Delta u||^2 - N(p-1)/(4(p+1)) ||u||_{p+1}^{p+1}; vanishes at Q."""
    return kinetic(u) - _gap_factor(u.params) * potential(u)


def _comparability_factor(prm):
    return (prm.N * (prm.p - 1.0) - 8.0) / (2.0 * prm.N * (prm.p - 1.0))


def energy_bounds_check(u, gs=None, u0=None):
    """Kinetic/total energy comparability for below-threshold data.

    Returns True/False, or None when ``gs`` and ``u0`` are given and ``u0``
    is not in the global/scattering regime (the bounds are not claimed
    there).
    """
    if gs is not None and u0 is not None:
        if classify(u0, gs) is not Classification.GLOBAL_SCATTERING:
            return None
    kin = kinetic(u)
    e = 0.5 * kin - potential(u) / (u.params.p + 1.0)
    return _comparability_factor(u.params) * kin <= e <= 0.5 * kin


def smoothstep9(s):
    """Degree-9 polynomial rising 0 -> 1 on [0, 1] with four flat derivatives at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return s**5 * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + 70.0 * s))))


def cutoff(r):
    """C^4 cutoff: 1 for r <= 1, 0 for r >= 2."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, 0.0, 1.0 - smoothstep9(r - 1.0)))


@functools.lru_cache(maxsize=32)
def _virial_weights(N, n, L, R):
    xs = _coordinates(N, n, L)
    r = np.sqrt(sum(x * x for x in xs))
    phi = cutoff(r / R)
    out = tuple(x * phi for x in xs)
    for a in out:
        a.setflags(write=False)
    return out


def _virial_from_arrays(u, uh, prm, R):
    if R <= 0:
        raise ValueError("virial radius must be positive")
    weights = _virial_weights(prm.N, prm.n, prm.L, float(R))
    wn = wavenumbers(prm)
    acc = np.zeros(prm.shape)
    for j in range(prm.N):
        dj = sfft.ifftn(1j * wn.component(j, prm.N, odd=True) * uh, norm="ortho", workers=fft_workers())
        acc += weights[j] * (dj * np.conj(u)).imag
    return prm.cell_volume * float(np.sum(acc))


def virial_A(u, R):
    """Localised virial Im int x phi(|x|/R) . grad(u) conj(u) dx."""
    return _virial_from_arrays(_phys(u), _spec(u), u.params, R)


def _rhs(kin, pot, prm):
    return -4.0 * kin + prm.N * (prm.p - 1.0) / (prm.p + 1.0) * pot


def virial_rhs(u):
    """R-independent part of dA_R/dt: -4||Delta u||^2 + N(p-1)/(p+1) ||u||_{p+1}^{p+1}."""
    return _rhs(kinetic(u), potential(u), u.params)


@functools.lru_cache(maxsize=8)
def _radius_sq(N, n, L):
    r2 = sum(x * x for x in _coordinates(N, n, L))
    r2.setflags(write=False)
    return r2


def _escaped(u, m, prm, R):
    if m == 0.0:
        return 0.0
    r2 = _radius_sq(prm.N, prm.n, prm.L)
    out = prm.cell_volume * float(np.sum(np.abs(u[r2 > R * R]) ** 2))
    return out / m


def localized_until(records, R, tol=1e-2):
    """Last snapshot time before the mass outside |x| <= R first exceeds ``tol``."""
    t_end = None
    for r in records:
        if r.escaped(R) > tol:
            break
        t_end = r.t
    return t_end


def virial_closure(records, R, t_max=None):
    """Worst mismatch between the centred difference of A_R and virial_rhs.

    Each interior snapshot contributes |dA/dt - rhs| / (|rhs| + kinetic).
    The identity only holds while the mass stays inside the cutoff, so
    ``t_max`` restricts the comparison to snapshots with t <= t_max.
    """
    recs = list(records)
    if t_max is not None:
        recs = [r for r in recs if r.t <= t_max + 1e-12]
    if len(recs) < 3:
        raise InsufficientSnapshots(f"need >= 3 snapshots, got {len(recs)}")
    t = np.array([r.t for r in recs])
    steps = np.diff(t)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-12):
        raise ValueError("virial_closure needs uniformly spaced snapshots")
    A = np.array([r.A(R) for r in recs])
    dA = (A[2:] - A[:-2]) / (t[2:] - t[:-2])
    rhs = np.array([r.virial_rhs for r in recs[1:-1]])
    kin = np.array([r.kinetic for r in recs[1:-1]])
    return float(np.max(np.abs(dA - rhs) / (np.abs(rhs) + kin)))


def z_exponent(prm, exact=False):
    """q = (N+4)(p-1)/4; ``exact=True`` returns a Fraction."""
    q = Fraction(prm.N + 4) * Fraction(prm.p).limit_denominator(10**6) - (prm.N + 4)
    q = q / 4
    return q if exact else float(q)


def z_increment(u, dt):
    """dt * ||u||_q^q with q the space-time exponent of the Z norm."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    q = z_exponent(u.params)
    return dt * u.params.cell_volume * float(np.sum(np.abs(_phys(u)) ** q))


def z_cumulative(increments, q):
    return float(sum(increments)) ** (1.0 / q)


def scattering_profile(u, t):
    """v(t) = exp(-i t Delta^2) u(t), returned spectral."""
    uh = _spec(u)
    return Field(uh * biharmonic_propagator(u.params, -t), Rep.SPECTRAL, u.params)


def _h2_distance(vh1, vh2, prm):
    w = (1.0 + wavenumbers(prm).k2) ** 2
    return math.sqrt(prm.cell_volume * float(np.sum(w * np.abs(vh1 - vh2) ** 2)))


def scatter_score(snapshots):
    """H^2 distance between the last two free-flow pull-backs v(t).

    ``snapshots`` is a sequence of ``(t, field)`` pairs (or objects with ``t``
    and ``u`` attributes).
    """
    snaps = [(s.t, s.u) if hasattr(s, "u") else s for s in snapshots]
    if len(snaps) < 2:
        raise InsufficientSnapshots("scatter_score needs >= 2 snapshots")
    (t1, u1), (t2, u2) = snaps[-2], snaps[-1]
    v1 = scattering_profile(u1, t1).data
    v2 = scattering_profile(u2, t2).data
    return _h2_distance(v1, v2, u1.params)


@dataclass
class TrajectoryRecord:
    t: float
    mass: float
    energy: float
    kinetic: float
    potential: float
    h2: float
    ME: float
    K: float
    virial_rhs: float = 0.0
    virial: tuple = ()
    z_inc: float = 0.0
    z_cum: float = 0.0
    scatter_score: float = math.nan
    healthy: bool = True

    def _virial_entry(self, R):
        for entry in self.virial:
            if math.isclose(entry[0], R, rel_tol=1e-12):
                return entry
        raise KeyError(f"no virial data for R={R}")

    def A(self, R):
        return self._virial_entry(R)[1]

    def escaped(self, R):
        """Fraction of the mass outside the ball |x| <= R."""
        return self._virial_entry(R)[3]


CSV_COLUMNS = (
    "t",
    "mass",
    "energy",
    "kinetic",
    "potential",
    "h2",
    "ME",
    "K",
    "virial_rhs",
    "z_inc",
    "z_cum",
    "scatter_score",
    "healthy",
)


def record_rows(records, radii=()):
    """Header and rows (lists of strings) in the fixed CSV column order.

    Columns are CSV_COLUMNS followed by one ``A_R=<R>`` column per radius.
    """
    header = list(CSV_COLUMNS) + [f"A_R={R:g}" for R in radii]
    rows = []
    for r in records:
        vals = [
            r.t,
            r.mass,
            r.energy,
            r.kinetic,
            r.potential,
            r.h2,
            r.ME,
            r.K,
            r.virial_rhs,
            r.z_inc,
            r.z_cum,
            r.scatter_score,
        ]
        row = [format(v, ".17g") for v in vals] + [str(int(r.healthy))]
        row += [format(r.A(R), ".17g") for R in radii]
        rows.append(row)
    return header, rows


class TrajectoryMonitor:
    """Turns simulation states into :class:`TrajectoryRecord` rows.

    Keeps the running Z-norm sum (fed per step through :meth:`accumulate`)
    and the previous scattering profile for the Cauchy score.  Each callable
    in ``hooks`` is invoked with the state at every snapshot.
    """

    def __init__(self, prm, radii=(), kappa=1.0, hooks=()):
        self.prm = prm
        self.hooks = list(hooks)
        self.radii = tuple(float(R) for R in radii)
        self.kappa = kappa
        self.q = z_exponent(prm)
        self.z_total = 0.0
        self.z_since = 0.0
        self._prev_v = None

    def accumulate(self, state):
        u = state.u.data
        a2 = u.real**2 + u.imag**2
        inc = abs(state.dt) * self.prm.cell_volume * float(np.sum(a2 ** (self.q / 2.0)))
        self.z_total += inc
        self.z_since += inc

    def record(self, state):
        for hook in self.hooks:
            hook(state)
        prm = self.prm
        u = state.u.data
        uh = sfft.fftn(u, norm="ortho", workers=fft_workers())
        dv = prm.cell_volume
        wn = wavenumbers(prm)
        a2h = uh.real**2 + uh.imag**2
        m = dv * float(np.sum(a2h))
        kin = dv * float(np.sum(wn.k4 * a2h))
        h2 = math.sqrt(dv * float(np.sum((1.0 + wn.k2) ** 2 * a2h)))
        pot = dv * float(np.sum(np.abs(u) ** (prm.p + 1.0)))
        e = 0.5 * kin - self.kappa * pot / (prm.p + 1.0)
        ME, K = _invariants(m, e, kin, prm)
        rhs = _rhs(kin, pot, prm)
        virial = tuple(
            (R, _virial_from_arrays(u, uh, prm, R), rhs, _escaped(u, m, prm, R))
            for R in self.radii
        )
        v = uh * biharmonic_propagator(prm, -state.t)
        score = math.nan if self._prev_v is None else _h2_distance(v, self._prev_v, prm)
        self._prev_v = v
        rec = TrajectoryRecord(
            t=state.t,
            mass=m,
            energy=e,
            kinetic=kin,
            potential=pot,
            h2=h2,
            ME=ME,
            K=K,
            virial_rhs=rhs,
            virial=virial,
            z_inc=self.z_since,
            z_cum=self.z_total ** (1.0 / self.q),
            scatter_score=score,
            healthy=state.healthy,
        )
        self.z_since = 0.0
        return rec


def fit_delta0(records, kinetic0):
    """Largest delta0 with virial_rhs <= -2 delta0 kinetic(0) at every snapshot."""
    return min(-r.virial_rhs for r in records) / (2.0 * kinetic0)


def fit_C_delta(records, prm):
    """Largest C with coercivity gap >= C kinetic at every snapshot."""
    c = _gap_factor(prm)
    vals = [(r.kinetic - c * r.potential) / r.kinetic for r in records if r.kinetic > 0]
    return min(vals) if vals else math.nan
