"""Config-driven experiments and their reports.

Each ``run_*`` function takes a validated :class:`ExperimentConfig`, writes
its artefacts below an output directory and returns a :class:`Report`.
Acceptance flags are keyed ``C<k>.<check>``; the integer ``k`` identifies
the acceptance criterion the check belongs to.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics as D
from .checkpoint import read_checkpoint, write_checkpoint
from .config import InitKind, Kind
from .errors import ValidationError
from .evolution import Watchdog, evolve, init_state, linear_flow
from .groundstate import (
    gaussian_seed,
    solve_ground_state,
    threshold_f,
    threshold_fprime,
    weinstein_J,
)
from .spectral import (
    as_physical,
    coordinates,
    gradient,
    hs_norm,
    make_grid,
    physical_field,
    to_spectral,
)

__all__ = [
    "RunSummary",
    "Report",
    "ground_state_for",
    "initial_field",
    "simulate",
    "gn_battery",
    "run_groundstate",
    "run_evolve",
    "run_dichotomy_sweep",
    "run_virial_check",
    "run_experiment",
]

GN_TOL = 1e-6
TREND_SAMPLES = 5
LOCALIZATION_TOL = 1e-2


@dataclass
class RunSummary:
    """Outcome of one trajectory; ``records`` stay out of the JSON form."""

    label: str
    amplitude: float | None
    classification: str
    halt_reason: str | None
    t_end: float
    n_snapshots: int
    fitted: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    records: list = field(default_factory=list, repr=False)

    def to_json(self):
        return {
            "label": self.label,
            "amplitude": self.amplitude,
            "classification": self.classification,
            "halt_reason": self.halt_reason,
            "t_end": self.t_end,
            "n_snapshots": self.n_snapshots,
            "fitted": self.fitted,
            "checks": self.checks,
        }


@dataclass
class Report:
    kind: str
    config: dict
    constants: dict = field(default_factory=dict)
    runs: list = field(default_factory=list)
    acceptance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    radii: tuple = ()
    K_crit: float = math.nan
    wall_time: float = 0.0

    @property
    def passed(self):
        return all(self.acceptance.values())

    def flag(self, key, ok, **detail):
        self.acceptance[key] = bool(ok)
        if detail:
            self.details[key] = detail

    def to_json(self):
        return {
            "kind": self.kind,
            "config": self.config,
            "constants": self.constants,
            "runs": [r.to_json() for r in self.runs],
            "acceptance": self.acceptance,
            "details": self.details,
            "notes": self.notes,
            "passed": self.passed,
            "wall_time_s": self.wall_time,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(report, out_dir):
    path = Path(out_dir) / "report.json"
    path.write_text(json.dumps(_jsonable(report.to_json()), indent=2, sort_keys=False) + "\n")
    return path


# -- building blocks ---------------------------------------------------------


def ground_state_for(cfg, prm=None, strict=True, shell=True):
    g = cfg.groundstate
    prm = cfg.grid() if prm is None else prm
    return solve_ground_state(
        prm,
        tol=g.tol,
        maxit=g.maxit,
        pad=g.pad,
        shell_tol=g.shell_tol if shell else None,
        strict=strict,
    )


def initial_field(cfg, gs, amplitude=None):
    """u0 from the ``init`` block (``amplitude`` overrides init.amplitude)."""
    init = cfg.init
    a = init.amplitude if amplitude is None else amplitude
    prm = gs.params
    if init.kind is InitKind.SCALED_GROUND_STATE:
        return physical_field(a * gs.physical(), prm)
    if init.kind is InitKind.GAUSSIAN:
        g = gaussian_seed(prm, init.width)
        return g.with_data(a * g.data)
    state = read_checkpoint(init.path)
    if state.prm != prm:
        raise ValidationError(
            f"checkpoint grid {state.prm} does not match config {prm}", field="init.path"
        )
    u = as_physical(state.u)
    return u.with_data(a * u.data)


def _watchdog(cfg):
    return Watchdog(amp_factor=cfg.run.amp_factor, energy_tol=cfg.run.energy_tol)


def _kappa(cfg):
    return cfg.run.nonlinearity.kappa


def _gn_bound(rec, prm, CGN):
    b = prm.gn_exponent
    l2 = math.sqrt(rec.mass)
    return CGN * l2 ** (prm.p + 1.0 - b) * math.sqrt(rec.kinetic) ** b


def _strictly_decreasing(xs):
    xs = np.asarray(xs, dtype=float)
    return bool(len(xs) >= 2 and np.all(np.diff(xs) < 0))


def _log_slope(t, xs):
    t = np.asarray(t, dtype=float)
    xs = np.asarray(xs, dtype=float)
    ok = xs > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(t[ok], np.log(xs[ok]), 1)[0])


def _expected_class(a):
    if a == 1.0:
        return D.Classification.BOUNDARY
    return D.Classification.GLOBAL_SCATTERING if a < 1.0 else D.Classification.ABOVE_THRESHOLD


class SolitonTracker:
    """Snapshot hook measuring the phase and modulus deviation from Q."""

    def __init__(self, gs):
        self.Q = gs.physical()
        self.dv = gs.params.cell_volume
        self.normQ = math.sqrt(self.dv * float(np.sum(self.Q**2)))
        self.t, self.phase, self.dev = [], [], []

    def __call__(self, state):
        u = state.u.data
        proj = self.dv * complex(np.sum(self.Q * u))
        diff = np.abs(u) - self.Q
        self.t.append(state.t)
        self.phase.append(math.atan2(proj.imag, proj.real))
        self.dev.append(math.sqrt(self.dv * float(np.sum(diff**2))) / self.normQ)

    def frequency(self):
        """omega with u ~ exp(-i omega t) Q, from a linear fit of the unwrapped phase."""
        if len(self.t) < 2:
            return math.nan
        return -float(np.polyfit(self.t, np.unwrap(self.phase), 1)[0])


def simulate(cfg, gs, u0=None, label="run", amplitude=None, out_dir=None, resume=None, hooks=()):
    """Evolve one trajectory and evaluate the per-run checks.

    With ``resume`` (a checkpoint path) the run continues from the stored
    state instead of ``u0``.  The latest healthy snapshot is checkpointed to
    ``out_dir/checkpoint.bin``.
    """
    prm = gs.params
    run = cfg.run
    if resume is not None:
        s0 = read_checkpoint(resume, kappa=_kappa(cfg), dealias=run.dealias, watchdog=_watchdog(cfg))
        if s0.prm != prm:
            raise ValidationError(f"checkpoint grid {s0.prm} does not match config {prm}", field="resume")
    else:
        s0 = init_state(u0, run.dt, kappa=_kappa(cfg), dealias=run.dealias, watchdog=_watchdog(cfg))
    hooks = list(hooks)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        ckpt = out_dir / "checkpoint.bin"

        def save(state):
            if state.healthy:
                write_checkpoint(state, ckpt)

        hooks.append(save)
    monitor = D.TrajectoryMonitor(prm, radii=run.radii, kappa=_kappa(cfg), hooks=hooks)
    records = []
    cls = D.classify(s0.u, gs)
    final = evolve(s0, run.T, run.snapshot_every, records.append, monitor)
    summary = RunSummary(
        label=label,
        amplitude=amplitude,
        classification=cls.value,
        halt_reason=final.halt_reason,
        t_end=final.t,
        n_snapshots=len(records),
        records=records,
    )
    _trajectory_checks(summary, gs, cfg, final)
    return summary


def _trajectory_checks(summary, gs, cfg, final):
    prm = gs.params
    recs = summary.records
    healthy = [r for r in recs if r.healthy]
    th = gs.thresholds
    c = summary.checks
    f = summary.fitted
    cls = D.Classification(summary.classification)
    K = np.array([r.K for r in recs])
    m0, e0 = recs[0].mass, recs[0].energy
    c["max_mass_drift"] = max(abs(r.mass - m0) / m0 for r in healthy) if m0 > 0 else 0.0
    c["max_energy_drift"] = max(
        abs(r.energy - e0) / (abs(e0) if e0 != 0 else 1.0) for r in healthy
    )
    c["K_over_Kcrit_min"] = float(K.min() / th.K_crit)
    c["K_over_Kcrit_max"] = float(K.max() / th.K_crit)
    if cls is D.Classification.GLOBAL_SCATTERING:
        c["invariance_holds"] = bool(np.all(K < th.K_crit))
    elif cls is D.Classification.ABOVE_THRESHOLD:
        c["invariance_holds"] = bool(all(r.K > th.K_crit for r in healthy))
    else:
        c["invariance_holds"] = None

    gn_viol = [
        (r.potential - _gn_bound(r, prm, gs.CGN)) / r.potential
        for r in recs
        if r.potential > 0
    ]
    c["gn_worst_excess"] = max(gn_viol) if gn_viol else 0.0
    c["gn_violations"] = sum(v > GN_TOL for v in gn_viol)

    if cls is D.Classification.GLOBAL_SCATTERING:
        lo = (prm.N * (prm.p - 1.0) - 8.0) / (2.0 * prm.N * (prm.p - 1.0))
        c["comparability_violations"] = sum(
            not (lo * r.kinetic <= r.energy <= 0.5 * r.kinetic) for r in recs
        )
        f["delta0"] = D.fit_delta0(healthy, recs[0].kinetic)
        f["C_delta"] = D.fit_C_delta(healthy, prm)

    zs = [r for r in recs[1:] if r.t >= 0.5 * recs[-1].t]
    c["z_final_half_decreasing"] = _strictly_decreasing([r.z_inc for r in zs])
    c["z_final_half_log_slope"] = _log_slope([r.t for r in zs], [r.z_inc for r in zs])
    sc = [r for r in recs if math.isfinite(r.scatter_score)]
    tail = sc[-TREND_SAMPLES:]
    c["score_last_samples"] = [r.scatter_score for r in tail]
    c["score_last_decreasing"] = len(tail) == TREND_SAMPLES and _strictly_decreasing(
        [r.scatter_score for r in tail]
    )
    c["score_final"] = tail[-1].scatter_score if tail else math.nan
    c["score_min"] = min((r.scatter_score for r in sc), default=math.nan)
    c["z_cum"] = recs[-1].z_cum

    radii = sorted(cfg.run.radii)
    if radii and len(healthy) >= 3:
        t_loc = D.localized_until(healthy, radii[0], LOCALIZATION_TOL)
        c["localized_until"] = t_loc
        closures = {}
        if t_loc is not None and sum(r.t <= t_loc for r in healthy) >= 3:
            for R in radii:
                closures[f"{R:g}"] = D.virial_closure(healthy, R, t_loc)
        c["virial_closure"] = closures


# -- randomized GN battery ---------------------------------------------------


def gn_battery(gs, count=100, seed=0):
    """C_GN * J(u) for ``count`` random smooth fields (each should be >= 1)."""
    prm = gs.params
    rng = np.random.default_rng(seed)
    xs = coordinates(prm)
    L = prm.L
    out = []
    for _ in range(count):
        u = np.zeros(prm.shape, dtype=complex)
        for _ in range(rng.integers(1, 5)):
            centre = rng.uniform(-L / 3, L / 3, prm.N)
            widths = rng.uniform(L / 16, L / 4, prm.N)
            k = rng.uniform(-2.0, 2.0, prm.N)
            amp = rng.normal() + 1j * rng.normal()
            r2 = sum(((x - c0) / w) ** 2 for x, c0, w in zip(xs, centre, widths))
            phase = sum(kj * x for kj, x in zip(k, xs))
            u += amp * np.exp(-r2 + 1j * phase)
        out.append(gs.CGN * weinstein_J(physical_field(u, prm)))
    return np.array(out)


# -- experiments -------------------------------------------------------------


def _out(cfg, out_dir):
    d = Path(out_dir if out_dir is not None else (cfg.out_dir or "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _new_report(cfg, gs):
    rep = Report(kind=cfg.kind.value, config=cfg.echo(), constants=gs.constants())
    rep.K_crit = gs.thresholds.K_crit
    rep.radii = tuple(sorted(cfg.run.radii))
    return rep


def _groundstate_flags(rep, cfg, gs):
    prm = gs.params
    r = gs.pohozaev
    coarse = ground_state_for(
        cfg, make_grid(prm.N, prm.p, prm.n // 2, prm.L), strict=False, shell=False
    )
    rc = coarse.pohozaev
    decreasing = all(rc[k] > r[k] for k in ("r1", "r2", "r3"))
    rep.flag(
        "C1.ground_state",
        gs.residual <= 1e-10 and max(r.values()) <= 1e-6 and decreasing,
        residual=gs.residual,
        pohozaev=r,
        pohozaev_half_n=rc,
        decreasing_under_refinement=decreasing,
    )
    sat = abs(gs.CGN * gs.JQ - 1.0)
    battery = gn_battery(gs, 100, cfg.seed)
    worst = float(max(0.0, (1.0 - battery).max()))
    rep.flag(
        "C2.sharp_constant",
        sat <= 1e-8 and worst <= GN_TOL,
        closed_form_vs_inverse_J=sat,
        saturation_at_Q=sat,
        battery_size=len(battery),
        battery_min_CJ=float(battery.min()),
        battery_worst_violation=worst,
    )
    th = gs.thresholds
    fx = float(threshold_f(th.K_crit, prm, gs.CGN))
    fp = float(threshold_fprime(th.K_crit, prm, gs.CGN))
    rel_f = abs(fx - th.ME_crit) / abs(th.ME_crit)
    rel_fp = abs(fp) / th.K_crit
    rep.flag(
        "C3.threshold_identity",
        rel_f <= 1e-8 and rel_fp <= 1e-6,
        f_Kcrit_vs_MEcrit=rel_f,
        fprime_Kcrit_rel=rel_fp,
    )
    Q = physical_field(gs.physical(), prm)
    rhs = D.virial_rhs(Q)
    scale = abs(rhs) / gs.lpQ
    radii = (prm.L / 4, prm.L / 2, prm.L)
    A = {f"{R:g}": D.virial_A(Q, R) for R in radii}
    mag = _virial_magnitude(Q, prm.L)
    eps_ok = all(abs(v) <= 64 * np.finfo(float).eps * mag for v in A.values())
    rep.flag(
        "C6.soliton",
        scale <= 1e-8 and eps_ok,
        rhs_over_potential=scale,
        A_R=A,
        integrand_l1=mag,
    )


def _virial_magnitude(u, R):
    """Integral of |x phi grad u conj u|, the scale for 'A_R = 0 to eps'."""
    prm = u.params
    grads = [g.data for g in gradient(u)]
    xs = coordinates(prm)
    r = np.sqrt(sum(x * x for x in xs))
    phi = D.cutoff(r / R)
    dens = sum(np.abs(x * phi * g) for x, g in zip(xs, grads)) * np.abs(u.data)
    return prm.cell_volume * float(np.sum(dens))


def run_groundstate(cfg, out_dir=None, resume=None):
    t0 = time.perf_counter()
    out = _out(cfg, out_dir)
    gs = ground_state_for(cfg)
    rep = _new_report(cfg, gs)
    rep.details["iterations"] = gs.iterations
    _groundstate_flags(rep, cfg, gs)
    if resume is not None:
        rep.notes.append("--resume has no effect on a ground-state solve")
    # Q itself as a t = 0 checkpoint, usable as FromCheckpoint initial data
    write_checkpoint(init_state(physical_field(gs.physical(), gs.params), cfg.run.dt), out / "Q.bin")
    rep.wall_time = time.perf_counter() - t0
    write_report(rep, out)
    return rep


def _infrastructure_flags(rep, state, out):
    prm = state.prm
    uh = to_spectral(as_physical(state.u))
    worst = 0.0
    for s in (0.0, prm.s_c, 2.0):
        for tau in (0.37, -1.3, 10.0):
            a = hs_norm(uh, s)
            b = hs_norm(linear_flow(uh, tau), s)
            worst = max(worst, abs(b - a) / a if a > 0 else abs(b))
    path = out / "roundtrip_check.bin"
    if state.healthy:
        write_checkpoint(state, path)
        back = read_checkpoint(path)
        exact = (
            np.array_equal(back.u.data.view(np.uint8), as_physical(state.u).data.view(np.uint8))
            and back.t == state.t
            and back.prm == prm
        )
        path.unlink()
    else:
        exact = None
    rep.flag("C9.isometry", worst <= 1e-13, worst_relative=worst)
    if exact is not None:
        rep.flag("C9.checkpoint_roundtrip", exact)


def _soliton_flags(rep, cfg, gs, summary, tracker):
    prm = gs.params
    omega = tracker.frequency()
    dev = max(tracker.dev)
    T = cfg.run.T
    errs = []
    for dt in (cfg.run.dt, cfg.run.dt / 2):
        s = init_state(
            physical_field(gs.physical(), prm),
            dt,
            kappa=_kappa(cfg),
            dealias=cfg.run.dealias,
            watchdog=Watchdog(math.inf, math.inf),
        )
        s = evolve(s, T)
        exact = np.exp(-1j * prm.mu * s.t) * gs.physical()
        errs.append(
            math.sqrt(prm.cell_volume * float(np.sum(np.abs(s.u.data - exact) ** 2))) / gs.l2Q
        )
    ratio = errs[0] / errs[1] if errs[1] > 0 else math.nan
    ok = (
        dev <= 1e-6
        and abs(omega - prm.mu) <= 1e-4
        and summary.checks["max_mass_drift"] <= 1e-10
        and summary.checks["max_energy_drift"] <= 1e-6
        and 3.6 <= ratio <= 4.4
        and summary.halt_reason == "completed"
    )
    rep.flag(
        "C4.soliton",
        ok,
        sup_modulus_deviation=dev,
        phase_rate=omega,
        expected_rate=prm.mu,
        mass_drift=summary.checks["max_mass_drift"],
        energy_drift=summary.checks["max_energy_drift"],
        error_dt=errs[0],
        error_dt_half=errs[1],
        convergence_ratio=ratio,
        halt_reason=summary.halt_reason,
    )


def run_evolve(cfg, out_dir=None, resume=None):
    t0 = time.perf_counter()
    out = _out(cfg, out_dir)
    gs = ground_state_for(cfg)
    rep = _new_report(cfg, gs)
    init = cfg.init
    u0 = None if resume is not None else initial_field(cfg, gs)
    soliton = (
        resume is None
        and init.kind is InitKind.SCALED_GROUND_STATE
        and init.amplitude == 1.0
        and cfg.run.nonlinearity.kappa == 1.0
    )
    hooks = []
    tracker = SolitonTracker(gs) if soliton else None
    if tracker is not None:
        hooks.append(tracker)
    amp = init.amplitude
    summary = simulate(cfg, gs, u0, "evolve", amp, out, resume, hooks)
    rep.runs.append(summary)
    _write_csv(out / "trajectory.csv", [summary], rep.radii)
    c = summary.checks
    rep.flag("C2.gn_snapshots", c["gn_violations"] == 0, worst_excess=c["gn_worst_excess"])
    if tracker is not None:
        _soliton_flags(rep, cfg, gs, summary, tracker)
        rep.details["soliton_score_min"] = c["score_min"]
    cls = D.Classification(summary.classification)
    if cls is D.Classification.GLOBAL_SCATTERING:
        rep.flag("C7.comparability", c["comparability_violations"] == 0,
                 violations=c["comparability_violations"])
    if cls in (D.Classification.GLOBAL_SCATTERING, D.Classification.ABOVE_THRESHOLD):
        reached = cls is not D.Classification.GLOBAL_SCATTERING or summary.halt_reason == "completed"
        rep.flag("C5.invariance", bool(c["invariance_holds"]) and reached,
                 classification=cls.value, halt_reason=summary.halt_reason)
    if cls is D.Classification.BOUNDARY:
        rep.notes.append("initial data on the threshold (Boundary); no invariance claimed")
    ckpt = out / "checkpoint.bin"
    if ckpt.exists():
        _infrastructure_flags(rep, read_checkpoint(ckpt), out)
    from .plotdata import emit_plot_data

    emit_plot_data(rep, out)
    rep.wall_time = time.perf_counter() - t0
    write_report(rep, out)
    return rep


def _sweep_point(args):
    cfg, gs, a, out, resuming = args
    u0 = initial_field(cfg, gs, a)
    cls = D.classify(u0, gs)
    if cls is D.Classification.BOUNDARY:
        return RunSummary(f"a={a:g}", a, cls.value, "skipped_boundary", 0.0, 0)
    ckpt = out / "checkpoint.bin"
    resume = ckpt if resuming and ckpt.exists() else None
    return simulate(cfg, gs, u0, f"a={a:g}", a, out, resume)


def run_dichotomy_sweep(cfg, out_dir=None, resume=None):
    """Evolve u0 = a Q for each amplitude and check the dichotomy invariants.

    ``resume`` may name a previous sweep directory (or a checkpoint inside
    one); every amplitude with a stored ``a=<a>/checkpoint.bin`` there
    continues from it.
    """
    t0 = time.perf_counter()
    out = _out(cfg, out_dir)
    gs = ground_state_for(cfg)
    rep = _new_report(cfg, gs)
    base = None
    if resume is not None:
        base = Path(resume)
        base = base if base.is_dir() else base.parent.parent
    jobs = []
    for a in cfg.sweep.amplitudes:
        sub = out / f"a={a:g}"
        sub.mkdir(parents=True, exist_ok=True)
        if base is not None:
            src = base / f"a={a:g}" / "checkpoint.bin"
            if src.exists() and src.resolve() != (sub / "checkpoint.bin").resolve():
                (sub / "checkpoint.bin").write_bytes(src.read_bytes())
        jobs.append((cfg, gs, a, sub, base is not None))
    if cfg.sweep.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
            runs = list(pool.map(_sweep_point, jobs))
    else:
        runs = [_sweep_point(j) for j in jobs]
    rep.runs = runs
    _write_csv(out / "trajectory.csv", runs, rep.radii)
    _write_summary_table(out / "summary.dat", runs)

    inv = {}
    comp_viol = 0
    gn_viol = 0
    for r in runs:
        a = r.amplitude
        exp = _expected_class(a)
        cls = D.Classification(r.classification)
        if cls is D.Classification.BOUNDARY:
            rep.notes.append(f"a={a:g}: equality case (Boundary), evolution skipped")
            inv[f"{a:g}"] = exp is D.Classification.BOUNDARY
            continue
        ok = cls is exp and bool(r.checks["invariance_holds"])
        if cls is D.Classification.GLOBAL_SCATTERING:
            ok = ok and r.halt_reason == "completed"
            comp_viol += r.checks["comparability_violations"]
        inv[f"{a:g}"] = ok
        gn_viol += r.checks["gn_violations"]
    rep.flag("C5.dichotomy", all(inv.values()), per_amplitude=inv)
    if any(r.classification == D.Classification.GLOBAL_SCATTERING.value for r in runs):
        rep.flag("C7.comparability", comp_viol == 0, violations=comp_viol)
    rep.flag("C2.gn_snapshots", gn_viol == 0, violations=gn_viol)
    for r in runs:
        if r.amplitude == 0.3 and r.n_snapshots:
            c = r.checks
            rep.flag(
                "C8.scattering_trend",
                c["z_final_half_decreasing"] and c["score_last_decreasing"],
                z_log_slope=c["z_final_half_log_slope"],
                score_last=c["score_last_samples"],
            )
    from .plotdata import emit_plot_data

    emit_plot_data(rep, out)
    rep.wall_time = time.perf_counter() - t0
    write_report(rep, out)
    return rep


def run_virial_check(cfg, out_dir=None, resume=None):
    """Soliton virial identities plus the closure trend on one trajectory.

    Radii default to (L/4, L/2) when the config lists none.
    """
    t0 = time.perf_counter()
    out = _out(cfg, out_dir)
    prm = cfg.grid()
    if not cfg.run.radii:
        run = cfg.run.model_copy(update={"radii": [prm.L / 4, prm.L / 2]})
        cfg = cfg.model_copy(update={"run": run})
    gs = ground_state_for(cfg)
    rep = _new_report(cfg, gs)
    Q = physical_field(gs.physical(), prm)
    rhs = D.virial_rhs(Q)
    A = {f"{R:g}": D.virial_A(Q, R) for R in rep.radii}
    mag = _virial_magnitude(Q, prm.L)
    rep.flag(
        "C6.soliton",
        abs(rhs) <= 1e-8 * gs.lpQ
        and all(abs(v) <= 64 * np.finfo(float).eps * mag for v in A.values()),
        rhs_over_potential=abs(rhs) / gs.lpQ,
        A_R=A,
    )
    u0 = None if resume is not None else initial_field(cfg, gs)
    summary = simulate(cfg, gs, u0, "virial", cfg.init.amplitude, out, resume)
    rep.runs.append(summary)
    _write_csv(out / "trajectory.csv", [summary], rep.radii)
    closures = summary.checks.get("virial_closure", {})
    vals = [closures[f"{R:g}"] for R in rep.radii if f"{R:g}" in closures]
    trend = len(vals) == len(rep.radii) >= 2 and _strictly_decreasing(vals)
    delta0 = summary.fitted.get("delta0", math.nan)
    rep.flag(
        "C6.trajectory",
        trend and delta0 > 0,
        closure=closures,
        localized_until=summary.checks.get("localized_until"),
        delta0=delta0,
    )
    from .plotdata import emit_plot_data

    emit_plot_data(rep, out)
    rep.wall_time = time.perf_counter() - t0
    write_report(rep, out)
    return rep


_RUNNERS = {
    Kind.GROUND_STATE: run_groundstate,
    Kind.EVOLVE: run_evolve,
    Kind.DICHOTOMY_SWEEP: run_dichotomy_sweep,
    Kind.VIRIAL_CHECK: run_virial_check,
}


def run_experiment(cfg, out_dir=None, resume=None):
    return _RUNNERS[cfg.kind](cfg, out_dir, resume)


# -- tabular output ----------------------------------------------------------


def _write_csv(path, runs, radii):
    header = None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in runs:
            if not r.records:
                continue
            h, rows = D.record_rows(r.records, radii)
            if header is None:
                header = ["a"] + h
                w.writerow(header)
            a = "" if r.amplitude is None else format(r.amplitude, ".17g")
            for row in rows:
                w.writerow([a] + row)


def _write_summary_table(path, runs):
    lines = ["# a classification halt_reason t_end snapshots K_min/K_crit K_max/K_crit delta0"]
    for r in runs:
        kmin = r.checks.get("K_over_Kcrit_min", math.nan)
        kmax = r.checks.get("K_over_Kcrit_max", math.nan)
        d0 = r.fitted.get("delta0", math.nan)
        lines.append(
            f"{r.amplitude:g} {r.classification} {r.halt_reason} {r.t_end:.6g} "
            f"{r.n_snapshots} {kmin:.12g} {kmax:.12g} {d0:.12g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
