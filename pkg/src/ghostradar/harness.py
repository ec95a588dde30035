"""Monte Carlo experiments: false-alarm tables, detection curves, RMSE studies.

Seeding: trial ``i`` of every sweep point draws from ``trial_rng(seed, i)``.
Points of a sweep therefore share angles, unit-variance amplitude draws and
noise (common random numbers); only the amplitude scale changes. Amplitudes
are drawn as ``CN(0, 1)`` and scaled by ``sqrt(sigma_alpha2)`` or
``sqrt(sigma_beta2)``, which is distributed exactly as ``CN(0, variance)``.
"""

from __future__ import annotations

import csv
import json
import math
import subprocess
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from . import __version__
from .array import ArrayGeometry, ula, virtual_matrix
from .cscd_h0 import StopConfigH0, cscd_h0, omp_h0
from .cscd_h1 import StopConfigH1, cscd_h1, gomp_h1
from .estimators import ESTIMATORS, canonical_method
from .exceptions import NoIdentifiedPaths
from .io import dumps, geometry_from_dict, geometry_to_dict, jsonable
from .glrt import H1, TheoryModel, detect, ideal_detect, pd, rho1_exact, threshold_for_pfa
from .scene import DirectPath, FirstOrderPair, Scene, complex_normal, db_to_linear, synthesize, trial_rng

ESTIMATOR_NAMES = ESTIMATORS
_canonical_estimator = canonical_method


def _float_tuple(values) -> tuple[float, ...]:
    if values is None:
        return ()
    if np.isscalar(values) or isinstance(values, str):
        values = [values]
    return tuple(float(v) for v in values)


@dataclass
class ExperimentConfig:
    """Settings of one Monte Carlo run.

    ``direct_angles`` / ``pair_angles`` fix the scene geometry; when ``None``
    the angles are drawn per trial uniformly in ``angle_range`` with pairwise
    separation of at least ``min_separation_deg`` (default: one beamwidth).
    SNRs are in dB; ``-inf`` means a silent component.
    """

    geometry: ArrayGeometry = field(default_factory=ula)
    k0: int = 1
    k1: int = 1
    direct_angles: tuple | None = None
    pair_angles: tuple | None = None
    angle_range: tuple[float, float] = (-60.0, 60.0)
    min_separation_deg: float | None = None
    beamwidth_deg: float | None = None
    rho0_db: tuple[float, ...] = (10.0,)
    rho1_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0)
    pfa_target: float = 1e-2
    trials_pfa: int | None = None
    trials_pd: int = 10_000
    trials_rmse: int = 200
    seed: int = 0
    estimator: str = "cscd"
    ideal_glrt: bool = False
    sigma2: float = 1.0
    grid_step: float = 2.0
    n_jobs: int = 1

    def __post_init__(self):
        self.geometry = geometry_from_dict(self.geometry) if not isinstance(self.geometry, ArrayGeometry) \
            else self.geometry
        self.rho0_db = _float_tuple(self.rho0_db)
        self.rho1_db = _float_tuple(self.rho1_db)
        self.angle_range = tuple(float(a) for a in self.angle_range)
        self.estimator = _canonical_estimator(self.estimator)
        if self.direct_angles is not None:
            self.direct_angles = _float_tuple(self.direct_angles)
            self.k0 = len(self.direct_angles)
        if self.pair_angles is not None:
            pairs = np.asarray(self.pair_angles, dtype=float).reshape(-1, 2)
            self.pair_angles = tuple(tuple(float(a) for a in p) for p in pairs)
            self.k1 = len(self.pair_angles)
        if self.k0 < 0 or self.k1 < 0:
            raise ValueError("path counts must be non-negative")
        if self.k0 + 2 * self.k1 >= self.geometry.n_virtual:
            raise ValueError("K0 + 2K1 must stay below the virtual array size")
        if not 0.0 < self.pfa_target < 1.0:
            raise ValueError("pfa_target must lie in (0, 1)")
        for name in ("trials_pd", "trials_rmse"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.trials_pfa is not None and self.trials_pfa < 1:
            raise ValueError("trials_pfa must be >= 1")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        lo, hi = self.angle_range
        if not -90.0 <= lo < hi <= 90.0:
            raise ValueError("angle_range must satisfy -90 <= lo < hi <= 90")

    @property
    def n_trials_pfa(self) -> int:
        if self.trials_pfa is not None:
            return self.trials_pfa
        return int(math.ceil(100.0 / self.pfa_target))

    def beamwidth(self) -> float:
        return self.geometry.beamwidth_deg() if self.beamwidth_deg is None else float(self.beamwidth_deg)

    def min_separation(self) -> float:
        return self.beamwidth() if self.min_separation_deg is None else float(self.min_separation_deg)

    def with_trials(self, n: int) -> "ExperimentConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(trials_pfa=n, trials_pd=n, trials_rmse=n)
        return ExperimentConfig(**data)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["geometry"] = geometry_to_dict(self.geometry)
        out["angle_range"] = list(self.angle_range)
        out["rho0_db"] = list(self.rho0_db)
        out["rho1_db"] = list(self.rho1_db)
        if self.pair_angles is not None:
            out["pair_angles"] = [list(p) for p in self.pair_angles]
        if self.direct_angles is not None:
            out["direct_angles"] = list(self.direct_angles)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if "geometry" in data:
            data["geometry"] = geometry_from_dict(data["geometry"])
        return cls(**data)


def place_angles(rng: np.random.Generator, n: int, lo: float, hi: float, min_sep: float,
                 max_attempts: int = 10_000) -> np.ndarray:
    """Draw ``n`` angles uniformly in ``[lo, hi]`` with pairwise separation ``>= min_sep``."""
    for _ in range(max_attempts):
        a = rng.uniform(lo, hi, n)
        if n < 2 or np.min(np.diff(np.sort(a))) >= min_sep:
            return a
    raise ValueError(f"could not place {n} angles in [{lo}, {hi}] with separation {min_sep}")


def draw_angles(cfg: ExperimentConfig, rng: np.random.Generator):
    """Direct angles ``(k0,)`` and pair angles ``(k1, 2)`` for one trial."""
    n_rand = (cfg.k0 if cfg.direct_angles is None else 0) + (2 * cfg.k1 if cfg.pair_angles is None else 0)
    a = place_angles(rng, n_rand, *cfg.angle_range, cfg.min_separation()) if n_rand else np.zeros(0)
    if cfg.direct_angles is None:
        direct, a = a[:cfg.k0], a[cfg.k0:]
    else:
        direct = np.asarray(cfg.direct_angles, dtype=float)
    if cfg.pair_angles is None:
        pairs = np.sort(a.reshape(-1, 2), axis=1)
    else:
        pairs = np.asarray(cfg.pair_angles, dtype=float).reshape(-1, 2)
    return direct, pairs


def draw_scene(cfg: ExperimentConfig, rng: np.random.Generator, rho0_db: float, rho1_db: float,
               with_pairs: bool = True):
    """Scene for one trial plus the pair angles of the H1 model.

    With ``with_pairs=False`` the scene has no first-order paths (H0 truth)
    but the drawn pair angles are still returned: the known-matrix detector
    needs an H1 model to test against.
    """
    direct, pairs = draw_angles(cfg, rng)
    unit = complex_normal(rng, 1.0, cfg.k0 + 2 * cfg.k1)
    sa2 = db_to_linear(rho0_db) * cfg.sigma2
    sb2 = db_to_linear(rho1_db) * cfg.sigma2 if with_pairs else 0.0
    alpha = np.sqrt(sa2) * unit[:cfg.k0]
    beta = np.sqrt(sb2) * unit[cfg.k0:]
    scene = Scene(
        tuple(DirectPath(t, complex(a)) for t, a in zip(direct, alpha)),
        tuple(FirstOrderPair(p[0], p[1], complex(beta[k]), complex(beta[cfg.k1 + k]))
              for k, p in enumerate(pairs)) if with_pairs else (),
        cfg.sigma2, sa2, sb2,
    )
    return scene, pairs


def estimator_pair(name: str):
    """(H0 estimator, H1 estimator) functions for an estimator family."""
    name = _canonical_estimator(name)
    return (cscd_h0, cscd_h1) if name == "cscd" else (omp_h0, gomp_h1)


def _configs(cfg: ExperimentConfig):
    return (StopConfigH0(grid_step=cfg.grid_step, sigma2=cfg.sigma2),
            StopConfigH1(grid_step=cfg.grid_step, sigma2=cfg.sigma2))


# ---------------------------------------------------------------------------
# matching and metrics


@dataclass
class MatchResult:
    """Per-path outcome of :func:`match_paths`.

    ``direct_errors[k]`` is the absolute error of true direct path ``k`` or
    ``None`` if unidentified; ``pair_errors[k]`` is ``(dod_err, doa_err)``
    or ``None``.
    """

    direct_errors: list
    pair_errors: list

    @property
    def n_direct_identified(self) -> int:
        return sum(e is not None for e in self.direct_errors)

    @property
    def n_pairs_identified(self) -> int:
        return sum(e is not None for e in self.pair_errors)

    @property
    def all_direct(self) -> bool:
        return all(e is not None for e in self.direct_errors)

    @property
    def all_pairs(self) -> bool:
        return all(e is not None for e in self.pair_errors)

    @property
    def all_paths(self) -> bool:
        return self.all_direct and self.all_pairs

    def direct_sq_error(self) -> float | None:
        """Mean squared error over identified direct paths (``1/|Omega_0|`` form)."""
        errs = [e ** 2 for e in self.direct_errors if e is not None]
        return float(np.mean(errs)) if errs else None

    def pair_sq_error(self) -> float | None:
        """``1/(2|Omega_1|)`` times the summed squared DOD and DOA errors."""
        errs = [e for e in self.pair_errors if e is not None]
        if not errs:
            return None
        return float(sum(a ** 2 + b ** 2 for a, b in errs) / (2 * len(errs)))


def _greedy_assign(dist: np.ndarray, gate: float):
    """Greedy nearest-neighbour assignment; returns ``{true_index: est_index}``."""
    out = {}
    if dist.size == 0:
        return out
    used_t, used_e = set(), set()
    order = np.argsort(dist, axis=None, kind="stable")
    for flat in order:
        i, j = np.unravel_index(flat, dist.shape)
        if dist[i, j] >= gate:
            break
        if i in used_t or j in used_e:
            continue
        out[int(i)] = int(j)
        used_t.add(i)
        used_e.add(j)
    return out


def match_paths(true_direct, true_pairs, est_direct, est_pairs, beamwidth_deg: float) -> MatchResult:
    """Greedy nearest-neighbour matching of estimated to true paths of the same type.

    A true path is identified iff its matched estimate errs by less than
    ``beamwidth_deg`` in every angle coordinate. Pair orientation is ignored:
    ``(dod, doa)`` and ``(doa, dod)`` describe the same reciprocal pair.
    """
    if not beamwidth_deg > 0:
        raise ValueError("beamwidth must be positive")
    td = np.asarray(true_direct, dtype=float).ravel()
    ed = np.asarray(est_direct, dtype=float).ravel()
    tp = np.asarray(true_pairs, dtype=float).reshape(-1, 2)
    ep = np.asarray(est_pairs, dtype=float).reshape(-1, 2)

    dist_d = np.abs(td[:, None] - ed[None, :])
    assign_d = _greedy_assign(dist_d, beamwidth_deg)
    direct_errors = [float(dist_d[k, assign_d[k]]) if k in assign_d else None for k in range(td.size)]

    same = np.max(np.abs(tp[:, None, :] - ep[None, :, :]), axis=2)
    swap = np.max(np.abs(tp[:, None, :] - ep[None, :, ::-1]), axis=2)
    dist_p = np.minimum(same, swap)
    assign_p = _greedy_assign(dist_p, beamwidth_deg)
    pair_errors = []
    for k in range(len(tp)):
        if k not in assign_p:
            pair_errors.append(None)
            continue
        j = assign_p[k]
        e = ep[j] if same[k, j] <= swap[k, j] else ep[j, ::-1]
        pair_errors.append((float(abs(e[0] - tp[k, 0])), float(abs(e[1] - tp[k, 1]))))
    return MatchResult(direct_errors, pair_errors)


@dataclass
class TrialRecord:
    """Outcome of one trial; enough to recompute every aggregate."""

    experiment: str
    index: int
    estimator: str
    rho0_db: float
    rho1_db: float
    statistic: float = float("nan")
    threshold: float = float("nan")
    decision: str = ""
    k0_hat: int = -1
    k1_hat: int = -1
    pd_theory: float = float("nan")
    scenario: str = ""
    sq_err0: float | None = None
    n_id0: int = 0
    n_true0: int = 0
    sq_err1: float | None = None
    n_id1: int = 0
    n_true1: int = 0

    @property
    def alarm(self) -> bool:
        return self.decision == H1

    def to_dict(self) -> dict:
        return asdict(self)


def rmse_metrics(records) -> tuple[float, float]:
    """``(RMSE0, RMSE1)`` conditioned on identified paths.

    Each run contributes its mean squared error over its identified paths;
    runs without identified paths of a type are left out of that type's
    average. A component with no identified path in any run is ``nan``.

    Raises
    ------
    NoIdentifiedPaths
        If no run identified any path at all.
    """
    e0 = [r.sq_err0 for r in records if r.sq_err0 is not None]
    e1 = [r.sq_err1 for r in records if r.sq_err1 is not None]
    if not e0 and not e1:
        raise NoIdentifiedPaths("no path was identified in any run")
    rmse0 = math.sqrt(float(np.mean(e0))) if e0 else float("nan")
    rmse1 = math.sqrt(float(np.mean(e1))) if e1 else float("nan")
    return rmse0, rmse1


def binomial_ci(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact (Clopper-Pearson) confidence interval for a binomial proportion."""
    if n < 1:
        return float("nan"), float("nan")
    ci = stats.binomtest(int(successes), int(n)).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


@dataclass
class MetricsReport:
    """Aggregated rows of an experiment (one per sweep point and estimator)."""

    experiment: str
    description: str
    rows: list
    config: dict
    records: list = field(default_factory=list, repr=False)

    def columns(self) -> list:
        cols = []
        for row in self.rows:
            cols.extend(k for k in row if k not in cols)
        return cols

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(f"# {self.experiment}: {self.description}\n")
            writer = csv.DictWriter(fh, fieldnames=self.columns())
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: _fmt(v) for k, v in row.items()})

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "description": self.description,
                "rows": self.rows, "config": self.config}


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def version_string() -> str:
    """Package version plus ``git describe`` output when available."""
    try:
        desc = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                              capture_output=True, text=True, timeout=5,
                              cwd=Path(__file__).resolve().parent)
        if desc.returncode == 0 and desc.stdout.strip():
            return f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_report(report: MetricsReport, out_dir, seed: int) -> dict:
    """Write the CSV, the trial records (JSON lines) and a JSON manifest.

    Returns the manifest.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{report.experiment}.csv"
    report.to_csv(csv_path)
    outputs = [csv_path.name]
    if report.records:
        rec_path = out / f"{report.experiment}.records.jsonl"
        save_records(report.records, rec_path)
        outputs.append(rec_path.name)
    manifest = {"experiment": report.experiment, "description": report.description,
                "version": version_string(), "seed": seed, "config": report.config,
                "outputs": outputs, "rows": report.rows}
    (out / f"{report.experiment}.manifest.json").write_text(dumps(manifest) + "\n")
    return manifest


def save_records(records, path) -> None:
    with Path(path).open("w") as fh:
        for r in records:
            fh.write(json.dumps(jsonable(r.to_dict())) + "\n")


def load_records(path) -> list:
    """Inverse of :func:`save_records`."""
    float_fields = {f.name for f in fields(TrialRecord) if f.type in ("float", "float | None")}
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        for k in float_fields:
            if data.get(k) is not None:
                data[k] = float(data[k])
        out.append(TrialRecord(**data))
    return out


def _run(cfg: ExperimentConfig, fn, jobs):
    if cfg.n_jobs == 1:
        return [fn(*job) for job in jobs]
    return Parallel(n_jobs=cfg.n_jobs)(delayed(fn)(*job) for job in jobs)


# ---------------------------------------------------------------------------
# false alarm


def _detection_trial(cfg: ExperimentConfig, experiment: str, estimator: str, index: int,
                     rho0_db: float, rho1_db: float, h1_truth: bool) -> TrialRecord:
    rng = trial_rng(cfg.seed, index)
    scene, model_pairs = draw_scene(cfg, rng, rho0_db, rho1_db, with_pairs=h1_truth)
    geom = cfg.geometry
    z = synthesize(geom, scene, rng).z
    rec = TrialRecord(experiment, index, estimator, rho0_db, rho1_db)
    if h1_truth and cfg.k1:
        rho = rho1_exact(geom, scene.direct_angles, scene.pair_angles, scene.sigma_beta2, cfg.sigma2)
        model = TheoryModel(geom.n_virtual, cfg.k0, cfg.k1, rho)
        rec.pd_theory = float(pd(threshold_for_pfa(cfg.pfa_target, model), model))
    if cfg.ideal_glrt:
        out = ideal_detect(geom, z, scene.direct_angles, model_pairs, cfg.pfa_target)
        rec.k0_hat, rec.k1_hat = cfg.k0, cfg.k1
    else:
        f0, f1 = estimator_pair(estimator)
        c0, c1 = _configs(cfg)
        e0, e1 = f0(z, geom, c0), f1(z, geom, c1)
        out = detect(geom, z, e0, e1, cfg.pfa_target)
        rec.k0_hat, rec.k1_hat = e1.k0, e1.k1
    rec.statistic, rec.threshold, rec.decision = float(out.statistic), float(out.threshold), out.decision
    return rec


def _groups(records, keys):
    """Records grouped by ``keys`` in first-seen order."""
    groups = {}
    for r in records:
        groups.setdefault(tuple(getattr(r, k) for k in keys), []).append(r)
    return groups


def _rate_row(records, key: str) -> dict:
    n = len(records)
    k = sum(r.alarm for r in records)
    lo, hi = binomial_ci(k, n)
    return {"trials": n, f"{key}_count": k, key: k / n if n else float("nan"), f"{key}_ci_low": lo,
            f"{key}_ci_high": hi}


def summarize_pfa(records, pfa_target: float) -> list:
    """One row per ``(rho0_db, estimator)`` of false-alarm records."""
    return [{"estimator": name, "rho0_db": rho0, "pfa_nominal": pfa_target, **_rate_row(recs, "pfa")}
            for (rho0, name), recs in _groups(records, ("rho0_db", "estimator")).items()]


def summarize_pd(records, cfg: "ExperimentConfig") -> list:
    """One row per ``(rho1_db, estimator)`` with empirical and closed-form Pd."""
    model0 = TheoryModel(cfg.geometry.n_virtual, cfg.k0, cfg.k1)
    lam = threshold_for_pfa(cfg.pfa_target, model0)
    rows = []
    for (rho1, name), recs in _groups(records, ("rho1_db", "estimator")).items():
        iso = TheoryModel(model0.M, model0.K0, model0.K1, db_to_linear(rho1))
        rows.append({"estimator": name, "rho0_db": recs[0].rho0_db, "rho1_db": rho1, "M": model0.M,
                     **_rate_row(recs, "pd"),
                     "pd_theory_exact": float(np.mean([r.pd_theory for r in recs])),
                     "pd_theory_isotropic": float(pd(lam, iso))})
    return rows


def _success(records, which: str) -> dict:
    if which == "direct":
        ok = [r.n_id0 == r.n_true0 for r in records]
    elif which == "first_order":
        ok = [r.n_id1 == r.n_true1 for r in records]
    else:
        ok = [r.n_id0 == r.n_true0 and r.n_id1 == r.n_true1 for r in records]
    k, n = sum(ok), len(ok)
    lo, hi = binomial_ci(k, n)
    return {f"success_{which}": k / n if n else float("nan"), f"success_{which}_count": k,
            f"success_{which}_ci_low": lo, f"success_{which}_ci_high": hi}


def _safe_rmse(records):
    try:
        return rmse_metrics(records)
    except NoIdentifiedPaths:
        return float("nan"), float("nan")


def summarize_rmse(records) -> list:
    """One row per ``(snr, scenario, estimator)`` with RMSEs and success rates."""
    rows = []
    for (snr, scenario, name), recs in _groups(records, ("rho0_db", "scenario", "estimator")).items():
        rmse0, rmse1 = _safe_rmse(recs)
        row = {"scenario": scenario, "estimator": name, "snr_db": snr, "trials": len(recs),
               "rmse0_deg": rmse0, "runs_identified0": sum(r.sq_err0 is not None for r in recs),
               **_success(recs, "direct")}
        if scenario == "h1":
            row.update({"rmse1_deg": rmse1, "runs_identified1": sum(r.sq_err1 is not None for r in recs),
                        **_success(recs, "first_order"), **_success(recs, "all")})
        rows.append(row)
    return rows


def run_pfa_experiment(cfg: ExperimentConfig, estimators=None) -> MetricsReport:
    """False-alarm rate on H0 snapshots for every ``rho0_db`` point.

    The truth has no first-order paths; ``cfg.k1`` only sets the order of the
    H1 model. ``estimators`` defaults to ``[cfg.estimator]``. The ideal mode
    uses the true direct angles and the drawn (silent) pair angles instead.
    All estimators see the same snapshots.
    """
    if cfg.k1 < 1:
        raise ValueError("the H1 model needs K1 >= 1")
    names = ["ideal"] if cfg.ideal_glrt else [_canonical_estimator(e) for e in (estimators or [cfg.estimator])]
    records = []
    for rho0 in cfg.rho0_db:
        for name in names:
            records.extend(_run(cfg, _detection_trial,
                                [(cfg, "pfa", name, i, rho0, -np.inf, False) for i in range(cfg.n_trials_pfa)]))
    return MetricsReport("pfa", "false-alarm rate vs direct-path SNR (false-alarm table)",
                         summarize_pfa(records, cfg.pfa_target), cfg.to_dict(), records)


def run_pd_experiment(cfg: ExperimentConfig) -> MetricsReport:
    """Detection rate vs first-order SNR with the closed-form curves alongside.

    ``pd_theory_exact`` averages the closed form over trials using the exact
    SNR of each trial's angles; ``pd_theory_isotropic`` plugs in the nominal
    ``rho1``, which upper-bounds it because the projected steering energy
    never exceeds one. The direct-path SNR is ``rho0_db[0]``.
    """
    if cfg.k1 < 1:
        raise ValueError("the detection experiment needs K1 >= 1")
    name = "ideal" if cfg.ideal_glrt else cfg.estimator
    rho0 = cfg.rho0_db[0] if cfg.rho0_db else 10.0
    records = []
    for rho1 in cfg.rho1_db:
        records.extend(_run(cfg, _detection_trial,
                            [(cfg, "pd", name, i, rho0, rho1, True) for i in range(cfg.trials_pd)]))
    return MetricsReport("pd", "detection probability vs first-order SNR (Pd curve with closed-form bound)",
                         summarize_pd(records, cfg), cfg.to_dict(), records)


def _rmse_trial(cfg: ExperimentConfig, index: int, snr_db: float, scenario: str) -> list:
    rng = trial_rng(cfg.seed, index)
    h1 = scenario == "h1"
    scene, _ = draw_scene(cfg, rng, snr_db, snr_db if h1 else -np.inf, with_pairs=h1)
    geom = cfg.geometry
    z = synthesize(geom, scene, rng).z
    c0, c1 = _configs(cfg)
    bw = cfg.beamwidth()
    out = []
    for name in ESTIMATOR_NAMES:
        f0, f1 = estimator_pair(name)
        if h1:
            est = f1(z, geom, c1)
            m = match_paths(scene.direct_angles, scene.pair_angles, est.theta0, est.pair_angles, bw)
        else:
            est = f0(z, geom, c0)
            m = match_paths(scene.direct_angles, np.zeros((0, 2)), est.theta0, np.zeros((0, 2)), bw)
        out.append(TrialRecord("rmse", index, name, snr_db, snr_db if h1 else -np.inf, scenario=scenario,
                               k0_hat=est.k0, k1_hat=getattr(est, "k1", 0),
                               sq_err0=m.direct_sq_error(), n_id0=m.n_direct_identified, n_true0=scene.k0,
                               sq_err1=m.pair_sq_error() if h1 else None, n_id1=m.n_pairs_identified,
                               n_true1=scene.k1))
    return out


def run_rmse_experiment(cfg: ExperimentConfig, snr_db=None) -> MetricsReport:
    """Angle RMSE and success rates of both estimator families vs SNR.

    Two scenarios share the trial streams: ``h0`` (``K0`` direct paths,
    scored with the H0 estimators) and ``h1`` (``K0`` direct paths and ``K1``
    pairs with ``rho0 = rho1``, scored with the H1 estimators). Both families
    see the same snapshots. ``snr_db`` defaults to ``cfg.rho0_db``.
    """
    snrs = _float_tuple(snr_db) if snr_db is not None else cfg.rho0_db
    scenarios = (["h0"] if cfg.k0 > 0 else []) + (["h1"] if cfg.k1 > 0 else [])
    if not scenarios:
        raise ValueError("the scene template has no paths")
    records = []
    for snr in snrs:
        for scenario in scenarios:
            per_trial = _run(cfg, _rmse_trial, [(cfg, i, snr, scenario) for i in range(cfg.trials_rmse)])
            records.extend(r for recs in per_trial for r in recs)
    return MetricsReport("rmse", "angle RMSE and success rate vs SNR (RMSE and success-rate curves)",
                         summarize_rmse(records), cfg.to_dict(), records)


def correlation_profile(geom: ArrayGeometry, reference, scan=None) -> tuple[np.ndarray, np.ndarray]:
    """``|<reference column, a(psi)>|`` over the scan angles ``psi`` (degrees).

    ``reference`` is a direct angle or a ``(dod, doa)`` pair, whose column is
    ``kron(a_T(dod), a_R(doa))``.
    """
    scan = np.linspace(-90.0, 90.0, 1801) if scan is None else np.asarray(scan, dtype=float)
    ref = np.atleast_1d(np.asarray(reference, dtype=float))
    if ref.size == 1:
        dod = doa = float(ref[0])
    elif ref.size == 2:
        dod, doa = float(ref[0]), float(ref[1])
    else:
        raise ValueError("reference must be one angle or a (dod, doa) pair")
    col = virtual_matrix(geom, [dod], [doa])[:, 0]
    atoms = virtual_matrix(geom, scan, scan)
    return scan, np.abs(atoms.conj().T @ col)


def profile_report(geom: ArrayGeometry, reference, scan=None) -> MetricsReport:
    scan, corr = correlation_profile(geom, reference, scan)
    rows = [{"psi_deg": float(p), "correlation": float(c)} for p, c in zip(scan, corr)]
    ref = np.atleast_1d(np.asarray(reference, dtype=float)).tolist()
    return MetricsReport("profile", f"steering correlation with reference {ref} ({geom.name})",
                         rows, {"geometry": geometry_to_dict(geom), "reference": ref})
