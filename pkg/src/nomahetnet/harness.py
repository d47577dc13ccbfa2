"""Monte Carlo campaigns: per-trial pipeline, aggregation, CDFs and file output."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, NetworkConfig
from .noma import TrialReport, energy_efficiency
from .ofdma import ofdma_equal_power, ofdma_rates, ofdma_schedule
from .power import OutageInfeasibleError, ee_power_bisection, equal_power, ftpa, outage_min_power
from .scheduling import schedule
from .topology import estimate_csi, generate_topology, sample_channels

SCHEMES = ("noma-eq", "noma-ftpa", "noma-ftpa-bisect", "ofdma-eq")

SWEEP_COLUMNS = [
    "scheme",
    "sweep_field",
    "sweep_value",
    "trials",
    "infeasible_trials",
    "mean_sum_rate_bps",
    "mean_tx_power_w",
    "mean_ee_bits_per_joule",
    "stderr_ee",
    "mean_outage_frac",
]
CDF_COLUMNS = ["scheme", "rate_bps", "cdf"]


def _child(seed: np.random.SeedSequence, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (i,)))


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def draw_channels(cfg: NetworkConfig, trial_seed):
    """Topology, true channels and the CSI estimate for one trial.

    Placement, fading and estimation error use separate streams, so the same
    seed gives the same network and fading for every error variance.
    """
    ss = _as_seedseq(trial_seed)
    topo = generate_topology(cfg, _child(ss, 0))
    chan = sample_channels(cfg, topo, _child(ss, 1))
    chan = estimate_csi(chan, cfg.csi_error_var, _child(ss, 2))
    return topo, chan


def run_trial(cfg: NetworkConfig, scheme: str, trial_seed) -> TrialReport:
    return run_trial_schemes(cfg, [scheme], trial_seed)[scheme]


def run_trial_schemes(cfg: NetworkConfig, schemes: Sequence[str], trial_seed) -> dict[str, TrialReport]:
    """Run several schemes on one channel draw.

    The NOMA schemes share the schedule and differ only in their power
    policy. Infeasible outage floors yield a report flagged ``infeasible``.
    """
    for scheme in schemes:
        if scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    _, chan = draw_channels(cfg, trial_seed)
    out: dict[str, TrialReport] = {}
    assign = None
    for scheme in schemes:
        if scheme == "ofdma-eq":
            oassign = ofdma_schedule(cfg, chan)
            report = ofdma_rates(cfg, oassign, ofdma_equal_power(cfg, oassign), chan)
            report.assignment = oassign
        else:
            if assign is None:
                assign = schedule(cfg, chan)
            try:
                power = _noma_power(cfg, scheme, assign, chan)
            except OutageInfeasibleError as exc:
                out[scheme] = infeasible_report(cfg, str(exc))
                continue
            report = energy_efficiency(cfg, assign, power, chan, use_estimated=False)
            report.assignment = assign
        _spot_check(report)
        out[scheme] = report
    return out


def _noma_power(cfg, scheme, assign, chan):
    if scheme == "noma-eq":
        return equal_power(cfg, assign)
    if scheme == "noma-ftpa":
        return ftpa(cfg, assign, chan)
    floors = outage_min_power(cfg, assign, chan, equal_power(cfg, assign))
    return ee_power_bisection(cfg, assign, chan, floors, base=ftpa(cfg, assign, chan))


def infeasible_report(cfg: NetworkConfig, reason: str) -> TrialReport:
    n = cfg.n_users
    return TrialReport(
        rate_bps=np.zeros(n),
        sum_rate_bps=0.0,
        tx_power_w=0.0,
        circuit_power_w=cfg.circuit_power_w,
        ee_bits_per_joule=0.0,
        outage_flags=np.zeros(n, dtype=bool),
        scheduled=np.zeros(n, dtype=bool),
        infeasible=True,
        error=reason,
    )


def _spot_check(report: TrialReport) -> None:
    expected = report.sum_rate_bps / (report.tx_power_w + report.circuit_power_w)
    if not math.isclose(report.ee_bits_per_joule, expected, rel_tol=1e-12, abs_tol=0.0):
        raise AssertionError("EE identity violated")
    if np.any(report.rate_bps < 0):
        raise AssertionError("negative rate")


@dataclass
class CampaignSpec:
    base: NetworkConfig
    schemes: list[str] = field(default_factory=lambda: ["noma-eq", "ofdma-eq"])
    trials: int = 100
    seed: int = 0
    sweep_field: str | None = None
    sweep_values: list = field(default_factory=list)
    # When set, n_mues follows the swept n_small_cells as round(ratio * K).
    mues_per_small_cell: float | None = None
    # Common random numbers: the same trial seeds for every scheme and sweep point.
    paired: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.schemes:
            raise ConfigError("scheme list is empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; expected one of {SCHEMES}")
        if self.sweep_field is not None and not self.sweep_values:
            raise ConfigError("sweep needs at least one value")
        self.configs()  # every sweep point must be a valid config

    def points(self) -> list:
        return list(self.sweep_values) if self.sweep_field else [None]

    def config_at(self, value) -> NetworkConfig:
        changes = {}
        if self.sweep_field is not None:
            if self.sweep_field not in _SWEEPABLE:
                raise ConfigError(f"cannot sweep {self.sweep_field!r}")
            try:
                changes[self.sweep_field] = _SWEEPABLE[self.sweep_field](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value {value!r} for {self.sweep_field}") from exc
        cfg = self.base.replace(**changes)
        if self.mues_per_small_cell is not None:
            cfg = cfg.replace(n_mues=int(round(self.mues_per_small_cell * cfg.n_small_cells)))
        return cfg

    def configs(self) -> list[NetworkConfig]:
        return [self.config_at(v) for v in self.points()]


_SWEEPABLE = {
    f.name: (int if f.type in ("int", int) else float)
    for f in dataclasses.fields(NetworkConfig)
    if f.type in ("int", "float", int, float) and f.name != "seed"
}


@dataclass
class ResultRow:
    scheme: str
    sweep_field: str
    sweep_value: object
    trials: int
    infeasible_trials: int
    mean_sum_rate_bps: float
    mean_tx_power_w: float
    mean_ee_bits_per_joule: float
    stderr_ee: float
    mean_outage_frac: float

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in SWEEP_COLUMNS}


@dataclass
class CampaignResult:
    rows: list[ResultRow]
    # reports[(sweep index, scheme)] -> per-trial reports in trial order
    reports: dict = field(default_factory=dict)


def trial_seed(master: int, sweep_index: int, scheme_index: int, trial_index: int, paired: bool = False):
    """Counter-based per-trial seed; independent of execution order."""
    key = (trial_index,) if paired else (sweep_index, scheme_index, trial_index)
    return np.random.SeedSequence(master, spawn_key=key)


def _task(args):
    cfg, schemes, seed = args
    return run_trial_schemes(cfg, schemes, seed)


def _tasks(spec: CampaignSpec):
    """(sweep index, schemes, trial index, payload) in canonical order."""
    for i, cfg in enumerate(spec.configs()):
        if spec.paired:
            for t in range(spec.trials):
                yield i, tuple(spec.schemes), t, (cfg, list(spec.schemes), trial_seed(spec.seed, i, 0, t, True))
        else:
            for j, scheme in enumerate(spec.schemes):
                for t in range(spec.trials):
                    yield i, (scheme,), t, (cfg, [scheme], trial_seed(spec.seed, i, j, t))


def aggregate(reports: Sequence[TrialReport]) -> dict:
    """Means over feasible trials, folded in the given (trial) order."""
    ok = [r for r in reports if not r.infeasible]
    n = len(ok)
    if n == 0:
        nan = float("nan")
        return dict(infeasible_trials=len(reports), mean_sum_rate_bps=nan, mean_tx_power_w=nan,
                    mean_ee_bits_per_joule=nan, stderr_ee=nan, mean_outage_frac=nan)
    ee = np.array([r.ee_bits_per_joule for r in ok])
    return dict(
        infeasible_trials=len(reports) - n,
        mean_sum_rate_bps=float(np.mean([r.sum_rate_bps for r in ok])),
        mean_tx_power_w=float(np.mean([r.tx_power_w for r in ok])),
        mean_ee_bits_per_joule=float(ee.mean()),
        stderr_ee=float(ee.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        mean_outage_frac=float(np.mean([r.outage_frac for r in ok])),
    )


def run_campaign(spec: CampaignSpec, workers: int = 1, keep_reports: bool = False) -> CampaignResult:
    """Run every (sweep value, scheme) cell and aggregate it.

    Rows come out sweep-major, schemes in spec order. Results are identical
    for any ``workers`` because seeds depend only on task indices and the
    reduction runs in trial order.
    """
    tasks = list(_tasks(spec))
    payloads = [t[3] for t in tasks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_task, payloads, chunksize=max(1, len(payloads) // (8 * workers))))
    else:
        outputs = [_task(p) for p in payloads]

    collected: dict[tuple[int, str], dict[int, TrialReport]] = {}
    for (i, schemes, t, _), out in zip(tasks, outputs):
        for s in schemes:
            collected.setdefault((i, s), {})[t] = out[s]

    rows = []
    reports = {}
    for i, value in enumerate(spec.points()):
        for s in spec.schemes:
            ordered = [collected[(i, s)][t] for t in range(spec.trials)]
            if keep_reports:
                reports[(i, s)] = ordered
            rows.append(
                ResultRow(
                    scheme=s,
                    sweep_field=spec.sweep_field or "",
                    sweep_value=value if value is not None else "",
                    trials=spec.trials,
                    **aggregate(ordered),
                )
            )
    return CampaignResult(rows, reports)


def empirical_cdf(samples, grid) -> np.ndarray:
    """Right-continuous empirical CDF of ``samples`` at each grid point."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("empirical_cdf needs at least one sample")
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    return np.searchsorted(x, grid, side="right") / x.size


def rate_grid(samples_by_scheme: dict, points: int) -> np.ndarray:
    """Evenly spaced rates from 0 to the largest observed rate."""
    top = max(float(np.max(v)) for v in samples_by_scheme.values())
    return np.linspace(0.0, top, points)


def user_rate_samples(reports: Sequence[TrialReport]) -> np.ndarray:
    """All per-user rates, unscheduled users included as zeros; infeasible trials dropped."""
    chunks = [r.rate_bps for r in reports if not r.infeasible]
    return np.concatenate(chunks) if chunks else np.zeros(0)


def cdf_rows(samples_by_scheme: dict, points: int = 100) -> list[dict]:
    grid = rate_grid(samples_by_scheme, points)
    rows = []
    for scheme, samples in samples_by_scheme.items():
        for x, f in zip(grid, empirical_cdf(samples, grid)):
            rows.append({"scheme": scheme, "rate_bps": float(x), "cdf": float(f)})
    return rows


class EmitError(OSError):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        return None if not math.isfinite(v) else float(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def emit(rows: Sequence, fmt: str, path: str | Path, columns: Sequence[str] = SWEEP_COLUMNS) -> Path:
    """Write rows (dicts or ResultRow) as CSV or JSON, UTF-8 with Unix newlines."""
    path = Path(path)
    dict_rows = [r.as_dict() if isinstance(r, ResultRow) else r for r in rows]
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if fmt == "csv":
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(columns)
                for r in dict_rows:
                    writer.writerow([_fmt(r[c]) for c in columns])
            elif fmt == "json":
                json.dump([{c: _jsonable(r[c]) for c in columns} for r in dict_rows], fh, indent=2)
                fh.write("\n")
            else:
                raise ConfigError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise EmitError(f"{path}: {exc.strerror or exc}") from exc
    return path
