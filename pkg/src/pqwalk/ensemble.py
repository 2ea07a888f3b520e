"""Configuration-averaged runs.

Trajectory ``i`` draws from ``RngStream.child(master_seed, i)``. Trajectories
are grouped into fixed blocks of ``BLOCK`` consecutive indices; each block is
summed in index order and block sums are folded in block order. The grouping
does not depend on the worker count, so output is bit-identical for any
number of threads.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from ._accel import BACKEND
from .errors import ContractError, NumericalContractError, WalkError
from .lattice import SQRT_HALF, CoinOperator
from .observables import DensityMode, DistributionSnapshot, EntropyPoint, MomentPoint, entropy_arrays
from .policy import RngStream, StepPolicy, sequence_from_stream

BLOCK = 8
NORM_TOL = 1e-10

# columns of the accumulated per-record sums
COLUMNS = ("m1", "m2", "norm", "A", "B_paper", "B_herm_re", "B_herm_im",
           "S_paper", "S_hermitian")


def default_snapshot_times(T: int) -> tuple:
    return tuple(sorted({max(1, T * k // 8) for k in (1, 2, 4, 6, 8)}))


@dataclass(frozen=True)
class RunConfig:
    policy: StepPolicy
    T: int
    N: int = 1
    master_seed: int = 0
    snapshot_times: tuple | None = None
    coin: CoinOperator = field(default_factory=CoinOperator.hadamard)
    density_mode: DensityMode = DensityMode.STANDARD_HERMITIAN
    record_every: int = 1
    # "mean_rho": entropy of the averaged coin matrix; "mean_entropy": average of entropies
    entropy_average: str = "mean_rho"
    init: tuple = (SQRT_HALF, SQRT_HALF)

    def __post_init__(self):
        if self.T < 1 or self.N < 1:
            raise ContractError(f"need T >= 1 and N >= 1, got T={self.T}, N={self.N}")
        if self.record_every < 1:
            raise ContractError("record_every must be >= 1")
        if self.entropy_average not in ("mean_rho", "mean_entropy"):
            raise ContractError(f"unknown entropy_average {self.entropy_average!r}")
        if not 0 <= self.master_seed < 2**64:
            raise ContractError("master_seed must be a 64-bit unsigned integer")
        snaps = (default_snapshot_times(self.T) if self.snapshot_times is None
                 else tuple(sorted({int(t) for t in self.snapshot_times})))
        if snaps and (snaps[0] < 1 or snaps[-1] > self.T):
            raise ContractError(f"snapshot times must lie in [1, {self.T}]")
        norm = abs(complex(self.init[0])) ** 2 + abs(complex(self.init[1])) ** 2
        if abs(norm - 1) > 1e-12:
            raise ContractError(f"initial spinor not normalized ({norm!r})")
        object.__setattr__(self, "snapshot_times", snaps)
        object.__setattr__(self, "density_mode", DensityMode.parse(self.density_mode))

    @property
    def x_max(self) -> int:
        return 2 * self.T

    @property
    def record_times(self) -> np.ndarray:
        return np.arange(0, self.T + 1, self.record_every)

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.to_dict(),
            "T": self.T,
            "N": self.N,
            "master_seed": self.master_seed,
            "snapshot_times": list(self.snapshot_times),
            "coin": self.coin.tolist(),
            "density_mode": self.density_mode.value,
            "record_every": self.record_every,
            "entropy_average": self.entropy_average,
            "init": [[complex(z).real, complex(z).imag] for z in self.init],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        kw = dict(d)
        kw["policy"] = StepPolicy.from_dict(d["policy"])
        if "coin" in d:
            kw["coin"] = CoinOperator.fromlist(d["coin"])
        if "init" in d:
            kw["init"] = tuple(complex(re, im) for re, im in d["init"])
        if "snapshot_times" in d:
            kw["snapshot_times"] = tuple(d["snapshot_times"])
        return cls(**kw)


@dataclass
class TrajectoryRecord:
    index: int
    lengths: np.ndarray
    times: np.ndarray
    series: np.ndarray  # (n_records, len(COLUMNS))
    snapshots: np.ndarray  # (n_snapshots, 2 * x_max + 1)

    def column(self, name: str) -> np.ndarray:
        return self.series[:, COLUMNS.index(name)]


@dataclass
class Accumulator:
    """Running sums over trajectories; ``count == 0`` is the merge identity."""

    count: int = 0
    sums: np.ndarray | None = None
    snap_sums: np.ndarray | None = None

    @classmethod
    def of(cls, rec: TrajectoryRecord) -> "Accumulator":
        return cls(1, rec.series.copy(), rec.snapshots.copy())

    def add(self, rec: TrajectoryRecord) -> "Accumulator":
        return merge(self, Accumulator.of(rec))

    def mean(self) -> tuple[np.ndarray, np.ndarray]:
        if self.count == 0:
            raise ContractError("empty accumulator has no mean")
        return self.sums / self.count, self.snap_sums / self.count


def merge(acc1: Accumulator, acc2: Accumulator) -> Accumulator:
    """Combine two accumulators (sums add, counts add). Order is fixed: acc1 + acc2."""
    if acc1.count == 0:
        return dataclasses.replace(acc2)
    if acc2.count == 0:
        return dataclasses.replace(acc1)
    if acc1.sums.shape != acc2.sums.shape or acc1.snap_sums.shape != acc2.snap_sums.shape:
        raise ContractError(
            f"accumulator shapes differ: {acc1.sums.shape}/{acc1.snap_sums.shape} "
            f"vs {acc2.sums.shape}/{acc2.snap_sums.shape}")
    return Accumulator(acc1.count + acc2.count, acc1.sums + acc2.sums,
                       acc1.snap_sums + acc2.snap_sums)


def _state_arrays(config: RunConfig):
    init_a, init_b = (complex(z) for z in config.init)
    real = config.coin.is_real and init_a.imag == 0 and init_b.imag == 0
    dtype = np.float64 if real else np.complex128
    n = 2 * config.x_max + 1
    a = np.zeros(n, dtype=dtype)
    b = np.zeros(n, dtype=dtype)
    a[config.x_max] = init_a.real if real else init_a
    b[config.x_max] = init_b.real if real else init_b
    coin = config.coin.matrix.real.copy() if real else config.coin.matrix.copy()
    return a, b, coin


def run_trajectory(config: RunConfig, index: int) -> TrajectoryRecord:
    """Evolve walker ``index`` of the ensemble and record its observables."""
    if not 0 <= index < config.N:
        raise ContractError(f"trajectory index {index} outside [0, {config.N})")
    rng = RngStream.child(config.master_seed, index)
    lengths = sequence_from_stream(config.policy, config.T, rng)
    a, b, coin = _state_arrays(config)
    times = config.record_times
    raw = np.zeros((times.size, kernels.N_SERIES))
    snaps = np.zeros((len(config.snapshot_times), a.size))
    kernels.evolve(a, b, config.x_max, lengths, coin, config.record_every,
                   np.asarray(config.snapshot_times, dtype=np.int64), raw, snaps)
    drift = np.abs(raw[:, 2] - 1.0)
    if drift.max() > NORM_TOL:
        t_bad = int(times[np.argmax(drift)])
        raise NumericalContractError(
            f"trajectory {index}: total probability off by {drift.max():.3e} at t={t_bad}")
    A = raw[:, 3]
    C = raw[:, 2] - A
    _, _, s_paper = entropy_arrays(A, raw[:, 4], C)
    _, _, s_herm = entropy_arrays(A, np.hypot(raw[:, 5], raw[:, 6]), C)
    series = np.column_stack([raw, s_paper, s_herm])
    return TrajectoryRecord(index, lengths, times, series, snaps)


@dataclass
class EnsembleResult:
    config: RunConfig
    times: np.ndarray
    mean_x: np.ndarray
    mean_x2: np.ndarray
    S_E: np.ndarray
    snapshots: dict  # t -> DistributionSnapshot
    count: int
    density: dict | None = None  # extra per-record arrays, absent when read from disk
    wall_time: float = 0.0

    def moment_points(self) -> list[MomentPoint]:
        return [MomentPoint(int(t), float(m1), float(m2))
                for t, m1, m2 in zip(self.times, self.mean_x, self.mean_x2)]

    def entropy_points(self, mode=None, average=None) -> list[EntropyPoint]:
        """Entropy series for a density mode and averaging order (config defaults)."""
        if self.density is None:
            raise ContractError("density components are not available for this result")
        mode = DensityMode.parse(mode or self.config.density_mode)
        average = average or self.config.entropy_average
        A = self.density["A"]
        C = self.density["norm"] - A
        B = self.density["B_paper" if mode is DensityMode.PAPER_MAGNITUDE else "B_hermitian"]
        v1, v2, S = entropy_arrays(A, B, C)
        if average == "mean_entropy":
            S = self.density["S_" + mode.value]
        return [EntropyPoint(int(t), *map(float, row))
                for t, row in zip(self.times, np.column_stack([A, B, C, v1, v2, S]))]


def _result_from(config: RunConfig, acc: Accumulator, wall: float) -> EnsembleResult:
    mean, snap_mean = acc.mean()
    col = {name: mean[:, k] for k, name in enumerate(COLUMNS)}
    density = {
        "norm": col["norm"],
        "A": col["A"],
        "B_paper": col["B_paper"],
        "B_hermitian": np.hypot(col["B_herm_re"], col["B_herm_im"]),
        "S_paper": col["S_paper"],
        "S_hermitian": col["S_hermitian"],
    }
    result = EnsembleResult(config, config.record_times, col["m1"], col["m2"],
                            np.zeros(0), {}, acc.count, density, wall)
    result.S_E = np.array([e.S_E for e in result.entropy_points()])
    meta = {"policy": config.policy.to_dict(), "seed": "ensemble-mean",
            "master_seed": config.master_seed, "configs": acc.count}
    sites = np.arange(-config.x_max, config.x_max + 1)
    for k, t in enumerate(config.snapshot_times):
        keep = np.abs(sites) <= 2 * t
        result.snapshots[t] = DistributionSnapshot(t, sites[keep], snap_mean[k, keep], dict(meta))
    return result


def _run_block(config: RunConfig, start: int, stop: int) -> Accumulator:
    acc = Accumulator()
    for i in range(start, stop):
        try:
            acc = acc.add(run_trajectory(config, i))
        except WalkError as exc:
            raise type(exc)(f"trajectory {i} failed: {exc}") from exc
    return acc


def default_workers() -> int:
    return os.cpu_count() or 1


def run_ensemble(config: RunConfig, workers: int | None = None) -> EnsembleResult:
    """Average ``config.N`` trajectories; output does not depend on ``workers``."""
    t0 = time.perf_counter()
    bounds = [(s, min(s + BLOCK, config.N)) for s in range(0, config.N, BLOCK)]
    workers = max(1, workers or default_workers())
    if workers == 1 or len(bounds) == 1:
        blocks = [_run_block(config, s, e) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda se: _run_block(config, *se), bounds))
    acc = Accumulator()
    for blk in blocks:
        acc = merge(acc, blk)
    return _result_from(config, acc, time.perf_counter() - t0)


# --- files -----------------------------------------------------------------

MOMENTS_FILE = "moments.csv"
DENSITY_FILE = "density.csv"
MANIFEST_FILE = "manifest.json"


def snapshot_filename(t: int) -> str:
    return f"snap_t{t}.csv"


def _fmt(v) -> str:
    # repr of a Python float is the shortest round-trip decimal, locale-free
    return repr(float(v))


def write_result(result: EnsembleResult, out_dir) -> dict:
    """Write moments/snapshot CSVs and the manifest; returns the manifest dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / MOMENTS_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean_x", "mean_x2", "S_E"])
        for t, m1, m2, s in zip(result.times, result.mean_x, result.mean_x2, result.S_E):
            w.writerow([int(t), _fmt(m1), _fmt(m2), _fmt(s)])
    files = [MOMENTS_FILE]
    if result.density is not None:
        d = result.density
        with open(out / DENSITY_FILE, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "A", "C", "B_paper", "B_hermitian", "S_paper_mean", "S_hermitian_mean"])
            for k, t in enumerate(result.times):
                w.writerow([int(t), _fmt(d["A"][k]), _fmt(d["norm"][k] - d["A"][k]),
                            _fmt(d["B_paper"][k]), _fmt(d["B_hermitian"][k]),
                            _fmt(d["S_paper"][k]), _fmt(d["S_hermitian"][k])])
        files.append(DENSITY_FILE)
    for t, snap in result.snapshots.items():
        name = snapshot_filename(t)
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "P"])
            for x, p in zip(snap.xs, snap.probs):
                w.writerow([int(x), _fmt(p)])
        files.append(name)
    manifest = {
        "config": result.config.to_dict(),
        "configs_averaged": result.count,
        "version": __version__,
        "backend": BACKEND,
        "wall_time_s": result.wall_time,
        "files": files,
    }
    with open(out / MANIFEST_FILE, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def read_moments(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].astype(np.int64), data[:, 1], data[:, 2], data[:, 3]


def read_snapshot(path, t: int, meta: dict | None = None) -> DistributionSnapshot:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return DistributionSnapshot(t, data[:, 0].astype(np.int64), data[:, 1], dict(meta or {}))


def read_result(in_dir) -> EnsembleResult:
    """Load a directory written by :func:`write_result`."""
    src = Path(in_dir)
    with open(src / MANIFEST_FILE) as fh:
        manifest = json.load(fh)
    config = RunConfig.from_dict(manifest["config"])
    times, m1, m2, s = read_moments(src / MOMENTS_FILE)
    meta = {"policy": config.policy.to_dict(), "seed": "ensemble-mean",
            "master_seed": config.master_seed, "configs": manifest.get("configs_averaged")}
    snaps = {}
    for t in config.snapshot_times:
        path = src / snapshot_filename(t)
        if path.exists():
            snaps[t] = read_snapshot(path, t, meta)
    return EnsembleResult(config, times, m1, m2, s, snaps, manifest.get("configs_averaged", 0),
                          None, manifest.get("wall_time_s", 0.0))
