"""Deterministic Monte-Carlo ensembles of stochastic c-number trajectories.

Every trajectory owns an RNG stream derived from (master_seed, index), so
results are bit-identical for any worker count, shard size, or
checkpoint/resume split.  Workers only simulate; all statistical
reduction happens in the parent process in trajectory-index order with
compensated (Kahan) summation.

Initial conditions are vacuum draws: each quadrature starts from an
independent Gaussian of variance 1/2 (the symmetric-ordering width of
the ground state), followed by the per-step Wiener increments.
"""

from __future__ import annotations

import hashlib
import math
import os
import pickle
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .dynamics import DEFAULT_DTAU, DriveSpec, ModelTier, NoiseSpec
from .gridio import read_table, write_table
from .model import CouplingSet
from .params import PhysicalParams
from .quantum import (CovarianceState, NonPhysicalCovariance, duan_sum,
                      logarithmic_negativity)

SQRT2 = math.sqrt(2.0)
SQRT_HALF = math.sqrt(0.5)
_CHUNK_STEPS = 4096
_CKPT_MAGIC = b"OMENS1\n"
#: fraction of aborted trajectories above which the whole run fails
ABORT_FRACTION = 1e-3

_LABELS = ("x", "y", "q1", "p1", "q2", "p2")


class EnsembleAbortError(RuntimeError):
    """More than `ABORT_FRACTION` of the trajectories left the finite range."""


class CheckpointError(RuntimeError):
    """Checkpoint file is corrupt or belongs to a different run."""


@dataclass(frozen=True)
class HistogramSpec:
    """Streaming 2D histogram of linear mechanical coordinates.

    `transform` maps (q1, p1, q2, p2) to the two plot axes; the grid is
    fixed to [-extent, extent) with bin width `h` so counts can be
    accumulated without holding samples.
    """

    extent: float
    h: float = 0.05
    time_index: int = -1
    transform: tuple = ((1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0))

    def __post_init__(self):
        if self.extent <= 0.0 or self.h <= 0.0:
            raise ValueError("extent and h must be positive")
        if np.asarray(self.transform, dtype=float).shape != (2, 4):
            raise ValueError("transform must be 2x4")

    @property
    def nbins(self) -> int:
        return max(1, int(math.ceil(2.0 * self.extent / self.h)))

    @property
    def centers(self) -> np.ndarray:
        edges = -self.extent + self.h * np.arange(self.nbins + 1)
        return 0.5 * (edges[:-1] + edges[1:])


@dataclass
class EnsembleSpec:
    """Complete, hashable description of a Monte-Carlo run."""

    n_realizations: int
    master_seed: int
    tier: ModelTier
    params: PhysicalParams
    coupling: CouplingSet
    sample_times: np.ndarray
    drive: DriveSpec | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    dt: float | None = None
    shard_size: int = 256
    histogram: HistogramSpec | None = None

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("need at least one realization")
        if self.shard_size < 1:
            raise ValueError("shard_size must be >= 1")
        self.sample_times = np.asarray(self.sample_times, dtype=float)
        if self.sample_times.ndim != 1 or self.sample_times.size == 0:
            raise ValueError("sample_times must be a non-empty 1D array")
        if np.any(np.diff(self.sample_times) <= 0.0):
            raise ValueError("sample_times must be strictly increasing")
        if self.sample_times[0] < 0.0:
            raise ValueError("sample_times must be non-negative")

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else \
            DEFAULT_DTAU / self.params.omega_bar

    def sample_steps(self) -> np.ndarray:
        """Sample times as integer step counts on the dt grid."""
        steps = np.rint(self.sample_times / self.step).astype(np.int64)
        if np.any(np.diff(steps) <= 0):
            raise ValueError("sample_times collide on the integration grid")
        return steps

    def digest(self) -> str:
        doc = dict(
            n=self.n_realizations, seed=self.master_seed, tier=int(self.tier),
            params=asdict(self.params), coupling=asdict(self.coupling),
            drive=None if self.drive is None else asdict(self.drive),
            noise=asdict(self.noise), dt=self.step,
            shard=self.shard_size,
            times=[t.hex() for t in self.sample_times.tolist()],
            hist=None if self.histogram is None else asdict(self.histogram),
        )
        blob = repr(sorted(doc.items())).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def shards(self) -> list[tuple[int, int]]:
        n, s = self.n_realizations, self.shard_size
        return [(a, min(a + s, n)) for a in range(0, n, s)]


@dataclass
class EnsembleResult:
    """Aggregated moments and entanglement measures per sample time."""

    t: np.ndarray
    states: list          # CovarianceState per sample time
    negativity: np.ndarray
    duan: np.ndarray
    n_realized: int
    aborted: list
    master_seed: int
    spec_digest: str
    histogram: tuple | None = None   # (W, centers_x, centers_y)

    def __eq__(self, other):
        if not isinstance(other, EnsembleResult):
            return NotImplemented
        same = (np.array_equal(self.t, other.t)
                and np.array_equal(self.negativity, other.negativity,
                                   equal_nan=True)
                and np.array_equal(self.duan, other.duan)
                and self.n_realized == other.n_realized
                and self.aborted == other.aborted
                and self.spec_digest == other.spec_digest)
        if not same:
            return False
        for a, b in zip(self.states, other.states):
            if not (np.array_equal(a.mean, b.mean)
                    and np.array_equal(a.cov, b.cov)):
                return False
        if (self.histogram is None) != (other.histogram is None):
            return False
        if self.histogram is not None:
            return np.array_equal(self.histogram[0], other.histogram[0])
        return True


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-trajectory stream; never reused across indices."""
    return np.random.default_rng(np.random.SeedSequence((master_seed, index)))


def _simulate_shard(spec: EnsembleSpec, start: int, stop: int):
    """Integrate trajectories [start, stop); return (samples, finite).

    samples : (T, n, 6) quadratures (x, y, q1, p1, q2, p2) at the sample
    steps; finite : (n,) bool, False where the trajectory left the finite
    range anywhere on the schedule.
    """
    n = stop - start
    steps = spec.sample_steps()
    dt = spec.step
    wb = spec.params.omega_bar
    dtau = dt * wb
    c = _kernels.pack_constants(spec.params, spec.coupling, spec.drive,
                                spec.noise)
    C = np.tile(c, (n, 1))
    gens = [trajectory_rng(spec.master_seed, start + i) for i in range(n)]

    y = np.empty((n, 6))
    for i, g in enumerate(gens):
        z = g.standard_normal(6)
        y[i, 0] = SQRT_HALF * z[0]   # q1
        y[i, 1] = SQRT_HALF * z[1]   # p1
        y[i, 2] = SQRT_HALF * z[2]   # q2
        y[i, 3] = SQRT_HALF * z[3]   # p2
        y[i, 4] = 0.5 * z[4]         # Re a, Var 1/4
        y[i, 5] = 0.5 * z[5]

    stochastic = spec.noise.enabled
    samples = np.empty((steps.size, n, 6))
    pos = 0
    for j, target in enumerate(steps):
        while pos < target:
            todo = min(_CHUNK_STEPS, target - pos)
            if stochastic:
                Z = np.empty((todo, n, 4))
                for i, g in enumerate(gens):
                    Z[:, i, :] = g.standard_normal((todo, 4))
            else:
                Z = np.zeros((1, n, 4))
            _kernels.run_chunk(int(spec.tier), y, pos * dtau, dtau, todo,
                               C, Z, stochastic)
            pos += todo
        samples[j, :, 0] = SQRT2 * y[:, 4]
        samples[j, :, 1] = SQRT2 * y[:, 5]
        samples[j, :, 2:6] = y[:, 0:4]
    finite = np.isfinite(samples).all(axis=(0, 2))
    return samples, finite


def _kadd(total, comp, value):
    """In-place compensated (Kahan) accumulation."""
    yv = value - comp
    t = total + yv
    comp[...] = (t - total) - yv
    total[...] = t


class _Accumulator:
    """Index-ordered streaming moments (+ optional histogram counts)."""

    def __init__(self, spec: EnsembleSpec):
        T = spec.sample_steps().size
        self.s1 = np.zeros((T, 6))
        self.c1 = np.zeros((T, 6))
        self.s2 = np.zeros((T, 6, 6))
        self.c2 = np.zeros((T, 6, 6))
        self.count = 0
        self.aborted: list[int] = []
        self.hist = None
        if spec.histogram is not None:
            nb = spec.histogram.nbins
            self.hist = np.zeros((nb, nb), dtype=np.int64)

    def add_shard(self, spec, start, samples, finite):
        hs = spec.histogram
        for i in range(samples.shape[1]):
            if not finite[i]:
                self.aborted.append(start + i)
                continue
            u = samples[:, i, :]
            _kadd(self.s1, self.c1, u)
            _kadd(self.s2, self.c2, u[:, :, None] * u[:, None, :])
            self.count += 1
            if hs is not None:
                v = np.asarray(hs.transform) @ u[hs.time_index, 2:6]
                ix = int(math.floor((v[0] + hs.extent) / hs.h))
                iy = int(math.floor((v[1] + hs.extent) / hs.h))
                if 0 <= ix < hs.nbins and 0 <= iy < hs.nbins:
                    self.hist[ix, iy] += 1

    def state(self) -> dict:
        return dict(s1=self.s1, c1=self.c1, s2=self.s2, c2=self.c2,
                    count=self.count, aborted=self.aborted, hist=self.hist)

    def restore(self, d: dict):
        self.s1, self.c1 = d["s1"], d["c1"]
        self.s2, self.c2 = d["s2"], d["c2"]
        self.count = d["count"]
        self.aborted = d["aborted"]
        self.hist = d["hist"]


def _write_checkpoint(path, spec_digest, next_shard, acc: _Accumulator):
    payload = pickle.dumps(dict(spec_digest=spec_digest,
                                next_shard=next_shard, **acc.state()))
    body = hashlib.sha256(payload).hexdigest().encode() + b"\n" + payload
    dirname = os.path.dirname(os.path.abspath(path))
    os.makedirs(dirname, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=dirname, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_CKPT_MAGIC + body)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _read_checkpoint(path, spec_digest) -> dict:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_CKPT_MAGIC):
        raise CheckpointError("unrecognized checkpoint format")
    rest = blob[len(_CKPT_MAGIC):]
    claimed, _, payload = rest.partition(b"\n")
    if hashlib.sha256(payload).hexdigest().encode() != claimed:
        raise CheckpointError("checkpoint content digest mismatch")
    state = pickle.loads(payload)
    if state["spec_digest"] != spec_digest:
        raise CheckpointError("checkpoint belongs to a different run spec")
    return state


def _finalize(spec: EnsembleSpec, acc: _Accumulator) -> EnsembleResult:
    n_total = spec.n_realizations
    if len(acc.aborted) > ABORT_FRACTION * n_total:
        raise EnsembleAbortError(
            f"{len(acc.aborted)} of {n_total} trajectories aborted "
            f"(policy threshold {ABORT_FRACTION:.1%})")
    n = acc.count
    if n < 2:
        raise EnsembleAbortError("fewer than 2 surviving trajectories")
    states, en, du = [], [], []
    for k, t in enumerate(spec.sample_times):
        mean = acc.s1[k] / n
        cov = (acc.s2[k] - n * np.outer(mean, mean)) / (n - 1)
        cov = 0.5 * (cov + cov.T)
        st = CovarianceState(mean=mean, cov=cov, t=float(t), n_samples=n)
        states.append(st)
        try:
            en.append(logarithmic_negativity(cov))
        except NonPhysicalCovariance:
            en.append(math.nan)
        du.append(duan_sum(cov))
    hist = None
    if acc.hist is not None:
        hs = spec.histogram
        W = acc.hist / (n * hs.h * hs.h)
        hist = (W, hs.centers, hs.centers)
    return EnsembleResult(t=spec.sample_times.copy(), states=states,
                          negativity=np.array(en), duan=np.array(du),
                          n_realized=n, aborted=sorted(acc.aborted),
                          master_seed=spec.master_seed,
                          spec_digest=spec.digest(), histogram=hist)


def run_ensemble(spec: EnsembleSpec, worker_count: int = 1,
                 checkpoint_path=None,
                 stop_after_shards: int | None = None):
    """Simulate the full ensemble and aggregate moments.

    Trajectories are grouped into fixed shards; workers (processes) only
    integrate, and the parent reduces shard outputs in trajectory-index
    order, so the result is bit-identical for every `worker_count`.

    With `checkpoint_path`, progress is saved atomically after each shard
    and an existing valid checkpoint is resumed.  `stop_after_shards`
    ends the run early after that many additional shards (returning None);
    calling again with the same checkpoint continues where it left off.
    """
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    sd = spec.digest()
    acc = _Accumulator(spec)
    first = 0
    if checkpoint_path is not None and os.path.exists(checkpoint_path):
        state = _read_checkpoint(checkpoint_path, sd)
        first = state.pop("next_shard")
        state.pop("spec_digest")
        acc.restore(state)

    shards = spec.shards()
    todo = shards[first:]
    if stop_after_shards is not None:
        todo = todo[:stop_after_shards]

    def consume(idx, start, samples, finite):
        acc.add_shard(spec, start, samples, finite)
        if checkpoint_path is not None:
            _write_checkpoint(checkpoint_path, sd, idx + 1, acc)

    if worker_count == 1 or len(todo) <= 1:
        for off, (start, stop) in enumerate(todo):
            samples, finite = _simulate_shard(spec, start, stop)
            consume(first + off, start, samples, finite)
    else:
        with ProcessPoolExecutor(max_workers=worker_count) as pool:
            futs = [pool.submit(_simulate_shard, spec, a, b)
                    for a, b in todo]
            for off, fut in enumerate(futs):
                samples, finite = fut.result()
                consume(first + off, todo[off][0], samples, finite)

    if first + len(todo) < len(shards):
        return None
    return _finalize(spec, acc)


def write_result(path, result: EnsembleResult, extra_header=None) -> None:
    """Self-describing CSV: per-time means, covariances, E_n, Duan sum."""
    header = dict(spec_digest=result.spec_digest, seed=result.master_seed,
                  N=result.n_realized, aborted=len(result.aborted),
                  version="optomem-0.1.0")
    if extra_header:
        header.update(extra_header)
    cols = ["t", "E_n", "duan"]
    cols += [f"mean_{a}" for a in _LABELS]
    pairs = [(i, j) for i in range(6) for j in range(i, 6)]
    cols += [f"cov_{_LABELS[i]}_{_LABELS[j]}" for i, j in pairs]
    rows = np.empty((result.t.size, len(cols)))
    for k in range(result.t.size):
        st = result.states[k]
        rows[k, 0] = result.t[k]
        rows[k, 1] = result.negativity[k]
        rows[k, 2] = result.duan[k]
        rows[k, 3:9] = st.mean
        rows[k, 9:] = [st.cov[i, j] for i, j in pairs]
    write_table(path, header, cols, rows)


def read_result(path) -> EnsembleResult:
    """Rebuild an EnsembleResult (without histogram) from write_result."""
    header, cols, data = read_table(path)
    pairs = [(i, j) for i in range(6) for j in range(i, 6)]
    n = int(header["N"])
    states = []
    for row in data:
        cov = np.zeros((6, 6))
        for (i, j), v in zip(pairs, row[9:]):
            cov[i, j] = cov[j, i] = v
        states.append(CovarianceState(mean=row[3:9], cov=cov,
                                      t=row[0], n_samples=n))
    return EnsembleResult(t=data[:, 0], states=states,
                          negativity=data[:, 1], duan=data[:, 2],
                          n_realized=n, aborted=[],
                          master_seed=int(header["seed"]),
                          spec_digest=header["spec_digest"])
