"""Search on the grid of cliques by leaving one cell's polygon out.

Removing the marked cell's polygon from tessellation 0 turns that
tessellation's reflection into -I on the marked clique, which acts as the
search oracle.  Runs start from the uniform state, iterate (possibly
perturbed) steps, and record the probability of finding the walker on the
marked clique after each step.
"""
from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .evolve import WalkState, renormalize_if_drifting, step, uniform_state
from .graph import GridSpec, Tessellation, TessellatedGraph, make_grid_of_cliques
from .noise import NoiseSpec, perturbed_step
from .rng import child_seed


def default_step_budget(spec: GridSpec, factor: float = 1.5) -> int:
    """ceil(factor * sqrt(N ln N)) steps with N = n^2 cells."""
    cells = spec.n**2
    return max(1, math.ceil(factor * math.sqrt(cells * math.log(cells))))


@dataclass(frozen=True)
class SearchConfig:
    """One search experiment: grid, marked cell, noise, budget, and run count."""

    spec: GridSpec
    marked: tuple[int, int] = (0, 0)
    noise: NoiseSpec = NoiseSpec()
    max_steps: int | None = None
    runs: int = 1
    master_seed: int = 0

    def __post_init__(self):
        x, y = self.marked
        if not (0 <= x < self.spec.n and 0 <= y < self.spec.n):
            raise ValueError(f"marked cell {self.marked} outside the {self.spec.n}x{self.spec.n} grid")
        object.__setattr__(self, "marked", (int(x), int(y)))
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", default_step_budget(self.spec))
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.runs < 1:
            raise ValueError("need at least one run")
        if self.master_seed < 0:
            raise ValueError("master seed must be non-negative")


@dataclass(frozen=True, eq=False)
class SuccessSeries:
    """Per-run success probabilities, entry t = probability after t steps."""

    probabilities: np.ndarray
    run_seed: int

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probabilities, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("series must be a non-empty 1-d array")
        if not np.all(np.isfinite(probs)):
            raise ValueError("series contains non-finite entries")
        if probs.min() < -1e-9 or probs.max() > 1.0 + 1e-9:
            raise ValueError("series entries are not probabilities")
        probs = np.clip(probs, 0.0, 1.0)
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)


@dataclass(frozen=True)
class RunSummary:
    """Peak statistics of a success series."""

    t_peak: int
    p_peak: float
    running_time: float


def _grid_spec_of(tg: TessellatedGraph) -> GridSpec:
    """Recover the GridSpec of a pristine grid-of-cliques cover, verifying layout."""
    if tg.num_tessellations != 2:
        raise ValueError("expected the two-tessellation grid cover")
    cells = tg.tessellations[0].polygons
    n = math.isqrt(len(cells))
    if n * n != len(cells) or n < 2:
        raise ValueError("tessellation 0 is not an n*n family of cell cliques")
    size = cells[0].size
    if size % 4 != 0:
        raise ValueError("cell cliques must have 4q vertices")
    spec = GridSpec(n, size // 4)
    if spec.num_vertices != tg.num_vertices:
        raise ValueError("vertex count does not match the grid layout")
    flat = np.concatenate([p.vertices for p in cells])
    if not np.array_equal(flat, np.arange(tg.num_vertices)):
        raise ValueError("cell cliques are not laid out in grid order")
    return spec


def partial_cover(tg: TessellatedGraph, marked: tuple[int, int]) -> TessellatedGraph:
    """Cover with the marked cell's polygon removed from tessellation 0.

    The marked clique is then uncovered in tessellation 0, so that
    tessellation's reflection acts on it as -I.
    """
    spec = _grid_spec_of(tg)
    x, y = marked
    if not (0 <= x < spec.n and 0 <= y < spec.n):
        raise ValueError(f"marked cell {marked} outside the {spec.n}x{spec.n} grid")
    j = x * spec.n + y
    polys = tg.tessellations[0].polygons
    reduced = Tessellation(polys[:j] + polys[j + 1 :], covers_all_vertices=False)
    return TessellatedGraph(tg.graph, (reduced,) + tg.tessellations[1:], pristine=False)


def success_probability(state: WalkState, spec: GridSpec, marked: tuple[int, int]) -> float:
    """Probability of finding the walker on the marked cell's clique."""
    if state.num_vertices != spec.num_vertices:
        raise ValueError("state size does not match the grid")
    amps = state.amplitudes[spec.cell_slice(*marked)]
    return float(np.sum(amps.real**2 + amps.imag**2))


def _search_series(partial: TessellatedGraph, cfg: SearchConfig, rng: np.random.Generator | None) -> np.ndarray:
    state = uniform_state(cfg.spec.num_vertices)
    out = np.empty(cfg.max_steps + 1, dtype=np.float64)
    out[0] = success_probability(state, cfg.spec, cfg.marked)
    noisy = not cfg.noise.is_off
    for t in range(1, cfg.max_steps + 1):
        if noisy:
            state = perturbed_step(partial, cfg.noise, rng, state)
        else:
            state = step(partial, state)
        if t % 1000 == 0:
            state = renormalize_if_drifting(state)
        out[t] = success_probability(state, cfg.spec, cfg.marked)
    return out


_WORKER_CTX: dict[str, object] = {}


def _pool_search_run(r: int):
    partial, cfg, seeds = _WORKER_CTX["search"]
    rng = np.random.default_rng(seeds[r])
    return r, _search_series(partial, cfg, rng)


def run_search(cfg: SearchConfig, workers: int = 1) -> list[SuccessSeries]:
    """All runs of a search experiment, in run-index order.

    Run r draws from a child seed derived from (master_seed, r), so results
    are independent of ``workers``; noiseless runs are computed once and
    replicated.
    """
    tg = make_grid_of_cliques(cfg.spec)
    partial = partial_cover(tg, cfg.marked)
    seeds = [child_seed(cfg.master_seed, r) for r in range(cfg.runs)]

    if cfg.noise.is_off:
        series = _search_series(partial, cfg, None)
        return [SuccessSeries(series.copy(), seed) for seed in seeds]

    if workers > 1 and cfg.runs > 1:
        try:
            ctx = multiprocessing.get_context("fork")
        except ValueError:
            ctx = None
        if ctx is not None:
            _WORKER_CTX["search"] = (partial, cfg, seeds)
            try:
                with ProcessPoolExecutor(max_workers=min(workers, cfg.runs), mp_context=ctx) as pool:
                    chunk = max(1, cfg.runs // (4 * workers))
                    pairs = list(pool.map(_pool_search_run, range(cfg.runs), chunksize=chunk))
            finally:
                _WORKER_CTX.pop("search", None)
            out: list[SuccessSeries | None] = [None] * cfg.runs
            for r, series in pairs:
                out[r] = SuccessSeries(series, seeds[r])
            return [s for s in out if s is not None]

    return [
        SuccessSeries(_search_series(partial, cfg, np.random.default_rng(seed)), seed)
        for seed in seeds
    ]


def peak_metrics(mean_series: np.ndarray) -> RunSummary:
    """Peak of a success series and the running-time figure t_peak / sqrt(p_peak).

    Ties pick the earliest step; an all-zero series has no defined peak.
    """
    arr = np.asarray(mean_series, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("mean series must be a non-empty 1-d array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("mean series contains non-finite entries")
    t_peak = int(np.argmax(arr))
    p_peak = float(arr[t_peak])
    if p_peak <= 0.0:
        raise ValueError("success probability never becomes positive; peak undefined")
    return RunSummary(t_peak=t_peak, p_peak=p_peak, running_time=t_peak / math.sqrt(p_peak))
