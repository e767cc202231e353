"""Dynamic pollution field: advection, anisotropic diffusion, decay and point sources.

The linear PDE

    du/dt = -v . grad u + div(D grad u) - zeta u + S(x)

is advanced on a periodic N x N grid over [0, 1]^2. Transport and decay are
applied in Fourier space as exact per-mode exponential multipliers; sources
and the random base level are added in physical space. Axis 0 of every field
array is x1 (the wind direction), axis 1 is x2.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

BLOWUP = 1e6


@dataclass(frozen=True)
class PdeParams:
    velocity: tuple[float, float] = (1.0, 0.0)
    diffusion: tuple[float, float] = (0.01, 2.0)
    decay: float = 2.0
    dt: float = 0.01
    base_mean: float = 2.0
    base_std: float = 0.25
    grid_size: int = 50

    def __post_init__(self):
        if min(self.diffusion) < 0:
            raise ValueError("diffusion coefficients must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.decay < 0:
            raise ValueError("decay must be non-negative")
        if self.base_std < 0:
            raise ValueError("base_std must be non-negative")
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")


@dataclass(frozen=True)
class SourceSpec:
    center: tuple[int, int]
    amplitude: float = 500.0
    radius: float = 1.5

    def __post_init__(self):
        if self.amplitude <= 0 or self.radius <= 0:
            raise ValueError("source amplitude and radius must be positive")


@dataclass
class PollutionField:
    values: np.ndarray
    frame: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("pollution field must be a square 2-D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("pollution field contains non-finite values")
        self.values = v

    @property
    def size(self) -> int:
        return self.values.shape[0]


def wavenumbers(n: int) -> tuple[np.ndarray, np.ndarray]:
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    return np.meshgrid(k, k, indexing="ij")


def spectral_multiplier(params: PdeParams) -> np.ndarray:
    k1, k2 = wavenumbers(params.grid_size)
    v1, v2 = params.velocity
    d1, d2 = params.diffusion
    rate = -1j * (v1 * k1 + v2 * k2) - (d1 * k1 ** 2 + d2 * k2 ** 2) - params.decay
    return np.exp(rate * params.dt)


def source_field(sources, n: int) -> np.ndarray:
    """Sum of periodic Gaussian blobs, in grid units."""
    S = np.zeros((n, n))
    idx = np.arange(n)
    for s in sources:
        c1, c2 = s.center
        if not (0 <= c1 < n and 0 <= c2 < n):
            raise ValueError(f"source center {s.center} outside the {n}x{n} grid")
        d1 = np.abs(idx - c1)
        d1 = np.minimum(d1, n - d1)
        d2 = np.abs(idx - c2)
        d2 = np.minimum(d2, n - d2)
        r2 = d1[:, None] ** 2 + d2[None, :] ** 2
        S += s.amplitude * np.exp(-r2 / (2.0 * s.radius ** 2))
    return S


def step(u: PollutionField, params: PdeParams, sources=(), rng: np.random.Generator | None = None,
         multiplier: np.ndarray | None = None) -> PollutionField:
    """Advance one dt. Base noise is drawn from ``rng``; pass ``None`` to leave it out."""
    if u.size != params.grid_size:
        raise ValueError(f"field is {u.size}x{u.size} but params expect {params.grid_size}")
    if multiplier is None:
        multiplier = spectral_multiplier(params)
    new = np.fft.ifft2(np.fft.fft2(u.values) * multiplier).real
    forcing = source_field(sources, u.size) if sources else 0.0
    if rng is not None:
        forcing = forcing + rng.normal(params.base_mean, params.base_std, new.shape)
    new = new + params.dt * forcing
    if not np.all(np.isfinite(new)) or np.max(np.abs(new)) > BLOWUP:
        raise FloatingPointError(f"pollution field blew up at frame {u.frame + 1}")
    return PollutionField(new, u.frame + 1)


@dataclass(frozen=True)
class SourceSchedule:
    """Three sources at start, one more at a random cell every ``interval`` frames."""

    locations: tuple[tuple[int, int], ...]
    initial: int = 3
    interval: int = 50
    amplitude: float = 500.0
    radius: float = 1.5

    @classmethod
    def random(cls, rng: np.random.Generator, n_frames: int = 450, grid_size: int = 50,
               initial: int = 3, interval: int = 50, amplitude: float = 500.0,
               radius: float = 1.5) -> "SourceSchedule":
        total = initial + max(n_frames - 1, 0) // interval
        locs = tuple((int(a), int(b)) for a, b in rng.integers(0, grid_size, size=(total, 2)))
        return cls(locs, initial, interval, amplitude, radius)

    def count_at(self, frame: int) -> int:
        return min(self.initial + frame // self.interval, len(self.locations))

    def sources_at(self, frame: int) -> list[SourceSpec]:
        return [SourceSpec(c, self.amplitude, self.radius)
                for c in self.locations[:self.count_at(frame)]]


def scenario_schedule(frame: int, rng: np.random.Generator | int, n_frames: int = 450,
                      grid_size: int = 50) -> list[SourceSpec]:
    """Source set active at ``frame``. An int seeds a fresh generator; a Generator is consumed."""
    if not 0 <= frame < n_frames:
        raise ValueError(f"frame {frame} outside [0, {n_frames})")
    rng = np.random.default_rng(rng)
    return SourceSchedule.random(rng, n_frames, grid_size).sources_at(frame)


@dataclass(frozen=True)
class TwoPhaseSchedule:
    """Sources and strong decay until ``switch_frame``, then no sources and weak decay."""

    locations: tuple[tuple[int, int], ...]
    switch_frame: int = 250
    n_frames: int = 300
    dynamic_decay: float = 2.0
    stationary_decay: float = 0.1
    amplitude: float = 500.0
    radius: float = 1.5

    @classmethod
    def random(cls, rng: np.random.Generator, grid_size: int = 50, **kw) -> "TwoPhaseSchedule":
        locs = tuple((int(a), int(b)) for a, b in rng.integers(0, grid_size, size=(3, 2)))
        return cls(locs, **kw)

    def at(self, frame: int, base: PdeParams) -> tuple[PdeParams, list[SourceSpec]]:
        if not 0 <= frame < self.n_frames:
            raise ValueError(f"frame {frame} outside [0, {self.n_frames})")
        if frame < self.switch_frame:
            return (replace(base, decay=self.dynamic_decay),
                    [SourceSpec(c, self.amplitude, self.radius) for c in self.locations])
        return replace(base, decay=self.stationary_decay), []


def two_phase_schedule(frame: int, base: PdeParams | None = None,
                       locations=((10, 10), (25, 40), (40, 20))) -> tuple[PdeParams, list[SourceSpec]]:
    return TwoPhaseSchedule(tuple(locations)).at(frame, base or PdeParams())


def observe(u: PollutionField, locations) -> np.ndarray:
    """Exact field values at integer grid cells given as (i, j) rows."""
    loc = np.asarray(locations)
    if loc.ndim == 1:
        loc = loc.reshape(1, 2)
    if loc.shape[1] != 2 or not np.issubdtype(loc.dtype, np.integer):
        raise ValueError("locations must be integer (i, j) grid cells")
    n = u.size
    if np.any(loc < 0) or np.any(loc >= n):
        raise ValueError(f"location outside the {n}x{n} grid")
    return u.values[loc[:, 0], loc[:, 1]]


def cell_centers(n: int) -> np.ndarray:
    """Physical coordinates in [0, 1]^2 of each cell, flattened row-major (index = i * n + j)."""
    c = (np.arange(n) + 0.5) / n
    g1, g2 = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


@dataclass
class Trajectory:
    """Precomputed ground-truth frames, shape (frames, n, n)."""

    frames: np.ndarray
    params: PdeParams
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def field(self, t: int) -> PollutionField:
        return PollutionField(self.frames[t], t)


def initial_field(params: PdeParams, rng: np.random.Generator) -> PollutionField:
    n = params.grid_size
    return PollutionField(rng.normal(params.base_mean, params.base_std, (n, n)), 0)


def simulate_dynamic(seed: int, params: PdeParams | None = None, n_frames: int = 450,
                     amplitude: float = 500.0, radius: float = 1.5, interval: int = 50,
                     initial_sources: int = 3, spinup: int = 0) -> Trajectory:
    """The source-injection benchmark: a new random source every ``interval`` frames."""
    params = params or PdeParams()
    rng = np.random.default_rng(seed)
    sched = SourceSchedule.random(rng, n_frames, params.grid_size, initial_sources,
                                  interval, amplitude, radius)
    mult = spectral_multiplier(params)
    u = initial_field(params, rng)
    for _ in range(spinup):
        u = step(u, params, sched.sources_at(0), rng, mult)
    u = PollutionField(u.values, 0)
    out = np.empty((n_frames, params.grid_size, params.grid_size))
    for t in range(n_frames):
        out[t] = u.values
        if t + 1 < n_frames:
            u = step(u, params, sched.sources_at(t + 1), rng, mult)
    return Trajectory(out, params, {"sources": sched.locations, "seed": seed})


def simulate_two_phase(seed: int, params: PdeParams | None = None, amplitude: float = 500.0,
                       radius: float = 1.5, switch_frame: int = 250, n_frames: int = 300,
                       spinup: int = 0, stationary_decay: float = 0.1) -> Trajectory:
    params = params or PdeParams()
    rng = np.random.default_rng(seed)
    sched = TwoPhaseSchedule.random(rng, params.grid_size, switch_frame=switch_frame,
                                    n_frames=n_frames, dynamic_decay=params.decay,
                                    stationary_decay=stationary_decay, amplitude=amplitude, radius=radius)
    u = initial_field(params, rng)
    p0, s0 = sched.at(0, params)
    for _ in range(spinup):
        u = step(u, p0, s0, rng)
    u = PollutionField(u.values, 0)
    out = np.empty((n_frames, params.grid_size, params.grid_size))
    mults = {}
    for t in range(n_frames):
        out[t] = u.values
        if t + 1 < n_frames:
            p, s = sched.at(t + 1, params)
            if p.decay not in mults:
                mults[p.decay] = spectral_multiplier(p)
            u = step(u, p, s, rng, mults[p.decay])
    return Trajectory(out, params, {"sources": sched.locations, "seed": seed,
                                    "switch_frame": switch_frame})


def write_csv_matrix(values: np.ndarray, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        for row in np.asarray(values):
            w.writerow([f"{v:.6g}" for v in row])
    return path


def write_svg_heatmap(values: np.ndarray, path, cell: int = 8) -> Path:
    """Grayscale heatmap, dark = low, light = high. x1 runs left to right."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo or 1.0
    n1, n2 = v.shape
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{n1 * cell}" '
             f'height="{n2 * cell}" shape-rendering="crispEdges">']
    for i in range(n1):
        for j in range(n2):
            g = int(round(255 * (v[i, j] - lo) / span))
            # x2 increases upwards
            parts.append(f'<rect x="{i * cell}" y="{(n2 - 1 - j) * cell}" width="{cell}" '
                         f'height="{cell}" fill="rgb({g},{g},{g})"/>')
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts))
    return path
