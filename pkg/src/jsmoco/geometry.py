"""K-space coordinates, acquisition plans and rigid-motion coordinate maps.

Frequencies are in radians/pixel. A Cartesian ``(H, W)`` grid puts DC at
``(H // 2, W // 2)``; ``kx`` runs along columns and ``ky`` along rows, so
k-space coordinate arrays have shape ``(M, 2)`` holding ``(kx, ky)``.
Phase-encode lines are rows; the readout runs along columns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import make_rng


def wrap_angle(theta):
    """Wrap angles to (-pi, pi]."""
    theta = np.asarray(theta, dtype=float)
    out = np.mod(theta + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


@dataclass(frozen=True)
class MotionParams:
    """Per-shot rigid motion: rotation (radians) and translation ``(tx, ty)`` in pixels."""

    rotations: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        rot = np.atleast_1d(np.asarray(self.rotations, dtype=float)).copy()
        tr = np.asarray(self.translations, dtype=float).reshape(-1, 2).copy()
        if rot.ndim != 1 or rot.shape[0] != tr.shape[0] or rot.size == 0:
            raise ValueError(f"rotations {rot.shape} and translations {tr.shape} disagree")
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(tr))):
            raise ValueError("motion parameters must be finite")
        rot = wrap_angle(rot)
        rot.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "rotations", rot)
        object.__setattr__(self, "translations", tr)

    @property
    def num_shots(self) -> int:
        return self.rotations.shape[0]

    @classmethod
    def identity(cls, num_shots: int) -> "MotionParams":
        return cls(np.zeros(num_shots), np.zeros((num_shots, 2)))

    def as_array(self) -> np.ndarray:
        """``(J, 3)`` array of ``(theta, tx, ty)`` rows."""
        return np.column_stack([self.rotations, self.translations])

    @classmethod
    def from_array(cls, arr) -> "MotionParams":
        arr = np.asarray(arr, dtype=float).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1:])

    def gauge_fixed(self) -> "MotionParams":
        """Re-express all shots relative to shot 0, which becomes the identity.

        Shot ``j`` places object point ``u`` at scanner position
        ``T_j(u) = R(-theta_j) u + t_j``; the fixed gauge uses ``T_j o T_0^-1``.
        """
        th = self.rotations - self.rotations[0]
        t0 = self.translations[0]
        tr = np.array([self.translations[j] - rotation_matrix(-th[j]) @ t0 for j in range(self.num_shots)])
        return MotionParams(th, tr)

    def compose_global(self, theta: float, t) -> "MotionParams":
        """Apply one rigid transform ``G(u) = R(-theta) u + t`` to the object frame of every shot."""
        t = np.asarray(t, dtype=float)
        tr = np.array([self.translations[j] + rotation_matrix(-self.rotations[j]) @ t for j in range(self.num_shots)])
        return MotionParams(self.rotations + theta, tr)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def cartesian_coords(height: int, width: int) -> np.ndarray:
    """All ``H*W`` grid frequencies in row-major order, shape ``(H*W, 2)``."""
    if height < 1 or width < 1:
        raise ValueError("grid dimensions must be positive")
    ky = 2 * np.pi * (np.arange(height) - height // 2) / height
    kx = 2 * np.pi * (np.arange(width) - width // 2) / width
    KY, KX = np.meshgrid(ky, kx, indexing="ij")
    return np.column_stack([KX.ravel(), KY.ravel()])


def rotate_coords(coords, theta: float) -> np.ndarray:
    """Rotate frequency points about DC: ``p -> R(theta) p``."""
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    coords = np.asarray(coords, dtype=float)
    if not np.all(np.isfinite(coords)):
        raise ValueError("coordinates must be finite")
    return coords @ rotation_matrix(theta).T


def translation_phase(coords, t) -> np.ndarray:
    """Linear k-space phase ``exp(-j (tx kx + ty ky))`` of an image shift by ``t`` pixels."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValueError("translation must be finite")
    coords = np.asarray(coords, dtype=float)
    return np.exp(-1j * (coords @ t))


@dataclass(frozen=True)
class AcquisitionPlan:
    """Cartesian line-undersampling plan with a shot assignment per acquired line.

    Samples are ordered shot by shot; within a shot, by line index and then readout
    column. ``shot_slices[j]`` selects shot ``j`` from any plan-ordered sample array.
    """

    height: int
    width: int
    acquired_lines: np.ndarray
    shot_of_line: dict
    num_shots: int
    accel: float = 1.0
    acs_lines: int = 0
    scheme: str = "equispaced"
    ordering: str = "sequential"
    seed: int = 0
    sample_rows: np.ndarray = field(init=False, repr=False)
    sample_cols: np.ndarray = field(init=False, repr=False)
    shot_slices: tuple = field(init=False, repr=False)

    def __post_init__(self):
        lines = np.asarray(self.acquired_lines, dtype=np.int64)
        if lines.ndim != 1 or lines.size == 0:
            raise ValueError("acquired_lines must be a non-empty 1-D sequence")
        if len(np.unique(lines)) != lines.size or lines.min() < 0 or lines.max() >= self.height:
            raise ValueError("acquired_lines must be distinct rows inside the grid")
        sol = {int(k): int(v) for k, v in self.shot_of_line.items()}
        if set(sol) != set(int(v) for v in lines):
            raise ValueError("shot_of_line must cover exactly the acquired lines")
        if any(not 0 <= s < self.num_shots for s in sol.values()):
            raise ValueError("shot index out of range")
        if set(sol.values()) != set(range(self.num_shots)):
            raise ValueError("every shot must own at least one line")
        order = sorted(int(v) for v in lines)
        order.sort(key=lambda ln: sol[ln])
        rows, slices, start = [], [], 0
        for j in range(self.num_shots):
            shot_lines = [ln for ln in order if sol[ln] == j]
            rows.extend(shot_lines)
            n = len(shot_lines) * self.width
            slices.append(slice(start, start + n))
            start += n
        rows = np.asarray(rows, dtype=np.int64)
        sample_rows = np.repeat(rows, self.width)
        sample_cols = np.tile(np.arange(self.width, dtype=np.int64), rows.size)
        for a in (lines, sample_rows, sample_cols):
            a.setflags(write=False)
        object.__setattr__(self, "acquired_lines", np.asarray(sorted(order), dtype=np.int64))
        object.__setattr__(self, "shot_of_line", sol)
        object.__setattr__(self, "sample_rows", sample_rows)
        object.__setattr__(self, "sample_cols", sample_cols)
        object.__setattr__(self, "shot_slices", tuple(slices))

    @property
    def num_samples(self) -> int:
        return self.sample_rows.size

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros((self.height, self.width))
        m[self.acquired_lines, :] = 1.0
        return m

    @property
    def coords(self) -> np.ndarray:
        """Nominal ``(kx, ky)`` for every acquired sample, plan order."""
        kx = 2 * np.pi * (self.sample_cols - self.width // 2) / self.width
        ky = 2 * np.pi * (self.sample_rows - self.height // 2) / self.height
        return np.column_stack([kx, ky])

    @property
    def effective_accel(self) -> float:
        return self.height / self.acquired_lines.size

    def shot_coords(self, j: int) -> np.ndarray:
        return self.coords[self.shot_slices[j]]

    def header(self) -> dict:
        """JSON-serializable description (everything except the mask itself)."""
        return {
            "height": self.height,
            "width": self.width,
            "acquired_lines": [int(v) for v in self.acquired_lines],
            "shot_of_line": {str(k): v for k, v in sorted(self.shot_of_line.items())},
            "num_shots": self.num_shots,
            "accel": self.accel,
            "acs_lines": self.acs_lines,
            "scheme": self.scheme,
            "ordering": self.ordering,
            "seed": self.seed,
        }

    @classmethod
    def from_header(cls, hdr: dict) -> "AcquisitionPlan":
        return cls(
            height=int(hdr["height"]),
            width=int(hdr["width"]),
            acquired_lines=np.asarray(hdr["acquired_lines"], dtype=np.int64),
            shot_of_line={int(k): int(v) for k, v in hdr["shot_of_line"].items()},
            num_shots=int(hdr["num_shots"]),
            accel=float(hdr.get("accel", 1.0)),
            acs_lines=int(hdr.get("acs_lines", 0)),
            scheme=hdr.get("scheme", "equispaced"),
            ordering=hdr.get("ordering", "sequential"),
            seed=int(hdr.get("seed", 0)),
        )


def acs_block(height: int, acs_lines: int) -> np.ndarray:
    start = height // 2 - acs_lines // 2
    return np.arange(start, start + acs_lines)


def make_plan(
    height: int,
    width: int,
    accel: float,
    acs_lines: int,
    scheme: str = "equispaced",
    num_shots: int = 1,
    ordering: str = "sequential",
    seed: int = 0,
) -> AcquisitionPlan:
    """Select ``ceil(height / accel)`` phase-encode lines (ACS block included) and group them into shots."""
    if height < 2 or width < 2:
        raise ValueError("grid dimensions must be >= 2")
    if not 1 <= accel <= height:
        raise ValueError(f"acceleration {accel} outside [1, {height}]")
    if num_shots < 1:
        raise ValueError("num_shots must be >= 1")
    if scheme not in ("equispaced", "random"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if ordering not in ("sequential", "interleaved"):
        raise ValueError(f"unknown ordering {ordering!r}")
    budget = math.ceil(height / accel - 1e-9)
    if acs_lines < 0 or (acs_lines >= budget and budget < height):
        raise ValueError(f"acs_lines={acs_lines} leaves no room in a budget of {budget} lines")
    if num_shots > budget:
        raise ValueError(f"{num_shots} shots for only {budget} acquired lines")

    acs = acs_block(height, acs_lines)
    rest = np.setdiff1d(np.arange(height), acs)
    k = budget - acs.size
    if scheme == "equispaced":
        chosen: list[int] = []
        pool = list(rest)
        for target in (np.arange(k) + 0.5) * height / k if k else []:
            best = min(pool, key=lambda r: (abs(r + 0.5 - target), r))
            chosen.append(best)
            pool.remove(best)
    else:
        rng = make_rng(seed, 0xA1)
        chosen = list(rng.choice(rest, size=k, replace=False)) if k else []
    lines = np.sort(np.concatenate([acs, np.asarray(chosen, dtype=np.int64)]))

    if ordering == "sequential":
        groups = np.array_split(np.arange(lines.size), num_shots)
        shot_of_line = {int(lines[i]): j for j, g in enumerate(groups) for i in g}
    else:
        shot_of_line = {int(ln): i % num_shots for i, ln in enumerate(lines)}
    return AcquisitionPlan(
        height=height,
        width=width,
        acquired_lines=lines,
        shot_of_line=shot_of_line,
        num_shots=num_shots,
        accel=float(accel),
        acs_lines=int(acs_lines),
        scheme=scheme,
        ordering=ordering,
        seed=int(seed),
    )
