"""From Fourier coefficients of one body to the physical choreography.

Sampling of all bodies in the rotating and inertial frames, closure and
symmetry diagnostics, winding numbers of the inertial path, and CSV/JSON
export of sampled trajectories.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seqspace as sq
from .problem import ProblemParams
from .seqspace import SeqVec

DEFAULT_SAMPLES = 4096
COLUMNS = ("t", "body", "x", "y", "z")


class KnotError(ValueError):
    """The curve does not admit the requested classification."""


@dataclass
class Trajectory:
    """Sampled paths of all bodies.

    ``positions[j - 1]`` holds body ``j`` (``j = 1..n``) at the times ``t``; the
    grid includes both endpoints so the first and last samples should agree.
    """

    frame: str
    t: np.ndarray
    positions: np.ndarray
    params: ProblemParams | None = None

    def __post_init__(self):
        if self.frame not in ("rotating", "inertial"):
            raise ValueError(f"unknown frame {self.frame!r}")
        self.t = np.asarray(self.t, dtype=float)
        pos = np.asarray(self.positions, dtype=float)
        self.positions = pos.reshape(-1, len(self.t), 3) if len(self.t) else pos.reshape(0, 0, 3)

    @property
    def n_bodies(self) -> int:
        return self.positions.shape[0]

    def body(self, j: int) -> np.ndarray:
        """Samples of body ``j`` (1-based), shape ``(len(t), 3)``."""
        return self.positions[j - 1]

    @property
    def bodies(self) -> list[np.ndarray]:
        return [self.positions[i] for i in range(self.n_bodies)]


@dataclass(frozen=True)
class KnotClass:
    toroidal: int
    poloidal: int
    z_axis_winding: int
    trivial: bool

    @property
    def knot_type(self) -> tuple[int, int]:
        """Unordered torus-knot type written with the larger index first."""
        a, b = abs(self.toroidal), abs(self.poloidal)
        return (max(a, b), min(a, b))

    def describe(self) -> str:
        if self.poloidal == 0:
            return "cylindrical choreography (no meridian winding)"
        kind = "trivial knot" if self.trivial else "nontrivial torus knot"
        return f"({self.knot_type[0]},{self.knot_type[1]}) {kind}"


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def _rotation(angle) -> np.ndarray:
    """Rotation matrices about the vertical axis; ``angle`` may be an array."""
    c, s = np.cos(angle), np.sin(angle)
    zero, one = np.zeros_like(c), np.ones_like(c)
    return np.moveaxis(np.array([[c, -s, zero], [s, c, zero], [zero, zero, one]]), (0, 1), (-2, -1))


def _eval(u: SeqVec, t) -> np.ndarray:
    return np.stack([sq.evaluate(c, t).real for c in u], axis=-1)


def reconstruct_rotating(u: SeqVec, params: ProblemParams, samples: int = DEFAULT_SAMPLES) -> Trajectory:
    """All bodies over one rotating-frame period ``[0, 2 pi]``.

    Body ``j`` is ``R(j zeta) u(t + j k zeta)``; body ``n`` is ``u`` itself.
    """
    t = np.linspace(0.0, 2 * np.pi, samples)
    zeta = params.zeta
    paths = []
    for j in range(1, params.n + 1):
        rot = _rotation(j * zeta) if j < params.n else np.eye(3)
        paths.append(_eval(u, t + j * params.k * zeta) @ rot.T)
    return Trajectory("rotating", t, np.stack(paths), params)


def inertial_body(u: SeqVec, params: ProblemParams, t) -> np.ndarray:
    """``Q_n(t) = R(t q / p) u(t)``."""
    t = np.asarray(t, dtype=float)
    rot = _rotation(t * params.q / params.p)
    return np.einsum("tij,tj->ti", rot, _eval(u, t))


def to_inertial(u: SeqVec, params: ProblemParams, samples: int = DEFAULT_SAMPLES) -> Trajectory:
    """All bodies in the inertial frame over ``[0, 2 pi p]``.

    Body ``j`` follows ``Q_j(t) = Q_n(t + j k_tilde zeta)``.
    """
    res = params.resonance
    if not res.is_simple:
        raise ValueError(f"resonance {params.p}:{params.q} does not give a simple choreography")
    t = np.linspace(0.0, 2 * np.pi * params.p, samples)
    zeta = params.zeta
    paths = []
    for j in range(1, params.n + 1):
        shift = 0.0 if j == params.n else j * res.k_tilde * zeta
        paths.append(inertial_body(u, params, t + shift))
    return Trajectory("inertial", t, np.stack(paths), params)


# --------------------------------------------------------------------------
# diagnostics
# --------------------------------------------------------------------------


def closure_residual(traj: Trajectory) -> float:
    """Largest distance between the first and last sample over all bodies."""
    if len(traj.t) == 0:
        return 0.0
    return float(np.max(np.linalg.norm(traj.positions[:, -1] - traj.positions[:, 0], axis=-1)))


def choreography_defect(u: SeqVec, params: ProblemParams, samples: int = 1024) -> float:
    """Mismatch between the rotated rotating-frame bodies and shifted copies of ``Q_n``.

    Zero (up to round-off) exactly when the shift ``k_tilde`` is right.
    """
    rot = reconstruct_rotating(u, params, samples)
    back = _rotation(rot.t * params.q / params.p)
    inertial = inertial_body(u, params, rot.t)
    worst = float(np.max(np.abs(inertial - np.einsum("tij,tj->ti", back, rot.body(params.n)))))
    k_tilde = params.resonance.k_tilde
    for j in range(1, params.n):
        lhs = np.einsum("tij,tj->ti", back, rot.body(j))
        rhs = inertial_body(u, params, rot.t + j * k_tilde * params.zeta)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def polygon_group_defect(traj: Trajectory, h: int) -> float:
    """How far each sampled configuration is from invariance under rotation by ``2 pi / h``."""
    rot = _rotation(2 * np.pi / h)
    pos = traj.positions
    turned = pos @ rot.T
    # distance from each rotated body to the nearest body, per time
    d = np.linalg.norm(turned[:, None] - pos[None, :], axis=-1)
    return float(np.max(np.min(d, axis=1)))


def rotational_overlap_defect(traj: Trajectory, order: int, chunk: int = 512) -> float:
    """Hausdorff-type distance between the orbit set and its rotation by ``2 pi / order``."""
    pts = traj.positions.reshape(-1, 3)
    turned = pts @ _rotation(2 * np.pi / order).T
    worst = 0.0
    for start in range(0, len(turned), chunk):
        block = turned[start : start + chunk]
        d = np.linalg.norm(block[:, None, :] - pts[None, :, :], axis=-1)
        worst = max(worst, float(np.max(np.min(d, axis=1))))
    return worst


def min_pairwise_distance(traj: Trajectory) -> float:
    pos = traj.positions
    best = np.inf
    for a in range(traj.n_bodies):
        for b in range(a + 1, traj.n_bodies):
            best = min(best, float(np.min(np.linalg.norm(pos[a] - pos[b], axis=-1))))
    return best


# --------------------------------------------------------------------------
# winding numbers
# --------------------------------------------------------------------------


def _winding(angles: np.ndarray, tol: float) -> int:
    total = (np.unwrap(angles)[-1] - np.unwrap(angles)[0]) / (2 * np.pi)
    k = round(total)
    if abs(total - k) > tol:
        raise KnotError(f"accumulated angle {total:.9f} turns is not an integer")
    return int(k)


def z_axis_winding(u: SeqVec, samples: int = DEFAULT_SAMPLES) -> int:
    """Turns of the rotating-frame curve around the vertical axis over one period."""
    t = np.linspace(0.0, 2 * np.pi, samples)
    pos = _eval(u, t)
    return _winding(np.arctan2(pos[:, 1], pos[:, 0]), 1e-6)


def classify_knot(traj: Trajectory, params: ProblemParams | None = None, u: SeqVec | None = None,
                  tol: float = 1e-6) -> KnotClass:
    """Winding numbers of the closed inertial path of body ``n``.

    ``toroidal`` counts turns of ``atan2(y, x)``; ``poloidal`` counts turns of
    ``(rho - mean rho, z)`` in the meridian half-plane.
    """
    if traj.frame != "inertial":
        raise ValueError("classification needs the inertial trajectory")
    params = params or traj.params
    path = traj.positions[-1]
    rho = np.hypot(path[:, 0], path[:, 1])
    if np.min(rho) < 1e-6 * max(float(np.max(rho)), 1.0):
        raise KnotError("the path crosses the vertical axis")
    tor = _winding(np.arctan2(path[:, 1], path[:, 0]), tol)
    pol = _winding(np.arctan2(path[:, 2], rho - rho.mean()), tol)
    zw = z_axis_winding(u) if u is not None else 0
    trivial = abs(tor) <= 1 or abs(pol) <= 1
    return KnotClass(tor, pol, zw, trivial)


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------


def _rows(traj: Trajectory):
    for j in range(traj.n_bodies):
        for i, t in enumerate(traj.t):
            x, y, z = traj.positions[j, i]
            yield float(t), j + 1, float(x), float(y), float(z)


def export(traj: Trajectory, fmt: str, path) -> None:
    """Write samples ordered by ``(body, t)`` with 17 significant digits."""
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for t, j, x, y, z in _rows(traj):
                writer.writerow([f"{t:.17g}", j, f"{x:.17g}", f"{y:.17g}", f"{z:.17g}"])
    elif fmt == "json":
        doc = {
            "frame": traj.frame,
            "columns": list(COLUMNS),
            "rows": [list(r) for r in _rows(traj)],
        }
        if traj.params is not None:
            doc["params"] = traj.params.as_dict()
        path.write_text(json.dumps(doc, indent=None) + "\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def read_trajectory(path, frame: str = "inertial") -> Trajectory:
    """Inverse of :func:`export` (format chosen by suffix)."""
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        rows = doc["rows"]
        frame = doc.get("frame", frame)
    else:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != COLUMNS:
                raise ValueError(f"unexpected header {header}")
            rows = [[float(r[0]), int(r[1]), float(r[2]), float(r[3]), float(r[4])] for r in reader]
    if not rows:
        return Trajectory(frame, np.zeros(0), np.zeros((0, 0, 3)))
    arr = np.array(rows, dtype=float)
    n = int(arr[:, 1].max())
    t = arr[arr[:, 1] == 1, 0]
    pos = arr[:, 2:].reshape(n, len(t), 3)
    return Trajectory(frame, t, pos)


def period_in_time_units(params: ProblemParams) -> float:
    """Inertial period ``2 pi p / omega`` in physical time."""
    return 2 * math.pi * params.p / params.omega
