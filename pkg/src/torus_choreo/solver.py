"""Numerical (non-rigorous) solution of the Galerkin problem.

Seeds, Newton refinement with re-symmetrization onto the real subspace, and
natural-parameter continuation in the frequency.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import seqspace as sq
from .problem import (
    ProblemParams,
    ReferenceOrbit,
    StateX,
    apply_Mj,
    default_reference,
    galerkin_map,
    jacobian_galerkin,
)
from .seqspace import CoeffSeq, SeqVec

log = logging.getLogger(__name__)

GRID_POINTS = 1024


class SolverError(RuntimeError):
    """Numerical failure; ``report`` carries whatever history exists."""

    def __init__(self, message: str, report: "NewtonReport | None" = None, partial=None):
        super().__init__(message)
        self.report = report
        self.partial = partial or []


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-12
    max_iter: int = 30
    damping: float = 1.0
    line_search: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass
class Seed:
    params: ProblemParams
    x0: StateX
    provenance: str
    notes: list[str] = field(default_factory=list)


@dataclass
class NewtonReport:
    residuals: list[float] = field(default_factory=list)
    converged: bool = False
    symmetry_defects: list[float] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return max(len(self.residuals) - 1, 0)


# --------------------------------------------------------------------------
# seeds
# --------------------------------------------------------------------------


def data_path(name: str) -> Path:
    return Path(str(resources.files("torus_choreo") / "data" / name))


def chord_reciprocals(u: SeqVec, params: ProblemParams, m: int, samples: int = GRID_POINTS) -> SeqVec:
    """Fourier modes ``|l| < m`` of ``1/|(M_j u)(t)|`` sampled on a uniform grid."""
    t = 2 * np.pi * np.arange(samples) / samples
    out = []
    for j in range(1, params.n):
        mu = apply_Mj(u, j, params)
        vals = np.stack([sq.evaluate(c, t).real for c in mu])
        recip = 1.0 / np.linalg.norm(vals, axis=0)
        fhat = np.fft.fft(recip) / samples
        modes = np.arange(-(m - 1), m)
        out.append(sq.symmetrize(CoeffSeq(fhat[modes % samples])))
    return SeqVec(out)


def state_from_u(u: SeqVec, params: ProblemParams) -> StateX:
    """Complete a position guess with ``v = Du``, chord reciprocals, zero unfoldings."""
    m = params.m
    u = SeqVec(sq.symmetrize(sq.project(c, m)) for c in u)
    v = SeqVec(sq.differentiate(c) for c in u)
    w = chord_reciprocals(u, params, m)
    return StateX(np.zeros(3, complex), np.zeros(params.n - 1, complex), u, v, w)


def seed_bundled_trefoil(m: int | None = None, nu: float = 1.03) -> Seed:
    """Five-body trefoil seed from the bundled rotating-frame coefficients."""
    doc = sq.read_coefficients(data_path("trefoil_coefficients.json"))
    params = ProblemParams(doc["n"], doc["k"], doc["p"], doc["q"], m or doc["m"], nu)
    u = SeqVec([doc["u1"], doc["u2"], doc["u3"]])
    return Seed(params, state_from_u(u, params), "bundled-table")


def _component_names(n: int) -> list[str]:
    return ["u1", "u2", "u3", "v1", "v2", "v3"] + [f"w{j}" for j in range(1, n)]


def state_document(x: StateX, params: ProblemParams) -> dict:
    names = _component_names(params.n)
    comps = dict(zip(names, x.sequences()))
    meta = {"n": params.n, "k": params.k, "p": params.p, "q": params.q}
    return sq.coeff_document(comps, params.m, meta, {"lambda": x.lam, "alpha": x.alpha})


def write_state(path, x: StateX, params: ProblemParams) -> str:
    text = sq.canonical_json(state_document(x, params))
    Path(path).write_text(text + "\n")
    return text


def seed_from_file(path, params: ProblemParams) -> Seed:
    """Read a coefficient file; only ``u`` is required, other parts are optional."""
    doc = sq.read_coefficients(path)
    notes = []
    if "n" in doc and int(doc["n"]) != params.n:
        raise ValueError(f"file is for n={doc['n']}, config has n={params.n}")
    missing = [c for c in ("u1", "u2", "u3") if not isinstance(doc.get(c), CoeffSeq)]
    if missing:
        raise ValueError(f"coefficient file lacks components {missing}")
    wnames = [f"w{j}" for j in range(1, params.n)]
    extra_w = [k for k in doc if k.startswith("w") and k[1:].isdigit() and k not in wnames]
    if extra_w:
        raise ValueError(f"components {extra_w} inconsistent with n={params.n}")
    if doc["m"] > params.m:
        notes.append(f"coefficients truncated from m={doc['m']} to m={params.m}")
        log.warning(notes[-1])
    m = params.m
    u = SeqVec(sq.symmetrize(sq.project(doc[c], m)) for c in ("u1", "u2", "u3"))
    if all(isinstance(doc.get(c), CoeffSeq) for c in ["v1", "v2", "v3", *wnames]):
        v = SeqVec(sq.symmetrize(sq.project(doc[c], m)) for c in ("v1", "v2", "v3"))
        w = SeqVec(sq.symmetrize(sq.project(doc[c], m)) for c in wnames)
        lam = np.real(doc.get("lambda", np.zeros(3))).astype(complex)
        alpha = np.real(doc.get("alpha", np.zeros(params.n - 1))).astype(complex)
        x0 = StateX(lam, alpha, u, v, w)
    else:
        x0 = state_from_u(u, params)
    return Seed(params, x0, "file", notes)


def seed_lyapunov(params: ProblemParams, amplitude: float = 1e-2) -> Seed:
    """Polygon equilibrium with a small vertical oscillation of the n-th body."""
    m = params.m
    u1 = sq.delta(m - 1, 1.0)
    u2 = sq.zeros(m - 1)
    u3 = sq.from_modes({-1: amplitude / 2, 1: amplitude / 2}, m - 1)
    u = SeqVec([u1, u2, u3])
    v = SeqVec(sq.differentiate(c) for c in u)
    w = SeqVec(sq.delta(m - 1, 1.0 / (2.0 * math.sin(j * params.zeta / 2))) for j in range(1, params.n))
    x0 = StateX(np.zeros(3, complex), np.zeros(params.n - 1, complex), u, v, w)
    return Seed(params, x0, "lyapunov-ansatz")


def initial_condition_row(params: ProblemParams) -> dict:
    rows = json.loads(data_path("initial_conditions.json").read_text())["rows"]
    key = (params.n, params.k, params.p, params.q)
    for row in rows:
        if (row["n"], row["k"], row["p"], row["q"]) == key:
            return row
    raise ValueError(f"no tabulated initial condition for n={key[0]}, k={key[1]}, {key[2]}:{key[3]}")


def _harmonic_guess(x0, dx0, center, m: int) -> SeqVec:
    """``center + (x0 - center) cos t + dx0 sin t`` per component (vertical center 0)."""
    comps = []
    for i in range(3):
        c = 0.0 if i == 2 else center[i]
        a, b = x0[i] - c, dx0[i]
        comps.append(sq.symmetrize(sq.from_modes({0: c, 1: (a - 1j * b) / 2, -1: (a + 1j * b) / 2}, m - 1)))
    return SeqVec(comps)


def rotate_shift(x: StateX, shift: float, angle: float) -> StateX:
    """State of the orbit ``R_angle u(t + shift)`` (rotation about the vertical axis)."""
    c, s = math.cos(angle), math.sin(angle)

    def tshift(seq):
        return CoeffSeq(seq.coeffs * np.exp(1j * seq.modes() * shift))

    def turn(vec):
        a, b, z = (tshift(q) for q in vec)
        return SeqVec([a * c - b * s, a * s + b * c, z])

    return StateX(x.lam, x.alpha, turn(x.u), turn(x.v), SeqVec(tshift(q) for q in x.w)).symmetrized()


def match_initial_condition(x: StateX, params: ProblemParams, position, velocity, samples: int = 4096):
    """Time shift and rotation bringing ``(u, omega u')`` closest to a tabulated state.

    Returns ``(shift, angle, mismatch)`` with the sup-norm mismatch of position
    and physical velocity at the best grid time.
    """
    x0 = np.asarray(position, dtype=float)
    dx0 = np.asarray(velocity, dtype=float) / params.omega
    t = 2 * np.pi * np.arange(samples) / samples
    U = np.stack([sq.evaluate(c, t).real for c in x.u])
    V = np.stack([sq.evaluate(sq.differentiate(c), t).real for c in x.u])
    angle = np.arctan2(x0[1], x0[0]) - np.arctan2(U[1], U[0])
    c, s = np.cos(angle), np.sin(angle)
    Ur = np.stack([c * U[0] - s * U[1], s * U[0] + c * U[1], U[2]])
    Vr = np.stack([c * V[0] - s * V[1], s * V[0] + c * V[1], V[2]])
    err = np.maximum(np.abs(Ur - x0[:, None]).max(0), params.omega * np.abs(Vr - dx0[:, None]).max(0))
    i = int(np.argmin(err))
    return float(t[i]), float(angle[i]), float(err[i])


def seed_initial_conditions(params: ProblemParams, search_m: int = 10, ramp=(16, 22)) -> Seed:
    """Seed from a tabulated initial position and velocity.

    A one-harmonic guess through the tabulated state is refined by damped
    Newton at low resolution for a grid of horizontal centers; the candidate
    whose orbit passes closest to the tabulated state is carried up to
    ``params.m`` and rotated/shifted so that ``t = 0`` matches the table.
    """
    row = initial_condition_row(params)
    x0 = np.array(row["position"], dtype=float)
    dx0 = np.array(row["velocity"], dtype=float) / params.omega
    low = params.with_m(search_m)
    best = None
    for c1 in np.linspace(0.7, 1.3, 7):
        for c2 in (-0.2, 0.0, 0.2):
            guess = state_from_u(_harmonic_guess(x0, dx0, (c1, c2), search_m), low)
            try:
                x, _ = newton_refine(guess, NewtonSettings(tol=1e-10, max_iter=60, line_search=True),
                                     default_reference(guess.u, search_m), low)
            except SolverError:
                continue
            mismatch = match_initial_condition(x, low, x0, row["velocity"])[2]
            if best is None or mismatch < best[0]:
                best = (mismatch, x)
    if best is None:
        raise SolverError("no seed candidate converged")
    x = best[1]
    for m in [*(mm for mm in ramp if search_m < mm < params.m), params.m]:
        pm = params.with_m(m)
        x = x.galerkin(m)
        x, _ = newton_refine(x, NewtonSettings(tol=1e-12, max_iter=60, line_search=True), default_reference(x.u, m), pm)
    shift, angle, mismatch = match_initial_condition(x, params, x0, row["velocity"])
    x = rotate_shift(x, shift, angle)
    note = f"matched tabulated state to {mismatch:.2e} (shift {shift:.6f}, rotation {angle:.6f})"
    log.info(note)
    return Seed(params, x, "initial-conditions", [note])


# --------------------------------------------------------------------------
# Newton
# --------------------------------------------------------------------------


def newton_refine(seed: Seed | StateX, settings: NewtonSettings | None = None,
                  ref: ReferenceOrbit | None = None, params: ProblemParams | None = None):
    """Newton iteration on the Galerkin map; returns ``(xbar, report)``.

    Each iterate is projected onto the real subspace.  Raises
    :class:`SolverError` on a singular Jacobian or when ``max_iter`` is hit.
    """
    settings = settings or NewtonSettings()
    if isinstance(seed, Seed):
        params = params or seed.params
        x = seed.x0
    else:
        x = seed
    if params is None:
        raise ValueError("params required when refining a bare state")
    ref = ref or default_reference(x.u, params.m)
    m = params.m
    xv = x.symmetrized().to_vector(m)
    report = NewtonReport()
    for it in range(settings.max_iter + 1):
        F = galerkin_map(xv, params, ref)
        res = float(np.max(np.abs(F)))
        report.residuals.append(res)
        log.info("newton iter %d residual %.3e", it, res)
        if not np.isfinite(res):
            raise SolverError("non-finite residual", report)
        if res <= settings.tol:
            report.converged = True
            return StateX.from_vector(xv, params.n, m), report
        if it == settings.max_iter:
            break
        J = jacobian_galerkin(xv, params, ref)
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Jacobian at iteration {it}", report) from exc
        t = settings.damping
        while True:
            xnew = StateX.from_vector(xv - t * step, params.n, m)
            if not settings.line_search or t < 1e-4:
                break
            trial = galerkin_map(xnew.symmetrized().to_vector(m), params, ref)
            if np.max(np.abs(trial)) < res * (1 - 0.1 * t):
                break
            t /= 2
        report.symmetry_defects.append(xnew.real_defect())
        xv = xnew.symmetrized().to_vector(m)
    raise SolverError(f"no convergence in {settings.max_iter} iterations (residual {report.residuals[-1]:.3e})", report)


def solve(seed: Seed, settings: NewtonSettings | None = None, ref: ReferenceOrbit | None = None):
    """Refine a seed with a frozen reference orbit taken from the seed itself."""
    ref = ref or default_reference(seed.x0.u, seed.params.m)
    xbar, report = newton_refine(seed, settings, ref)
    return xbar, ref, report


# --------------------------------------------------------------------------
# continuation in the frequency
# --------------------------------------------------------------------------


def continue_omega(x: StateX, params: ProblemParams, omega_from: float, omega_to: float, steps: int,
                   settings: NewtonSettings | None = None, ref: ReferenceOrbit | None = None) -> list[StateX]:
    """Natural-parameter continuation over ``steps`` equal frequency increments.

    With ``omega_from == omega_to`` this is a single refinement.  A failing step
    raises :class:`SolverError` whose ``partial`` holds the states computed so far.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    ref = ref or default_reference(x.u, params.m)
    omegas = [omega_from] if omega_from == omega_to else list(np.linspace(omega_from, omega_to, steps + 1)[1:])
    out: list[StateX] = []
    cur = x
    for i, om in enumerate(omegas):
        p_i = params.with_omega(float(om))
        try:
            cur, _ = newton_refine(cur, settings, ref, p_i)
        except SolverError as exc:
            raise SolverError(f"continuation step {i} (omega={om:.15g}) failed: {exc}", exc.report, out) from exc
        out.append(cur)
    return out
