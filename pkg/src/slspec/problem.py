"""Full spectral problems: interval, potential, ordered jumps, boundary angles.

A boundary angle psi admits the solutions with (u, u') proportional to
(sin psi, cos psi) at the endpoint, i.e. u cos(psi) - u' sin(psi) = 0, so the
admissible data at angle psi is exactly the projective point of angle psi.
At each interior site x_n the data jumps by left-multiplication with the
interaction matrix P_alpha H_r E_theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .sl2 import IwasawaParams, ProjPoint, iwasawa_compose
from .transfer import (
    DEFAULT_STEP,
    DomainError,
    Potential,
    SolutionState,
    StepControl,
    potential_from_json,
    potential_to_json,
    propagate_state,
)


@dataclass(frozen=True)
class PointInteraction:
    """One jump site: location x and the Iwasawa data of its matrix."""

    x: float
    params: IwasawaParams


@dataclass(frozen=True)
class Problem:
    """The operator on [a, b] with potential, ordered jumps, and boundary angles."""

    a: float
    b: float
    potential: Potential
    interactions: tuple
    bc_left: ProjPoint
    bc_right: ProjPoint

    def __post_init__(self):
        object.__setattr__(self, "interactions", tuple(self.interactions))
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("endpoints must be finite (regular problems only)")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        lo, hi = self.potential.domain
        if not (lo <= self.a and self.b <= hi):
            raise DomainError(f"potential domain [{lo}, {hi}] does not cover "
                              f"[{self.a}, {self.b}]")
        xs = [p.x for p in self.interactions]
        if any(not self.a < x < self.b for x in xs):
            raise ValueError("interaction locations must lie strictly inside (a, b)")
        if any(q <= p for p, q in zip(xs, xs[1:])):
            raise ValueError("interaction locations must be strictly increasing")

    def initial_state(self) -> SolutionState:
        """Unit data at a admitted by the left boundary angle."""
        return SolutionState(self.a, math.sin(self.bc_left.angle),
                             math.cos(self.bc_left.angle))


def with_site_params(problem: Problem, site_index: int, **changes) -> Problem:
    """Copy of the problem with one site's Iwasawa parameters replaced."""
    site = problem.interactions[site_index]
    new_site = PointInteraction(site.x, replace(site.params, **changes))
    sites = list(problem.interactions)
    sites[site_index] = new_site
    return replace(problem, interactions=tuple(sites))


@dataclass(frozen=True)
class JumpRecord:
    """States just left and just right of one site, in the propagated frame.

    right is exactly the jump matrix applied to left; no renormalization
    happens between the two.
    """

    x: float
    left: SolutionState
    right: SolutionState


@dataclass(frozen=True)
class PropagationResult:
    """Terminal state plus the per-site trace.

    The state is renormalized to unit norm after every smooth piece to keep
    large-energy runs from overflowing; log_scale accumulates the removed
    positive factors, so exp(log_scale) * (final.u, final.du) is the true
    solution data.
    """

    final: SolutionState
    log_scale: float
    jumps: tuple


def _renormalized(state, log_scale):
    n = math.hypot(state.u, state.du)
    if n == 0.0:
        return state, log_scale
    return SolutionState(state.x, state.u / n, state.du / n), log_scale + math.log(n)


def propagate_through(problem: Problem, e: float, initial: SolutionState,
                      step: StepControl = DEFAULT_STEP) -> PropagationResult:
    """Alternate smooth propagation with jump matrices, left endpoint to right."""
    if initial.x != problem.a:
        raise ValueError(f"initial state must sit at a = {problem.a}, got {initial.x}")
    if initial.u == 0.0 and initial.du == 0.0:
        raise ValueError("initial data must be nontrivial")
    v = problem.potential
    state = initial
    log_scale = 0.0
    jumps = []
    for site in problem.interactions:
        state = propagate_state(v, state, site.x, e, step)
        state, log_scale = _renormalized(state, log_scale)
        left = state
        u, du = iwasawa_compose(site.params).apply((state.u, state.du))
        state = SolutionState(site.x, u, du)
        jumps.append(JumpRecord(site.x, left, state))
    state = propagate_state(v, state, problem.b, e, step)
    state, log_scale = _renormalized(state, log_scale)
    return PropagationResult(state, log_scale, tuple(jumps))


def _continue_lift(prev, raw):
    """The representative of raw mod pi nearest to the running lift."""
    return raw + math.pi * round((prev - raw) / math.pi)


def _wrap_half_pi(d):
    """Reduce an angle difference mod pi into (-pi/2, pi/2]."""
    d = d % math.pi
    if d > math.pi / 2:
        d -= math.pi
    return d


def prufer_trace(problem: Problem, e: float, initial: SolutionState,
                 resolution: float, step: StepControl = DEFAULT_STEP):
    """Continuously lifted phase phi(x) = arg(u'(x) + i u(x)) along the problem.

    Samples at spacing <= resolution (refined further where the phase can
    turn fast); zeros of u are the points where phi crosses a multiple of pi.
    At each site the trace records the x twice: the jump's angular
    displacement is booked with the branch in (-pi/2, pi/2].
    """
    if not resolution > 0.0:
        raise ValueError("resolution must be positive")
    if initial.x != problem.a:
        raise ValueError(f"initial state must sit at a = {problem.a}, got {initial.x}")
    v = problem.potential
    state, _ = _renormalized(initial, 0.0)
    phi = math.atan2(state.u, state.du)
    out = [(state.x, phi)]
    stops = [(site.x, site.params) for site in problem.interactions]
    stops.append((problem.b, None))
    for x_stop, params in stops:
        seg_lo = state.x
        bound = max(1.0, abs(e) + v.abs_bound(seg_lo, x_stop))
        h = min(resolution, 0.45 / bound)
        n = max(1, math.ceil((x_stop - seg_lo) / h))
        for i in range(1, n + 1):
            xi = seg_lo + (x_stop - seg_lo) * i / n
            state = propagate_state(v, state, xi, e, step)
            state, _ = _renormalized(state, 0.0)
            phi = _continue_lift(phi, math.atan2(state.u, state.du))
            out.append((xi, phi))
        if params is not None:
            u, du = iwasawa_compose(params).apply((state.u, state.du))
            jump = _wrap_half_pi(math.atan2(u, du) - math.atan2(state.u, state.du))
            phi += jump
            state = SolutionState(x_stop, u, du)
            out.append((x_stop, phi))
    return out


# ------------------------------------------------------------------------ JSON

PROBLEM_KEYS = {"a", "b", "potential", "interactions", "bc_left", "bc_right"}
INTERACTION_KEYS = {"x", "alpha", "r", "theta"}


def problem_to_json(problem: Problem) -> dict:
    return {
        "a": problem.a,
        "b": problem.b,
        "potential": potential_to_json(problem.potential),
        "interactions": [
            {"x": s.x, "alpha": s.params.alpha, "r": s.params.r, "theta": s.params.theta}
            for s in problem.interactions
        ],
        "bc_left": problem.bc_left.angle,
        "bc_right": problem.bc_right.angle,
    }


def problem_from_json(obj) -> Problem:
    if not isinstance(obj, dict):
        raise ValueError("problem must be an object")
    extra = set(obj) - PROBLEM_KEYS
    missing = PROBLEM_KEYS - set(obj)
    if extra or missing:
        raise ValueError(f"problem: unknown keys {sorted(extra)}, "
                         f"missing keys {sorted(missing)}")
    sites = []
    if not isinstance(obj["interactions"], list):
        raise ValueError("interactions must be a list")
    for i, s in enumerate(obj["interactions"]):
        if not isinstance(s, dict) or set(s) != INTERACTION_KEYS:
            raise ValueError(f"interaction #{i} must have exactly the keys "
                             f"{sorted(INTERACTION_KEYS)}")
        sites.append(PointInteraction(
            float(s["x"]),
            IwasawaParams(float(s["alpha"]), float(s["r"]), float(s["theta"]))))
    return Problem(
        a=float(obj["a"]),
        b=float(obj["b"]),
        potential=potential_from_json(obj["potential"]),
        interactions=tuple(sites),
        bc_left=ProjPoint(float(obj["bc_left"])),
        bc_right=ProjPoint(float(obj["bc_right"])),
    )
