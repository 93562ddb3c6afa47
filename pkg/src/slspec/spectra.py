"""Eigenvalue detection by projective shooting and the stability classifiers.

E is an eigenvalue exactly when the solution admitted by the left boundary
angle, pushed through every jump, lands on the right boundary class.  In
floating point that membership is tolerance-relative, so every report
carries the raw angular mismatch for consumers to re-threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import Problem, propagate_through, with_site_params
from .sl2 import ProjPoint, alpha_fixed_class, proj_class, r_fixed_classes
from .transfer import DEFAULT_STEP, StepControl

ALL_VALUES = "AllValues"
ONLY_ORIGINAL = "OnlyOriginal"
PERIODIC_IN_THETA = "PeriodicInTheta"

PARAMETERS = ("theta", "r", "alpha")

# near-pi jumps of the signed mismatch are wrap-arounds, not roots
WRAP_GUARD = math.pi / 2


class NotAnEigenvalue(ValueError):
    """The classifier was handed an energy whose mismatch exceeds tolerance."""


class CrossCheckFailure(RuntimeError):
    """Perturbed re-tests contradicted the fixed-class verdict."""


@dataclass(frozen=True)
class EigenReport:
    """Energy, angular defect at b, and the solution classes left of each site."""

    E: float
    mismatch: float
    left_limit_classes: tuple


@dataclass(frozen=True)
class DichotomyVerdict:
    """How the eigenvalue responds when one Iwasawa parameter is varied."""

    parameter: str
    verdict: str
    matched_fixed_class: ProjPoint | None = None


def eigen_test(problem: Problem, e: float,
               step: StepControl = DEFAULT_STEP) -> EigenReport:
    """Propagate the left-admissible solution and measure the defect at b."""
    res = propagate_through(problem, e, problem.initial_state(), step)
    final_class = proj_class(res.final.u, res.final.du)
    lefts = tuple(proj_class(j.left.u, j.left.du) for j in res.jumps)
    return EigenReport(e, final_class.distance(problem.bc_right), lefts)


def matching_gamma(problem: Problem, e: float,
                   step: StepControl = DEFAULT_STEP) -> ProjPoint:
    """The unique right boundary angle making e an eigenvalue; bc_right is ignored."""
    res = propagate_through(problem, e, problem.initial_state(), step)
    return proj_class(res.final.u, res.final.du)


def boundary_mismatch(problem: Problem, e: float,
                      step: StepControl = DEFAULT_STEP) -> float:
    """Signed angular defect at b in (-pi/2, pi/2]; vanishes exactly at eigenvalues."""
    d = (matching_gamma(problem, e, step).angle - problem.bc_right.angle) % math.pi
    if d > WRAP_GUARD:
        d -= math.pi
    return d


def eigenvalues_in_range(problem: Problem, e_lo: float, e_hi: float, grid: int,
                         tol: float = 1e-10,
                         step: StepControl = DEFAULT_STEP):
    """Eigenvalues found by bracketing sign changes of the signed mismatch.

    The mismatch is evaluated at `grid` equispaced energies; each sign change
    that is not a wrap-around of the cut is refined by bisection until the
    energy bracket is narrower than tol.  Complete only up to the grid
    resolution: roots closer together than one grid cell can be missed.
    """
    if not e_lo < e_hi:
        raise ValueError("need e_lo < e_hi")
    if grid < 2:
        raise ValueError("grid must be at least 2")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    es = [e_lo + (e_hi - e_lo) * i / (grid - 1) for i in range(grid)]
    ms = [boundary_mismatch(problem, e, step) for e in es]
    found = []
    for i in range(grid - 1):
        m0, m1 = ms[i], ms[i + 1]
        if m0 == 0.0:
            found.append(es[i])
            continue
        if m0 * m1 < 0.0 and abs(m1 - m0) < WRAP_GUARD:
            lo, hi, mlo = es[i], es[i + 1], m0
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                mm = boundary_mismatch(problem, mid, step)
                if mm == 0.0:
                    lo = hi = mid
                    break
                if mm * mlo < 0.0 and abs(mm - mlo) < WRAP_GUARD:
                    hi = mid
                else:
                    lo, mlo = mid, mm
            found.append(0.5 * (lo + hi))
    if ms[-1] == 0.0:
        found.append(es[-1])
    return [eigen_test(problem, e, step) for e in sorted(found)]


# ---------------------------------------------------------------- dichotomies

_ALPHA_OFFSETS = (-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0)
_THETA_OFFSETS = (math.pi / 3, -math.pi / 4, 0.7, -1.1, 1.9, 2.5, -2.9, 0.4)
_R_FACTORS = (0.25, 0.5, 2.0, 4.0) + tuple(
    np.random.default_rng(181_818).uniform(0.1, 10.0, 4))


def _perturbed_values(params, parameter):
    if parameter == "alpha":
        return [("alpha", params.alpha + d) for d in _ALPHA_OFFSETS]
    if parameter == "r":
        return [("r", params.r * f) for f in _R_FACTORS]
    return [("theta", params.theta + d) for d in _THETA_OFFSETS]


def _retest(problem, e, site_index, field, value, tol, step):
    rep = eigen_test(with_site_params(problem, site_index, **{field: value}), e, step)
    return rep.mismatch <= tol


def _cross_check(problem, e, site_index, parameter, verdict, tol, step):
    params = problem.interactions[site_index].params
    if parameter == "theta":
        # pi-shifts keep the eigenvalue, everything else must lose it
        for field, value in [("theta", params.theta + math.pi),
                             ("theta", params.theta - math.pi)]:
            if not _retest(problem, e, site_index, field, value, tol, step):
                raise CrossCheckFailure(f"theta shift by pi lost E = {e}")
        expect_keep = False
    else:
        expect_keep = verdict == ALL_VALUES
    outcomes = [_retest(problem, e, site_index, field, value, tol, step)
                for field, value in _perturbed_values(params, parameter)]
    if any(o != expect_keep for o in outcomes):
        raise CrossCheckFailure(
            f"{parameter} verdict {verdict} contradicted by re-tests {outcomes}")


def classify_dichotomy(problem: Problem, e: float, site_index: int, parameter: str,
                       tol: float = 1e-6, step: StepControl = DEFAULT_STEP,
                       cross_check: bool = True,
                       class_tol: float | None = None) -> DichotomyVerdict:
    """Decide whether varying one Iwasawa parameter at one site keeps e an eigenvalue.

    theta always yields PeriodicInTheta (pi-shifts and nothing else keep the
    eigenvalue).  For r and alpha the verdict is AllValues exactly when the
    eigenfunction's class just left of the site lies on the corresponding
    fixed class(es); for r the matched class is reported since the two fixed
    classes arise differently.  With cross_check the verdict is confirmed by
    re-testing 8 perturbed parameter values.
    """
    if parameter not in PARAMETERS:
        raise ValueError(f"parameter must be one of {PARAMETERS}")
    if not 0 <= site_index < len(problem.interactions):
        raise ValueError(f"no interaction site #{site_index}")
    report = eigen_test(problem, e, step)
    if report.mismatch > tol:
        raise NotAnEigenvalue(
            f"E = {e} has mismatch {report.mismatch:.3e} > tol {tol}")
    params = problem.interactions[site_index].params
    cls = report.left_limit_classes[site_index]
    ctol = tol if class_tol is None else class_tol
    matched = None
    if parameter == "theta":
        verdict = PERIODIC_IN_THETA
    elif parameter == "r":
        first, second = r_fixed_classes(params)
        if cls.distance(first) <= ctol:
            matched = first
        elif cls.distance(second) <= ctol:
            matched = second
        verdict = ALL_VALUES if matched is not None else ONLY_ORIGINAL
    else:
        fixed = alpha_fixed_class(params)
        if cls.distance(fixed) <= ctol:
            matched = fixed
        verdict = ALL_VALUES if matched is not None else ONLY_ORIGINAL
    if cross_check:
        _cross_check(problem, e, site_index, parameter, verdict, tol, step)
    return DichotomyVerdict(parameter, verdict, matched)
