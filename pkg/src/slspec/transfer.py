"""Transfer matrices of -u'' + V u = E u by direct integration.

The matrix M(x, y; E) carries solution data (u, u') from y to x and is
unimodular because the Wronskian of the two canonical solutions is constant.
Piecewise-constant potentials are propagated exactly, piece by piece, with
the closed-form constant-coefficient solution; sampled (grid) potentials use
a fixed-step classic fourth-order method whose step is halved until two
successive answers agree within the requested tolerance.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from .sl2 import Mat2


class IntegrationFailure(RuntimeError):
    """Step control could not reach the requested tolerance."""


class DomainError(ValueError):
    """Evaluation point outside the potential's domain."""


@dataclass(frozen=True)
class StepControl:
    """Integration accuracy: target tolerance plus refinement and work limits.

    The base step is tol**(1/4); refinement halves it until two successive
    passes agree entrywise within tol.  For hyperbolically growing solutions
    the tolerance acts relative to the solution size, since that is the best
    any floating-point propagation can promise.
    """

    tol: float = 1e-9
    max_refine: int = 8
    max_steps: int = 500_000

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tolerance must be positive")

    def base_step(self) -> float:
        return self.tol ** 0.25


DEFAULT_STEP = StepControl()


@dataclass(frozen=True)
class SolutionState:
    """Solution data (u(x), u'(x)) at position x."""

    x: float
    u: float
    du: float


# ------------------------------------------------------------------ potentials

@dataclass(frozen=True)
class ConstantPotential:
    """V(x) = value on the whole line."""

    value: float
    is_piecewise_constant = True

    @property
    def domain(self):
        return (-math.inf, math.inf)

    def __call__(self, x):
        return self.value

    def cuts(self, lo, hi):
        return ()

    def abs_bound(self, lo, hi):
        return abs(self.value)


@dataclass(frozen=True)
class PiecewisePotential:
    """Piecewise-constant V: values[i] on [breakpoints[i], breakpoints[i+1])."""

    breakpoints: tuple
    values: tuple
    is_piecewise_constant = True

    def __post_init__(self):
        bp = tuple(float(t) for t in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) < 2 or len(vals) != len(bp) - 1:
            raise ValueError("need n+1 breakpoints for n piece values")
        if any(q <= p for p, q in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if not all(map(math.isfinite, bp + vals)):
            raise ValueError("breakpoints and values must be finite")

    @property
    def domain(self):
        return (self.breakpoints[0], self.breakpoints[-1])

    def __call__(self, x):
        lo, hi = self.domain
        if not lo <= x <= hi:
            raise DomainError(f"x = {x!r} outside [{lo}, {hi}]")
        i = bisect_right(self.breakpoints, x) - 1
        return self.values[min(i, len(self.values) - 1)]

    def cuts(self, lo, hi):
        return tuple(t for t in self.breakpoints[1:-1] if lo < t < hi)

    def abs_bound(self, lo, hi):
        i = max(bisect_right(self.breakpoints, lo) - 1, 0)
        j = min(bisect_right(self.breakpoints, hi), len(self.values))
        return max(abs(v) for v in self.values[i:max(j, i + 1)])


@dataclass(frozen=True)
class GridPotential:
    """V sampled on strictly increasing nodes, linearly interpolated between them."""

    x: tuple
    values: tuple
    is_piecewise_constant = False

    def __post_init__(self):
        xs = tuple(float(t) for t in self.x)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "values", vals)
        if len(xs) < 2 or len(vals) != len(xs):
            raise ValueError("need matching node and value arrays, at least 2 nodes")
        if any(q <= p for p, q in zip(xs, xs[1:])):
            raise ValueError("grid nodes must be strictly increasing")
        if not all(map(math.isfinite, xs + vals)):
            raise ValueError("nodes and values must be finite")

    @property
    def domain(self):
        return (self.x[0], self.x[-1])

    def __call__(self, t):
        lo, hi = self.domain
        if not lo <= t <= hi:
            raise DomainError(f"x = {t!r} outside [{lo}, {hi}]")
        i = min(max(bisect_right(self.x, t) - 1, 0), len(self.x) - 2)
        x0, x1 = self.x[i], self.x[i + 1]
        w = (t - x0) / (x1 - x0)
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def cuts(self, lo, hi):
        return tuple(t for t in self.x[1:-1] if lo < t < hi)

    def abs_bound(self, lo, hi):
        # linear interpolation attains its extrema at the nodes
        i = max(bisect_right(self.x, lo) - 1, 0)
        j = min(bisect_right(self.x, hi) + 1, len(self.x))
        return max(abs(v) for v in self.values[i:max(j, i + 1)])


def potential_to_json(v) -> dict:
    if isinstance(v, ConstantPotential):
        return {"kind": "constant", "value": v.value}
    if isinstance(v, PiecewisePotential):
        return {"kind": "piecewise", "breakpoints": list(v.breakpoints),
                "values": list(v.values)}
    if isinstance(v, GridPotential):
        return {"kind": "grid", "x": list(v.x), "values": list(v.values)}
    raise TypeError(f"not a potential: {v!r}")


def potential_from_json(obj) -> "Potential":
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("potential must be an object with a 'kind' field")
    kind = obj["kind"]
    fields = {"constant": {"kind", "value"},
              "piecewise": {"kind", "breakpoints", "values"},
              "grid": {"kind", "x", "values"}}
    if kind not in fields:
        raise ValueError(f"unknown potential kind {kind!r}")
    extra = set(obj) - fields[kind]
    missing = fields[kind] - set(obj)
    if extra or missing:
        raise ValueError(f"potential kind {kind!r}: unknown keys {sorted(extra)}, "
                         f"missing keys {sorted(missing)}")
    if kind == "constant":
        return ConstantPotential(float(obj["value"]))
    if kind == "piecewise":
        return PiecewisePotential(tuple(obj["breakpoints"]), tuple(obj["values"]))
    return GridPotential(tuple(obj["x"]), tuple(obj["values"]))


Potential = ConstantPotential | PiecewisePotential | GridPotential


# ----------------------------------------------------------------- propagation

def _check_domain(v, t):
    lo, hi = v.domain
    if not lo <= t <= hi:
        raise DomainError(f"x = {t!r} outside potential domain [{lo}, {hi}]")


def _const_coeff_matrix(w2, dx):
    """Exact solution matrix across a piece with constant E - V = w2.

    Maps (u, u') at 0 to (u, u') at dx; works for either sign of dx.  The
    oscillatory, hyperbolic, and near-degenerate regimes share the form
    [[C, dx*S], [-w2*dx*S, C]] with C, S the trig/hyperbolic pair in z = w2*dx^2.
    """
    z = w2 * dx * dx
    if z > 1e-10:
        rz = math.sqrt(z)
        c = math.cos(rz)
        s = math.sin(rz) / rz
    elif z < -1e-10:
        rz = math.sqrt(-z)
        c = math.cosh(rz)
        s = math.sinh(rz) / rz
    else:
        c = 1.0 - z / 2.0 + z * z / 24.0
        s = 1.0 - z / 6.0 + z * z / 120.0
    return Mat2(c, dx * s, -w2 * dx * s, c)


def _walk_points(v, y, x):
    """Segment endpoints from y to x, split at the potential's cut points."""
    lo, hi = (y, x) if x >= y else (x, y)
    cuts = list(v.cuts(lo, hi))
    if x < y:
        cuts.reverse()
    return [y] + cuts + [x]


def _exact_matrix(v, x, y, e):
    pts = _walk_points(v, y, x)
    m = Mat2.identity()
    for p, q in zip(pts, pts[1:]):
        if q == p:
            continue
        m = _const_coeff_matrix(e - v(0.5 * (p + q)), q - p) @ m
    return m


def _rk4_matrix_pass(v, pts, e, h_target):
    """One fixed-step pass integrating the fundamental matrix M' = [[0,1],[V-E,0]] M."""
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    for p, q in zip(pts, pts[1:]):
        if q == p:
            continue
        n = max(1, math.ceil(abs(q - p) / h_target))
        h = (q - p) / n
        for i in range(n):
            # positional stepping keeps the endpoints exactly inside the domain
            x = p + (q - p) * i / n
            x1 = q if i == n - 1 else p + (q - p) * (i + 1) / n
            w0 = v(x) - e
            wh = v(x + 0.5 * h) - e
            w1 = v(x1) - e
            # k = (a', b', c', d') with a' = c, b' = d, c' = w a, d' = w b
            k1a, k1b, k1c, k1d = c, d, w0 * a, w0 * b
            a2, b2, c2, d2 = (a + 0.5 * h * k1a, b + 0.5 * h * k1b,
                              c + 0.5 * h * k1c, d + 0.5 * h * k1d)
            k2a, k2b, k2c, k2d = c2, d2, wh * a2, wh * b2
            a3, b3, c3, d3 = (a + 0.5 * h * k2a, b + 0.5 * h * k2b,
                              c + 0.5 * h * k2c, d + 0.5 * h * k2d)
            k3a, k3b, k3c, k3d = c3, d3, wh * a3, wh * b3
            a4, b4, c4, d4 = a + h * k3a, b + h * k3b, c + h * k3c, d + h * k3d
            k4a, k4b, k4c, k4d = c4, d4, w1 * a4, w1 * b4
            a += h * (k1a + 2 * k2a + 2 * k3a + k4a) / 6.0
            b += h * (k1b + 2 * k2b + 2 * k3b + k4b) / 6.0
            c += h * (k1c + 2 * k2c + 2 * k3c + k4c) / 6.0
            d += h * (k1d + 2 * k2d + 2 * k3d + k4d) / 6.0
    return Mat2(a, b, c, d)


def _rk4_state_pass(v, pts, e, h_target, u, du):
    for p, q in zip(pts, pts[1:]):
        if q == p:
            continue
        n = max(1, math.ceil(abs(q - p) / h_target))
        h = (q - p) / n
        for i in range(n):
            x = p + (q - p) * i / n
            x1 = q if i == n - 1 else p + (q - p) * (i + 1) / n
            w0 = v(x) - e
            wh = v(x + 0.5 * h) - e
            w1 = v(x1) - e
            k1u, k1d = du, w0 * u
            u2, d2 = u + 0.5 * h * k1u, du + 0.5 * h * k1d
            k2u, k2d = d2, wh * u2
            u3, d3 = u + 0.5 * h * k2u, du + 0.5 * h * k2d
            k3u, k3d = d3, wh * u3
            u4, d4 = u + h * k3u, du + h * k3d
            k4u, k4d = d4, w1 * u4
            u += h * (k1u + 2 * k2u + 2 * k3u + k4u) / 6.0
            du += h * (k1d + 2 * k2d + 2 * k3d + k4d) / 6.0
    return u, du


def _refine(step, pts, one_pass, diff):
    """Halve the step until two successive passes agree within step.tol."""
    length = sum(abs(q - p) for p, q in zip(pts, pts[1:]))
    h = step.base_step()
    prev = None
    for _ in range(step.max_refine + 1):
        if length / h > step.max_steps:
            raise IntegrationFailure(
                f"step budget {step.max_steps} exhausted before tolerance {step.tol}")
        cur = one_pass(h)
        if prev is not None and diff(cur, prev) <= step.tol:
            return cur
        prev = cur
        h *= 0.5
    raise IntegrationFailure(
        f"no convergence within {step.max_refine} refinements at tolerance {step.tol}")


def transfer_matrix(v, x, y, e, step: StepControl = DEFAULT_STEP,
                    method: str = "auto", project_sl2: bool = False) -> Mat2:
    """M(x, y; E): columns are the solutions with identity data at y, evaluated at x.

    method 'auto' propagates piecewise-constant potentials exactly and grid
    potentials with the step-controlled integrator; 'exact' and 'rk4' force
    one route.  Determinant drift is checked against 10x the tolerance and
    never repaired silently; project_sl2=True rescales by det**-0.5.
    """
    if method not in ("auto", "exact", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    _check_domain(v, x)
    _check_domain(v, y)
    if x == y:
        return Mat2.identity()
    if method == "exact" and not v.is_piecewise_constant:
        raise ValueError("exact propagation needs a piecewise-constant potential")
    use_exact = method == "exact" or (method == "auto" and v.is_piecewise_constant)
    if use_exact:
        m = _exact_matrix(v, x, y, e)
    else:
        pts = _walk_points(v, y, x)

        def mat_diff(p, q):
            scale = max(1.0, max(abs(t) for t in q.entries()))
            return max(abs(s - t) for s, t in zip(p.entries(), q.entries())) / scale

        m = _refine(step, pts, lambda h: _rk4_matrix_pass(v, pts, e, h), mat_diff)
    # det is a quadratic form in the entries, so its roundoff floor scales
    # with the squared matrix size
    det_scale = max(1.0, max(abs(t) for t in m.entries()) ** 2)
    if abs(m.det - 1.0) > 10.0 * step.tol * det_scale:
        raise IntegrationFailure(
            f"determinant drift {m.det - 1.0:.3e} exceeds 10x tolerance {step.tol}")
    if project_sl2:
        s = 1.0 / math.sqrt(m.det)
        m = Mat2(m.a * s, m.b * s, m.c * s, m.d * s)
    return m


def propagate_state(v, state: SolutionState, x_target, e,
                    step: StepControl = DEFAULT_STEP, method: str = "auto") -> SolutionState:
    """Carry a single solution from state.x to x_target by direct integration.

    Agrees with applying transfer_matrix(v, x_target, state.x, e) to (u, u')
    within the integration tolerance, at half the cost.
    """
    if method not in ("auto", "exact", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    _check_domain(v, state.x)
    _check_domain(v, x_target)
    if x_target == state.x:
        return state
    if method == "exact" and not v.is_piecewise_constant:
        raise ValueError("exact propagation needs a piecewise-constant potential")
    use_exact = method == "exact" or (method == "auto" and v.is_piecewise_constant)
    pts = _walk_points(v, state.x, x_target)
    if use_exact:
        u, du = state.u, state.du
        for p, q in zip(pts, pts[1:]):
            if q == p:
                continue
            u, du = _const_coeff_matrix(e - v(0.5 * (p + q)), q - p).apply((u, du))
    else:
        def vec_diff(p, q):
            scale = max(1.0, abs(q[0]), abs(q[1]))
            return max(abs(p[0] - q[0]), abs(p[1] - q[1])) / scale

        u, du = _refine(step, pts,
                        lambda h: _rk4_state_pass(v, pts, e, h, state.u, state.du),
                        vec_diff)
    return SolutionState(x_target, u, du)
