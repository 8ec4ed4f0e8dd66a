"""Channel cross-section geometry and its resistance integral.

The channel is described by a strictly positive cross-section area profile
h(x) on [0, 1] together with two junction points 0 < x1 < x2 < 1 that bound
the charged middle region.  All downstream formulas consume the geometry
only through the resistance integral H(x) = integral_0^x ds/h(s) and the
normalized factors alpha = H(x1)/H(1), beta = H(x2)/H(1).

Profiles come in four flavors: constant, piecewise-constant steps, tabulated
samples with linear interpolation (integrated in closed form), and arbitrary
callables (integrated by adaptive Simpson quadrature).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DomainError, InvalidProfileError

# Quadrature fallback for callable profiles: absolute tolerance and a hard
# cap on the number of subdivided intervals (exceeding the cap is an error,
# never a silent accuracy loss).
QUAD_TOL = 1e-12
QUAD_MAX_INTERVALS = 2 ** 20


def _check_unit_interval(x):
    if np.any(np.asarray(x) < 0.0) or np.any(np.asarray(x) > 1.0):
        raise DomainError(f"position {x!r} outside [0, 1]")


class ConstantProfile:
    """h(x) = value everywhere."""

    def __init__(self, value):
        if not value > 0.0:
            raise InvalidProfileError(f"profile value must be positive, got {value}")
        self.value = float(value)

    def area(self, x):
        _check_unit_interval(x)
        return np.full_like(np.asarray(x, dtype=float), self.value) if np.ndim(x) else self.value

    def resistance(self, x):
        _check_unit_interval(x)
        return np.asarray(x, dtype=float) / self.value if np.ndim(x) else float(x) / self.value

    def spec(self):
        return {"type": "constant", "value": self.value}


class StepProfile:
    """Piecewise-constant h: values[j] on the j-th segment.

    ``breakpoints`` are the interior jump locations (strictly increasing,
    inside (0, 1)); ``values`` has one more entry than ``breakpoints``.
    """

    def __init__(self, breakpoints, values):
        bp = [float(b) for b in breakpoints]
        vals = [float(v) for v in values]
        if len(vals) != len(bp) + 1:
            raise InvalidProfileError("steps profile needs len(values) == len(breakpoints) + 1")
        if any(not v > 0.0 for v in vals):
            raise InvalidProfileError("all step values must be positive")
        knots = [0.0] + bp + [1.0]
        if any(b - a <= 0.0 for a, b in zip(knots, knots[1:])):
            raise InvalidProfileError("breakpoints must be strictly increasing inside (0, 1)")
        self.knots = np.asarray(knots)
        self.values = np.asarray(vals)
        # cumulative resistance at the knots, exact for step functions
        seg = np.diff(self.knots) / self.values
        self._cum = np.concatenate(([0.0], np.cumsum(seg)))

    def _segment(self, x):
        idx = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(idx, 0, len(self.values) - 1)

    def area(self, x):
        _check_unit_interval(x)
        out = self.values[self._segment(np.asarray(x, dtype=float))]
        return out if np.ndim(x) else float(out)

    def resistance(self, x):
        _check_unit_interval(x)
        xa = np.asarray(x, dtype=float)
        j = self._segment(xa)
        out = self._cum[j] + (xa - self.knots[j]) / self.values[j]
        return out if np.ndim(x) else float(out)

    def spec(self):
        return {
            "type": "steps",
            "breakpoints": [float(b) for b in self.knots[1:-1]],
            "values": [float(v) for v in self.values],
        }


class TableProfile:
    """Tabulated h samples with linear interpolation between them.

    1/h of a linear function has a logarithmic antiderivative, so the
    resistance integral is evaluated in closed form segment by segment with
    no quadrature error to accumulate.
    """

    def __init__(self, x, h):
        xs = np.asarray([float(v) for v in x])
        hs = np.asarray([float(v) for v in h])
        if xs.shape != hs.shape or xs.size < 2:
            raise InvalidProfileError("table profile needs matching x/h arrays of length >= 2")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise InvalidProfileError("table x grid must start at 0 and end at 1")
        if np.any(np.diff(xs) <= 0.0):
            raise InvalidProfileError("table x grid must be strictly increasing")
        if np.any(hs <= 0.0):
            raise InvalidProfileError("all table h samples must be positive")
        self.x = xs
        self.h = hs
        self._cum = np.concatenate(([0.0], np.cumsum(self._segment_resistance(xs[:-1], xs[1:]))))

    def _segment_resistance(self, xa, xb):
        # exact integral of 1/h over [xa, xb] with h linear on each segment
        ha = self._interp(xa)
        hb = self._interp(xb)
        dx = xb - xa
        u = (hb - ha) / ha
        small = np.abs(u) < 1e-8
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = dx * np.log(hb / ha) / (hb - ha)
        series = dx / ha * (1.0 - u / 2.0 + u * u / 3.0)
        return np.where(small, series, exact)

    def _interp(self, x):
        return np.interp(x, self.x, self.h)

    def area(self, x):
        _check_unit_interval(x)
        out = self._interp(np.asarray(x, dtype=float))
        return out if np.ndim(x) else float(out)

    def resistance(self, x):
        _check_unit_interval(x)
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        j = np.clip(np.searchsorted(self.x, xa, side="right") - 1, 0, self.x.size - 2)
        partial = self._segment_resistance(self.x[j], xa)
        out = self._cum[j] + partial
        return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])

    def spec(self):
        return {"type": "table", "x": [float(v) for v in self.x], "h": [float(v) for v in self.h]}


class FuncProfile:
    """User-supplied h(x) callable, integrated by adaptive Simpson quadrature.

    The callable must accept a scalar and return a positive scalar; vector
    evaluation falls back to a loop.  ``splits`` lists interior points where
    the integrand may lose smoothness (junctions are always added by
    :func:`build_geometry`).
    """

    def __init__(self, fn, splits=()):
        self.fn = fn
        self.splits = tuple(sorted(float(s) for s in splits))

    def area(self, x):
        if np.ndim(x):
            _check_unit_interval(x)
            return np.asarray([self._eval(float(v)) for v in np.asarray(x).ravel()]).reshape(np.shape(x))
        _check_unit_interval(x)
        return self._eval(float(x))

    def _eval(self, x):
        v = float(self.fn(x))
        if not v > 0.0:
            raise InvalidProfileError(f"profile sample h({x}) = {v} is not positive")
        return v

    def resistance(self, x):
        if np.ndim(x):
            return np.asarray([self.resistance(float(v)) for v in np.asarray(x).ravel()]).reshape(np.shape(x))
        _check_unit_interval(x)
        x = float(x)
        cuts = [0.0] + [s for s in self.splits if 0.0 < s < x] + [x]
        total = 0.0
        budget = [QUAD_MAX_INTERVALS]
        for a, b in zip(cuts, cuts[1:]):
            total += _adaptive_simpson(lambda t: 1.0 / self._eval(t), a, b, QUAD_TOL, budget)
        return total

    def spec(self):
        raise ConfigurationError("callable profiles cannot be serialized to a config file")


def _adaptive_simpson(f, a, b, tol, budget):
    """Adaptive Simpson with Richardson extrapolation and a subdivision cap."""
    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_step(f, a, b, fa, fm, fb, whole, tol, budget)


def _simpson_step(f, a, b, fa, fm, fb, whole, tol, budget):
    m = 0.5 * (a + b)
    flm = f(0.5 * (a + m))
    frm = f(0.5 * (m + b))
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    budget[0] -= 2
    if budget[0] < 0:
        raise ConvergenceError(
            f"adaptive quadrature exceeded {QUAD_MAX_INTERVALS} intervals (tol {tol})"
        )
    err = left + right - whole
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    half = 0.5 * tol
    return _simpson_step(f, a, m, fa, flm, fm, left, half, budget) + _simpson_step(
        f, m, b, fm, frm, fb, right, half, budget
    )


@dataclass(frozen=True)
class ChannelGeometry:
    """Immutable channel description with precomputed resistance factors.

    H1 is the total resistance H(1); alpha and beta are H(x1)/H(1) and
    H(x2)/H(1).  Instances are safe to share between threads.
    """

    profile: object
    x1: float
    x2: float
    H1: float
    alpha: float
    beta: float

    def resistance(self, x):
        return self.profile.resistance(x)

    def area(self, x):
        return self.profile.area(x)


def resistance_integral(profile, x):
    """H(x): the resistance integral of 1/h from 0 to x."""
    _check_unit_interval(x)
    return profile.resistance(x)


def build_geometry(profile, x1, x2):
    """Assemble a :class:`ChannelGeometry`, validating junction ordering."""
    x1 = float(x1)
    x2 = float(x2)
    if not (0.0 < x1 < x2 < 1.0):
        raise ConfigurationError(f"junctions must satisfy 0 < x1 < x2 < 1, got {x1}, {x2}")
    if isinstance(profile, FuncProfile) and not set((x1, x2)) <= set(profile.splits):
        profile = FuncProfile(profile.fn, splits=set(profile.splits) | {x1, x2})
    H1 = resistance_integral(profile, 1.0)
    alpha = resistance_integral(profile, x1) / H1
    beta = resistance_integral(profile, x2) / H1
    if not (0.0 < alpha < beta < 1.0):
        raise InvalidProfileError(
            f"resistance factors out of order (alpha={alpha}, beta={beta}); profile invalid"
        )
    return ChannelGeometry(profile=profile, x1=x1, x2=x2, H1=H1, alpha=alpha, beta=beta)


def profile_from_spec(spec):
    """Build a profile from its configuration mapping (documented schema)."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigurationError("geometry.profile must be a mapping with a 'type' key")
    kind = spec["type"]
    try:
        if kind == "constant":
            return ConstantProfile(spec["value"])
        if kind == "steps":
            return StepProfile(spec["breakpoints"], spec["values"])
        if kind == "table":
            return TableProfile(spec["x"], spec["h"])
    except KeyError as exc:
        raise ConfigurationError(f"geometry.profile missing key {exc}") from exc
    except InvalidProfileError as exc:
        raise ConfigurationError(f"geometry.profile: {exc}") from exc
    raise ConfigurationError(f"unknown profile type {kind!r}")
