"""Explicit Runge-Kutta integration for positive-orthant systems.

Two steppers are provided: the Dormand-Prince 5(4) embedded pair with adaptive
steps, and classical fixed-step RK4.  States can be integrated in log
coordinates (``y = ln x``), which keeps them positive by construction; a
tolerance on ``ln x`` is then a relative tolerance on ``x``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

Rhs = Callable[[np.ndarray], np.ndarray]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t: float, state: np.ndarray | None = None):
        super().__init__(f"{message} (t = {t:.12g})")
        self.t = t
        self.state = state


class StepUnderflowError(IntegrationError):
    """Step size fell below ``min_step``; carries the last accepted state."""


class NonFiniteError(IntegrationError):
    """The right-hand side returned NaN or Inf."""


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "dopri5"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 5.0
    min_step: float = 1e-12
    log_space: bool = True
    positivity_guard: bool = True
    t_end: float = 100.0
    convergence_eps: float = 1e-8
    convergence_window: float = 50.0
    convergence_floor: float = 1e-6
    horizon_cap: float = 1e5

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown method {self.method!r} (dopri5 or rk4)")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be > 0")
        if not 0 < self.min_step < self.max_step:
            raise ValueError("need 0 < min_step < max_step")
        if not self.t_end > 0:
            raise ValueError("t_end must be > 0")
        if not (self.convergence_eps > 0 and self.convergence_window > 0):
            raise ValueError("convergence_eps and convergence_window must be > 0")

    def with_(self, **changes) -> "IntegratorConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Trajectory:
    """Accepted step nodes of one integration.

    ``coords`` holds the integrated coordinates (``ln x`` when ``log_space``)
    and ``slopes`` their time derivatives, used for Hermite resampling.
    """

    times: np.ndarray
    coords: np.ndarray
    slopes: np.ndarray
    log_space: bool
    converged_to: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for a in (self.times, self.coords, self.slopes):
            a.setflags(write=False)

    def __len__(self) -> int:
        return self.times.size

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def states(self) -> np.ndarray:
        if self.log_space:
            with np.errstate(over="ignore"):
                return np.exp(self.coords)
        return self.coords

    @property
    def log_states(self) -> np.ndarray:
        if self.log_space:
            return self.coords
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(self.coords)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def converged(self) -> bool:
        return self.converged_to is not None

    def resample_coords(self, t) -> np.ndarray:
        """Cubic Hermite interpolation of the integrated coordinates.
        Times coinciding with a node return that node exactly."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        T = self.times
        if np.any(t < T[0]) or np.any(t > T[-1]):
            raise ValueError("resample time outside the integrated interval")
        idx = np.clip(np.searchsorted(T, t, side="right") - 1, 0, T.size - 2)
        t0, t1 = T[idx], T[idx + 1]
        h = (t1 - t0)[:, None]
        s = ((t - t0) / (t1 - t0))[:, None]
        y0, y1 = self.coords[idx], self.coords[idx + 1]
        f0, f1 = self.slopes[idx], self.slopes[idx + 1]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        out = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        exact = np.isin(t, T)
        if exact.any():
            out[exact] = self.coords[np.searchsorted(T, t[exact])]
        return out

    def resample(self, t) -> np.ndarray:
        y = self.resample_coords(t)
        return np.exp(y) if self.log_space else y

    def at_nodes(self, t) -> np.ndarray:
        """States at times that must be integration nodes (see ``t_eval``)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.times, t)
        if np.any(idx >= self.times.size) or np.any(self.times[np.minimum(idx, self.times.size - 1)] != t):
            raise ValueError("requested times are not integration nodes")
        return self.states[idx]


class _ConvergenceWatch:
    """Flags when every sample in the trailing window lies within ``eps``
    (relative, with an absolute floor) of the newest sample."""

    def __init__(self, eps: float, window: float, floor: float):
        self.eps, self.window, self.floor = eps, window, floor
        self.buf: deque[tuple[float, np.ndarray]] = deque()

    def push(self, t: float, x: np.ndarray) -> bool:
        buf = self.buf
        buf.append((t, x))
        if not np.all(np.isfinite(x)):
            return False  # unbounded growth in log space: never "converged"
        while len(buf) > 2 and buf[1][0] <= t - self.window:
            buf.popleft()
        if t - buf[0][0] < self.window:
            return False
        tol = self.eps * (np.abs(x) + self.floor)
        old = buf[0][1]
        if not np.all(np.isfinite(old)):
            return False
        # cheap rejection against the oldest sample first
        if np.any(np.abs(buf[0][1] - x) > tol):
            return False
        arr = np.array([v for _, v in buf])
        return bool(np.all(np.abs(arr - x) <= tol))


class _Stepper:
    def __init__(self, rhs: Rhs, x0, cfg: IntegratorConfig, log_rhs: Rhs | None, t0: float):
        self.cfg = cfg
        x0 = np.array(x0, dtype=float)
        if x0.ndim != 1:
            raise ValueError("initial state must be a vector")
        if cfg.log_space or cfg.positivity_guard:
            bad = np.flatnonzero(~(x0 > 0))
            if bad.size:
                raise ValueError(f"initial state component {int(bad[0])} is not strictly positive")
        if cfg.log_space:
            if log_rhs is not None:
                self.f = log_rhs
            else:
                self.f = lambda y: rhs(np.exp(y)) / np.exp(y)
            y0 = np.log(x0)
        else:
            self.f = rhs
            y0 = x0
        self.t = float(t0)
        self.y = y0
        self.k0 = self._eval(self.t, y0)
        self.times = [self.t]
        self.coords = [y0.copy()]
        self.slopes = [self.k0.copy()]
        self.h = None
        self.watch = _ConvergenceWatch(cfg.convergence_eps, cfg.convergence_window, cfg.convergence_floor)
        self.watch.push(self.t, self._x(y0))
        self.converged = False

    def _x(self, y):
        if not self.cfg.log_space:
            return y
        with np.errstate(over="ignore"):
            return np.exp(y)

    def _eval(self, t: float, y: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            k = np.asarray(self.f(y), dtype=float)
        if not np.all(np.isfinite(k)):
            raise NonFiniteError("right-hand side is not finite", t, self._x(y))
        return k

    def _initial_h(self) -> float:
        cfg = self.cfg
        scale = self._scale(self.y, self.y)
        d0 = np.sqrt(np.mean((self.y / scale) ** 2))
        d1 = np.sqrt(np.mean((self.k0 / scale) ** 2))
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        return float(min(max(h, cfg.min_step * 10), cfg.max_step))

    def _scale(self, y, y_new):
        cfg = self.cfg
        if cfg.log_space:
            return np.full_like(y, cfg.rel_tol)
        return cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))

    def _dopri_step(self, h: float):
        t, y, k = self.t, self.y, [self.k0]
        for i in range(1, 7):
            yi = y + h * sum(a * kj for a, kj in zip(_A[i], k) if a)
            k.append(self._eval(t + _C[i] * h, yi))
        y_new = y + h * sum(b * kj for b, kj in zip(_B5, k) if b)
        err = h * sum(e * kj for e, kj in zip(_E, k) if e)
        return y_new, k[6], err

    def _rk4_step(self, h: float):
        t, y = self.t, self.y
        k1 = self.k0
        k2 = self._eval(t + h / 2, y + h / 2 * k1)
        k3 = self._eval(t + h / 2, y + h / 2 * k2)
        k4 = self._eval(t + h, y + h * k3)
        y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return y_new, self._eval(t + h, y_new)

    def _crosses_zero(self, y_new) -> bool:
        return (not self.cfg.log_space) and self.cfg.positivity_guard and bool(np.any(y_new <= 0))

    def _accept(self, t_new, y_new, k_new):
        self.t, self.y, self.k0 = t_new, y_new, k_new
        self.times.append(t_new)
        self.coords.append(y_new)
        self.slopes.append(k_new)
        if self.watch.push(t_new, self._x(y_new)):
            self.converged = True

    def advance(self, t_target: float, t_eval=(), stop_on_convergence=False):
        cfg = self.cfg
        stops = sorted(float(s) for s in t_eval if self.t < s < t_target) + [t_target]
        si = 0
        if self.h is None:
            self.h = self._initial_h() if cfg.method == "dopri5" else cfg.max_step
        while self.t < t_target:
            if stop_on_convergence and self.converged:
                return
            while stops[si] <= self.t:
                si += 1
            next_stop = stops[si]
            if cfg.method == "rk4":
                h = min(cfg.max_step, next_stop - self.t)
                y_new, k_new = self._rk4_step(h)
                while self._crosses_zero(y_new):
                    h /= 2
                    if h < cfg.min_step:
                        raise StepUnderflowError("positivity guard drove the step below min_step", self.t, self._x(self.y))
                    y_new, k_new = self._rk4_step(h)
                t_new = next_stop if h == next_stop - self.t else self.t + h
                self._accept(t_new, y_new, k_new)
                continue
            h = min(self.h, cfg.max_step)
            clipped = h >= next_stop - self.t
            if clipped:
                h = next_stop - self.t
            y_new, k_new, err = self._dopri_step(h)
            e = float(np.sqrt(np.mean((err / self._scale(self.y, y_new)) ** 2)))
            if not math.isfinite(e):
                e = math.inf
            if self._crosses_zero(y_new):
                e = max(e, 2.0)  # force a retry with a smaller step
            if e <= 1.0:
                self._accept(next_stop if clipped else self.t + h, y_new, k_new)
                factor = 5.0 if e == 0 else min(5.0, max(0.2, 0.9 * e ** -0.2))
                if not clipped or factor < 1:
                    self.h = min(h * factor, cfg.max_step)
            else:
                self.h = h * max(0.2, 0.9 * e ** -0.2) if math.isfinite(e) else h * 0.2
                if self.h < cfg.min_step:
                    raise StepUnderflowError(
                        f"step size {self.h:.3g} below min_step {cfg.min_step:.3g}", self.t, self._x(self.y)
                    )

    def trajectory(self, metadata: dict | None = None) -> Trajectory:
        times = np.array(self.times)
        coords = np.array(self.coords)
        conv = self._x(coords[-1]).copy() if self.converged and self.watch_final() else None
        return Trajectory(times, coords, np.array(self.slopes), self.cfg.log_space, conv, dict(metadata or {}))

    def watch_final(self) -> bool:
        # convergence must still hold over the trailing window of the final node
        w = self.watch
        t_last, x_last = self.times[-1], self._x(self.coords[-1])
        if t_last - w.buf[0][0] < w.window:
            return False
        tol = w.eps * (np.abs(x_last) + w.floor)
        return bool(all(np.all(np.abs(v - x_last) <= tol) for _, v in w.buf))


def integrate(
    rhs: Rhs,
    x0,
    cfg: IntegratorConfig | None = None,
    *,
    log_rhs: Rhs | None = None,
    t0: float = 0.0,
    t_eval=(),
    metadata: dict | None = None,
) -> Trajectory:
    """Integrate ``dx/dt = rhs(x)`` from ``t0`` to ``t0 + cfg.t_end``.

    ``log_rhs``, when given, is used directly as ``d(ln x)/dt`` in log-space
    mode; it should be preferred for systems whose states grow without bound.
    ``t_eval`` times are forced to be step nodes.  ``converged_to`` is set when
    the final ``convergence_window`` satisfies the drift criterion.
    """
    cfg = cfg or IntegratorConfig()
    st = _Stepper(rhs, x0, cfg, log_rhs, t0)
    st.advance(t0 + cfg.t_end, t_eval)
    return st.trajectory(metadata)


def integrate_until_converged(
    rhs: Rhs,
    x0,
    cfg: IntegratorConfig | None = None,
    *,
    log_rhs: Rhs | None = None,
    t0: float = 0.0,
    metadata: dict | None = None,
) -> Trajectory:
    """Integrate with geometrically growing horizons (t_end, 2 t_end, ...) and
    stop at the first detected convergence.  Reaching ``cfg.horizon_cap``
    without convergence returns the trajectory with ``converged_to = None`` and
    ``metadata['converged'] = False``; it is not an error, because the growing
    regimes settle only in growth-rate space."""
    cfg = cfg or IntegratorConfig()
    st = _Stepper(rhs, x0, cfg, log_rhs, t0)
    horizon = cfg.t_end
    while True:
        st.advance(t0 + horizon, stop_on_convergence=True)
        if st.converged or horizon >= cfg.horizon_cap:
            break
        horizon = min(2 * horizon, cfg.horizon_cap)
    meta = dict(metadata or {})
    meta.update(converged=st.converged, horizon=horizon)
    traj = st.trajectory(meta)
    if st.converged and traj.converged_to is None:
        traj = replace(traj, converged_to=traj.final_state.copy())
    return traj


def late_time_rate(traj: Trajectory, component: int, window: float, samples: int = 401) -> float:
    """Least-squares slope of ln(x[component]) against t over the trailing
    ``window``, on a uniform Hermite resampling of the trajectory."""
    t_end = traj.times[-1]
    if t_end - traj.times[0] < window:
        raise ValueError("trajectory is shorter than the requested window")
    t = np.linspace(t_end - window, t_end, samples)
    y = traj.resample_coords(t)[:, component]
    if not traj.log_space:
        if np.any(y <= 0):
            raise ValueError("component is not positive over the window")
        y = np.log(y)
    return float(np.polyfit(t - t.mean(), y, 1)[0])
