"""Global-stability machinery: the semi-invariant of the finite regime, the
diagonal Lyapunov functions of the reduced planar systems, the existence and
stability inequalities, and trajectory-level certification.

The finite-regime argument is two-stage.  ``f = X3/X2 - k_bar`` obeys
``df/dt = -X3 f``, so every trajectory approaches the invariant plane
``X3 = k_bar X2``; on that plane the dynamics reduce to a planar LV system
whose Lyapunov function ``V`` decreases.  ``V`` is *not* monotone along
off-plane 3-D trajectories, so V-monotonicity is always checked on a reduced
(in-plane) trajectory.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .integrator import IntegratorConfig, Trajectory, integrate, integrate_until_converged
from .model import (
    DerivedParams,
    ModelParams,
    NonexistenceError,
    Regime,
    StateX,
    ValidationError,
    build_system,
    check_regime,
    delta1,
    derive_params,
    eigenvalues_finite,
    exp_rt_fixed_points,
    fixed_point_finite,
    fixed_point_infinite,
)
from .qp import LVSystem, lv_rhs

MARGIN_TOL = 1e-12
V_SLACK = 1e-10

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass(frozen=True)
class Condition:
    name: str
    inequality: str
    margin: float
    enforced: bool = True

    @property
    def status(self) -> str:
        if abs(self.margin) <= MARGIN_TOL:
            return INCONCLUSIVE
        return PASS if self.margin > 0 else FAIL

    @property
    def satisfied(self) -> bool | None:
        s = self.status
        return None if s == INCONCLUSIVE else s == PASS


@dataclass
class StabilityReport:
    regime: Regime
    conditions: list[Condition]
    attractor: StateX | None
    attractor_label: str
    lyapunov_monotone: bool | None = None
    semi_invariant_decay: bool | None = None
    terminal_error: float | None = None
    terminal_ok: bool | None = None
    notes: list[str] = field(default_factory=list)

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.conditions if c.enforced and c.status == FAIL]

    @property
    def inconclusive(self) -> bool:
        return any(c.enforced and c.status == INCONCLUSIVE for c in self.conditions)

    @property
    def conditions_hold(self) -> bool:
        return all(c.status == PASS for c in self.conditions if c.enforced)

    @property
    def certified(self) -> bool:
        checks = [self.conditions_hold, self.terminal_ok is not False]
        checks += [flag is not False for flag in (self.lyapunov_monotone, self.semi_invariant_decay)]
        return all(checks) and self.terminal_ok is not None

    def rows(self) -> list[list[str]]:
        out = [["item", "detail", "status", "margin"]]
        for c in self.conditions:
            tag = c.status if c.enforced else f"{c.status} (informational)"
            out.append([c.name, c.inequality, tag, f"{c.margin:.12g}"])
        fp = "" if self.attractor is None else " ".join(f"{v:.12g}" for v in self.attractor.as_array())
        out.append(["attractor", f"{self.attractor_label} {fp}".strip(), "", ""])
        for name, flag in (
            ("lyapunov_monotone", self.lyapunov_monotone),
            ("semi_invariant_decay", self.semi_invariant_decay),
            ("terminal_ok", self.terminal_ok),
        ):
            out.append([name, "", "n/a" if flag is None else str(flag).lower(), ""])
        if self.terminal_error is not None:
            out.append(["terminal_error", "", "", f"{self.terminal_error:.12g}"])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.rows())
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"regime: {self.regime.value}"]
        for c in self.conditions:
            extra = "" if c.enforced else " [informational]"
            lines.append(f"  {c.name:<22} {c.inequality:<48} {c.status:<12} margin={c.margin:.5g}{extra}")
        if self.attractor is not None:
            pt = ", ".join(f"{v:.5g}" for v in self.attractor.as_array())
            lines.append(f"  attractor: {self.attractor_label} ({pt})")
        else:
            lines.append(f"  attractor: {self.attractor_label}")
        for name in ("lyapunov_monotone", "semi_invariant_decay", "terminal_ok"):
            v = getattr(self, name)
            lines.append(f"  {name}: {'n/a' if v is None else v}")
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


# --- semi-invariant and Lyapunov function -------------------------------------

def semi_invariant_f(dp: DerivedParams, x) -> float:
    x = x.as_array() if isinstance(x, StateX) else np.asarray(x, dtype=float)
    if not x[1] > 0:
        raise ValidationError(f"X2 must be > 0, got {x[1]!r}")
    return float(x[2] / x[1] - dp.k_bar)


def lyapunov_weights(p: ModelParams) -> tuple[float, float]:
    return 1.0, p.alpha2 / p.beta1


def _as2(x) -> np.ndarray:
    arr = x.as_array() if isinstance(x, StateX) else np.asarray(x, dtype=float)
    return arr[..., :2]


def lyapunov_V(fp, weights, x) -> np.ndarray | float:
    """sum_i w_i fp_i (u_i - ln u_i - 1), u = x/fp, over (X1, X2).

    Accepts a single state or a stack of states (rows)."""
    fp, x = _as2(fp), _as2(x)
    if np.any(fp <= 0) or np.any(x <= 0):
        raise ValidationError("lyapunov_V needs strictly positive fp and x")
    w = np.asarray(weights, dtype=float)
    lu = np.log(x / fp)
    # u - ln u - 1 = expm1(ln u) - ln u, accurate near u = 1
    V = np.sum(w * fp * (np.expm1(lu) - lu), axis=-1)
    return float(V) if np.ndim(V) == 0 else V


def _x2_coefficient(p: ModelParams, dp: DerivedParams, regime: Regime) -> float:
    if regime is Regime.FINITE:
        return p.alpha2 * p.beta2 / p.beta1
    return p.alpha2 * (dp.k_bar + p.beta2) / p.beta1


def lyapunov_dVdt(p: ModelParams, dp: DerivedParams, fp, x, regime: Regime | str) -> float:
    """Closed-form dV/dt along the reduced planar flow.  Non-positive whenever
    k_bar >= -beta2 (always in the finite regime); at k_bar = -beta2 the X2 term
    vanishes."""
    regime = Regime.parse(regime)
    fp, x = _as2(fp), _as2(x)
    d = x - fp
    return float(-((1 - p.alpha1) * d[0] ** 2 + _x2_coefficient(p, dp, regime) * d[1] ** 2))


def reduced_system(p: ModelParams, regime: Regime | str) -> LVSystem:
    """Planar LV system carrying the Lyapunov argument: the invariant plane
    f = 0 (finite regime) or the X3 = 0 face (infinite/exponential)."""
    regime = Regime.parse(regime)
    dp = derive_params(p)
    a1, a2, b1, b2 = p.alpha1, p.alpha2, p.beta1, p.beta2
    l = [1 - a1 + dp.b_bar * a2, -b1 + dp.b_bar * b2]
    m22 = -b2 if regime is Regime.FINITE else -(dp.k_bar + b2)
    return LVSystem(l, [[a1 - 1, -a2], [b1, m22]])


def reduced_fixed_point(p: ModelParams, dp: DerivedParams, regime: Regime | str) -> StateX:
    regime = Regime.parse(regime)
    if regime is Regime.FINITE:
        return StateX(1.0, dp.b_bar)
    return fixed_point_infinite(dp, p)


def reduced_trajectory(p: ModelParams, regime: Regime | str, x12, cfg: IntegratorConfig | None = None,
                       until_converged: bool = False) -> Trajectory:
    lv = reduced_system(p, regime)
    run = integrate_until_converged if until_converged else integrate
    return run(lambda u: lv_rhs(lv, u), _as2(x12), cfg or IntegratorConfig(), log_rhs=lv.log_rhs)


def v_monotone(V: np.ndarray, slack: float = V_SLACK) -> bool:
    return bool(np.all(np.diff(V) <= slack))


# --- conditions ---------------------------------------------------------------------

def check_conditions(p: ModelParams, dp: DerivedParams, regime: Regime | str) -> StabilityReport:
    regime = check_regime(p, regime)
    a1, a2, b1, b2 = p.alpha1, p.alpha2, p.beta1, p.beta2
    kb, bb = dp.k_bar, dp.b_bar
    notes: list[str] = []

    if regime is Regime.FINITE:
        conds = [
            Condition("interior_existence", "k_bar > 0", kb),
            Condition("delta1_positive", "(1-alpha1) + b_bar*beta*alpha2 > 0", delta1(p, dp)),
            Condition("det_B", "beta*alpha2 = -det(B) > 0", b2),
        ]
        attractor, label = None, "none"
        if kb >= 0:
            attractor = fixed_point_finite(dp, p)
            label = "interior (1, b_bar, k_bar*b_bar)" if kb > MARGIN_TOL else "boundary (k_bar = 0)"
        if kb > 0:
            eig = eigenvalues_finite(p, dp)
            conds.append(Condition("local_stability", "max Re(eigenvalue) < 0", float(-np.max(np.real(eig)))))
        return StabilityReport(regime, conds, attractor, label, notes=notes)

    delta3 = 1 - a1 + bb * a2
    lyap = Condition("lyapunov_bound", "k_bar > -beta*alpha2", kb + b2)
    exist_bound = -(b2 * (1 - a1) + b1 * a2) / delta3
    exist = Condition("existence_bound", "k_bar > -(b2(1-a1)+b1*a2)/(1-a1+b_bar*a2)", kb - exist_bound)
    combined_bound = max(-b1, -b2 / delta3)
    combined = Condition("combined_bound", "k_bar > max(-beta*alpha1, -beta*alpha2/(1-a1+b_bar*a2))",
                     kb - combined_bound, enforced=False)

    if regime is Regime.INFINITE:
        conds = [lyap, exist, combined]
        pair_ok = lyap.satisfied and exist.satisfied
        if bool(pair_ok) != bool(combined.satisfied):
            notes.append(
                "combined bound disagrees with the Lyapunov/existence pair at this k_bar; the pair is enforced"
            )
        try:
            attractor = fixed_point_infinite(dp, p)
            label = "planar equilibrium X**"
        except NonexistenceError:
            attractor, label = None, "none (equilibrium outside the positive quadrant)"
        return StabilityReport(regime, conds, attractor, label, notes=notes)

    # exponential RT
    conds = [
        Condition("k_bar_positive", "k_bar > 0", kb),
        Condition("b_bar_positive", "b_bar > 0", bb),
    ]
    if kb <= 0 or bb <= 0:
        return StabilityReport(regime, conds, None, "none (k_bar, b_bar must be > 0)", notes=notes)
    fps = exp_rt_fixed_points(p, dp)
    conds.append(Condition("face_stability", "mu_bar > mu_bar2 (face attracting)", dp.mu_bar - fps.mu_bar2,
                           enforced=False))
    conds.append(Condition("interior_existence", "0 <= mu_bar < mu_bar2", fps.mu_bar2 - dp.mu_bar,
                           enforced=False))
    conds.append(Condition("face_lyapunov_bound", "k_bar > -beta*alpha2", kb + b2))
    which = fps.attractor
    if which == "interior":
        attractor, label = fps.interior, "interior (mu_bar < mu_bar2)"
    elif which == "face":
        attractor, label = fps.face, "face X3 = 0 (mu_bar > mu_bar2)"
    else:
        attractor, label = fps.face, "marginal (mu_bar = mu_bar2, transverse eigenvalue 0)"
        conds.append(Condition("transverse_eigenvalue", "mu_bar2 - mu_bar != 0", 0.0))
        notes.append("marginal case: transverse eigenvalue vanishes; no stability claim")
    return StabilityReport(regime, conds, attractor, label, notes=notes)


# --- certification ------------------------------------------------------------------

def _terminal_error(x_end: np.ndarray, fp: StateX) -> float:
    target = fp.as_array()
    return float(np.max(np.abs(x_end[: target.size] - target) / (np.abs(target) + 1e-3)))


def certify_trajectory(
    traj: Trajectory,
    p: ModelParams,
    dp: DerivedParams | None = None,
    regime: Regime | str = Regime.FINITE,
    *,
    tol: float = 1e-6,
    slack: float = V_SLACK,
    cfg: IntegratorConfig | None = None,
) -> StabilityReport:
    """Check a rescaled-coordinate trajectory against the global-stability
    argument for its regime.

    * finite: |f| non-increasing and shrinking; V non-increasing along the
      in-plane trajectory started from the same (X1, X2);
    * infinite: V non-increasing along ``traj`` itself;
    * exponential: X3 decaying plus V on the face trajectory when the face
      attracts; only the terminal check when the interior point attracts.
    """
    regime = check_regime(p, regime)
    dp = dp or derive_params(p)
    report = check_conditions(p, dp, regime)
    X = traj.states
    if X.shape[1] != (2 if regime is Regime.INFINITE else 3):
        raise ValidationError("trajectory dimension does not match the regime")
    if report.attractor is not None:
        report.terminal_error = _terminal_error(X[-1], report.attractor)
        report.terminal_ok = report.terminal_error <= tol
    rcfg = (cfg or IntegratorConfig()).with_(t_end=max(float(traj.times[-1] - traj.times[0]), 1e-3))

    if regime is Regime.FINITE:
        f = X[:, 2] / X[:, 1] - dp.k_bar
        af = np.abs(f)
        # f is only resolved to the integrator's relative tolerance
        f_slack = max(slack, 10 * rcfg.rel_tol * max(1.0, dp.k_bar))
        report.semi_invariant_decay = bool(np.all(np.diff(af) <= f_slack) and af[-1] <= max(af[0], tol))
        if dp.k_bar > 0:
            red = reduced_trajectory(p, regime, X[0, :2], rcfg)
            V = lyapunov_V(reduced_fixed_point(p, dp, regime), lyapunov_weights(p), red.states)
            report.lyapunov_monotone = v_monotone(V, slack)
    elif regime is Regime.INFINITE:
        if report.attractor is not None and report.condition("lyapunov_bound").satisfied:
            V = lyapunov_V(report.attractor, lyapunov_weights(p), X)
            report.lyapunov_monotone = v_monotone(V, slack)
    else:
        fps = exp_rt_fixed_points(p, dp)
        if fps.attractor == "face":
            x3 = X[:, 2]
            tail = x3[len(x3) // 2:]
            report.semi_invariant_decay = bool(np.all(np.diff(tail) <= slack) and x3[-1] < x3[0])
            red = reduced_trajectory(p, Regime.INFINITE, X[0, :2], rcfg)
            V = lyapunov_V(fps.face, lyapunov_weights(p), red.states)
            report.lyapunov_monotone = v_monotone(V, slack)
            report.notes.append("V checked on the X3 = 0 face trajectory; X3 decay checked on the full trajectory")
    return report


def certify(p: ModelParams, regime: Regime | str, x0, cfg: IntegratorConfig | None = None,
            tol: float = 1e-6) -> tuple[Trajectory, StabilityReport]:
    """Integrate the rescaled system from ``x0`` until convergence and certify."""
    regime = check_regime(p, regime)
    lv = build_system(p, regime)
    traj = integrate_until_converged(lambda u: lv_rhs(lv, u), x0, cfg or IntegratorConfig(),
                                     log_rhs=lv.log_rhs, metadata={"regime": regime.value})
    return traj, certify_trajectory(traj, p, derive_params(p), regime, tol=tol, cfg=cfg)

