"""The Verhulst-Solow model: parameters, rescalings and the three carrying-capacity
regimes (finite, infinite and exponentially growing limit).

Time inside the rescaled systems is ``d * t``.  Every rate returned by this module
is converted back to original time units by multiplying by ``d``.

Exponent shorthand used throughout: ``beta1 = beta * alpha1``,
``beta2 = beta * alpha2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .qp import LVSystem, QPSystem, invert_embedding

INFINITE = math.inf
EXPONENT_TOL = 1e-9


class ValidationError(ValueError):
    pass


class RegimeMismatch(ValidationError):
    pass


class NonexistenceError(ValueError):
    """The requested fixed point does not lie in the positive orthant."""


class Regime(enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"
    EXPONENTIAL = "exponential"

    @classmethod
    def parse(cls, value: "Regime | str") -> "Regime":
        if isinstance(value, cls):
            return value
        try:
            tag = str(value).strip().lower()
            return cls(tag[:-2] if tag.endswith("rt") else tag)
        except ValueError:
            names = ", ".join(r.value for r in cls)
            raise ValidationError(f"unknown regime {value!r} (expected one of {names})") from None


class ReturnsToScale(enum.Enum):
    MALTHUSIAN = "Malthusian"
    SOLOW_NEUTRAL = "SolowNeutral"
    NON_MALTHUSIAN = "NonMalthusian"


@dataclass(frozen=True)
class ModelParams:
    s0: float
    d: float
    b: float
    r0: float
    e0: float
    g0: float
    z0: float
    alpha1: float
    alpha2: float
    beta: float
    RT: float = INFINITE
    mu: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or math.isnan(v):
                raise ValidationError(f"{f.name} must be a real number, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        for name in ("s0", "d", "b", "r0", "e0", "g0", "z0", "alpha2", "beta"):
            if not (getattr(self, name) > 0 and math.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} must be finite and > 0, got {getattr(self, name)!r}")
        if not 0 < self.alpha1 < 1:
            raise ValidationError(f"alpha1 must lie in (0, 1), got {self.alpha1!r}")
        if abs((self.alpha1 + self.alpha2) * self.beta - 1.0) > EXPONENT_TOL:
            raise ValidationError(
                f"beta * (alpha1 + alpha2) must equal 1, got {(self.alpha1 + self.alpha2) * self.beta!r}"
            )
        if not self.RT > 0:
            raise ValidationError(f"RT must be > 0 or infinite, got {self.RT!r}")
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ValidationError(f"mu must be finite and >= 0, got {self.mu!r}")

    @classmethod
    def from_rescaled(
        cls,
        alpha1: float,
        alpha2: float,
        b_bar: float,
        k_bar: float,
        *,
        d: float = 1.0,
        s0: float = 1.0,
        z0: float = 1.0,
        RT: float = INFINITE,
        mu_bar: float = 0.0,
    ) -> "ModelParams":
        """Build parameters hitting prescribed (b_bar, k_bar) with r0 = 1 and
        beta fixed by the returns-to-scale constraint."""
        e0 = 1.0 + max(0.0, -k_bar)
        return cls(
            s0=s0, d=d, b=b_bar * d, r0=1.0, e0=e0, g0=e0 + k_bar, z0=z0,
            alpha1=alpha1, alpha2=alpha2, beta=1.0 / (alpha1 + alpha2),
            RT=RT, mu=mu_bar * d,
        )

    @property
    def beta1(self) -> float:
        return self.beta * self.alpha1

    @property
    def beta2(self) -> float:
        return self.beta * self.alpha2

    @property
    def beta_inv(self) -> float:
        return self.alpha1 + self.alpha2


@dataclass(frozen=True)
class DerivedParams:
    s: float
    r: float
    e: float
    g: float
    b_bar: float
    k_bar: float
    mu_bar: float


def derive_params(p: ModelParams) -> DerivedParams:
    zb = p.z0 ** p.beta2
    return DerivedParams(
        s=p.s0 * p.z0 ** p.alpha2,
        r=p.r0 * zb,
        e=p.e0 * zb,
        g=p.g0 * zb,
        b_bar=p.b / p.d,
        k_bar=(p.g0 - p.e0) / p.r0,
        mu_bar=p.mu / p.d,
    )


@dataclass(frozen=True)
class StateKNR:
    K: float
    N: float
    R: float
    RT_current: float | None = None
    t: float = 0.0

    def __post_init__(self):
        for name in ("K", "N", "R"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if self.RT_current is not None and not self.RT_current > 0:
            raise ValidationError(f"RT_current must be > 0, got {self.RT_current!r}")

    @property
    def L(self) -> float:
        # labour for z0 = 1; scale by z0 for other labour fractions
        return self.N

    def as_array(self) -> np.ndarray:
        vals = [self.K, self.N, self.R]
        if self.RT_current is not None:
            vals.append(self.RT_current)
        return np.array(vals)


@dataclass(frozen=True)
class StateX:
    """Rescaled monomial coordinates.  Components are >= 0; face fixed points
    carry exact zeros."""

    X1: float
    X2: float
    X3: float | None = None

    def __post_init__(self):
        for name in ("X1", "X2", "X3"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValidationError(f"{name} must be >= 0, got {v!r}")

    @classmethod
    def from_array(cls, x) -> "StateX":
        x = [float(v) for v in x]
        if len(x) not in (2, 3):
            raise ValidationError(f"StateX needs 2 or 3 components, got {len(x)}")
        return cls(*x)

    def as_array(self) -> np.ndarray:
        if self.X3 is None:
            return np.array([self.X1, self.X2])
        return np.array([self.X1, self.X2, self.X3])

    @property
    def is_interior(self) -> bool:
        return bool(np.all(self.as_array() > 0))


@dataclass(frozen=True)
class GrowthRates:
    lambda_K: float
    lambda_N: float
    lambda_R: float
    alpha1: float = field(repr=False)
    alpha2: float = field(repr=False)

    @property
    def lambda_Y(self) -> float:
        return self.alpha1 * self.lambda_K + self.alpha2 * self.lambda_N

    def as_dict(self) -> dict[str, float]:
        return {
            "lambda_K": self.lambda_K,
            "lambda_N": self.lambda_N,
            "lambda_R": self.lambda_R,
            "lambda_Y": self.lambda_Y,
        }


def check_regime(p: ModelParams, regime: Regime | str) -> Regime:
    regime = Regime.parse(regime)
    if regime is Regime.FINITE and not math.isfinite(p.RT):
        raise RegimeMismatch("finite regime needs a finite RT")
    if regime is Regime.INFINITE and math.isfinite(p.RT):
        raise RegimeMismatch("infinite regime needs RT = infinite")
    if regime is not Regime.EXPONENTIAL and p.mu != 0:
        raise RegimeMismatch(f"mu = {p.mu} is only meaningful in the exponential regime")
    return regime


def dimension(regime: Regime) -> int:
    return 2 if regime is Regime.INFINITE else 3


# --- system construction -----------------------------------------------------

def build_system(p: ModelParams, regime: Regime | str) -> LVSystem:
    """Lotka-Volterra system in the rescaled X coordinates (rescaled time)."""
    regime = check_regime(p, regime)
    dp = derive_params(p)
    a1, a2, b1, b2 = p.alpha1, p.alpha2, p.beta1, p.beta2
    bb, kb = dp.b_bar, dp.k_bar
    l2 = -b1 + bb * b2
    if regime is Regime.INFINITE:
        l = [1 - a1 + bb * a2, l2]
        M = [[a1 - 1, -a2], [b1, -kb - b2]]
    else:
        l = [1 - a1 + bb * a2, l2, l2 - dp.mu_bar]
        M = [[a1 - 1, -a2, 0.0], [b1, -kb - b2, 1.0], [b1, -b2, 0.0]]
    return LVSystem(l, M)


def knr_qp_system(p: ModelParams, regime: Regime | str) -> QPSystem:
    """The model as a QP system in (K, N, R) -- plus RT in the exponential
    regime -- in rescaled time."""
    regime = check_regime(p, regime)
    dp = derive_params(p)
    a1, a2, b1, b2 = p.alpha1, p.alpha2, p.beta1, p.beta2
    s_d, r_d, ge_d = dp.s / p.d, dp.r / p.d, (dp.g - dp.e) / p.d
    if regime is Regime.INFINITE:
        c = [-1.0, dp.b_bar, 0.0]
        A = [[s_d, 0.0], [0.0, -r_d], [0.0, ge_d]]
        B = [[a1 - 1, a2, 0.0], [b1, b2, -1.0]]
    elif regime is Regime.FINITE:
        c = [-1.0, dp.b_bar, 0.0]
        A = [[s_d, 0.0, 0.0], [0.0, -r_d, 0.0], [0.0, ge_d, -dp.g / (p.d * p.RT)]]
        B = [[a1 - 1, a2, 0.0], [b1, b2, -1.0], [b1, b2, 0.0]]
    else:
        c = [-1.0, dp.b_bar, 0.0, dp.mu_bar]
        A = [[s_d, 0.0, 0.0], [0.0, -r_d, 0.0], [0.0, ge_d, -dp.g / p.d], [0.0, 0.0, 0.0]]
        B = [[a1 - 1, a2, 0.0, 0.0], [b1, b2, -1.0, 0.0], [b1, b2, 0.0, -1.0]]
    return QPSystem(c, A, B)


def x_scale(p: ModelParams, regime: Regime | str, RT: float | None = None) -> np.ndarray:
    """Factors D with X = D * U for the monomials of ``knr_qp_system``."""
    regime = Regime.parse(regime)
    dp = derive_params(p)
    D = [dp.s / p.d, dp.r / p.d]
    if regime is Regime.FINITE:
        D.append(dp.g / ((RT if RT is not None else p.RT) * p.d))
    elif regime is Regime.EXPONENTIAL:
        D.append(dp.g / p.d)
    return np.array(D)


def _finite_embedding(p: ModelParams) -> QPSystem:
    a1, a2, b1, b2 = p.alpha1, p.alpha2, p.beta1, p.beta2
    B = [[a1 - 1, a2, 0.0], [b1, b2, -1.0], [b1, b2, 0.0]]
    return QPSystem(np.zeros(3), np.zeros((3, 3)), B)


def _rt_for(p: ModelParams, regime: Regime, state_rt: float | None) -> float:
    rt = state_rt if regime is Regime.EXPONENTIAL and state_rt is not None else p.RT
    if not math.isfinite(rt):
        raise ValidationError("a finite carrying-capacity limit is required")
    return rt


def knr_to_x(p: ModelParams, state: StateKNR, regime: Regime | str) -> StateX:
    regime = check_regime(p, regime)
    dp = derive_params(p)
    lnK, lnN, lnR = math.log(state.K), math.log(state.N), math.log(state.R)
    ln_u3 = p.beta1 * lnK + p.beta2 * lnN
    X1 = dp.s / p.d * math.exp((p.alpha1 - 1) * lnK + p.alpha2 * lnN)
    X2 = dp.r / p.d * math.exp(ln_u3 - lnR)
    if regime is Regime.INFINITE:
        return StateX(X1, X2)
    rt = _rt_for(p, regime, state.RT_current)
    return StateX(X1, X2, dp.g / (rt * p.d) * math.exp(ln_u3))


def x_to_knr(
    p: ModelParams,
    x: StateX,
    anchor: float | None = None,
    regime: Regime | str = Regime.FINITE,
    t: float = 0.0,
) -> StateKNR:
    """Inverse of ``knr_to_x``.

    ``anchor`` is R in the infinite regime (X alone only fixes K and N relative
    to R) and the current RT in the exponential regime; it is unused in the
    finite regime.
    """
    regime = check_regime(p, regime)
    D = x_scale(p, regime)
    xa = x.as_array()
    if regime is Regime.INFINITE:
        if anchor is None:
            raise ValidationError("the infinite regime needs R as anchor")
        if xa.size != 2:
            raise ValidationError("infinite-regime state has two components")
        # U1 = K^(a1-1) N^a2,  U2 * R = K^b1 N^b2
        u = xa / D
        B2 = np.array([[p.alpha1 - 1, p.alpha2], [p.beta1, p.beta2]])
        rhs = np.log(u) + np.array([0.0, math.log(anchor)])
        lnK, lnN = np.linalg.solve(B2, rhs)
        return StateKNR(math.exp(lnK), math.exp(lnN), float(anchor), t=t)
    if xa.size != 3:
        raise ValidationError("finite/exponential state has three components")
    if regime is Regime.EXPONENTIAL:
        if anchor is None:
            raise ValidationError("the exponential regime needs the current RT as anchor")
        rt = float(anchor)
        D = np.array([D[0], D[1], D[2] / rt])
    K, N, R = invert_embedding(_finite_embedding(p), xa / D)
    if regime is Regime.EXPONENTIAL:
        return StateKNR(K, N, R, RT_current=rt, t=t)
    return StateKNR(K, N, R, t=t)


# --- rates ----------------------------------------------------------------------

def growth_rates_from_x(p: ModelParams, x: StateX, regime: Regime | str) -> GrowthRates:
    regime = Regime.parse(regime)
    dp = derive_params(p)
    lam_K = -1.0 + x.X1
    lam_N = dp.b_bar - x.X2
    if regime is Regime.INFINITE:
        lam_R = dp.k_bar * x.X2
    else:
        if x.X3 is None:
            raise ValidationError(f"{regime.value} regime state needs X3")
        lam_R = dp.k_bar * x.X2 - x.X3
    return GrowthRates(p.d * lam_K, p.d * lam_N, p.d * lam_R, p.alpha1, p.alpha2)


# --- finite regime ----------------------------------------------------------------

def fixed_point_finite(dp: DerivedParams, p: ModelParams) -> StateX:
    """Interior equilibrium (1, b_bar, k_bar*b_bar).

    For k_bar = 0 the point sits on the X3 = 0 face and is returned as is;
    check ``StateX.is_interior``.
    """
    if dp.k_bar < 0:
        raise NonexistenceError(f"k_bar = {dp.k_bar} < 0: no equilibrium in the positive orthant")
    return StateX(1.0, dp.b_bar, dp.k_bar * dp.b_bar)


def delta1(p: ModelParams, dp: DerivedParams) -> float:
    return (1 - p.alpha1) + dp.b_bar * p.beta2


def eigenvalues_finite(p: ModelParams, dp: DerivedParams) -> np.ndarray:
    """Jacobian eigenvalues at the finite-regime equilibrium, rescaled time."""
    D1 = delta1(p, dp)
    root = np.sqrt(complex(D1 * D1 - 4 * dp.b_bar * p.beta2))
    eig = np.array([-D1 / 2 - root / 2, -D1 / 2 + root / 2, -dp.b_bar * dp.k_bar + 0j])
    if np.all(eig.imag == 0):
        return eig.real
    return eig


def asymptotic_knr_finite(p: ModelParams) -> StateKNR:
    check_regime(p, Regime.FINITE)
    dp = derive_params(p)
    fp = fixed_point_finite(dp, p)
    if not fp.is_interior:
        raise NonexistenceError("k_bar = 0 gives R* = 0")
    R = (dp.g - dp.e) / dp.g * p.RT
    K = (dp.b_bar * p.d / dp.r * R) ** p.beta_inv * (dp.s / p.d)
    N = (dp.b_bar * p.d / dp.r * R) ** ((1 - p.alpha1) / p.beta2) * (p.d / dp.s) ** (p.alpha1 / p.alpha2)
    return StateKNR(K, N, R, t=math.inf)


# --- infinite regime ----------------------------------------------------------------

def _inf_denominator(p: ModelParams, dp: DerivedParams) -> float:
    return p.beta2 + dp.k_bar * (1 - p.alpha1)


def fixed_point_infinite(dp: DerivedParams, p: ModelParams) -> StateX:
    den = _inf_denominator(p, dp)
    X1 = (p.beta2 + dp.k_bar * (1 - p.alpha1 + dp.b_bar * p.alpha2)) / den if den else math.nan
    X2 = dp.b_bar * p.beta2 / den if den else math.nan
    if not (X1 > 0 and X2 > 0):
        raise NonexistenceError(
            f"k_bar = {dp.k_bar}: the infinite-regime equilibrium leaves the positive quadrant"
        )
    return StateX(X1, X2)


def asymptotic_rates_infinite(p: ModelParams, dp: DerivedParams) -> GrowthRates:
    fixed_point_infinite(dp, p)
    den = (1 - p.alpha1) * dp.k_bar + p.beta2
    lam_K = p.alpha2 * p.b * dp.k_bar / den
    lam_N = (1 - p.alpha1) * p.b * dp.k_bar / den
    lam_R = p.b * dp.k_bar * p.beta2 / den
    return GrowthRates(lam_K, lam_N, lam_R, p.alpha1, p.alpha2)


@dataclass(frozen=True)
class ScalingLaw:
    """Late-time infinite-regime solution: K = K_coeff * R**K_exponent,
    N = N_coeff * R**N_exponent, R = R0 * exp(rate_R * t)."""

    K_coeff: float
    K_exponent: float
    N_coeff: float
    N_exponent: float
    rate_R: float

    def K(self, R):
        return self.K_coeff * np.asarray(R) ** self.K_exponent

    def N(self, R):
        return self.N_coeff * np.asarray(R) ** self.N_exponent


def infinite_scaling(p: ModelParams) -> ScalingLaw:
    dp = derive_params(p)
    fp = fixed_point_infinite(dp, p)
    # X2** = (r/d) K^b1 N^b2 / R  and  X1** = (s/d) K^(a1-1) N^a2
    base = p.d / dp.r * fp.X2            # K^b1 N^b2 = base * R
    sd = dp.s / p.d / fp.X1              # K^(1-a1) / N^a2 = sd
    K_exp = p.beta_inv
    N_exp = (1 - p.alpha1) / p.beta2
    K_coeff = base ** p.beta_inv * sd
    N_coeff = base ** N_exp * (1 / sd) ** (p.alpha1 / p.alpha2)
    return ScalingLaw(K_coeff, K_exp, N_coeff, N_exp, asymptotic_rates_infinite(p, dp).lambda_R)


def asymptotic_knr(p: ModelParams, regime: Regime | str, anchor: float | None = None) -> StateKNR:
    """Saturation values (finite regime) or the late-time K and N attached to a
    given R (infinite regime, ``anchor`` = R)."""
    regime = check_regime(p, regime)
    if regime is Regime.FINITE:
        return asymptotic_knr_finite(p)
    if regime is Regime.INFINITE:
        if anchor is None:
            raise ValidationError("infinite regime needs R as anchor")
        law = infinite_scaling(p)
        return StateKNR(float(law.K(anchor)), float(law.N(anchor)), float(anchor), t=math.inf)
    raise ValidationError("use exp_rt_fixed_points for the exponential regime")


def per_capita(p: ModelParams, regime: Regime | str, R: float | None = None) -> tuple[float, float]:
    """(K/N, Y/N) on the attracting solution, with Y = K^alpha1 N^alpha2."""
    regime = check_regime(p, regime)
    dp = derive_params(p)
    a1, a2 = p.alpha1, p.alpha2
    e_R = (a1 + a2 - 1) / p.beta2
    if regime is Regime.FINITE:
        Rs = asymptotic_knr_finite(p).R
        base = dp.b_bar * p.d / dp.r * Rs
        sd = dp.s / p.d
    elif regime is Regime.INFINITE:
        if R is None:
            raise ValidationError("infinite regime needs R")
        den = _inf_denominator(p, dp)
        base = dp.b_bar * p.d / dp.r * p.beta2 / den * R
        sd = dp.s / p.d * den / (p.beta2 + dp.k_bar * (1 - a1 + dp.b_bar * a2))
    else:
        raise ValidationError("per-capita closed forms cover the finite and infinite regimes")
    k_per = base ** e_R * sd ** ((a1 + a2) / a2)
    y_per = base ** e_R * sd ** (a1 / a2)
    return k_per, y_per


def classify_regime(beta_inv: float) -> ReturnsToScale:
    if not beta_inv > 0:
        raise ValidationError(f"beta_inv must be > 0, got {beta_inv!r}")
    if abs(beta_inv - 1.0) <= EXPONENT_TOL:
        return ReturnsToScale.SOLOW_NEUTRAL
    return ReturnsToScale.MALTHUSIAN if beta_inv < 1 else ReturnsToScale.NON_MALTHUSIAN


# --- exponentially growing limit ------------------------------------------------

@dataclass(frozen=True)
class ExpRTFixedPoints:
    interior: StateX | None
    face: StateX
    mu_bar1: float
    mu_bar2: float
    transverse_eig: float
    mu_bar: float

    @property
    def attractor(self) -> str:
        """'interior', 'face' or 'marginal'."""
        if self.transverse_eig > 0:
            return "interior"
        if self.transverse_eig < 0:
            return "face"
        return "marginal"


def exp_rt_fixed_points(p: ModelParams, dp: DerivedParams) -> ExpRTFixedPoints:
    if not (dp.k_bar > 0 and dp.b_bar > 0):
        raise ValidationError("the exponential-RT analysis assumes k_bar > 0 and b_bar > 0")
    a1, a2, b2 = p.alpha1, p.alpha2, p.beta2
    mb, bb, kb = dp.mu_bar, dp.b_bar, dp.k_bar
    den = b2 + (1 - a1) * kb
    mu1 = bb * b2 / (1 - a1)
    mu2 = kb * bb * b2 / den
    interior = None
    if 0 <= mb < mu2:
        interior = StateX(
            1 + mb * a2 / b2,
            bb - mb * (1 - a1) / b2,
            bb * kb - mb * den / b2,
        )
    delta3 = 1 - a1 + bb * a2
    face = StateX((b2 + kb * delta3) / den, bb * b2 / den, 0.0)
    return ExpRTFixedPoints(interior, face, mu1, mu2, mu2 - mb, mb)


def interior_rates_exp_rt(p: ModelParams) -> GrowthRates:
    dp = derive_params(p)
    fps = exp_rt_fixed_points(p, dp)
    if fps.interior is None:
        raise NonexistenceError(
            f"mu_bar = {dp.mu_bar} >= mu_bar2 = {fps.mu_bar2}: no interior equilibrium"
        )
    mb = dp.mu_bar
    return GrowthRates(
        p.d * mb * p.alpha2 / p.beta2,
        p.d * mb * (1 - p.alpha1) / p.beta2,
        p.d * mb,
        p.alpha1,
        p.alpha2,
    )
