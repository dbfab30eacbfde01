"""Double-well potentials, surface tension and the one-dimensional transition profile."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad, solve_ivp, trapezoid

from .errors import NonTermination, QuadratureFailure


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Polynomial double well ``W`` with wells at 0 and 1.

    Polynomials keep the potential picklable for process pools and give exact
    derivatives.
    """

    poly: Polynomial
    name: str = "polynomial"
    coercivity: tuple[float, float] = (2.0, 1.0)
    growth_exponent: int | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def W(self, u):
        return self.poly(u)

    def dW(self, u):
        return self.d1(u)

    def d2W(self, u):
        return self.d2(u)

    @property
    def d1(self) -> Polynomial:
        if "d1" not in self._cache:
            self._cache["d1"] = self.poly.deriv()
        return self._cache["d1"]

    @property
    def d2(self) -> Polynomial:
        if "d2" not in self._cache:
            self._cache["d2"] = self.poly.deriv(2)
        return self._cache["d2"]

    @property
    def wells(self) -> tuple[float, float]:
        return (0.0, 1.0)

    @property
    def well_curvatures(self) -> tuple[float, float]:
        return float(self.d2(0.0)), float(self.d2(1.0))

    @property
    def sigma(self) -> float:
        if "sigma" not in self._cache:
            self._cache["sigma"] = compute_sigma(self)
        return self._cache["sigma"]

    def scaled(self, factor: float) -> "PotentialSpec":
        return PotentialSpec(self.poly * factor, name=f"{factor:g}*{self.name}",
                             coercivity=self.coercivity)


def make_quartic() -> PotentialSpec:
    """``W(u) = u^2 (u - 1)^2``."""
    return PotentialSpec(Polynomial([0.0, 0.0, 1.0, -2.0, 1.0]), name="quartic",
                         coercivity=(2.0, 1.0), growth_exponent=4)


def from_coefficients(coeffs, name: str = "polynomial") -> PotentialSpec:
    """Potential from ascending power-series coefficients."""
    return PotentialSpec(Polynomial(np.asarray(coeffs, dtype=float)), name=name)


def compute_sigma(pot: PotentialSpec, quad_tol: float = 1e-10) -> float:
    """Surface tension ``2 ∫_0^1 sqrt(W(s)) ds`` by adaptive quadrature."""
    if not quad_tol > 0:
        raise QuadratureFailure(f"absolute tolerance {quad_tol} cannot be met")
    val, err = quad(lambda s: math.sqrt(max(float(pot.W(s)), 0.0)), 0.0, 1.0,
                    epsabs=quad_tol, epsrel=0.0, limit=200)
    if not err <= quad_tol:
        raise QuadratureFailure(f"quadrature error estimate {err:.3e} exceeds {quad_tol:.3e}")
    return 2.0 * val


def line_tension(pot: PotentialSpec) -> float:
    """``∫_0^1 sqrt(2 W(s)) ds``: energy per unit interface length of the optimal 1D profile for
    ``∫ ε|u'|²/2 + W(u)/ε``. Equals ``sigma / sqrt(2)``."""
    return pot.sigma / math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """Monotone profile ``q(t)`` on ``[0, eta]`` with clamped linear interpolation."""

    epsilon: float
    t: np.ndarray
    q: np.ndarray
    eta: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.interp(s, self.t, self.q, left=0.0, right=1.0)

    def derivative(self, s):
        """Slope of the piecewise-linear interpolant (zero outside ``[0, eta]``)."""
        s = np.asarray(s, dtype=float)
        slopes = np.diff(self.q) / np.diff(self.t)
        idx = np.clip(np.searchsorted(self.t, s, side="right") - 1, 0, len(slopes) - 1)
        return np.where((s < 0.0) | (s > self.eta), 0.0, slopes[idx])

    def layer_mass(self) -> float:
        """``∫_0^eta q (1 - q) dt``."""
        return float(trapezoid(self.q * (1.0 - self.q), self.t))


def profile_slope(pot: PotentialSpec, epsilon: float, q):
    return np.sqrt(np.maximum(epsilon**1.5 + 2.0 * pot.W(q), 0.0)) / epsilon


def solve_profile(pot: PotentialSpec, epsilon: float, step_tol: float = 1e-6,
                  max_samples: int = 400_000) -> ProfileTable:
    """Integrate ``q' = sqrt(ε^{3/2} + 2 W(q)) / ε`` from ``q(0) = 0`` until ``q = 1``.

    Uses the adaptive Dormand-Prince 5(4) pair with terminal event location
    for the crossing of 1. The table spacing is chosen so the linear
    interpolant's centered differences match the ODE to about ``step_tol``;
    the integrator itself runs much tighter so that sampling noise stays
    below the truncation error of the table.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    kmin = min(pot.well_curvatures)
    t_guard = 10.0 * epsilon**0.25 * (1.0 + 2.0 / math.sqrt(kmin if kmin > 0 else 1e-300))
    t_guard = min(t_guard, 1e6)

    def rhs(_t, y):
        return [float(profile_slope(pot, epsilon, y[0]))]

    def hit_one(_t, y):
        return y[0] - 1.0

    hit_one.terminal = True
    hit_one.direction = 1.0

    sol = solve_ivp(rhs, (0.0, t_guard), [0.0], method="RK45", rtol=1e-12, atol=1e-14,
                    events=hit_one, dense_output=True)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise NonTermination(f"profile did not reach 1 before t = {t_guard:.4g}")
    eta = float(sol.t_events[0][0])

    # centered-difference error ~ dt^2 |q'''| / 6 with q''' = W''(q) q' / ε^2
    qs = np.linspace(0.0, 1.0, 201)
    q3 = np.max(np.abs(pot.d2(qs)) * profile_slope(pot, epsilon, qs)) / epsilon**2
    dt = math.sqrt(6.0 * step_tol / max(q3, 1e-300))
    n = int(min(max(math.ceil(eta / dt), 200), max_samples))
    t = np.linspace(0.0, eta, n + 1)
    q = np.clip(sol.sol(t)[0], 0.0, 1.0)
    q[0], q[-1] = 0.0, 1.0
    q = np.maximum.accumulate(q)
    if np.any(np.diff(q) <= 0):
        raise NonTermination("profile table is not strictly increasing")
    for arr in (t, q):
        arr.setflags(write=False)
    return ProfileTable(epsilon=float(epsilon), t=t, q=q, eta=eta)


def check_assumptions(pot: PotentialSpec, R: float | None = None, alpha: float | None = None) -> dict:
    """Sampled checks of the non-degenerate wells, coercivity and growth assumptions."""
    R = pot.coercivity[0] if R is None else R
    alpha = pot.coercivity[1] if alpha is None else alpha
    grid = np.linspace(-3.0, 4.0, 7001)
    w = pot.W(grid)
    k0, k1 = pot.well_curvatures
    a1 = bool(
        abs(float(pot.W(0.0))) <= 1e-14
        and abs(float(pot.W(1.0))) <= 1e-14
        and np.all(w >= -1e-14)
        and k0 > 0
        and k1 > 0
    )

    mag = np.linspace(R, 10.0 * R, 2001)
    tail = np.concatenate([-mag[::-1], mag])
    a2 = bool(np.all(pot.dW(tail) * tail >= alpha * tail**2))

    # growth exponent from the log-log slope of |W''| on the far tail
    far = np.array([5.0 * R, 10.0 * R])
    d2_far = np.abs(pot.d2(np.concatenate([-far, far])))
    if np.all(d2_far <= 1e-300):
        p = 2
        a3 = True
    else:
        lo = np.maximum(d2_far[[0, 2]], 1e-300)
        hi = np.maximum(d2_far[[1, 3]], 1e-300)
        slope = float(np.max(np.log(hi / lo) / math.log(2.0)))
        p = max(2, int(round(slope)) + 2)
        ratio = d2_far / np.concatenate([far, far]) ** (p - 2)
        # bounded ratio: doubling |u| must not keep multiplying it
        # (critical exponent in two dimensions is +inf, so any finite p qualifies)
        a3 = bool(np.all(np.isfinite(ratio)) and np.all(ratio[[1, 3]] <= 1.5 * ratio[[0, 2]] + 1e-300))
    return {"A1": a1, "A2": a2, "R": R, "alpha": alpha, "A3": a3, "p": p}
