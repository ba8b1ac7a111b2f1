"""Small-noise entropic risk and its deterministic variational limit.

Entropic risk of a controlled small-noise diffusion is computed by two
independent PDE routes: the primal route evolves the exponential payoff
under the worst-case linear semigroup and takes eps*log at the end, and
the transformed route solves the Hopf-Cole transformed equation directly,
with the quadratic gradient term realized as an extra control a with
running cost ||a||^2/2.  As eps decreases both approach the value of a
deterministic control problem, computed here by interpolating dynamic
programming.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .pde.grid import ValueField, grid_1d
from .pde.hjb import HamiltonianSpec, evolve

EPS_FLOOR = 1e-3


class SaturationError(RuntimeError):
    """The inner argmax over a hit the truncation boundary too often."""


@dataclass
class SmallNoiseFamily:
    """Coefficient families mu^eps, sigma^eps with limits mu0, sigma0.

    Dynamics at level eps are dX = mu^eps dt + sigma^eps dW; the scaling
    hypothesis is that sigma^eps/sqrt(eps) tends to sigma0 uniformly.
    """

    controls: list
    mu: object       # mu(eps, lam, x) -> array
    sigma: object    # sigma(eps, lam, x) -> array
    mu0: object      # mu0(lam, x) -> array
    sigma0: object   # sigma0(lam, x) -> array
    eps_schedule: list = field(default_factory=lambda: [1.0, 0.5, 0.1, 0.05])
    bound: float = 4.0

    def __post_init__(self):
        eps = list(self.eps_schedule)
        if not eps or any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
            raise ValueError("eps schedule must be positive and decreasing")

    def convergence_defect(self, eps, xs):
        """sup |mu^eps - mu0| + sup |sigma^eps/sqrt(eps) - sigma0| on xs."""
        worst = 0.0
        for lam in self.controls:
            dmu = np.abs(np.broadcast_to(self.mu(eps, lam, xs), xs.shape)
                         - np.broadcast_to(self.mu0(lam, xs), xs.shape))
            dsg = np.abs(np.broadcast_to(self.sigma(eps, lam, xs), xs.shape)
                         / math.sqrt(eps)
                         - np.broadcast_to(self.sigma0(lam, xs), xs.shape))
            worst = max(worst, float(np.max(dmu) + np.max(dsg)))
        return worst

    def check_convergence(self, xs, tol=1e-8):
        """Defects along the schedule must be nonincreasing and end small."""
        defects = [self.convergence_defect(e, xs) for e in self.eps_schedule]
        ok = all(b <= a + tol for a, b in zip(defects, defects[1:]))
        return ok and defects[-1] <= max(tol, 2 * defects[0] / 3 + tol), defects


@dataclass
class EntropicSpec:
    """Payoff, horizon and discretization for one entropic experiment."""

    horizon: float
    phi: object          # terminal functional of the endpoint
    phi_bound: float     # declared sup bound; payoffs are clipped at it
    x0: float = 0.0
    half_width: float = 8.0
    dx: float = None     # None: min(0.05, eps/4) per eps
    a_max: float = 4.0
    n_a: int = 33
    delta: float = 0.05  # time step of the deterministic DP

    def grid(self, eps):
        dx = self.dx if self.dx is not None else min(0.05, eps / 4.0)
        steps = max(9, round(2 * self.half_width / dx))
        dx = 2 * self.half_width / steps
        return grid_1d(self.x0 - self.half_width, self.x0 + self.half_width, dx)

    def terminal(self, x):
        return np.clip(np.asarray(self.phi(x), dtype=float),
                       -self.phi_bound, self.phi_bound)

    def a_grid(self):
        return np.linspace(-self.a_max, self.a_max, self.n_a)


def _run_dt(spec, t):
    # max_stable_dt is infinite for frozen coefficients; still take real steps
    return min(spec.max_stable_dt(), t / 8.0)


def entropic_risk_primal(family, spec, eps):
    """eps*log of the worst-case expectation of exp(phi/eps).

    The linear-in-exp equation is evolved on w = exp((phi - K)/eps) with
    K = max phi on the grid, so the datum never overflows; underflowed
    regions are floored before the final log.
    """
    if eps < EPS_FLOOR:
        raise ValueError(
            f"eps {eps:g} is below the primal floor {EPS_FLOOR:g}; "
            "use the transformed route")
    grid = spec.grid(eps)
    hspec = HamiltonianSpec(
        grid=grid, controls=list(family.controls),
        drift=lambda lam, x: family.mu(eps, lam, x) + 0.0 * x,
        covariance=lambda lam, x: family.sigma(eps, lam, x) ** 2 + 0.0 * x,
        bound=family.bound)
    x = grid.axes()[0]
    datum = spec.terminal(x)
    top = float(np.max(datum))
    w = evolve(hspec, lambda x: np.exp((spec.terminal(x) - top) / eps),
               spec.horizon, _run_dt(hspec, spec.horizon))
    vals = top + eps * np.log(np.clip(w.values, 1e-300, None))
    return ValueField(grid, vals, spec.horizon)


def _transformed_spec(family, spec, eps, grid):
    a_grid = spec.a_grid()
    controls = [(lam, a) for lam in family.controls for a in a_grid]

    def drift(ctrl, x):
        lam, a = ctrl
        return (family.mu(eps, lam, x)
                + family.sigma(eps, lam, x) / math.sqrt(eps) * a + 0.0 * x)

    def cov(ctrl, x):
        lam, a = ctrl
        return family.sigma(eps, lam, x) ** 2 + 0.0 * x

    return HamiltonianSpec(
        grid=grid, controls=controls, drift=drift, covariance=cov,
        bound=family.bound + spec.a_max * family.bound,
        reward=lambda ctrl: -0.5 * ctrl[1] ** 2)


def _check_saturation(family, spec, eps, field):
    """Refuse if the optimal a, read off the gradient, saturates the grid.

    The inner sup over a is attained at a* = (sigma^eps/sqrt(eps)) du/dx,
    so saturation is detected from the solved field's gradient.
    """
    x = field.grid.axes()[0]
    dx = field.grid.dx[0]
    du = np.gradient(field.values, dx)
    half_step = spec.a_max / (spec.n_a - 1)
    frac_worst = 0.0
    for lam in family.controls:
        sg = np.broadcast_to(family.sigma(eps, lam, x), x.shape)
        a_star = np.abs(sg / math.sqrt(eps) * du)
        frac_worst = max(frac_worst,
                         float(np.mean(a_star >= spec.a_max - half_step)))
    if frac_worst > 1e-3:
        raise SaturationError(
            f"optimal a saturates the [-{spec.a_max:g}, {spec.a_max:g}] grid "
            f"on {100 * frac_worst:.2f}% of nodes; raise a_max")


def entropic_risk_transformed(family, spec, eps):
    """Direct solve of the transformed equation on the (lambda, a) grid."""
    grid = spec.grid(eps)
    hspec = _transformed_spec(family, spec, eps, grid)
    u = evolve(hspec, spec.terminal, spec.horizon, _run_dt(hspec, spec.horizon))
    _check_saturation(family, spec, eps, u)
    return u


def deterministic_limit(family, spec):
    """Interpolating DP for the zero-noise variational problem.

    V_T = phi; V_t(x) = max over (lambda, a) of V_{t+delta} at
    x + delta*(mu0 + sigma0*a), minus delta*||a||^2/2, with linear
    interpolation in x (first-order accurate).
    """
    n = max(1, round(spec.horizon / spec.delta))
    delta = spec.horizon / n
    dx = spec.dx if spec.dx is not None else spec.delta / 2.0
    steps = max(9, round(2 * spec.half_width / dx))
    grid = grid_1d(spec.x0 - spec.half_width, spec.x0 + spec.half_width,
                   2 * spec.half_width / steps)
    x = grid.axes()[0]
    a_grid = spec.a_grid()
    V = spec.terminal(x)
    sat_hits = 0
    for _ in range(n):
        best = None
        arg_a = None
        for lam in family.controls:
            mu0 = np.broadcast_to(family.mu0(lam, x), x.shape)
            sg0 = np.broadcast_to(family.sigma0(lam, x), x.shape)
            for a in a_grid:
                xq = np.clip(x + delta * (mu0 + sg0 * a), x[0], x[-1])
                cand = np.interp(xq, x, V) - 0.5 * delta * a * a
                if best is None:
                    best, arg_a = cand, np.full(x.shape, a)
                else:
                    better = cand > best
                    best = np.where(better, cand, best)
                    arg_a = np.where(better, a, arg_a)
        V = best
        sat_hits += int(np.count_nonzero(np.abs(arg_a) >= spec.a_max - 1e-12))
    if sat_hits > 1e-3 * n * x.size:
        raise SaturationError(
            "deterministic DP argmax saturates the a grid; raise a_max")
    return ValueField(grid, V, 0.0)


@dataclass
class ConvergenceRow:
    eps: float
    value: float
    limit: float
    gap: float


def convergence_report(family, spec, eps_schedule=None, tol_noise=1e-2):
    """Transformed-route values along the schedule against the limit.

    Gaps |value - limit| at the starting point must be nonincreasing after
    the first schedule entry, up to the scheme-noise allowance.
    """
    schedule = list(eps_schedule if eps_schedule is not None
                    else family.eps_schedule)
    limit = deterministic_limit(family, spec).at(spec.x0)
    rows = []
    for eps in schedule:
        val = entropic_risk_transformed(family, spec, eps).at(spec.x0)
        rows.append(ConvergenceRow(eps, val, limit, abs(val - limit)))
    for a, b in zip(rows[1:], rows[2:]):
        if b.gap > a.gap + tol_noise:
            raise ValueError(
                f"gap increased along the schedule: eps {a.eps:g} -> {b.eps:g} "
                f"gap {a.gap:g} -> {b.gap:g}")
    return rows


def gaussian_benchmark(eps_schedule=(1.0, 0.5, 0.1, 0.05)):
    """Single control, mu = 0, sigma^eps = sqrt(eps): value x + T/2 exactly."""
    family = SmallNoiseFamily(
        controls=[0],
        mu=lambda eps, lam, x: np.zeros_like(x),
        sigma=lambda eps, lam, x: np.full_like(x, math.sqrt(eps)),
        mu0=lambda lam, x: np.zeros_like(x),
        sigma0=lambda lam, x: np.ones_like(x),
        eps_schedule=list(eps_schedule))
    spec = EntropicSpec(horizon=1.0, phi=lambda x: x, phi_bound=20.0)
    return family, spec


def tanh_benchmark(eps_schedule=(0.5, 0.1, 0.05)):
    """Same dynamics, phi = tanh(x(T)): limit computed by the DP itself."""
    family, _ = gaussian_benchmark(eps_schedule)
    spec = EntropicSpec(horizon=1.0, phi=np.tanh, phi_bound=1.0)
    return family, spec
