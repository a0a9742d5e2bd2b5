"""Wage-side solver for the matching equilibrium.

An adult of skill k can earn, given the current wage schedule v:

  v_w(k) = max_k'  b_L((1-t')k + t'k') - v(k')/N'      as a worker,
  v_m(k) = N' max_k' (b_L((1-t')k' + t'k) - v(k'))      as a manager,
  v_t(k) = N  max_a  (c b_E(z(a,k)) + v(z(a,k)) - u(a)) as a teacher,

with the student payoff u(a) = max_k c b_E(z(a,k)) + v(z(a,k)) - v(k)/N.
Minimizing wages satisfy v = max{v_w, v_m, v_t}, convex non-decreasing.

That envelope identity alone does not pin the equilibrium down: v_t is
invariant under translations supported on self-contained teacher blocks,
so the raw envelope map has a continuum of fixed points and forward
iteration stalls on schedules that overpay the top of the pyramid.  The
level is anchored by the market-clearing marginals (the student
distribution and the steady-state balance), which only enter the wage
minimization objective.  solve_wages therefore minimizes the smoothed
dual functional

  Psi_eta(u, v) = sum_a m_a u_a + sum_k d_k v_k
                + eta * [sum exp(-f/eta) + sum exp(-g/eta)]

(m = alpha + delta/n, d = delta/n, f and g the education/labor stability
slacks) whose gradient in v is exactly the excess adult supply.  u has a
closed-form softmax elimination; v is driven by damped Newton steps with
the temperature eta annealed down a geometric ladder, and the eta -> 0
limit is recovered by Richardson extrapolation.  A final damped pass of
the exact envelope map (bellman_step) restores the hard-max identity and
the convex non-decreasing shape; its sup-norm change criterion decides
the converged flag.  Optimality is certified externally against the LP.

Off-grid values v(z) use linear interpolation, which preserves convexity
of the samples.  All maxima run in fixed index order with first-index
tie-breaking, so repeated runs are bitwise identical.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import GridMeasure, SkillGrid, TechnologyParams

__all__ = [
    "SolverConfig",
    "WageProfile",
    "WageComponents",
    "WageOperator",
    "StabilityReport",
    "ContinuationResult",
    "convexify",
    "wage_components",
    "bellman_step",
    "solve_wages",
    "delta_continuation",
    "stability_residuals",
    "IterationDiverged",
]

_EXP_CAP = 45.0  # exponent clamp: keeps line-search probes finite


class IterationDiverged(RuntimeError):
    """Raised when a wage component overflows during the iteration."""


@dataclass
class SolverConfig:
    """Knobs for the wage solve and the delta continuation."""

    delta: float = 0.0
    c_delta: float = 0.0
    tol: float = 1e-9
    max_iter: int = 100_000
    damping: float = 0.5
    delta_factor: float = 0.5
    delta_floor: float = 1e-6
    eta_floor: float = 2e-5   # smallest annealing temperature (relative to payoff scale)

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.delta < 0 or self.c_delta < 0:
            raise ValueError("delta and c_delta must be nonnegative")
        if not 0.0 < self.delta_factor < 1.0:
            raise ValueError("delta_factor must lie in (0, 1)")


@dataclass(eq=False)
class WageComponents:
    v_w: np.ndarray
    v_m: np.ndarray
    v_t: np.ndarray
    u: np.ndarray
    best_teacher: np.ndarray  # per student node: argmax k in the u envelope
    best_student: np.ndarray  # per teacher node: argmax a in the v_t envelope
    occupation: np.ndarray    # per node argmax of (v_w, v_m, v_t); 0/1/2, lowest wins ties


@dataclass(eq=False)
class WageProfile:
    """Converged (or best-effort) wage schedule on the grid."""

    v: np.ndarray
    u: np.ndarray
    v_w: np.ndarray
    v_m: np.ndarray
    v_t: np.ndarray
    best_teacher: np.ndarray
    best_student: np.ndarray
    occupation: np.ndarray
    converged: bool
    iterations: int
    objective: float
    envelope_residual: float
    delta: float
    c_used: float

    @property
    def components(self) -> WageComponents:
        return WageComponents(self.v_w, self.v_m, self.v_t, self.u,
                              self.best_teacher, self.best_student, self.occupation)


def convexify(values, nodes=None) -> np.ndarray:
    """Greatest convex non-decreasing minorant of the samples.

    Build the lower convex hull of (node, value) pairs, evaluate it back on
    the nodes, then flatten everything left of its minimum (the largest
    non-decreasing function below a convex one).  Output <= input node-wise
    and the map is idempotent; convex non-decreasing input passes through
    unchanged.
    """
    y = np.asarray(values, dtype=float)
    n = len(y)
    if nodes is None:
        x = np.arange(n, dtype=float)
    else:
        x = np.asarray(nodes, dtype=float)
    if n <= 1:
        return y.copy()

    # lower hull, keeping collinear vertices so convex input is untouched
    hull = [0]
    for i in range(1, n):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            cross = (x[k] - x[j]) * (y[i] - y[j]) - (x[i] - x[j]) * (y[k] - y[j])
            if cross < 0.0:
                hull.pop()
            else:
                break
        hull.append(i)

    out = np.empty(n)
    for a, b in zip(hull[:-1], hull[1:]):
        out[a] = y[a]
        if b > a + 1:
            t = (x[a + 1:b] - x[a]) / (x[b] - x[a])
            out[a + 1:b] = y[a] + t * (y[b] - y[a])
    out[hull[-1]] = y[hull[-1]]

    lo = int(np.argmin(out))
    out[:lo] = out[lo]
    return out


class WageOperator:
    """Precomputed envelope machinery for one (params, grid, c) triple."""

    def __init__(self, params: TechnologyParams, grid: SkillGrid, c: float | None = None):
        self.params = params
        self.grid = grid
        self.c = params.c if c is None else float(c)
        x = grid.nodes
        n = grid.n
        tp = params.theta_prime
        # labor production over (worker i, manager j) pairs
        self.BL = np.asarray(params.bL.value(x[:, None] + tp * (x[None, :] - x[:, None])))
        # acquired skill over (student i, teacher j) pairs, with interp weights
        Z = x[:, None] + params.theta * (x[None, :] - x[:, None])
        self.BEz = np.asarray(params.bE.value(Z))
        self.E = self.c * self.BEz
        pos = Z / grid.h
        if n == 1:
            self._idx = np.zeros_like(pos, dtype=int)
            self._frac = np.zeros_like(pos)
        else:
            idx = np.floor(pos).astype(int)
            np.clip(idx, 0, n - 2, out=idx)
            self._idx = idx
            self._frac = pos - idx

    def interp_at_z(self, v: np.ndarray) -> np.ndarray:
        if self.grid.n == 1:
            return np.full_like(self._frac, v[0])
        return v[self._idx] * (1.0 - self._frac) + v[self._idx + 1] * self._frac

    def splat_from_z(self, w: np.ndarray) -> np.ndarray:
        """Adjoint of interp_at_z: deposit pair weights w onto the nodes."""
        out = np.zeros(self.grid.n)
        np.add.at(out, self._idx.ravel(), (w * (1.0 - self._frac)).ravel())
        if self.grid.n > 1:
            np.add.at(out, (self._idx + 1).ravel(), (w * self._frac).ravel())
        return out

    def components(self, v: np.ndarray) -> WageComponents:
        p = self.params
        vz = self.interp_at_z(v)
        S = self.E + vz  # (student, teacher) surplus before tuition

        cand_w = self.BL - v[None, :] / p.N_prime
        v_w = cand_w.max(axis=1)

        cand_m = self.BL - v[:, None]
        v_m = p.N_prime * cand_m.max(axis=0)

        cand_u = S - v[None, :] / p.N
        u = cand_u.max(axis=1)
        best_teacher = cand_u.argmax(axis=1)

        cand_t = S - u[:, None]
        v_t = p.N * cand_t.max(axis=0)
        best_student = cand_t.argmax(axis=0)

        stack = np.stack([v_w, v_m, v_t])
        occupation = stack.argmax(axis=0)
        return WageComponents(v_w, v_m, v_t, u, best_teacher, best_student, occupation)

    def envelope(self, comp: WageComponents) -> np.ndarray:
        return np.maximum(np.maximum(comp.v_w, comp.v_m), comp.v_t)

    def lower_bound(self) -> np.ndarray:
        """Universal wage floor N'/(N'+1) * b_L, the iteration seed."""
        p = self.params
        return (p.N_prime / (p.N_prime + 1.0)) * np.asarray(p.bL.value(self.grid.nodes))

    def objective(self, u: np.ndarray, v: np.ndarray, alpha: GridMeasure, delta: float) -> float:
        val = float(alpha.weights @ u)
        if delta > 0:
            val += delta * float(u.mean() + v.mean())
        return val


# ---------------------------------------------------------------------------
# smoothed dual: softmax envelopes + Newton in v, annealed in temperature
# ---------------------------------------------------------------------------

class _SmoothedDual:
    """Smooth strictly convex relaxation of the wage minimization.

    The student payoffs are eliminated in closed form (row softmax with the
    student masses as marginals); the remaining functional of v is smooth
    with gradient equal to the steady-state excess supply, and is driven to
    its minimum by damped Newton steps.
    """

    def __init__(self, op: WageOperator, m: np.ndarray, d: np.ndarray):
        self.op = op
        self.m = m
        self.d = d
        self.live = m > 0.0
        self.logm = np.where(self.live, np.log(np.where(self.live, m, 1.0)), 0.0)

    def state(self, v: np.ndarray, eta: float):
        op, p = self.op, self.op.params
        S = op.E + op.interp_at_z(v) - v[None, :] / p.N
        Smax = S.max(axis=1)
        P = np.exp(np.minimum((S - Smax[:, None]) / eta, _EXP_CAP))
        rs = P.sum(axis=1)
        u = Smax + eta * (np.log(rs) - self.logm)
        eps = (self.m / rs)[:, None] * P
        G = v[:, None] + v[None, :] / p.N_prime - op.BL
        lam = np.exp(np.minimum(-G / eta, _EXP_CAP))
        return u, eps, lam

    def value_grad(self, v: np.ndarray, eta: float):
        p = self.op.params
        u, eps, lam = self.state(v, eta)
        val = float(self.m[self.live] @ u[self.live] + self.d @ v) + eta * float(lam.sum())
        kappa = self.op.splat_from_z(eps)
        eps2 = eps.sum(axis=0)
        lam1 = lam.sum(axis=1)
        lam2 = lam.sum(axis=0)
        grad = self.d + kappa - eps2 / p.N - lam1 - lam2 / p.N_prime
        return val, grad, (u, eps, lam)

    def hessian(self, v: np.ndarray, eta: float, eps: np.ndarray, lam: np.ndarray) -> np.ndarray:
        op, p = self.op, self.op.params
        n = op.grid.n
        H = np.diag(lam.sum(axis=1) + lam.sum(axis=0) / p.N_prime ** 2)
        H += (lam + lam.T) / p.N_prime

        # education block: sum_aj eps * w w^T - row-mean correction, where the
        # pair vector w has entries (1-frac) at idx, frac at idx+1, -1/N at j
        i0 = op._idx.ravel()
        i1 = (op._idx + (1 if n > 1 else 0)).ravel()
        jj = np.tile(np.arange(n), n)
        w0 = (1.0 - op._frac).ravel()
        w1 = op._frac.ravel()
        wj = np.full(n * n, -1.0 / p.N)
        e = eps.ravel()
        comps = ((i0, w0), (i1, w1), (jj, wj))
        for ia, wa in comps:
            for ib, wb in comps:
                np.add.at(H, (ia, ib), e * wa * wb)

        live = self.live
        if np.any(live):
            Wbar = np.zeros((n, n))
            rows = np.repeat(np.arange(n), n)
            prob = eps / np.where(self.m > 0, self.m, 1.0)[:, None]
            pr = prob.ravel()
            for ia, wa in comps:
                np.add.at(Wbar, (rows, ia), pr * wa)
            H -= Wbar[live].T @ (self.m[live, None] * Wbar[live])

        H /= eta
        H[np.diag_indices_from(H)] += 1e-12 * max(1.0, float(np.abs(H).max()))
        return H

    def minimize(self, v: np.ndarray, eta: float, gtol: float = 1e-12, max_newton: int = 80) -> np.ndarray:
        v = v.copy()
        val, grad, (u, eps, lam) = self.value_grad(v, eta)
        for _ in range(max_newton):
            if np.abs(grad).max() <= gtol:
                break
            H = self.hessian(v, eta, eps, lam)
            try:
                step = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = -grad
            slope = float(grad @ step)
            if slope >= 0:
                step = -grad
                slope = float(grad @ step)
            t = 1.0
            for _ in range(50):
                v_new = v + t * step
                val_new, grad_new, st_new = self.value_grad(v_new, eta)
                if val_new <= val + 1e-4 * t * slope:
                    break
                t *= 0.5
            else:
                break
            v, val, grad, (u, eps, lam) = v_new, val_new, grad_new, st_new
        return v


def _anneal(op: WageOperator, m: np.ndarray, d: np.ndarray, v0: np.ndarray,
            eta_floor_rel: float) -> np.ndarray:
    """Anneal the smoothed dual down a geometric temperature ladder and
    Richardson-extrapolate the zero-temperature wage vector from the last
    three stages (error O(eta^3))."""
    sd = _SmoothedDual(op, m, d)
    scale = max(1.0, float(np.abs(op.E).max()), float(np.abs(op.BL).max()))
    eta = 0.25 * scale
    eta_floor = eta_floor_rel * scale
    v = v0.copy()
    while eta > eta_floor:
        v = sd.minimize(v, eta)
        eta *= 0.2
    f0 = sd.minimize(v, eta)
    f1 = sd.minimize(f0, eta / 2.0)
    f2 = sd.minimize(f1, eta / 4.0)
    return (8.0 * f2 - 6.0 * f1 + f0) / 3.0


def _require_monotone(v: np.ndarray):
    if len(v) > 1 and np.any(np.diff(v) < -1e-12 * max(1.0, float(np.abs(v).max()))):
        raise ValueError("wage array must be non-decreasing; convexify first")


def wage_components(v, params: TechnologyParams, grid: SkillGrid, c: float | None = None) -> WageComponents:
    """One exact envelope evaluation at the wage array v (finite and
    non-decreasing, else rejected)."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("wage array must be finite")
    _require_monotone(v)
    return WageOperator(params, grid, c).components(v)


def bellman_step(v, params: TechnologyParams, grid: SkillGrid, config: SolverConfig,
                 operator: WageOperator | None = None) -> np.ndarray:
    """One damped, convexified application of the exact envelope map."""
    v = np.asarray(v, dtype=float)
    _require_monotone(v)
    op = operator if operator is not None else WageOperator(params, grid)
    comp = op.components(v)
    vbar = op.envelope(comp)
    if not np.all(np.isfinite(vbar)):
        raise IterationDiverged("wage component overflowed; iteration diverged")
    return (1.0 - config.damping) * v + config.damping * convexify(vbar, grid.nodes)


def _bellman_polish(op: WageOperator, grid: SkillGrid, config: SolverConfig, v_start: np.ndarray):
    """Damped envelope iteration until the sup-norm change drops below tol.

    Stalls (no 2% decay over a 250-step lookback) halve the damping and
    restart from the seed, up to three times; exhaustion returns the last
    iterate flagged non-converged.
    """
    damping = config.damping
    restarts = 0
    seed = v_start.copy()
    v = seed.copy()
    converged = False
    iterations = 0
    lookback = 250
    marker = np.inf
    while True:
        comp = op.components(v)
        vbar = op.envelope(comp)
        if not np.all(np.isfinite(vbar)):
            raise IterationDiverged("wage component overflowed; iteration diverged")
        v_next = (1.0 - damping) * v + damping * convexify(vbar, grid.nodes)
        change = float(np.abs(v_next - v).max())
        v = v_next
        iterations += 1
        if change < config.tol:
            converged = True
            break
        if iterations >= config.max_iter:
            break
        if iterations % lookback == 0:
            if change > 0.98 * marker and np.isfinite(marker):
                if restarts >= 3:
                    break
                restarts += 1
                damping *= 0.5
                v = seed.copy()
                marker = np.inf
                continue
            marker = change
    return v, converged, iterations


def solve_wages(params: TechnologyParams, alpha: GridMeasure, grid: SkillGrid,
                config: SolverConfig | None = None, v0: np.ndarray | None = None,
                c_override: float | None = None) -> WageProfile:
    """Solve the (delta-perturbed) wage minimization on the grid.

    Anneals the smoothed dual to anchor the market-clearing wage level,
    extrapolates the temperature to zero, then runs the exact damped
    envelope iteration (bellman_step) until its sup-norm change is below
    tol; the converged flag reports that final criterion.  When c = 0 the
    operator uses config.c_delta, the continuation coupling that keeps the
    problem strictly convex.
    """
    if config is None:
        config = SolverConfig()
    c_eff = c_override
    if c_eff is None:
        c_eff = params.c if params.c > 0 else config.c_delta
    op = WageOperator(params, grid, c_eff)

    m = alpha.weights + config.delta / grid.n
    d = np.full(grid.n, config.delta / grid.n)
    v_init = op.lower_bound() if v0 is None else np.asarray(v0, dtype=float).copy()

    v_anneal = _anneal(op, m, d, v_init, config.eta_floor)
    v_anneal = convexify(v_anneal, grid.nodes)
    v, converged, iterations = _bellman_polish(op, grid, config, v_anneal)

    comp = op.components(v)
    residual = float(np.abs(v - op.envelope(comp)).max())
    objective = op.objective(comp.u, v, alpha, config.delta)
    return WageProfile(
        v=v, u=comp.u, v_w=comp.v_w, v_m=comp.v_m, v_t=comp.v_t,
        best_teacher=comp.best_teacher, best_student=comp.best_student,
        occupation=comp.occupation, converged=converged, iterations=iterations,
        objective=objective, envelope_residual=residual,
        delta=config.delta, c_used=c_eff,
    )


@dataclass(eq=False)
class ContinuationResult:
    deltas: list
    profiles: list
    extrapolated: WageProfile
    objectives: list
    monotone: bool
    truncated: bool


def delta_continuation(params: TechnologyParams, alpha: GridMeasure, grid: SkillGrid,
                       config: SolverConfig) -> ContinuationResult:
    """Solve along a geometric delta schedule down to the floor, warm
    starting each solve, and extrapolate the delta -> 0 profile.

    With c = 0 the continuation couples c_delta = delta, which keeps every
    member problem strictly convex; the limit profile is recovered by
    linear Richardson extrapolation from the last two members.  Any
    non-converged member truncates the sequence.
    """
    if config.delta <= 0:
        raise ValueError("delta continuation needs a positive starting delta")
    deltas = []
    dlt = config.delta
    while dlt > config.delta_floor * (1.0 + 1e-12):
        deltas.append(dlt)
        dlt *= config.delta_factor
    deltas.append(dlt)

    couple_c = params.c == 0.0
    profiles = []
    truncated = False
    v_start = None
    for dlt in deltas:
        cfg = replace(config, delta=dlt, c_delta=(dlt if couple_c else config.c_delta))
        prof = solve_wages(params, alpha, grid, cfg, v0=v_start)
        profiles.append(prof)
        if not prof.converged:
            truncated = True
            break
        v_start = prof.v

    used = deltas[: len(profiles)]
    objectives = [p.objective for p in profiles]
    monotone = all(objectives[i + 1] <= objectives[i] + 1e-10 for i in range(len(objectives) - 1))

    if len(profiles) >= 2 and not truncated:
        pa, pb = profiles[-2], profiles[-1]
        da, db = used[-2], used[-1]
        t = db / (da - db)
        vex = convexify(pb.v + t * (pb.v - pa.v), grid.nodes)
        c0 = 0.0 if couple_c else params.c
        op = WageOperator(params, grid, c0)
        comp = op.components(vex)
        extrapolated = WageProfile(
            v=vex, u=comp.u, v_w=comp.v_w, v_m=comp.v_m, v_t=comp.v_t,
            best_teacher=comp.best_teacher, best_student=comp.best_student,
            occupation=comp.occupation, converged=True, iterations=0,
            objective=float(alpha.weights @ comp.u),
            envelope_residual=float(np.abs(vex - op.envelope(comp)).max()),
            delta=0.0, c_used=c0,
        )
    else:
        extrapolated = profiles[-1]

    return ContinuationResult(used, profiles, extrapolated, objectives, monotone, truncated)


@dataclass(eq=False)
class StabilityReport:
    min_f: float
    argmin_f: tuple
    min_g: float
    argmin_g: tuple
    lower_bound_ok: bool
    lower_bound_worst: float
    upper_bound_ok: bool
    upper_bound_worst: float


def stability_residuals(profile: WageProfile, params: TechnologyParams, grid: SkillGrid) -> StabilityReport:
    """Exhaustive stability check over all grid pairs.

    f(a,k) = u(a) + v(k)/N - c b_E(z) - v(z) and
    g(k',k) = v(k') + v(k)/N' - b_L((1-t')k' + t'k)
    must both be nonnegative (up to tolerance) at equilibrium, alongside
    the node-wise wage bounds N/(N-1) (u - c b_E) >= v >= N'/(N'+1) b_L.
    """
    op = WageOperator(params, grid, profile.c_used)
    v, u = profile.v, profile.u
    p = params

    F = u[:, None] + v[None, :] / p.N - op.E - op.interp_at_z(v)
    i, j = np.unravel_index(int(F.argmin()), F.shape)
    min_f = float(F[i, j])
    argmin_f = (int(i), int(j))

    G = v[:, None] + v[None, :] / p.N_prime - op.BL
    gi, gj = np.unravel_index(int(G.argmin()), G.shape)
    min_g = float(G[gi, gj])
    argmin_g = (int(gi), int(gj))

    floor = op.lower_bound()
    lower_worst = float((v - floor).min())

    if p.N > 1.0:
        cap = (p.N / (p.N - 1.0)) * (u - op.c * np.asarray(p.bE.value(grid.nodes)))
        upper_worst = float((cap - v).min())
    else:
        upper_worst = np.inf  # the bound is vacuous when every adult teaches

    tol = 1e-7
    return StabilityReport(
        min_f=min_f, argmin_f=argmin_f, min_g=min_g, argmin_g=argmin_g,
        lower_bound_ok=lower_worst >= -tol, lower_bound_worst=lower_worst,
        upper_bound_ok=upper_worst >= -tol, upper_bound_worst=upper_worst,
    )
