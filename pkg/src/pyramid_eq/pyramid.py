"""The educational pyramid: exact guru census, descendant chains with
gradient lower bounds, and the wage-gradient asymptotics near the top
skill type.

The census works in exact integers.  A population P with spans N, N'
splits into P/N teachers and P(1-1/N) workers+managers in ratio N':1;
the teachers then specialize recursively by what their students become,
dividing each occupation count by N per level until the counts stop
dividing evenly, at which point one mixed teacher absorbs the manager
remainder (the terminal "9+1+1" pattern for N = N' = 10).

Wage gradients near the top follow a generational structure: each
teaching generation shrinks the distance to the top by a factor N while
multiplying the gradient by N*theta, so v'(k_top - D) tracks
const * D^(-log(N theta)/log N) across generations.  phase_fit regresses
that form (with its additive constant) over octave-aggregated forward
differences inside the contiguous top teacher zone; per-node fits would
be dominated by the plateau of the outermost generation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import GridCoupling, GridMeasure, SkillGrid, TechnologyParams, pushforward_z
from .analysis import OccupationSplit, TeacherMap, SUPPORT_FLOOR, coupling_from_profile

__all__ = [
    "GuruHierarchy",
    "PhaseReport",
    "DescendantChain",
    "TopSlopeReport",
    "guru_census",
    "nearest_admissible_populations",
    "descendant_chain",
    "gradient_bound",
    "phase_fit",
    "top_slopes",
    "render_hierarchy",
    "regime_of",
]


def regime_of(params: TechnologyParams, tol: float = 1e-12) -> str:
    nt = params.N * params.theta
    if nt > 1.0 + tol:
        return "supercritical"
    if nt < 1.0 - tol:
        return "subcritical"
    return "critical"


# ---------------------------------------------------------------------------
# guru census
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GuruHierarchy:
    population: int
    N: int
    N_prime: int
    levels: list       # [(workers, managers, teachers)] then teacher splits per level
    terminal: dict     # mixed terminal pattern detail
    depth: int

    @property
    def workers(self) -> int:
        return self.levels[0][0]

    @property
    def managers(self) -> int:
        return self.levels[0][1]

    @property
    def teachers(self) -> int:
        return self.levels[0][2]


class InadmissiblePopulation(ValueError):
    def __init__(self, population, nearest):
        self.population = population
        self.nearest = nearest
        super().__init__(
            f"population {population} admits no exact integral hierarchy; "
            f"nearest admissible sizes: {nearest}"
        )


def _census_core(N: int, Np: int, population: int):
    """Exact integer decomposition, or None when some division fails."""
    if population <= 0:
        return None
    t, rt = divmod(population, N)
    if rt:
        return None
    rest = population - t
    w, rw = divmod(rest * Np, Np + 1)
    if rw:
        return None
    m = rest - w
    if m * Np != w:
        return None

    levels = [(w, m, t)]
    W, M, T = w, m, t
    while W % N == 0 and M % N == 0 and T % N == 0 and T >= N:
        W, M, T = W // N, M // N, T // N
        levels.append((W, M, T))

    # terminal split of the last level's teachers: workers' teachers must
    # come out exact; managers and teachers pool, with one mixed teacher
    # absorbing the manager remainder
    if W % N != 0 or (M + T) % N != 0:
        return None
    t_w = W // N
    pool = (M + T) // N
    pure_m, m_rem = divmod(M, N)
    mixed = 1 if m_rem else 0
    pure_t = pool - pure_m - mixed
    if pure_t < 0:
        return None
    if m_rem == 0 and T % N != 0:
        return None
    terminal = {
        "teach_workers": t_w,
        "teach_managers": pure_m + mixed,
        "teach_teachers": pure_t,
        "mixed": mixed,
        "mixed_load": (m_rem, N - m_rem) if mixed else (0, 0),
    }
    levels.append((t_w, pure_m + mixed, pure_t))
    return levels, terminal


def nearest_admissible_populations(N: int, N_prime: int, population: int, count: int = 2) -> list:
    """Closest populations (searching outward) that admit an exact hierarchy."""
    found = []
    span = max(population, N * (N_prime + 1)) * 4 + 1
    for offset in range(1, span):
        for cand in (population - offset, population + offset):
            if cand > 0 and _census_core(N, N_prime, cand) is not None:
                if cand not in found:
                    found.append(cand)
        if len(found) >= count:
            break
    return sorted(found)[:count]


def guru_census(N: int, N_prime: int, population: int) -> GuruHierarchy:
    """Exact combinatorial census of the educational pyramid.

    Requires integer spans N >= 2, N' >= 1 (a population where everyone
    teaches has no finite hierarchy) and a population admitting an exact
    integral decomposition; otherwise raises InadmissiblePopulation with
    the nearest admissible sizes.
    """
    if int(N) != N or int(N_prime) != N_prime:
        raise ValueError("census spans must be integers")
    N, N_prime = int(N), int(N_prime)
    if N < 2:
        raise ValueError("census needs N >= 2; with N = 1 every adult teaches and the tower never terminates")
    if N_prime < 1:
        raise ValueError("census needs N' >= 1")
    out = _census_core(N, N_prime, int(population))
    if out is None:
        raise InadmissiblePopulation(population, nearest_admissible_populations(N, N_prime, int(population)))
    levels, terminal = out
    return GuruHierarchy(int(population), N, N_prime, levels, terminal, depth=len(levels))


def render_hierarchy(h: GuruHierarchy) -> str:
    """Text tree of the census, mnemonic style."""
    lines = [f"population {h.population}  (N={h.N}, N'={h.N_prime})"]
    w, m, t = h.levels[0]
    lines.append(f"+- workers            {w}")
    lines.append(f"+- managers           {m}")
    lines.append(f"+- teachers           {t}")
    pad = "   "
    for lvl, (tw, tm, tt) in enumerate(h.levels[1:], start=1):
        last = lvl == len(h.levels) - 1
        lines.append(f"{pad}+- teach workers{'^' * (lvl - 1):4s}  {tw}")
        lines.append(f"{pad}+- teach managers{'^' * (lvl - 1):3s} {tm}" + ("  (incl. mixed)" if last and h.terminal["mixed"] else ""))
        lines.append(f"{pad}+- teach teachers{'^' * (lvl - 1):3s} {tt}")
        pad += "   "
    if h.terminal["mixed"]:
        mm, mt = h.terminal["mixed_load"]
        lines.append(f"{pad}(mixed guru teaches {mm} manager(s) + {mt} teacher(s))")
    mnemonic = " + ".join(str(v) for v in h.levels[0][:2])
    nest = None
    for lvl in reversed(h.levels[1:]):
        inner = " + ".join(str(v) for v in lvl)
        nest = f"({inner})" if nest is None else f"({lvl[0]} + {lvl[1]} + {nest})"
    if nest is None:
        nest = str(h.levels[0][2])
    lines.append(f"mnemonic: {h.population} = {mnemonic} + {nest}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# descendant chains and gradient bounds
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DescendantChain:
    ks: list
    depth: int
    truncated: bool
    strictly_decreasing: bool
    geometric_floor_ok: bool   # k_i >= theta^i k_0 along the chain


def descendant_chain(k0: float, tmap: TeacherMap, split: OccupationSplit,
                     params: TechnologyParams, grid: SkillGrid) -> DescendantChain:
    """Follow the academic descendants of a teacher of skill k0.

    Each step matches the current teacher skill back through the monotone
    teacher map to its student, who becomes an adult of skill z(student,
    teacher); the chain stops once that adult type carries worker or
    manager mass.  A chain still unresolved at the grid-resolution depth
    bound is flagged truncated.
    """
    x, h, n = grid.nodes, grid.h, grid.n
    wm = split.kappa_w.weights + split.kappa_m.weights

    def wm_node(k: float) -> bool:
        node = int(np.clip(round(k / h), 0, n - 1))
        return wm[node] > SUPPORT_FLOOR

    ks = [float(k0)]
    if wm_node(k0):
        return DescendantChain(ks, 0, False, True, True)

    depth_bound = max(4, int(math.ceil(math.log(h / grid.k_top) / math.log(params.theta))) + 3)
    truncated = False
    k = float(k0)
    while True:
        # invert the monotone teacher map at k (leftmost preimage)
        i = int(np.searchsorted(tmap.k_t, k, side="left"))
        if i == 0:
            a = float(x[0])
        elif i >= n:
            a = float(x[-1])
        elif tmap.k_t[i] > tmap.k_t[i - 1]:
            t = (k - tmap.k_t[i - 1]) / (tmap.k_t[i] - tmap.k_t[i - 1])
            a = float(x[i - 1] + t * (x[i] - x[i - 1]))
        else:
            a = float(x[i])
        k_next = a + params.theta * (k - a)
        ks.append(k_next)
        k = k_next
        if wm_node(k):
            break
        if len(ks) - 1 >= depth_bound:
            truncated = True
            break

    arr = np.asarray(ks)
    strictly = bool(np.all(np.diff(arr) < 0))
    floor_ok = bool(np.all(arr >= params.theta ** np.arange(len(arr)) * arr[0] - 1e-12))
    return DescendantChain(ks, len(ks) - 1, truncated, strictly, floor_ok)


def gradient_bound(d: int, k: float, v_prime_at_base: float, params: TechnologyParams) -> float:
    """Lower bound on the teacher wage gradient after d teaching
    generations: the geometric sum of N*theta per generation applied to
    c bE' evaluated at the geometrically shrunk skill, plus the propagated
    base slope.  The critical product N*theta = 1 degenerates to the
    arithmetic sum d * c bE'."""
    if d < 0:
        raise ValueError("chain depth must be nonnegative")
    nt = params.N * params.theta
    cb = params.c * float(params.bE.deriv(params.theta ** d * k))
    if abs(nt - 1.0) < 1e-12:
        return d * cb + v_prime_at_base
    return (1.0 - nt ** d) / (1.0 - nt) * nt * cb + nt ** d * v_prime_at_base


# ---------------------------------------------------------------------------
# phase transition fit
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class PhaseReport:
    regime: str
    fitted_exponent: float | None
    predicted_exponent: float | None
    fitted_limit_slope: float | None
    predicted_limit_slope: float | None
    density_ratio_measured: float | None
    density_ratio_predicted: float
    density_ratio_windows: list
    fit_window: tuple | None      # (first node, last node) of usable diffs
    fit_octaves: int
    residual: float | None
    usable_nodes: int
    declined: str | None
    hypotheses: dict
    vprime_top: list


def _top_teacher_zone(occupation: np.ndarray) -> int:
    zone = len(occupation)
    while zone > 0 and occupation[zone - 1] == 2:
        zone -= 1
    return zone


def phase_fit(profile, params: TechnologyParams, grid: SkillGrid,
              alpha: GridMeasure | None = None,
              eps: GridCoupling | None = None) -> PhaseReport:
    """Measure the wage-gradient behavior near the top skill type.

    Supercritical (N theta > 1): regress log(v' + c bL-side constant)
    against log of the distance to the top over octave-aggregated forward
    differences restricted to the contiguous top teacher zone.  The
    additive constant c bE'(k_top)/(1 - 1/(N theta)) is part of the
    asymptotic form; octave weighting keeps the outermost teaching
    generation (a near-plateau) from swamping the inner ones.  The final
    forward difference is kept: the innermost resolved generation lives
    there.  Subcritical: report the top usable forward difference against
    the limiting slope c bE'(k_top)/(1/(N theta) - 1).  Critical: no fit.

    Always reports the measured top-window density ratio kappa/alpha when
    alpha (or an explicit coupling) is available, and the empirical
    hypothesis flags: (i) top nodes teach, (ii) education coupling
    assortative, (iii)/(iv) differentiability diagnostics (reported, never
    asserted).
    """
    from .analysis import assortativity_check

    n, x, h = grid.n, grid.nodes, grid.h
    p = params
    nt = p.N * p.theta
    regime = regime_of(p)
    pred_exponent = math.log(nt) / math.log(p.N) if regime == "supercritical" else None
    bbarE = float(p.bE.deriv(p.k_top))
    pred_limit = p.c * bbarE / (1.0 / nt - 1.0) if regime == "subcritical" else None
    pred_ratio = (1.0 - p.theta / p.N) / (1.0 - p.theta)

    zone = _top_teacher_zone(profile.occupation)
    hyp_i = zone <= n - 1  # at least the top node teaches
    if eps is None and alpha is not None:
        eps = coupling_from_profile(profile, alpha, grid)
    if eps is not None:
        hyp_ii, _ = assortativity_check(eps)
    else:
        hyp_ii = None

    vp = np.diff(profile.v) / h if n >= 2 else np.array([])
    dk = p.k_top - (x[:-1] + 0.5 * h)

    # density ratio over shrinking dyadic top windows
    ratio = None
    windows = []
    if eps is not None and alpha is not None:
        kappa = pushforward_z(eps, p, grid)
        w = 4
        while w <= max(4, n // 16):
            at = alpha.tail_mass(n - w)
            if at > 0:
                windows.append((w * h, kappa.tail_mass(n - w) / at))
            w *= 2
        if windows:
            ratio = windows[-1][1]

    # differentiability diagnostics (reported, never asserted):
    # (iii) stability of the teacher-map top slope across two windows,
    # (iv) largest relative jump of v' over the top quarter
    hyp_iii = hyp_iv = None
    if eps is not None and alpha is not None and n >= 16:
        from .analysis import occupation_split
        lam0 = GridCoupling([0], [0], [0.0])
        split0 = occupation_split(eps, lam0, p, grid)
        tails = [split0.kappa.tail_mass(n - m) for m in (n // 32 or 1, n // 16 or 2)]
        if all(t > 0 for t in tails):
            s1 = (n // 32 or 1) * h / tails[0]
            s2 = (n // 16 or 2) * h / tails[1]
            hyp_iii = float(abs(s1 / s2 - 1.0))
    if n >= 8:
        i0, i1 = n - 2, max(zone, 3 * n // 4)
        if i1 < i0:
            jumps = np.diff(vp[i1:i0])
            hyp_iv = float(np.abs(jumps).max() / max(vp[i1:i0].max(), 1e-300)) if len(jumps) else None

    declined = None
    fitted_exponent = None
    fitted_limit = None
    residual = None
    fit_window = None
    octaves = 0

    lo = max(zone, int(math.ceil(0.75 * n)))
    hi = n - 2
    usable = np.arange(lo, hi + 1) if n >= 2 and hi >= lo else np.array([], dtype=int)

    if regime == "supercritical":
        shift = p.c * bbarE / (1.0 - 1.0 / nt)
        usable = usable[vp[usable] + shift > 0]
        if not hyp_i:
            declined = "top node is not a teacher (hypothesis i fails)"
        elif len(usable) < 8:
            declined = f"only {len(usable)} usable fit nodes (< 8)"
        else:
            ld = np.log(dk[usable])
            lv = np.log(vp[usable] + shift)
            oct_id = np.floor(np.log2(dk[usable] / p.k_top)).astype(int)
            pts = np.array([
                (ld[oct_id == o].mean(), lv[oct_id == o].mean())
                for o in np.unique(oct_id)
            ])
            octaves = len(pts)
            if octaves < 2:
                declined = "fit window spans fewer than two octaves"
            else:
                A = np.vstack([np.ones(octaves), pts[:, 0]]).T
                coef, *_ = np.linalg.lstsq(A, pts[:, 1], rcond=None)
                fitted_exponent = float(-coef[1])
                residual = float(np.sqrt(np.mean((A @ coef - pts[:, 1]) ** 2)))
                fit_window = (int(usable[0]), int(usable[-1]))
    elif regime == "subcritical":
        usable = usable[vp[usable] > 0]
        if not hyp_i:
            declined = "top node is not a teacher (hypothesis i fails)"
        elif len(usable) < 8:
            declined = f"only {len(usable)} usable fit nodes (< 8)"
        else:
            fitted_limit = float(vp[usable[-1]])
            fit_window = (int(usable[0]), int(usable[-1]))
            residual = float(abs(fitted_limit - pred_limit))
    else:
        declined = "critical regime N theta = 1: no exponent to fit"

    hypotheses = {"i": bool(hyp_i), "ii": hyp_ii, "iii": hyp_iii, "iv": hyp_iv}
    return PhaseReport(
        regime=regime,
        fitted_exponent=fitted_exponent,
        predicted_exponent=pred_exponent,
        fitted_limit_slope=fitted_limit,
        predicted_limit_slope=pred_limit,
        density_ratio_measured=ratio,
        density_ratio_predicted=pred_ratio,
        density_ratio_windows=windows,
        fit_window=fit_window,
        fit_octaves=octaves,
        residual=residual,
        usable_nodes=int(len(usable)),
        declined=declined,
        hypotheses=hypotheses,
        vprime_top=[float(t) for t in vp[-min(8, len(vp)):]],
    )


# ---------------------------------------------------------------------------
# top slopes of the teacher and acquired-skill maps
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TopSlopeReport:
    slope_t: float
    slope_g: float
    predicted_t: float
    predicted_g: float
    rel_err_t: float
    rel_err_g: float
    identity_rel_err: float     # N kt'(top) vs kg'(top)
    window: float
    declined: str | None


def top_slopes(tmap: TeacherMap, params: TechnologyParams, grid: SkillGrid,
               split: OccupationSplit | None = None, alpha: GridMeasure | None = None,
               window: float | None = None) -> TopSlopeReport:
    """One-sided top slopes of k_t and k_g against their closed forms
    (1-theta)/(N-theta) and (1-theta)/(1-theta/N).

    The teacher map moves in whole grid steps (one teacher serves a block
    of student nodes), so per-node difference quotients are degenerate.
    With the occupational split available the slopes come from the mass
    balance of the maps over a top window D: the students feeding the top
    D of teacher skills carry exactly N * kappa_t[k_top - D, k_top], so
    kt'(top) = D * alpha_density(top) / (N * kappa_t-tail), and likewise
    kg'(top) = D * alpha_density(top) / kappa-tail.  Without the split the
    slopes fall back to one-sided difference quotients of the inverse maps
    over the window.
    """
    p = params
    n, x = grid.n, grid.nodes
    pred_t = (1.0 - p.theta) / (p.N - p.theta)
    pred_g = (1.0 - p.theta) / (1.0 - p.theta / p.N)

    declined = None
    if split is not None and split.kappa_t.weights[-1] <= SUPPORT_FLOOR:
        declined = "top node carries no teacher mass (hypothesis i fails)"
    if n < 8:
        declined = "grid too coarse for top-slope estimates"
    if declined:
        return TopSlopeReport(float("nan"), float("nan"), pred_t, pred_g,
                              float("nan"), float("nan"), float("nan"),
                              0.0, declined)

    W = window if window is not None else max(4 * grid.h, p.k_top / 32.0)

    if split is not None and alpha is not None:
        m = max(1, int(round(W / grid.h)))
        W = m * grid.h
        a_density = alpha.tail_mass(n - m) / W
        kt_tail = split.kappa_t.tail_mass(n - m)
        k_tail = split.kappa.tail_mass(n - m)
        if kt_tail <= 0 or k_tail <= 0 or a_density <= 0:
            return TopSlopeReport(float("nan"), float("nan"), pred_t, pred_g,
                                  float("nan"), float("nan"), float("nan"),
                                  W, "empty top window")
        slope_t = float(W * a_density / (p.N * kt_tail))
        slope_g = float(W * a_density / k_tail)
    else:
        def inverse_window_slope(arr: np.ndarray) -> float:
            target = arr[-1] - W
            i = int(np.searchsorted(arr, target, side="left"))
            if i <= 0:
                return float("nan")
            if arr[i] > arr[i - 1]:
                t = (target - arr[i - 1]) / (arr[i] - arr[i - 1])
                a_star = x[i - 1] + t * (x[i] - x[i - 1])
            else:
                a_star = x[i]
            run = x[-1] - a_star
            return float(W / run) if run > 0 else float("nan")

        slope_t = inverse_window_slope(np.asarray(tmap.k_t))
        slope_g = inverse_window_slope(np.asarray(tmap.k_g))

    if not (np.isfinite(slope_t) and np.isfinite(slope_g)):
        return TopSlopeReport(slope_t, slope_g, pred_t, pred_g,
                              float("nan"), float("nan"), float("nan"),
                              W, "teacher map window fell off the grid")

    return TopSlopeReport(
        slope_t=slope_t, slope_g=slope_g,
        predicted_t=pred_t, predicted_g=pred_g,
        rel_err_t=abs(slope_t - pred_t) / pred_t,
        rel_err_g=abs(slope_g - pred_g) / pred_g,
        identity_rel_err=abs(p.N * slope_t - slope_g) / slope_g,
        window=W, declined=None,
    )
