"""Hill-function ODE models, equilibrium continuation in the input signal, fold detection.

Each step function of the switching model is replaced by a Hill function
with a shared exponent ``n``::

    H+(x) = ell + delta * x^n / (theta^n + x^n)
    H-(x) = ell + delta * theta^n / (theta^n + x^n)

and node ``i`` obeys ``x_i' = -gamma_i x_i + H_i(x) (+ s on the input node)``.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hysteresis import Direction
from .net import RegulatoryNetwork
from .sample import NumericParameter, SampleError, normalize_scale, sample_region
from .stg import ParameterContext

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAXIT = 50
STEP_MIN = 1e-6
STEP_MAX = 0.1
S_BOUNDS = (-0.5, 4.5)
FOLD_TOL = 1e-6


class HillError(ValueError):
    pass


def hill_plus(x, ell, delta, theta, n):
    if x <= 0.0:
        return ell, 0.0
    r = (x / theta) ** n
    h = r / (1.0 + r)
    return ell + delta * h, delta * n * h / (1.0 + r) / x


def hill_minus(x, ell, delta, theta, n):
    if x <= 0.0:
        return ell + delta, 0.0
    r = (x / theta) ** n
    h = r / (1.0 + r)
    return ell + delta * (1.0 - h), -delta * n * h / (1.0 + r) / x


@dataclass
class HillModel:
    net: RegulatoryNetwork
    params: NumericParameter
    n: float
    terms: list = field(repr=False, default_factory=list)

    @property
    def dim(self) -> int:
        return self.net.node_count

    def production(self, x):
        """Production per node and its gradient rows."""
        N = self.dim
        prod = np.empty(N)
        grad = np.zeros((N, N))
        for i, (beta, act, rep) in enumerate(self.terms):
            if beta is not None:
                prod[i] = beta
                continue
            if act:
                total = 0.0
                dtot = {}
                for m, ell, delta, theta in act:
                    h, dh = hill_plus(x[m], ell, delta, theta, self.n)
                    total += h
                    dtot[m] = dtot.get(m, 0.0) + dh
            else:
                total, dtot = 1.0, {}
            factors = [hill_minus(x[m], ell, delta, theta, self.n) for m, ell, delta, theta in rep]
            value = total
            for h, _ in factors:
                value *= h
            prod[i] = value
            # product rule: d(total * prod h_r) = dtotal * prod h + total * sum(dh_r prod_{q != r} h_q)
            rest = value / total if total else 0.0
            for m, d in dtot.items():
                grad[i, m] += d * rest
            for r, ((h, dh), (m, *_)) in enumerate(zip(factors, rep)):
                others = total
                for q, (hq, _) in enumerate(factors):
                    if q != r:
                        others *= hq
                grad[i, m] += dh * others
        return prod, grad

    def rhs(self, x, s: float) -> np.ndarray:
        prod, _ = self.production(x)
        f = -self.gamma * np.asarray(x, dtype=float) + prod
        f[self.net.input_node] += s
        return f

    def jacobian(self, x) -> np.ndarray:
        _, grad = self.production(x)
        return grad - np.diag(self.gamma)

    def rhs_jac(self, x, s):
        prod, grad = self.production(x)
        f = -self.gamma * np.asarray(x, dtype=float) + prod
        f[self.net.input_node] += s
        return f, grad - np.diag(self.gamma)

    @property
    def gamma(self) -> np.ndarray:
        g = self.__dict__.get("_gamma")
        if g is None:
            g = self.__dict__["_gamma"] = np.array([self.params.gamma[i] for i in range(self.dim)])
        return g

    def min_threshold(self, node: int) -> float:
        return min(v for (t, m), v in self.params.theta.items() if m == node)

    def max_threshold(self, node: int) -> float:
        return max(v for (t, m), v in self.params.theta.items() if m == node)


def build_model(net: RegulatoryNetwork, params: NumericParameter, n: float) -> HillModel:
    if n < 1:
        raise HillError(f"Hill exponent must be >= 1, got {n}")
    terms = []
    for i in range(net.node_count):
        if i not in params.gamma:
            raise HillError(f"missing gamma{i}")
        ins = net.inputs(i)
        if not ins:
            if i not in params.beta:
                raise HillError(f"node {i} has no inputs and needs beta{i}")
            terms.append((params.beta[i], [], []))
            continue
        act, rep = [], []
        for m, sign in ins:
            try:
                t = (m, params.ell[(i, m)], params.delta[(i, m)], params.theta[(i, m)])
            except KeyError as exc:
                raise HillError(f"missing parameter for edge {m}->{i}: {exc}") from None
            (act if sign > 0 else rep).append(t)
        terms.append((None, act, rep))
    known = {(tgt, src) for src, tgt, _ in net.edges}
    extra = [k for k in params.theta if k[0] is not None and k not in known]
    if extra:
        raise HillError(f"thresholds for edges not in the network: {sorted(extra)}")
    for key, v in params.items():
        if v < 0 or (v == 0 and not key.startswith(("ell_", "delta_"))):
            raise HillError(f"{key} must be positive, got {v}")
    return HillModel(net, params, float(n), terms)


# -- equilibria ----------------------------------------------------------------------------


class NewtonFailed(RuntimeError):
    pass


def find_equilibrium(model: HillModel, s: float, x_guess, tol: float = NEWTON_TOL,
                     maxit: int = NEWTON_MAXIT) -> np.ndarray:
    x = np.array(x_guess, dtype=float)
    for _ in range(maxit):
        f, J = model.rhs_jac(x, s)
        if np.max(np.abs(f)) < tol:
            return x
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            raise NewtonFailed("singular Jacobian") from None
        x = x + dx
        if not np.all(np.isfinite(x)):
            raise NewtonFailed("iterate diverged")
    f = model.rhs(x, s)
    if np.max(np.abs(f)) < tol:
        return x
    raise NewtonFailed(f"no convergence in {maxit} iterations (residual {np.max(np.abs(f)):.2e})")


# -- continuation ----------------------------------------------------------------------------


class CurveStatus(enum.Enum):
    COMPLETED = "completed"
    NEWTON_FAILED = "newton-failed"
    STEP_FLOOR = "step-floor"


@dataclass
class Fold:
    s: float
    x_before: float  # output coordinate on the branch just before the turn
    x_after: float


@dataclass
class ContinuationCurve:
    points: list = field(default_factory=list)  # (s, x array, det sign)
    folds: list = field(default_factory=list)
    status: CurveStatus = CurveStatus.COMPLETED

    def to_csv(self) -> str:
        n = len(self.points[0][1]) if self.points else 0
        head = "s," + ",".join(f"x{i}" for i in range(n)) + ",det_sign"
        rows = [head]
        for s, x, sign in self.points:
            rows.append(f"{s!r}," + ",".join(repr(float(v)) for v in x) + f",{sign}")
        return "\n".join(rows) + "\n"


def _det_sign(J) -> int:
    d = np.linalg.det(J)
    return 0 if d == 0 else (1 if d > 0 else -1)


def _augmented(model, y, t, y_pred):
    x, s = y[:-1], y[-1]
    f, J = model.rhs_jac(x, s)
    N = model.dim
    A = np.zeros((N + 1, N + 1))
    A[:N, :N] = J
    A[model.net.input_node, N] = 1.0  # df/ds
    A[N] = t
    G = np.append(f, t @ (y - y_pred))
    return G, A


def _correct(model, y_pred, t, tol=NEWTON_TOL, maxit=12):
    y = y_pred.copy()
    for it in range(maxit):
        G, A = _augmented(model, y, t, y_pred)
        if np.max(np.abs(G)) < tol:
            return y, it
        try:
            y = y - np.linalg.solve(A, G)
        except np.linalg.LinAlgError:
            return None, it
        if not np.all(np.isfinite(y)):
            return None, it
    G, _ = _augmented(model, y, t, y_pred)
    return (y, maxit) if np.max(np.abs(G)) < tol else (None, maxit)


def _tangent(model, y, t_prev):
    x, s = y[:-1], y[-1]
    N = model.dim
    A = np.zeros((N + 1, N + 1))
    A[:N, :N] = model.jacobian(x)
    A[model.net.input_node, N] = 1.0
    A[N] = t_prev
    rhs = np.zeros(N + 1)
    rhs[N] = 1.0
    t = np.linalg.solve(A, rhs)
    return t / np.linalg.norm(t)


def _refine_fold(model, ya, yb, sa_sign):
    """Bisect along the chord between two branch points around a determinant sign change.

    Near a fold s is quadratic in arclength, so the bracket is shrunk in the full
    state space until its s-spread is far below FOLD_TOL.
    """
    for _ in range(80):
        if np.linalg.norm(yb - ya) < FOLD_TOL * 1e-3:
            break
        chord = yb - ya
        t = chord / np.linalg.norm(chord)
        ym, _ = _correct(model, (ya + yb) / 2.0, t)
        if ym is None:
            break
        sign = _det_sign(model.jacobian(ym[:-1]))
        if sign == sa_sign:
            ya = ym
        else:
            yb = ym
    return ya, yb


def continue_branch(model: HillModel, x_start, s_range=(0.0, 4.0), h0: float = 0.01,
                    max_steps: int = 20000, output: int | None = None,
                    step_max: float = STEP_MAX) -> ContinuationCurve:
    """Pseudo-arclength continuation in ``s`` from an equilibrium at ``s_range[0]``."""
    out = model.net.output_node if output is None else output
    s0, s1 = s_range
    x = find_equilibrium(model, s0, x_start)
    y = np.append(x, s0)
    N = model.dim
    t = np.zeros(N + 1)
    t[N] = 1.0
    t = _tangent(model, y, t)
    if t[N] < 0:
        t = -t
    curve = ContinuationCurve()
    sign = _det_sign(model.jacobian(x))
    curve.points.append((float(s0), x.copy(), sign))
    h = min(max(h0, STEP_MIN), step_max)
    for _ in range(max_steps):
        y_pred = y + h * t
        y_new, iters = _correct(model, y_pred, t)
        if y_new is None:
            h /= 2.0
            if h < STEP_MIN:
                curve.status = CurveStatus.STEP_FLOOR
                return curve
            continue
        t_new = _tangent(model, y_new, t)
        new_sign = _det_sign(model.jacobian(y_new[:-1]))
        if new_sign != sign and new_sign != 0 and sign != 0:
            ya, yb = _refine_fold(model, y, y_new, sign)
            s_fold = 0.5 * (ya[-1] + yb[-1])
            curve.folds.append(Fold(float(s_fold), float(y[out]), float(y_new[out])))
        elif new_sign == 0:
            log.info("determinant vanished without a sign change at s=%.6g", y_new[-1])
        y, t, sign = y_new, t_new, (new_sign or sign)
        curve.points.append((float(y[-1]), y[:-1].copy(), sign))
        if y[-1] > s1 or not (S_BOUNDS[0] <= y[-1] <= S_BOUNDS[1]):
            return curve
        if iters <= 3:
            h = min(h * 1.5, step_max)
        elif iters > 6:
            h = max(h / 2.0, STEP_MIN)
    curve.status = CurveStatus.STEP_FLOOR
    return curve


def classify_curve(curve: ContinuationCurve, direction: Direction = Direction.ASCENDING,
                   s_range=(0.0, 4.0)) -> bool:
    if curve.status is not CurveStatus.COMPLETED:
        return False
    folds = [f for f in curve.folds if s_range[0] <= f.s <= s_range[1]]
    if not folds or len(folds) % 2:
        return False
    if direction is Direction.ASCENDING:
        return all(f.x_before < f.x_after for f in folds)
    return all(f.x_before > f.x_after for f in folds)


# -- numeric scores ------------------------------------------------------------------------


def initial_guess(model: HillModel, rng, direction: Direction) -> np.ndarray:
    out = model.net.output_node
    x = np.empty(model.dim)
    for k in range(model.dim):
        x[k] = model.min_threshold(k) * (1.0 - rng.random())  # (0, min]
    if direction is Direction.DESCENDING:
        top = model.max_threshold(out)
        x[out] = top * (1.0 + (1.0 - rng.random()))  # (max, 2 max]
    return x


def _start_equilibrium(model: HillModel, guess, direction: Direction):
    out = model.net.output_node
    x = find_equilibrium(model, 0.0, guess)
    if direction is Direction.ASCENDING:
        ok = 0 < x[out] <= model.min_threshold(out)
    else:
        ok = x[out] > model.max_threshold(out)
    return x if ok else None


def point_curves(model: HillModel, rng, guesses: int = 10,
                 direction: Direction = Direction.ASCENDING, stop_early: bool = False):
    """Run the continuation from each initial guess; yields ``(guess, curve or None, note)``."""
    for _ in range(guesses):
        guess = initial_guess(model, rng, direction)
        try:
            x = _start_equilibrium(model, guess, direction)
        except NewtonFailed as exc:
            yield guess, None, f"newton: {exc}"
            continue
        if x is None:
            yield guess, None, "start equilibrium outside the initial box"
            continue
        try:
            curve = continue_branch(model, x)
        except (NewtonFailed, np.linalg.LinAlgError) as exc:
            log.info("continuation failed: %s", exc)
            yield guess, None, f"continuation: {exc}"
            continue
        hit = classify_curve(curve, direction)
        yield guess, curve, "hysteretic" if hit else "not hysteretic"
        if hit and stop_early:
            return


def hysteretic_point(model: HillModel, rng, guesses: int = 10,
                     direction: Direction = Direction.ASCENDING) -> bool:
    return any(note == "hysteretic" for _, _, note in
               point_curves(model, rng, guesses, direction, stop_early=True))


def input_regions(ctx: ParameterContext, perturbed: bool = False, transpositions: bool = True):
    """Parameter nodes with the input node at its minimal vertex (any threshold order)."""
    from .logic import neighborhood
    net = ctx.net
    g0 = ctx.graphs[net.input_node]
    mins = [g0.vertex_id(o, g0.template.minimum) for o in range(len(g0.orders))]
    others = [ctx.graphs[n] for n in range(net.node_count) if n != net.input_node]
    if perturbed:
        pairs = neighborhood(others, transpositions)
    else:
        import itertools
        pairs = list(itertools.product(*(g.essential() for g in others)))
    regions = []
    for v0 in mins:
        for pair in pairs:
            p = list(pair)
            p.insert(net.input_node, v0)
            regions.append(tuple(p))
    return regions


@dataclass
class NumericScore:
    hysteretic: int
    samples: int
    failures: int

    @property
    def percent(self) -> float:
        return 100.0 * self.hysteretic / self.samples if self.samples else 0.0


_CONTEXTS: dict = {}  # inherited by forked workers


def _context(net: RegulatoryNetwork) -> ParameterContext:
    ctx = _CONTEXTS.get(net)
    if ctx is None:
        ctx = _CONTEXTS[net] = ParameterContext.build(net)
    return ctx


def _score_sample(args):
    net, n, regions, i, guesses, direction, seed, scale_top = args
    ctx = _context(net)
    rng = np.random.default_rng([seed, i])
    pnode = regions[int(rng.integers(len(regions)))]
    try:
        params = sample_region(ctx, pnode, seed=int(rng.integers(2**31)))
    except SampleError as exc:
        log.warning("sample %d: %s", i, exc)
        return None
    if scale_top is not None:
        params = normalize_scale(ctx.net, params, scale_top)
    return hysteretic_point(build_model(ctx.net, params, n), rng, guesses, direction)


def numeric_hysteresis_score(ctx: ParameterContext, n: float, regions, samples: int,
                             seeds_per_sample: int = 10,
                             direction: Direction = Direction.ASCENDING,
                             seed: int = 0, scale_top: float | None = 3.0,
                             jobs: int = 1) -> NumericScore:
    """Percent of sampled parameter points whose continuation shows a hysteretic curve.

    Sample ``i`` draws its region, parameters and guesses from a generator seeded
    with ``(seed, i)``, so the score does not depend on ``jobs``. Samples are
    rescaled (see ``normalize_scale``) so the input range s in [0, 4] can carry
    node 0 past all of its thresholds; ``scale_top=None`` keeps raw witnesses.
    """
    if not regions:
        return NumericScore(0, 0, 0)
    _CONTEXTS[ctx.net] = ctx
    tasks = [(ctx.net, n, tuple(regions), i, seeds_per_sample, direction, seed, scale_top)
             for i in range(samples)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_score_sample, tasks, chunksize=4))
    else:
        results = [_score_sample(t) for t in tasks]
    hits = sum(1 for r in results if r)
    fails = sum(1 for r in results if r is None)
    return NumericScore(hits, samples, fails)
