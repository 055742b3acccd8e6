"""One-slack cutting-plane training of the nonnegative score weights."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import QPConvergenceError, ValidationError
from .features import AttackerContext, FeatureBank, ScoreModel
from .graph import node_set
from .inference import LaiProblem, brute_force_lai, lai_hamming, lai_modular_modular
from .losses import LossSpec, loss as loss_fn

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingPair:
    M: tuple
    P: tuple

    def __post_init__(self):
        M, P = node_set(self.M), node_set(self.P)
        if not M or not P:
            raise ValidationError("attacker and protector must be nonempty")
        if set(M) & set(P):
            raise ValidationError("attacker and protector overlap")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "P", P)

    def to_json(self) -> dict:
        return {"M": list(self.M), "P": list(self.P)}


@dataclass(frozen=True)
class ConstraintRow:
    delta_psi: np.ndarray
    ell: float


@dataclass(frozen=True)
class TrainerConfig:
    C: float = 0.01
    epsilon: float = 0.001
    max_cp_iters: int = 200
    lai_iters: int = 1
    separation: str = "lai"  # "lai" or "exact"; Hamming loss always uses its shortcut
    qp_tol: float = 1e-10
    qp_max_iter: int = 200_000
    threads: int = 1

    def __post_init__(self):
        if not self.C > 0 or not self.epsilon > 0:
            raise ValidationError("C and epsilon must be > 0")
        if self.separation not in ("lai", "exact"):
            raise ValidationError(f"unknown separation {self.separation!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "TrainerConfig":
        keys = {"C", "epsilon", "max_cp_iters", "lai_iters", "separation", "qp_tol", "qp_max_iter", "threads"}
        return cls(**{k: v for k, v in obj.items() if k in keys})


@dataclass
class QPResult:
    w: np.ndarray
    xi: float
    objective: float
    gap: float
    iterations: int
    dual: np.ndarray = field(repr=False, default=None)


def _project_capped_simplex(x: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection onto ``{lam >= 0, sum(lam) <= cap}``."""
    y = np.maximum(x, 0.0)
    if y.sum() <= cap:
        return y
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, len(x) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(x - theta, 0.0)


def solve_working_set_qp(rows: Sequence[ConstraintRow], cfg: TrainerConfig = TrainerConfig(),
                         K: Optional[int] = None, warm: Optional[np.ndarray] = None) -> QPResult:
    """min 1/2 |w|^2 + C xi  s.t.  w.dpsi_r >= ell_r - xi,  w >= 0,  xi >= 0.

    Solved through its dual over the row multipliers ``lam`` (``lam >= 0``,
    ``sum(lam) <= C``), where ``w = max(0, A^T lam)``, by accelerated
    projected gradient ascent with restarts.  The primal point returned is
    always feasible: ``xi`` is the largest remaining violation.  Convergence
    is certified by the duality gap.
    """
    if not rows:
        if K is None:
            raise ValidationError("K is required when the working set is empty")
        return QPResult(np.zeros(K), 0.0, 0.0, 0.0, 0, np.zeros(0))
    A = np.array([r.delta_psi for r in rows], dtype=np.float64)
    ell = np.array([r.ell for r in rows], dtype=np.float64)
    C = cfg.C
    R = len(rows)

    def primal(lam):
        w = np.maximum(A.T @ lam, 0.0)
        xi = max(0.0, float(np.max(ell - A @ w)))
        return w, xi, 0.5 * float(w @ w) + C * xi

    def dual(lam, w):
        return float(lam @ ell) - 0.5 * float(w @ w)

    L = float(np.linalg.norm(A, 2) ** 2)
    if L == 0.0:
        # every row has dpsi = 0: w = 0 and xi covers the worst ell
        w = np.zeros(A.shape[1])
        xi = max(0.0, float(ell.max()))
        return QPResult(w, xi, C * xi, 0.0, 0, np.zeros(R))
    step = 1.0 / L
    lam = np.zeros(R)
    if warm is not None and len(warm):
        lam[:len(warm)] = warm[:R]
        lam = _project_capped_simplex(lam, C)
    y, lam_prev, t = lam.copy(), lam.copy(), 1.0
    best = None
    for it in range(1, cfg.qp_max_iter + 1):
        grad = ell - A @ np.maximum(A.T @ y, 0.0)
        lam = _project_capped_simplex(y + step * grad, C)
        if it % 10 == 0 or it == 1:
            w, xi, pobj = primal(lam)
            dobj = dual(lam, w)
            gap = pobj - dobj
            if best is None or pobj < best[2]:
                best = (w, xi, pobj, gap, it, lam.copy())
            if gap <= cfg.qp_tol * max(1.0, abs(pobj)):
                return QPResult(w, xi, pobj, gap, it, lam)
        # gradient-based restart keeps the momentum from overshooting
        if (lam - y) @ (lam - lam_prev) < 0:
            t = 1.0
            y = lam.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = lam + ((t - 1.0) / t_next) * (lam - lam_prev)
            t = t_next
        lam_prev = lam
    w, xi, pobj, gap, _, lam = best
    raise QPConvergenceError("working-set QP did not converge", gap, xi)


@dataclass
class TrainResult:
    model: ScoreModel
    xi: float
    rounds: int
    converged: bool
    rows: list
    history: list

    def log_lines(self) -> str:
        return "".join(json.dumps(h) + "\n" for h in self.history)


class _PairState:
    def __init__(self, pair: TrainingPair, bank: FeatureBank, spec: LossSpec, k: int):
        self.pair = pair
        self.ctx = AttackerContext(bank, pair.M)
        self.g_true = self.ctx.counts(pair.P).astype(np.float64)
        self.k = k


def default_budget(pair: TrainingPair) -> int:
    return len(pair.M)


def one_slack_cutting_plane(pairs: Sequence[TrainingPair], bank: FeatureBank, loss: LossSpec,
                            cfg: TrainerConfig = TrainerConfig(),
                            k_fn: Callable[[TrainingPair], int] = default_budget) -> TrainResult:
    """Cutting-plane training with one shared slack and ``w >= 0``.

    Each round solves the QP over the working set, finds a violating
    protector per pair by loss-augmented inference, and adds the averaged
    constraint. Stops once the new constraint is violated by at most
    ``xi + epsilon``, or after ``max_cp_iters`` rounds; in that case the
    best ``w`` seen so far is returned, rescored with its slack against all
    collected rows.
    """
    if not pairs:
        raise ValidationError("need at least one training pair")
    G = bank.graph
    states = []
    for p in pairs:
        k = int(k_fn(p))
        ground = G.n - len(p.M)
        if not len(p.P) <= k <= ground:
            raise ValidationError(f"infeasible budget k={k} for pair {p.to_json()}")
        states.append(_PairState(p, bank, loss, k))
    n = len(states)
    rows: list[ConstraintRow] = []
    history = []
    lam = None
    qp = solve_working_set_qp(rows, cfg, K=bank.K)
    seen = [qp.w]
    converged = False
    rnd = 0
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        for rnd in range(1, cfg.max_cp_iters + 1):
            model = ScoreModel(bank, qp.w)
            sep = lambda st: _separate(st, model, loss, cfg)
            found = list(pool.map(sep, states)) if pool else [sep(st) for st in states]
            delta = np.zeros(bank.K)
            total_loss = 0.0
            for st, S in zip(states, found):
                delta += st.g_true - st.ctx.counts(S)
                total_loss += loss_fn(loss, G, st.pair.P, S)
            row = ConstraintRow(delta / n, loss.alpha * total_loss / n)
            violation = row.ell - float(qp.w @ row.delta_psi)
            history.append({"round": rnd, "objective": qp.objective, "violation": violation,
                            "xi": qp.xi, "rows": len(rows)})
            log.debug("round %d objective %.6g violation %.6g xi %.6g", rnd, qp.objective, violation, qp.xi)
            if violation <= qp.xi + cfg.epsilon:
                converged = True
                break
            rows.append(row)
            qp = solve_working_set_qp(rows, cfg, K=bank.K, warm=lam)
            lam = qp.dual
            seen.append(qp.w)
    finally:
        if pool:
            pool.shutdown()
    w, xi = qp.w, qp.xi
    if not converged and rows:
        w, xi = _best_so_far(seen, rows, cfg.C)
    return TrainResult(ScoreModel(bank, w), xi, rnd, converged, rows, history)


def _best_so_far(candidates, rows, C):
    A = np.array([r.delta_psi for r in rows])
    ell = np.array([r.ell for r in rows])
    best = None
    for w in candidates:
        xi = max(0.0, float(np.max(ell - A @ w)))
        obj = 0.5 * float(w @ w) + C * xi
        if best is None or obj < best[0]:
            best = (obj, w, xi)
    return best[1], best[2]


def _separate(st: _PairState, model: ScoreModel, loss: LossSpec, cfg: TrainerConfig) -> tuple:
    prob = LaiProblem(st.pair.M, st.pair.P, model, loss, st.k, context=st.ctx)
    if loss.kind == "hamming":
        return lai_hamming(prob).S
    if cfg.separation == "exact":
        return brute_force_lai(prob)
    return lai_modular_modular(prob, cfg.lai_iters).S


def save_weights(model: ScoreModel, path):
    with open(path, "w") as fh:
        json.dump(model.to_json(), fh)
