"""Linear and kernel classifiers over sparse tf-idf rows.

Logistic regression minimizes

    sum_i s_i * log(1 + exp(-y_i (w.x_i + b))) + R(w) / C

with ``y_i`` in {-1, +1}, per-sample weights ``s_i`` from the class weighting
and ``R`` one of ``||w||_1``, ``0.5 ||w||_2^2`` or nothing.  The bias is never
penalized.  Smooth problems go through L-BFGS.  The l1 problem starts from a
bound-constrained L-BFGS solve on the split ``w = u - v`` and is finished by
a monotone accelerated proximal-gradient method with soft-thresholding.

The linear SVM minimizes the squared hinge ``sum_i s_i max(0, 1 - y_i f_i)^2
+ ||w||^2 / (2C)``; the rbf SVM solves the hinge-loss dual with SMO under the
box ``0 <= alpha_i <= C * s_i``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import expit

from .features import SparseVector

log = logging.getLogger(__name__)

C_GRID = (1, 10, 100, 1000)
PENALTIES = ("l1", "l2", "none")
GAMMA_GRID = (1, 0.1, 0.001, 0.0001)


class DegenerateLabelsError(ValueError):
    pass


@dataclass(frozen=True)
class LogisticConfig:
    penalty: str = "l2"
    C: float = 1.0
    class_weight: str = "balanced"
    max_iter: int = 1000
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.class_weight not in ("balanced", "uniform"):
            raise ValueError("class_weight must be 'balanced' or 'uniform'")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    kernel: str = "linear"
    gamma: float = 1.0
    class_weight: str = "balanced"
    tol: float = 1e-4
    max_passes: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.kernel not in ("linear", "rbf"):
            raise ValueError("kernel must be 'linear' or 'rbf'")
        if self.kernel == "rbf" and not self.gamma > 0:
            raise ValueError("gamma must be positive for the rbf kernel")
        if self.class_weight not in ("balanced", "uniform"):
            raise ValueError("class_weight must be 'balanced' or 'uniform'")

    def to_dict(self) -> dict:
        return asdict(self)


def logistic_grid(seed: int = 0) -> list[LogisticConfig]:
    return [LogisticConfig(penalty=p, C=float(c), seed=seed) for p in PENALTIES for c in C_GRID]


def svm_grid(seed: int = 0) -> list[SvmConfig]:
    cells = [SvmConfig(C=float(c), kernel="linear", seed=seed) for c in C_GRID]
    cells += [SvmConfig(C=float(c), kernel="rbf", gamma=float(g), seed=seed) for c in C_GRID for g in GAMMA_GRID]
    return cells


@dataclass(eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    model_kind: str  # "logistic" | "svm_linear"
    config: dict
    converged: bool = True
    n_iter: int = 0
    seed: int = 0
    objective_trace: list = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def to_dict(self, vocabulary_ref: str | None = None) -> dict:
        nz = np.flatnonzero(self.weights)
        return {
            "model_kind": self.model_kind,
            "config": self.config,
            "vocabulary_ref": vocabulary_ref,
            "dim": self.dim,
            "weights": [[int(i), float(self.weights[i])] for i in nz],
            "bias": float(self.bias),
            "converged": bool(self.converged),
            "seed": int(self.seed),
        }


@dataclass(eq=False)
class KernelModel:
    support_vectors: sp.csr_matrix
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    config: dict
    converged: bool = True
    n_iter: int = 0
    seed: int = 0
    model_kind: str = "svm_rbf"
    box: np.ndarray | None = field(default=None, repr=False)  # per-vector upper bound C * s_i

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def to_dict(self, vocabulary_ref: str | None = None) -> dict:
        sv = [SparseVector.from_row(self.support_vectors[i]).pairs() for i in range(self.support_vectors.shape[0])]
        return {
            "model_kind": self.model_kind,
            "config": self.config,
            "vocabulary_ref": vocabulary_ref,
            "dim": self.dim,
            "support_vectors": [[[i, v] for i, v in row] for row in sv],
            "dual_coef": [float(a) for a in self.dual_coef],
            "bias": float(self.bias),
            "gamma": float(self.gamma),
            "converged": bool(self.converged),
            "seed": int(self.seed),
        }


Model = Union[LinearModel, KernelModel]


def model_from_dict(d: dict) -> Model:
    dim = int(d["dim"])
    if d["model_kind"] in ("logistic", "svm_linear"):
        w = np.zeros(dim)
        for i, v in d["weights"]:
            w[int(i)] = v
        return LinearModel(w, float(d["bias"]), d["model_kind"], d["config"], bool(d["converged"]), seed=int(d["seed"]))
    if d["model_kind"] == "svm_rbf":
        rows = [SparseVector.from_pairs([(int(i), v) for i, v in r], dim).to_csr() for r in d["support_vectors"]]
        sv = sp.vstack(rows, format="csr") if rows else sp.csr_matrix((0, dim))
        return KernelModel(sv, np.asarray(d["dual_coef"], dtype=float), float(d["bias"]), float(d["gamma"]),
                           d["config"], bool(d["converged"]), seed=int(d["seed"]))
    raise ValueError(f"unknown model_kind {d['model_kind']!r}")


def dumps_model(model: Model, vocabulary_ref: str | None = None) -> str:
    return json.dumps(model.to_dict(vocabulary_ref), sort_keys=True)


def as_matrix(X) -> sp.csr_matrix:
    """Accept a sparse matrix, a dense 2-D array or a sequence of SparseVector."""
    if sp.issparse(X):
        return X.tocsr()
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return sp.csr_matrix(X, dtype=np.float64)
    X = list(X)
    if not X:
        raise ValueError("no samples")
    dims = {x.dim for x in X}
    if len(dims) != 1:
        raise ValueError("feature vectors have inconsistent dimensions")
    return sp.vstack([x.to_csr() for x in X], format="csr")


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be a 1-D 0/1 vector")
    if y.min() == y.max():
        raise DegenerateLabelsError("degenerate labels")
    return y.astype(np.int64)


def class_weights(labels) -> tuple[float, float]:
    """Balanced weights ``n / (2 * n_c)`` for the negative and positive class."""
    y = _check_labels(labels)
    n, n_pos = y.size, int(y.sum())
    return n / (2.0 * (n - n_pos)), n / (2.0 * n_pos)


def _sample_weights(y: np.ndarray, scheme: str) -> np.ndarray:
    if scheme == "uniform":
        return np.ones(y.size)
    w_neg, w_pos = class_weights(y)
    return np.where(y == 1, w_pos, w_neg)


def logistic_objective(params, X, y, sample_weight, penalty: str, C: float):
    """Objective value and gradient at ``params = [w..., b]``.

    For ``penalty='l1'`` the gradient uses ``sign(w)``, which is the true
    gradient wherever no weight is exactly zero.
    """
    X = as_matrix(X)
    ys = 2.0 * np.asarray(y, dtype=float) - 1.0
    w, b = params[:-1], params[-1]
    margin = ys * (X @ w + b)
    value = float(np.dot(sample_weight, np.logaddexp(0.0, -margin)))
    gz = -sample_weight * ys * expit(-margin)
    gw = X.T @ gz
    if penalty == "l2":
        value += 0.5 * float(np.dot(w, w)) / C
        gw = gw + w / C
    elif penalty == "l1":
        value += float(np.abs(w).sum()) / C
        gw = gw + np.sign(w) / C
    return value, np.append(gw, gz.sum())


def _squared_hinge_objective(params, X, ys, sw, C):
    w, b = params[:-1], params[-1]
    slack = np.maximum(0.0, 1.0 - ys * (X @ w + b))
    value = float(np.dot(sw, slack * slack)) + 0.5 * float(np.dot(w, w)) / C
    gz = -2.0 * sw * ys * slack
    return value, np.append(X.T @ gz + w / C, gz.sum())


def _lbfgs(fun, x0, tol, max_iter, trace: list | None):
    last = {}

    def wrapped(x):
        f, g = fun(x)
        last["g"] = g
        return f, g

    callback = None
    if trace is not None:
        trace.append(fun(x0)[0])

        def callback(xk):
            trace.append(fun(xk)[0])

    res = minimize(
        wrapped, x0, jac=True, method="L-BFGS-B", callback=callback,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 0.0, "maxcor": 20},
    )
    _, g = fun(res.x)
    converged = bool(np.max(np.abs(g)) < tol)
    return res.x, converged, int(res.nit)


def _soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _l1_warm_start(smooth, d, C, tol, max_iter):
    """Bound-constrained quasi-Newton on the split ``w = u - v`` (u, v >= 0).

    This is an exact reformulation of the l1 problem; it gets close to the
    optimum much faster than proximal steps alone on ill-conditioned data.
    """
    def fun(z):
        u, v, b = z[:d], z[d:2 * d], z[-1]
        f, g = smooth(np.append(u - v, b))
        gw = g[:-1]
        return f + float(u.sum() + v.sum()) / C, np.concatenate([gw + 1.0 / C, -gw + 1.0 / C, g[-1:]])

    bounds = [(0.0, None)] * (2 * d) + [(None, None)]
    res = minimize(fun, np.zeros(2 * d + 1), jac=True, method="L-BFGS-B", bounds=bounds,
                   options={"maxiter": max_iter, "gtol": tol * 1e-2, "ftol": 0.0, "maxcor": 20})
    z = res.x
    return np.append(z[:d] - z[d:2 * d], z[-1]), int(res.nit)


def _l1_logistic(X, y, sw, C, tol, max_iter, trace: list | None):
    """Monotone FISTA with backtracking; the bias coordinate is not shrunk.

    Starts from a quasi-Newton solution of the split formulation, so the
    proximal iterations mostly certify optimality through the gradient
    mapping.
    """
    d = X.shape[1]
    ys = 2.0 * y - 1.0

    def smooth(p):
        margin = ys * (X @ p[:-1] + p[-1])
        gz = -sw * ys * expit(-margin)
        return float(np.dot(sw, np.logaddexp(0.0, -margin))), np.append(X.T @ gz, gz.sum())

    def total(p, f_smooth):
        return f_smooth + float(np.abs(p[:-1]).sum()) / C

    def prox(v, step):
        out = v.copy()
        out[:-1] = _soft_threshold(v[:-1], step / C)
        return out

    x0 = np.zeros(d + 1)
    F0 = total(x0, smooth(x0)[0])
    x, warm_iters = _l1_warm_start(smooth, d, C, tol, max_iter)
    fx, _ = smooth(x)
    Fx = total(x, fx)
    if Fx > F0:
        x, Fx = x0, F0
    z, t, L = x.copy(), 1.0, 1.0
    if trace is not None:
        trace.extend([F0, Fx])
    converged, it = False, 0
    for it in range(1, max_iter + 1):
        # optimality: gradient mapping at the current iterate
        _, gx = smooth(x)
        mapping = L * (x - prox(x - gx / L, 1.0 / L))
        if np.max(np.abs(mapping)) < tol:
            converged = True
            break
        fz, gz = smooth(z)
        while True:
            u = prox(z - gz / L, 1.0 / L)
            fu, _ = smooth(u)
            diff = u - z
            if fu <= fz + np.dot(gz, diff) + 0.5 * L * np.dot(diff, diff) + 1e-12 * abs(fz):
                break
            L *= 2.0
        Fu = total(u, fu)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if Fu <= Fx:
            x_new, F_new = u, Fu
        else:
            x_new, F_new = x, Fx
        z = x_new + (t / t_next) * (u - x_new) + ((t - 1.0) / t_next) * (x_new - x)
        x, Fx, t = x_new, F_new, t_next
        if trace is not None:
            trace.append(Fx)
    return x, converged, warm_iters + it


def train_logistic(X, y, cfg: LogisticConfig = LogisticConfig(), trace: bool = False) -> LinearModel:
    X = as_matrix(X)
    y = _check_labels(y)
    if X.shape[0] != y.size or y.size < 2:
        raise ValueError("X and y must have the same length (>= 2)")
    sw = _sample_weights(y, cfg.class_weight)
    objective_trace: list | None = [] if trace else None
    x0 = np.zeros(X.shape[1] + 1)
    if cfg.penalty == "l1":
        params, ok, nit = _l1_logistic(X, y.astype(float), sw, cfg.C, cfg.tol, cfg.max_iter, objective_trace)
    else:
        params, ok, nit = _lbfgs(
            lambda p: logistic_objective(p, X, y, sw, cfg.penalty, cfg.C), x0, cfg.tol, cfg.max_iter, objective_trace
        )
    if not ok:
        log.debug("logistic %s did not converge in %d iterations", cfg, nit)
    return LinearModel(params[:-1].copy(), float(params[-1]), "logistic", cfg.to_dict(), ok, nit, cfg.seed,
                       objective_trace or [])


def rbf_kernel(A: sp.csr_matrix, B: sp.csr_matrix, gamma: float) -> np.ndarray:
    sq_a = np.asarray(A.multiply(A).sum(axis=1)).ravel()
    sq_b = np.asarray(B.multiply(B).sum(axis=1)).ravel()
    cross = (A @ B.T).toarray()
    dist = np.maximum(sq_a[:, None] + sq_b[None, :] - 2.0 * cross, 0.0)
    return np.exp(-gamma * dist)


def _smo(K: np.ndarray, ys: np.ndarray, box: np.ndarray, tol: float, max_iter: int):
    """Second-order working-set SMO for the C-SVC dual; returns (alpha, bias, converged, iters)."""
    n = ys.size
    tau = 1e-12
    alpha = np.zeros(n)
    G = -np.ones(n)
    QD = np.diag(K).copy()
    Q = K * np.outer(ys, ys)
    pos = ys > 0
    converged, it = False, 0
    for it in range(max_iter):
        below_box = alpha < box
        above_zero = alpha > 0
        up = np.where(pos, below_box, above_zero)
        low = np.where(pos, above_zero, below_box)
        score = -ys * G
        if not up.any() or not low.any():
            converged = True
            break
        up_scores = np.where(up, score, -np.inf)
        i = int(np.argmax(up_scores))
        gmax = up_scores[i]
        b = gmax - score
        cand = low & (b > 0)
        if not cand.any() or gmax - score[low].min() < tol:
            converged = True
            break
        Qi = Q[i]
        a = QD[i] + QD - 2.0 * K[i]
        a[a <= 0] = tau
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        Qj = Q[j]
        Ci, Cj = box[i], box[j]
        ai, aj = alpha[i], alpha[j]
        if ys[i] != ys[j]:
            quad = QD[i] + QD[j] + 2.0 * Qi[j]
            quad = quad if quad > 0 else tau
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > Ci - Cj:
                if ni > Ci:
                    ni, nj = Ci, Ci - diff
            elif nj > Cj:
                nj, ni = Cj, Cj + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qi[j]
            quad = quad if quad > 0 else tau
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > Ci:
                if ni > Ci:
                    ni, nj = Ci, total - Ci
            elif nj < 0:
                nj, ni = 0.0, total
            if total > Cj:
                if nj > Cj:
                    nj, ni = Cj, total - Cj
            elif ni < 0:
                ni, nj = 0.0, total
        G += Qi * (ni - ai) + Qj * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    np.clip(alpha, 0.0, box, out=alpha)

    yG = ys * G
    free = (alpha > 0) & (alpha < box)
    if free.any():
        rho = float(yG[free].mean())
    else:
        upper_bound = alpha >= box
        ub_mask = np.where(upper_bound, ys < 0, ys > 0)
        lb_mask = ~ub_mask
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2.0)
    return alpha, -rho, converged, it


def train_svm(X, y, cfg: SvmConfig = SvmConfig()) -> Model:
    X = as_matrix(X)
    y = _check_labels(y)
    if X.shape[0] != y.size or y.size < 2:
        raise ValueError("X and y must have the same length (>= 2)")
    sw = _sample_weights(y, cfg.class_weight)
    ys = 2.0 * y - 1.0
    if cfg.kernel == "linear":
        x0 = np.zeros(X.shape[1] + 1)
        params, ok, nit = _lbfgs(lambda p: _squared_hinge_objective(p, X, ys, sw, cfg.C), x0, cfg.tol,
                                 cfg.max_passes * 10, None)
        return LinearModel(params[:-1].copy(), float(params[-1]), "svm_linear", cfg.to_dict(), ok, nit, cfg.seed)
    K = rbf_kernel(X, X, cfg.gamma)
    box = cfg.C * sw
    alpha, bias, ok, nit = _smo(K, ys, box, cfg.tol, cfg.max_passes * y.size)
    if not ok:
        log.debug("SMO %s hit the iteration cap (%d)", cfg, nit)
    sv = np.flatnonzero(alpha > 0)
    return KernelModel(X[sv], alpha[sv] * ys[sv], bias, cfg.gamma, cfg.to_dict(), ok, nit, cfg.seed, box=box[sv])


def decision_values(model: Model, X) -> np.ndarray:
    X = as_matrix(X)
    if X.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: model {model.dim}, features {X.shape[1]}")
    if isinstance(model, LinearModel):
        return X @ model.weights + model.bias
    if model.support_vectors.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    return rbf_kernel(X, model.support_vectors, model.gamma) @ model.dual_coef + model.bias


def decision_function(model: Model, x: SparseVector) -> float:
    return float(decision_values(model, [x])[0])


def predict_many(model: Model, X) -> np.ndarray:
    """1 where the decision value is strictly positive; exact zeros go negative."""
    return (decision_values(model, X) > 0).astype(np.int64)


def predict(model: Model, x: SparseVector) -> int:
    return int(decision_function(model, x) > 0)


def train(family: str, X, y, cfg) -> Model:
    if family == "logistic":
        return train_logistic(X, y, cfg)
    if family == "svm":
        return train_svm(X, y, cfg)
    raise ValueError(f"unknown model family {family!r}")
