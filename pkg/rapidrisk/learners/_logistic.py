"""
L1-penalized multinomial logistic regression fitted by proximal gradient
descent, and a plain binary IRLS fit.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class ConvergenceWarning(UserWarning):
    """
    Warning issued when an optimizer stops at its iteration cap.
    """


@dataclass(frozen=True)
class LogisticParams:
    lam: float = 0.01
    max_iter: int = 1000
    tol: float = 1e-6

    def to_dict(self) -> Dict[str, Any]:
        return {"lam": self.lam, "max_iter": self.max_iter, "tol": self.tol}


def softmax_scores(X: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Class probabilities for coefficient matrix W (d x K-1) and intercepts b
    (K-1); the last class is the reference with all-zero coefficients.
    """
    scores = np.hstack([X @ W + b, np.zeros((X.shape[0], 1))])
    scores -= scores.max(axis=1, keepdims=True)
    expd = np.exp(scores)
    return expd / expd.sum(axis=1, keepdims=True)


def smooth_loss(X: np.ndarray, Y: np.ndarray, W: np.ndarray, b: np.ndarray) -> float:
    """
    Mean multinomial negative log-likelihood. Y is the n x K one-hot target.
    """
    scores = np.hstack([X @ W + b, np.zeros((X.shape[0], 1))])
    top = scores.max(axis=1, keepdims=True)
    log_norm = top[:, 0] + np.log(np.exp(scores - top).sum(axis=1))
    return float(np.mean(log_norm - np.sum(Y * scores, axis=1)))


def smooth_gradient(
    X: np.ndarray, Y: np.ndarray, W: np.ndarray, b: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns:
        Tuple[np.ndarray, np.ndarray]: Gradients of smooth_loss in W and b.

    """
    resid = (softmax_scores(X, W, b) - Y)[:, :-1]
    n = X.shape[0]
    return X.T @ resid / n, resid.sum(axis=0) / n


def _l1_prox(w: np.ndarray, reg: float) -> np.ndarray:
    return np.sign(w) * np.maximum(0.0, np.abs(w) - reg)


class L1Logistic:
    """
    Multinomial logistic regression minimizing mean negative log-likelihood
    plus lam times the L1 norm of the non-intercept coefficients.
    """

    def __init__(self, params: LogisticParams = LogisticParams()) -> None:
        self.params = params
        self.coef = np.zeros((0, 0))
        self.intercept = np.zeros(0)
        self.objective_trace: List[float] = []
        self.n_iter = 0

    def objective(self, X: np.ndarray, Y: np.ndarray, W: np.ndarray, b: np.ndarray) -> float:
        return smooth_loss(X, Y, W, b) + self.params.lam * float(np.abs(W).sum())

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> L1Logistic:
        """
        Args:
            X (np.ndarray): n x d design matrix, no intercept column.
            y (np.ndarray): Class codes in [0, n_classes); every class present.
            n_classes (int): Number of classes.

        Returns:
            L1Logistic: This model, fitted.

        """
        n, d = X.shape
        Y = np.zeros((n, n_classes))
        Y[np.arange(n), y.astype(np.int64)] = 1.0
        counts = Y.sum(axis=0)
        # intercept-only maximum likelihood start
        b = np.log(counts[:-1] / counts[-1])
        W = np.zeros((d, n_classes - 1))
        lam = self.params.lam
        step = 1.0
        f = smooth_loss(X, Y, W, b)
        trace = [f + lam * float(np.abs(W).sum())]
        for it in range(1, self.params.max_iter + 1):
            gW, gb = smooth_gradient(X, Y, W, b)
            while True:
                W_new = _l1_prox(W - step * gW, step * lam)
                b_new = b - step * gb
                f_new = smooth_loss(X, Y, W_new, b_new)
                dW, db = W_new - W, b_new - b
                bound = (
                    f
                    + float(np.sum(gW * dW) + np.sum(gb * db))
                    + (float(np.sum(dW ** 2) + np.sum(db ** 2))) / (2 * step)
                )
                if f_new <= bound + 1e-15 or step < 1e-12:
                    break
                step *= 0.5
            W, b, f = W_new, b_new, f_new
            trace.append(f + lam * float(np.abs(W).sum()))
            self.n_iter = it
            if abs(trace[-2] - trace[-1]) <= self.params.tol * max(1.0, abs(trace[-1])):
                break
            step *= 2.0
        else:
            warnings.warn(
                f"L1 logistic regression stopped after {self.params.max_iter} iterations "
                "without meeting its tolerance.",
                ConvergenceWarning,
            )
        logger.debug("L1 logistic regression ran %d iterations.", self.n_iter)
        self.coef, self.intercept, self.objective_trace = W, b, trace
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax_scores(X, self.coef, self.intercept)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "coef": self.coef.tolist(),
            "intercept": self.intercept.tolist(),
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> L1Logistic:
        model = cls(LogisticParams(**raw["params"]))
        model.intercept = np.asarray(raw["intercept"], dtype=np.float64)
        model.coef = np.asarray(raw["coef"], dtype=np.float64).reshape(-1, len(model.intercept))
        model.n_iter = raw["n_iter"]
        return model


@dataclass(frozen=True)
class IrlsFit:
    coef: np.ndarray
    covariance: np.ndarray
    converged: bool
    separated: bool


def irls_binary(
    X: np.ndarray,
    y: np.ndarray,
    ridge: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> IrlsFit:
    """
    Newton / IRLS fit of a binary logistic regression.

    Args:
        X (np.ndarray): n x d design matrix, intercept column included.
        y (np.ndarray): 0/1 outcomes.
        ridge (float, optional): L2 penalty added to the Hessian diagonal
            (the first column is left unpenalized). Defaults to 0.0.
        max_iter (int, optional): Newton iterations. Defaults to 100.
        tol (float, optional): Stop when the largest coefficient change falls
            below this. Defaults to 1e-10.

    Returns:
        IrlsFit: Coefficients, inverse observed information, and flags for
        convergence and (quasi-)complete separation.

    """
    n, d = X.shape
    y = y.astype(np.float64)
    beta = np.zeros(d)
    penalty = np.full(d, ridge)
    penalty[0] = 0.0
    converged = False
    H = np.eye(d)
    for _ in range(max_iter):
        eta = np.clip(X @ beta, -35.0, 35.0)
        p = 1.0 / (1.0 + np.exp(-eta))
        w = p * (1.0 - p)
        grad = X.T @ (y - p) - penalty * beta
        H = (X * w[:, None]).T @ X + np.diag(penalty)
        try:
            delta = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            break
        beta = beta + delta
        if np.max(np.abs(delta)) < tol:
            converged = True
            break
    eta = X @ beta
    fitted = 1.0 / (1.0 + np.exp(-np.clip(eta, -35.0, 35.0)))
    separated = bool(
        np.max(np.abs(beta)) > 15.0
        or (np.min(np.where(y == 1, fitted, 1.0)) > 1 - 1e-8 and np.max(np.where(y == 0, fitted, 0.0)) < 1e-8)
    )
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        cov = np.full((d, d), np.nan)
    return IrlsFit(beta, cov, converged, separated)
