"""Base classifier and the reductions-style constrained trainer.

The constrained trainer follows the exponentiated-gradient scheme: each
fairness notion compiles to a list of linear moment constraints
``g(h) = sum_i w_i * h(x_i) + c <= slack`` over prediction scores; training
alternates a multiplicative multiplier update with a cost-sensitive
best-response fit of the base learner, and returns a mixture over the
iterates.

The base learner is a from-scratch logistic regression trained by
deterministic full-batch Nesterov gradient descent (zero init, auto step
size from the smoothness bound), with optional per-row signed costs: a row
with negative cost prefers the positive decision and enters the loss with
weight |cost|.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import FeatureEncoder, Table, Thresholds, encode_features
from .errors import ConfigError, EncodingError
from .notions import NotionConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LearnerHP:
    """Base-learner hyperparameters; ``learning_rate=None`` auto-tunes from data."""

    learning_rate: float | None = None
    epochs: int = 400
    l2: float = 1e-4
    tol: float = 1e-10
    seed: int = 0

    @classmethod
    def from_dict(cls, doc: dict) -> "LearnerHP":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(doc) - known
        if bad:
            raise ConfigError(f"unknown learner option(s): {sorted(bad)}")
        return cls(**doc)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -30.0, 30.0)))


@dataclass
class BaseLearner:
    """Logistic model over encoded features."""

    weights: np.ndarray
    intercept: float
    hp: LearnerHP
    converged: bool = True
    epochs_run: int = 0
    final_loss: float = 0.0

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != len(self.weights):
            raise EncodingError(
                f"feature width {X.shape[1]} != model width {len(self.weights)}"
            )
        return X @ self.weights + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X: np.ndarray, cutoff: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= cutoff).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
            "converged": self.converged,
            "epochs_run": self.epochs_run,
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, doc: dict, hp: LearnerHP) -> "BaseLearner":
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            intercept=float(doc["intercept"]),
            hp=hp,
            converged=bool(doc.get("converged", True)),
            epochs_run=int(doc.get("epochs_run", 0)),
            final_loss=float(doc.get("final_loss", 0.0)),
        )


def fit_base(
    features: np.ndarray,
    labels: np.ndarray,
    costs: np.ndarray | None = None,
    hp: LearnerHP | None = None,
) -> BaseLearner:
    """Fit the logistic base learner, optionally with per-row signed costs.

    Without costs each row carries weight 1/n toward its own label.  With
    costs, the standard cost-sensitive reduction applies: the row's target is
    1 exactly when its cost is negative, and its loss weight is |cost|.
    """
    hp = hp or LearnerHP()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    n, d = X.shape
    if costs is None:
        costs = (1.0 - 2.0 * y) / n
    costs = np.asarray(costs, dtype=np.float64)
    z = (costs < 0).astype(np.float64)
    u = np.abs(costs)
    total = float(np.sum(u))
    if total > 0:
        p = u / total
    else:
        p = np.full(n, 1.0 / n)

    X1 = np.hstack([X, np.ones((n, 1))])
    if hp.learning_rate is not None:
        lr = hp.learning_rate
    else:
        smoothness = float(np.max(np.sum(X1 * X1, axis=1))) / 4.0 + hp.l2
        lr = 1.0 / smoothness

    def loss_grad(w):
        margin = X1 @ w
        sig = _sigmoid(margin)
        # numerically stable weighted log-loss
        per_row = np.logaddexp(0.0, margin) - z * margin
        loss = float(np.dot(p, per_row)) + 0.5 * hp.l2 * float(np.dot(w[:d], w[:d]))
        grad = X1.T @ (p * (sig - z))
        grad[:d] += hp.l2 * w[:d]
        return loss, grad

    w = np.zeros(d + 1)
    lookahead = w.copy()
    best_loss, best_w = np.inf, w.copy()
    prev_loss = np.inf
    converged = False
    epochs_run = 0
    for epoch in range(hp.epochs):
        epochs_run = epoch + 1
        _, grad = loss_grad(lookahead)
        w_new = lookahead - lr * grad
        lookahead = w_new + (epoch / (epoch + 3.0)) * (w_new - w)
        w = w_new
        loss, _ = loss_grad(w)
        if loss < best_loss:
            best_loss, best_w = loss, w.copy()
        if abs(prev_loss - loss) <= hp.tol * max(1.0, abs(loss)):
            converged = True
            break
        prev_loss = loss

    if not converged:
        log.warning("base learner stopped at epoch cap %d (best loss %.6g); "
                    "returning best iterate", hp.epochs, best_loss)
        w = best_w
        final_loss = best_loss
    else:
        final_loss = loss
    return BaseLearner(weights=w[:d], intercept=float(w[d]), hp=hp,
                       converged=converged, epochs_run=epochs_run,
                       final_loss=float(final_loss))


# ---------------------------------------------------------------------------
# Moment constraints
# ---------------------------------------------------------------------------

@dataclass
class MomentConstraint:
    """Linear constraint on prediction scores: sum(w*h) + offset <= slack."""

    name: str
    weights: np.ndarray
    offset: float = 0.0
    slack: float = 0.02

    def value(self, scores: np.ndarray) -> float:
        return float(np.dot(self.weights, scores)) + self.offset

    def violation(self, scores: np.ndarray) -> float:
        return self.value(scores) - self.slack


def _parity_pair(name: str, cell: np.ndarray, base: np.ndarray, slack: float):
    """Two <= constraints encoding |E[h|cell] - E[h|base]| <= slack."""
    w = cell.astype(np.float64) / cell.sum() - base.astype(np.float64) / base.sum()
    return [
        MomentConstraint(f"{name}/+", w, 0.0, slack),
        MomentConstraint(f"{name}/-", -w, 0.0, slack),
    ]


def _sep_cell_constraints(
    name: str,
    underpriv: np.ndarray,
    privileged: np.ndarray,
    base: np.ndarray,
    group_cell: np.ndarray,
    efforts: np.ndarray,
    threshold: float,
    y: np.ndarray,
    cfg: NotionConfig,
    slack: float,
    dropped: list[str],
) -> list[MomentConstraint]:
    """Constraint set for one (category slice, group) cell.

    Mirrors the violation terms: a parity pair on the underprivileged
    subgroup, a one-sided effort constraint (weighted high-effort positive
    rate must reach the low-effort rate), and a one-sided cap keeping the
    privileged false-positive rate at or below the weighted high-effort
    underprivileged one.
    """
    out: list[MomentConstraint] = []
    if not underpriv.any():
        dropped.append(f"{name}: no underprivileged rows; all constraints dropped")
        return out
    out.extend(_parity_pair(f"{name}/parity", underpriv, base, slack))

    cell_max = float(np.max(efforts[group_cell]))
    zeta = cfg.weighting.weights(efforts, threshold, cell_max, cell=group_cell)
    low = underpriv & (efforts < threshold)
    high = underpriv & (efforts >= threshold)
    if low.any() and high.any():
        w = low.astype(np.float64) / low.sum()
        w -= zeta * high / float(np.sum(zeta[high]))
        out.append(MomentConstraint(f"{name}/effort", w, 0.0, slack))
    else:
        dropped.append(f"{name}: effort constraint dropped (one-sided split empty)")

    priv_neg = privileged & (y == 0)
    high_neg = high & (y == 0)
    if priv_neg.any() and high_neg.any():
        b_norm = float(np.sum(zeta[high])) if cfg.t3_literal_b else float(np.sum(zeta[high_neg]))
        w = priv_neg.astype(np.float64) / priv_neg.sum()
        w -= zeta * high_neg / b_norm
        out.append(MomentConstraint(f"{name}/fpr_cap", w, 0.0, slack))
    else:
        dropped.append(f"{name}: FPR cap dropped (no privileged negatives or no "
                       f"high-effort underprivileged negatives)")
    return out


def compile_constraints(
    table: Table,
    cfg: NotionConfig,
    eps_train: float = 0.02,
    thresholds: Thresholds | None = None,
) -> list[MomentConstraint]:
    """Translate a notion into linear moment constraints over score vectors."""
    y = table.target
    groups_col = table.column(cfg.protected)
    group_names = (list(cfg.groups) if cfg.groups is not None
                   else table.levels(cfg.protected))
    all_rows = np.ones(table.rows, dtype=bool)
    out: list[MomentConstraint] = []
    dropped: list[str] = []

    if cfg.kind == "DP":
        for s in group_names:
            cell = groups_col == s
            if not cell.any():
                dropped.append(f"DP/{s}: empty group")
                continue
            out.extend(_parity_pair(f"DP/{s}", cell, all_rows, eps_train))
    elif cfg.kind == "EP":
        pos = y == 1
        if not pos.any():
            dropped.append("EP: no ground-truth positives; nothing to constrain")
        else:
            for s in group_names:
                cell = pos & (groups_col == s)
                if not cell.any():
                    dropped.append(f"EP/{s}: no positives in group")
                    continue
                out.extend(_parity_pair(f"EP/{s}", cell, pos, eps_train))
    elif cfg.kind == "CDP":
        cats = table.column(cfg.conditional)
        for a in table.levels(cfg.conditional):
            in_cat = cats == a
            for s in group_names:
                cell = in_cat & (groups_col == s)
                if not cell.any():
                    dropped.append(f"CDP/({a},{s}): empty cell")
                    continue
                out.extend(_parity_pair(f"CDP/({a},{s})", cell, in_cat, eps_train))
    elif cfg.kind in ("SEP", "SEP_relaxed"):
        if thresholds is None:
            thresholds = cfg.resolve_thresholds(table)
        xp = table.column(cfg.privilege_column)
        privileged = xp >= thresholds.privilege_cutoff
        for s in group_names:
            in_group = groups_col == s
            underpriv = in_group & ~privileged
            if cfg.kind == "SEP_relaxed":
                if not underpriv.any():
                    dropped.append(f"SEP_relaxed/{s}: no underprivileged rows")
                    continue
                out.extend(_parity_pair(f"SEP_relaxed/{s}", underpriv, all_rows, eps_train))
                continue
            efforts = table.column(cfg.effort_column)
            out.extend(_sep_cell_constraints(
                f"SEP/{s}", underpriv, privileged, all_rows, in_group, efforts,
                thresholds.effort_at((s,)), y, cfg, eps_train, dropped,
            ))
    elif cfg.kind == "CSEP":
        if thresholds is None:
            thresholds = cfg.resolve_thresholds(table)
        xp = table.column(cfg.privilege_column)
        efforts = table.column(cfg.effort_column)
        cats = table.column(cfg.conditional)
        privileged_all = xp >= thresholds.privilege_cutoff
        for a in table.levels(cfg.conditional):
            in_cat = cats == a
            for s in group_names:
                cell = in_cat & (groups_col == s)
                if not cell.any():
                    dropped.append(f"CSEP/({a},{s}): empty cell")
                    continue
                out.extend(_sep_cell_constraints(
                    f"CSEP/({a},{s})", cell & ~privileged_all,
                    in_cat & privileged_all, in_cat, cell, efforts,
                    thresholds.effort_at((a, s)), y, cfg, eps_train, dropped,
                ))
    else:  # pragma: no cover - NotionConfig already validates the kind
        raise ConfigError(f"cannot compile constraints for notion {cfg.kind!r}")

    for msg in dropped:
        log.info("constraint compile: %s", msg)
    return out


# ---------------------------------------------------------------------------
# Exponentiated-gradient reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpGradHP:
    max_iter: int = 50
    eta: float = 2.0
    lambda_bound: float = 100.0
    eps_train: float = 0.02
    patience: int = 15
    base: LearnerHP = field(default_factory=LearnerHP)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExpGradHP":
        doc = dict(doc)
        base = LearnerHP.from_dict(doc.pop("base", {}))
        known = {f for f in cls.__dataclass_fields__} - {"base"}
        bad = set(doc) - known
        if bad:
            raise ConfigError(f"unknown training option(s): {sorted(bad)}")
        return cls(base=base, **doc)

    def to_dict(self) -> dict:
        return {
            "max_iter": self.max_iter, "eta": self.eta,
            "lambda_bound": self.lambda_bound, "eps_train": self.eps_train,
            "patience": self.patience,
            "base": {
                "learning_rate": self.base.learning_rate,
                "epochs": self.base.epochs, "l2": self.base.l2,
                "tol": self.base.tol, "seed": self.base.seed,
            },
        }


@dataclass
class ReducedModel:
    """Mixture of base learners produced by the constrained trainer."""

    members: list[BaseLearner]
    mixture_weights: np.ndarray
    hp: ExpGradHP
    constraint_names: list[str] = field(default_factory=list)
    trajectory: list[dict] = field(default_factory=list)
    best_iterate: int = 0
    max_violation: float = 0.0
    early_stopped: bool = False
    encoder: FeatureEncoder | None = None
    notion: dict | None = None

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(len(X))
        for w, member in zip(self.mixture_weights, self.members):
            out += w * member.predict_proba(X)
        return out

    def predict(self, X: np.ndarray, mode: str = "hard", cutoff: float = 0.5) -> np.ndarray:
        scores = self.predict_scores(X)
        if mode == "score":
            return scores
        if mode == "hard":
            return (scores >= cutoff).astype(np.int64)
        raise ConfigError(f"unknown prediction mode {mode!r}")

    def to_dict(self) -> dict:
        doc = {
            "members": [m.to_dict() for m in self.members],
            "mixture_weights": [float(w) for w in self.mixture_weights],
            "hp": self.hp.to_dict(),
            "constraints": list(self.constraint_names),
            "trajectory": self.trajectory,
            "best_iterate": self.best_iterate,
            "max_violation": self.max_violation,
            "early_stopped": self.early_stopped,
            "notion": self.notion,
        }
        if self.encoder is not None:
            doc["encoder"] = {
                "feature_map": [[name, level] for name, level in self.encoder.feature_map],
                "levels": self.encoder.levels,
                "means": self.encoder.means,
                "sds": self.encoder.sds,
                "include_protected": self.encoder.include_protected,
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ReducedModel":
        hp = ExpGradHP.from_dict(doc["hp"])
        encoder = None
        if doc.get("encoder") is not None:
            enc = doc["encoder"]
            encoder = FeatureEncoder(
                feature_map=[(name, level) for name, level in enc["feature_map"]],
                levels=enc["levels"], means=enc["means"], sds=enc["sds"],
                include_protected=bool(enc["include_protected"]),
            )
        return cls(
            members=[BaseLearner.from_dict(m, hp.base) for m in doc["members"]],
            mixture_weights=np.asarray(doc["mixture_weights"], dtype=np.float64),
            hp=hp,
            constraint_names=list(doc.get("constraints", [])),
            trajectory=list(doc.get("trajectory", [])),
            best_iterate=int(doc.get("best_iterate", 0)),
            max_violation=float(doc.get("max_violation", 0.0)),
            early_stopped=bool(doc.get("early_stopped", False)),
            encoder=encoder,
            notion=doc.get("notion"),
        )


def save_model(model: ReducedModel, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str | Path) -> ReducedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return ReducedModel.from_dict(json.load(fh))


def exponentiated_gradient(
    table: Table,
    cfg: NotionConfig | None,
    hp: ExpGradHP | None = None,
    features: np.ndarray | None = None,
    encoder: FeatureEncoder | None = None,
    constraints: list[MomentConstraint] | None = None,
) -> ReducedModel:
    """Train the constrained mixture; with no constraints this is one plain fit.

    Each iteration turns the current multipliers into per-row signed costs,
    fits a cost-sensitive best response, evaluates its constraint values, and
    pushes the multipliers up on violated constraints.  The returned model is
    the uniform mixture over iterates; the feasibility trajectory, best
    iterate, and the mixture's own worst violation are recorded.
    """
    hp = hp or ExpGradHP()
    if features is None:
        features, encoder = encode_features(table)
    X = np.asarray(features, dtype=np.float64)
    y = table.target.astype(np.float64)
    n = len(y)
    if constraints is None:
        constraints = [] if cfg is None else compile_constraints(
            table, cfg, hp.eps_train)
    base_costs = (1.0 - 2.0 * y) / n
    notion_doc = None if cfg is None else {"kind": cfg.kind, "protected": cfg.protected}

    if not constraints:
        member = fit_base(X, y, None, hp.base)
        scores = member.predict_proba(X)
        err = float(np.mean((scores >= 0.5) != (y == 1)))
        return ReducedModel(
            members=[member], mixture_weights=np.array([1.0]), hp=hp,
            trajectory=[{"iter": 1, "member_max_violation": 0.0,
                         "mixture_max_violation": 0.0, "member_error": err,
                         "mixture_error": err, "lambda": []}],
            best_iterate=0, max_violation=0.0, encoder=encoder, notion=notion_doc,
        )

    K = len(constraints)
    W = np.stack([c.weights for c in constraints])
    offsets = np.array([c.offset for c in constraints])
    theta = np.zeros(K)
    members: list[BaseLearner] = []
    trajectory: list[dict] = []
    mixture_scores = np.zeros(n)
    best_mix_violation = np.inf
    stall = 0
    early_stopped = False
    best_member = (np.inf, np.inf, 0)  # (max violation, error, index)

    for it in range(1, hp.max_iter + 1):
        shift = max(0.0, float(np.max(theta)))
        expd = np.exp(theta - shift)
        lam = hp.lambda_bound * expd / (np.exp(-shift) + float(np.sum(expd)))
        costs = base_costs + W.T @ lam
        member = fit_base(X, y, costs, hp.base)
        scores = member.predict_proba(X)
        g = W @ scores + offsets
        violations = g - hp.eps_train
        members.append(member)
        mixture_scores += (scores - mixture_scores) / it
        mix_g = W @ mixture_scores + offsets
        member_max = float(np.max(violations))
        mix_max = float(np.max(mix_g - hp.eps_train))
        err = float(np.mean((scores >= 0.5) != (y == 1)))
        mix_err = float(np.mean((mixture_scores >= 0.5) != (y == 1)))
        trajectory.append({
            "iter": it, "member_max_violation": member_max,
            "mixture_max_violation": mix_max, "member_error": err,
            "mixture_error": mix_err, "lambda": [float(v) for v in lam],
        })
        if (member_max, err) < best_member[:2]:
            best_member = (member_max, err, it - 1)
        # the running mixture mean always drifts a little, so "progress"
        # must mean a material fraction of the outstanding violation
        if np.isfinite(best_mix_violation):
            stall_tol = max(1e-12, 0.05 * max(best_mix_violation, 0.0))
            improved = mix_max < best_mix_violation - stall_tol
        else:
            improved = True
        if improved:
            stall = 0
        else:
            stall += 1
        best_mix_violation = min(best_mix_violation, mix_max)
        if mix_max <= 0.0 and it >= 5:
            break
        if stall >= hp.patience:
            early_stopped = True
            log.warning("no feasibility progress over %d iterations; stopping "
                        "at iteration %d", hp.patience, it)
            break
        theta = theta + hp.eta * violations

    mixture_weights = np.full(len(members), 1.0 / len(members))
    final_mix = np.zeros(n)
    for w, member in zip(mixture_weights, members):
        final_mix += w * member.predict_proba(X)
    final_violation = float(np.max(W @ final_mix + offsets - hp.eps_train))
    return ReducedModel(
        members=members, mixture_weights=mixture_weights, hp=hp,
        constraint_names=[c.name for c in constraints],
        trajectory=trajectory, best_iterate=best_member[2],
        max_violation=final_violation, early_stopped=early_stopped,
        encoder=encoder, notion=notion_doc,
    )
