"""Automated privilege discovery: proxy-attribute extraction and p selection.

``extract_privilege_attribute`` fits a classifier on one demographic group
only and ranks the numeric columns by permutation importance on a held-out
slice of that group — the column the group's own outcome model leans on
hardest is the candidate socio-economic proxy.

``select_p`` sweeps privileged-tail sizes: for each percentage p it computes
the ground-truth positive-rate ratio between demographic groups inside the
top-p% slice of the proxy column and reports the smallest p where the ratio
clears the four-fifths rule.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import NUMERIC_KINDS, FeatureEncoder, Table, privilege_threshold
from .errors import ConfigError, DegenerateThresholdError, ExtractionError, SchemaError
from .learner import BaseLearner, LearnerHP, fit_base

log = logging.getLogger(__name__)


@dataclass
class ImportanceTable:
    """Permutation-importance ranking of candidate privilege proxies."""

    group: str
    repeats: int
    seed: int
    holdout_fraction: float
    baseline_accuracy: float
    rows: list[dict]  # attribute, importance, sd — sorted by the ranking rule
    chosen: str = ""
    tie_flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "group": self.group, "repeats": self.repeats, "seed": self.seed,
            "holdout_fraction": self.holdout_fraction,
            "baseline_accuracy": self.baseline_accuracy,
            "rows": self.rows, "chosen": self.chosen,
            "tie_flagged": self.tie_flagged,
        }


def permutation_importance(
    learner: BaseLearner,
    X: np.ndarray,
    y: np.ndarray,
    feature_groups: dict[str, list[int]],
    repeats: int,
    rng: np.random.Generator,
) -> dict[str, tuple[float, float]]:
    """Mean accuracy drop (and sd) per source column over shared shuffles.

    One permutation is drawn per repeat and applied to every candidate, so
    identical columns receive bitwise-identical importance.
    """
    base_acc = float(np.mean(learner.predict(X) == y))
    drops: dict[str, list[float]] = {name: [] for name in feature_groups}
    for _ in range(repeats):
        perm = rng.permutation(len(y))
        for name, cols in feature_groups.items():
            Xp = X.copy()
            Xp[:, cols] = X[perm][:, cols]
            acc = float(np.mean(learner.predict(Xp) == y))
            drops[name].append(base_acc - acc)
    out = {}
    for name, vals in drops.items():
        arr = np.asarray(vals)
        sd = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
        out[name] = (float(np.mean(arr)), sd)
    return out


def extract_privilege_attribute(
    table: Table,
    group: str,
    hp: LearnerHP | None = None,
    repeats: int = 10,
    seed: int = 0,
    holdout_fraction: float = 0.25,
    candidates: list[str] | None = None,
    exclude_effort: bool = False,
) -> ImportanceTable:
    """Rank numeric columns by their pull on the given group's outcome model.

    A learner is fitted on the group's rows alone; importance is measured on a
    held-out slice of those rows, stratified by outcome.  Ties at the top are
    broken by the larger importance-minus-one-sd, then lexicographically, and
    the result is flagged.
    """
    prot = table.schema.protected
    if prot is None:
        raise SchemaError("privilege extraction needs a protected column")
    if repeats < 3:
        raise ConfigError(f"repeats must be >= 3, got {repeats}")
    groups_col = table.column(prot.name)
    in_group = groups_col == group
    if not in_group.any():
        raise ExtractionError(f"group {group!r} has no rows")

    if candidates is None:
        candidates = [c.name for c in table.schema.columns
                      if c.kind in NUMERIC_KINDS
                      and not (exclude_effort and "effort" in c.tags)]
    else:
        for name in candidates:
            if table.schema[name].kind not in NUMERIC_KINDS:
                raise ConfigError(f"candidate {name!r} is not ordinal/numerical")
    if len(candidates) < 2:
        raise ExtractionError(
            f"need >= 2 ordinal/numerical candidate columns, found {len(candidates)}"
        )

    rng = np.random.default_rng(seed)
    y = table.target
    idx_g = np.flatnonzero(in_group)
    holdout = np.zeros(table.rows, dtype=bool)
    for label in (0, 1):
        idx = idx_g[y[idx_g] == label]
        rng.shuffle(idx)
        n_ho = int(round(len(idx) * holdout_fraction))
        holdout[idx[:n_ho]] = True
    train = in_group & ~holdout
    if not holdout.any() or not train.any():
        raise ExtractionError(f"group {group!r} too small to hold out a slice")

    encoder = FeatureEncoder.fit(table, train)
    X = encoder.transform(table)
    learner = fit_base(X[train], y[train], None, hp or LearnerHP())
    preds = learner.predict(X[holdout])
    if len(set(preds.tolist())) < 2:
        raise ExtractionError(
            "degenerate learner: constant predictions on the held-out slice"
        )
    y_ho = y[holdout]
    baseline = float(np.mean(preds == y_ho))

    feature_groups = {
        name: [j for j, (src, _) in enumerate(encoder.feature_map) if src == name]
        for name in candidates
    }
    scores = permutation_importance(learner, X[holdout], y_ho, feature_groups,
                                    repeats, rng)

    # rank: importance desc, then importance-minus-sd desc, then name asc
    ordered = sorted(scores, key=lambda n: (-scores[n][0], -(scores[n][0] - scores[n][1]), n))
    top_imp = scores[ordered[0]][0]
    tied = [n for n in ordered if scores[n][0] == top_imp]
    tie_flagged = len(tied) > 1
    if tie_flagged:
        log.warning("importance tie at the top between %s; broken by "
                    "importance-minus-sd, then name", tied)
    rows = [{"attribute": n, "importance": scores[n][0], "sd": scores[n][1]}
            for n in ordered]
    return ImportanceTable(
        group=group, repeats=repeats, seed=seed,
        holdout_fraction=holdout_fraction, baseline_accuracy=baseline,
        rows=rows, chosen=ordered[0], tie_flagged=tie_flagged,
    )


# ---------------------------------------------------------------------------
# p-sweep
# ---------------------------------------------------------------------------

@dataclass
class PSweepResult:
    """Per-p ground-truth positive-rate ratios inside the top-p% slice."""

    column: str
    ratio_rule: float
    advantaged: str
    grid: list[float]
    entries: list[dict] = field(default_factory=list)
    satisfying: list[float] = field(default_factory=list)
    selected: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "column": self.column, "ratio_rule": self.ratio_rule,
            "advantaged": self.advantaged, "grid": self.grid,
            "entries": self.entries, "satisfying": self.satisfying,
            "selected": self.selected, "note": self.note,
        }


def select_p(
    table: Table,
    column: str | None = None,
    grid: list[float] | None = None,
    ratio_rule: float = 0.8,
    advantaged: str | None = None,
) -> PSweepResult:
    """Smallest p whose top-p% slice passes the positive-rate ratio rule.

    The ratio is disadvantaged-over-advantaged ground-truth positive rate; the
    advantaged group defaults to the one with the higher overall rate.  With
    more than two groups the worst (smallest) ratio decides.
    """
    if grid is None:
        grid = [float(p) for p in range(1, 21)]
    grid = [float(p) for p in grid]
    if not grid:
        raise ConfigError("p grid is empty")
    if sorted(grid) != grid or len(set(grid)) != len(grid):
        raise ConfigError("p grid must be strictly ascending")
    prot = table.schema.protected
    if prot is None:
        raise SchemaError("p selection needs a protected column")
    if column is None:
        spec = table.schema.tagged("privilege")
        if spec is None:
            raise SchemaError("no column tagged 'privilege' and none named")
        column = spec.name

    y = table.target
    groups_col = table.column(prot.name)
    names = table.levels(prot.name)
    overall = {g: float(np.mean(y[groups_col == g])) for g in names}
    if advantaged is None:
        advantaged = min(names, key=lambda g: (-overall[g], g))
    elif advantaged not in names:
        raise ConfigError(f"advantaged group {advantaged!r} not present")
    others = [g for g in names if g != advantaged]

    x = table.column(column)
    result = PSweepResult(column=column, ratio_rule=ratio_rule,
                          advantaged=advantaged, grid=grid)
    for p in grid:
        entry: dict = {"p": p, "tau": None, "realized_fraction": None,
                       "ppr": {}, "ratio": None, "defined": False, "note": ""}
        try:
            thr = privilege_threshold(table, p, column)
        except DegenerateThresholdError as exc:
            entry["note"] = f"no cutoff: {exc}"
            result.entries.append(entry)
            continue
        entry["tau"] = thr.privilege_cutoff
        entry["realized_fraction"] = thr.realized_fraction
        top = x >= thr.privilege_cutoff
        missing = [g for g in names if not (top & (groups_col == g)).any()]
        if missing:
            entry["note"] = f"top slice missing group(s) {missing}"
            result.entries.append(entry)
            continue
        ppr = {g: float(np.mean(y[top & (groups_col == g)])) for g in names}
        entry["ppr"] = ppr
        if ppr[advantaged] == 0.0:
            entry["note"] = "advantaged group has zero positive rate in slice"
            result.entries.append(entry)
            continue
        entry["ratio"] = min(ppr[g] / ppr[advantaged] for g in others)
        entry["defined"] = True
        result.entries.append(entry)

    result.satisfying = [e["p"] for e in result.entries
                         if e["defined"] and e["ratio"] >= ratio_rule]
    if result.satisfying:
        result.selected = result.satisfying[0]
    else:
        result.note = "no p satisfies rule"
    return result
