"""Fairness violation measures: EP, DP, CDP, SEP, CSEP, and relaxed SEP.

Every measure compares subgroup decision rates against a baseline and reports
a per-group term decomposition:

* T1  parity of positive-decision rates (underprivileged subgroup vs. the
  population, or the whole group for EP/DP-style notions)
* T2  effort parity inside the underprivileged subgroup: the weighted
  negative-decision average of high-effort rows against the plain average of
  low-effort rows
* T3  privileged-group false-positive cap: negative-decision average of
  privileged ground-truth negatives against the weighted average of
  high-effort underprivileged ground-truth negatives

EP/DP/CDP and the relaxed measure populate T1 only.  The aggregate is the
worst (maximum) per-group total; a report passes when the aggregate stays
within the configured tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import EFFORT_SCOPES, Table, Thresholds, resolve_thresholds
from .errors import ConfigError
from .groupstats import positive_scores

log = logging.getLogger(__name__)

NOTIONS = ("EP", "DP", "CDP", "SEP", "CSEP", "SEP_relaxed")
SEP_FAMILY = ("SEP", "CSEP", "SEP_relaxed")


@dataclass(frozen=True)
class EffortWeighting:
    """Weight >= 1 applied to high-effort underprivileged rows.

    ``unit`` weighs everyone at 1.  ``linear_capped`` ramps linearly from 1 at
    the effort threshold up to ``cap`` at the cell's maximum observed effort.
    """

    kind: str = "linear_capped"
    cap: float = 2.0

    def __post_init__(self):
        if self.kind not in ("unit", "linear_capped"):
            raise ConfigError(f"unknown effort weighting kind {self.kind!r}")
        if self.cap < 1.0:
            raise ConfigError(f"effort weighting cap must be >= 1, got {self.cap}")

    def weights(self, efforts: np.ndarray, threshold: float, cell_max: float,
                cell: np.ndarray | None = None) -> np.ndarray:
        """Per-row weights; rows below the threshold weigh exactly 1.

        ``cell`` optionally masks the rows the weights are computed for, so
        the degenerate-ramp warning only fires when that cell is affected.
        """
        out = np.ones(len(efforts), dtype=np.float64)
        if self.kind == "unit":
            return out
        high = efforts >= threshold
        if cell_max <= threshold:
            affected = high if cell is None else (high & cell)
            if affected.any():
                log.warning("effort cell has no spread above threshold %s; "
                            "weights stay 1", threshold)
            return out
        ramp = (efforts[high] - threshold) / (cell_max - threshold)
        out[high] = 1.0 + np.minimum(ramp, self.cap - 1.0)
        return out


@dataclass
class NotionConfig:
    """Full parameterization of one fairness notion."""

    kind: str
    protected: str
    conditional: str | None = None
    privilege_column: str | None = None
    p: float = 5.0
    effort_column: str | None = None
    effort_scope: str | None = None
    weighting: EffortWeighting = field(default_factory=EffortWeighting)
    epsilon: float = 0.05
    t3_literal_b: bool = False
    groups: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in NOTIONS:
            raise ConfigError(f"unknown notion {self.kind!r}")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.kind in ("CDP", "CSEP") and not self.conditional:
            raise ConfigError(f"{self.kind} needs a conditional column")
        if self.kind in SEP_FAMILY and not self.privilege_column:
            raise ConfigError(f"{self.kind} needs a privilege column")
        if self.kind in ("SEP", "CSEP") and not self.effort_column:
            raise ConfigError(f"{self.kind} needs an effort column")
        if self.kind == "CSEP" and self.conditional in (self.privilege_column, self.effort_column):
            raise ConfigError("CSEP conditional column must differ from the "
                              "privilege and effort columns")
        if self.effort_scope is None:
            self.effort_scope = "per_category_group" if self.kind == "CSEP" else "per_group"
        if self.effort_scope not in EFFORT_SCOPES:
            raise ConfigError(f"unknown effort scope {self.effort_scope!r}")
        if self.kind == "SEP" and self.effort_scope == "per_category_group":
            raise ConfigError("SEP has no conditional column; use global or per_group scope")

    @classmethod
    def from_dict(cls, doc: dict, schema=None) -> "NotionConfig":
        """Build from a JSON document, filling tagged columns from the schema."""
        doc = dict(doc)
        weighting = doc.pop("zeta", None) or doc.pop("weighting", None)
        if weighting is not None:
            weighting = EffortWeighting(kind=weighting.get("kind", "linear_capped"),
                                        cap=float(weighting.get("cap", 2.0)))
        else:
            weighting = EffortWeighting()
        if schema is not None:
            if not doc.get("protected") and schema.protected is not None:
                doc["protected"] = schema.protected.name
            priv = schema.tagged("privilege")
            if not doc.get("privilege_column") and priv is not None:
                doc["privilege_column"] = priv.name
            eff = schema.tagged("effort")
            if not doc.get("effort_column") and eff is not None:
                doc["effort_column"] = eff.name
        try:
            kind = doc.pop("kind")
        except KeyError:
            raise ConfigError("notion config needs a 'kind'")
        if not doc.get("protected"):
            raise ConfigError("notion config needs a protected column")
        groups = doc.pop("groups", None)
        return cls(
            kind=kind,
            protected=doc["protected"],
            conditional=doc.get("conditional"),
            privilege_column=doc.get("privilege_column"),
            p=float(doc.get("p", 5.0)),
            effort_column=doc.get("effort_column"),
            effort_scope=doc.get("effort_scope"),
            weighting=weighting,
            epsilon=float(doc.get("epsilon", 0.05)),
            t3_literal_b=bool(doc.get("t3_literal_b", False)),
            groups=tuple(groups) if groups else None,
        )

    def resolve_thresholds(self, table: Table) -> Thresholds | None:
        if self.kind not in SEP_FAMILY:
            return None
        if self.kind == "SEP_relaxed":
            from .dataset import privilege_threshold
            return privilege_threshold(table, self.p, self.privilege_column)
        return resolve_thresholds(
            table, self.p, self.effort_scope,
            privilege_column=self.privilege_column,
            effort_column=self.effort_column,
            category_column=self.conditional if self.kind == "CSEP" else None,
        )


@dataclass
class GroupTerms:
    t1: float = 0.0
    t2: float = 0.0
    t3: float = 0.0
    denominators: dict = field(default_factory=dict)
    computed: tuple[str, ...] = ()

    @property
    def total(self) -> float:
        return self.t1 + self.t2 + self.t3

    def to_dict(self) -> dict:
        return {"T1": self.t1, "T2": self.t2, "T3": self.t3, "total": self.total,
                "denominators": self.denominators}


@dataclass
class ViolationReport:
    notion: str
    epsilon: float
    aggregate: float
    passed: bool
    groups: dict[str, GroupTerms]
    categories: dict[str, dict[str, GroupTerms]] | None = None
    weighted_mean: float | None = None
    skipped: list[str] = field(default_factory=list)
    mode: str = "hard"
    thresholds: Thresholds | None = None

    @property
    def partial(self) -> bool:
        return bool(self.skipped)

    def to_dict(self) -> dict:
        doc = {
            "notion": self.notion,
            "epsilon": self.epsilon,
            "aggregate": self.aggregate,
            "pass": self.passed,
            "groups": {s: t.to_dict() for s, t in self.groups.items()},
            "categories": (
                None if self.categories is None else
                {a: {s: t.to_dict() for s, t in by_group.items()}
                 for a, by_group in self.categories.items()}
            ),
            "skipped": list(self.skipped),
            "partial": self.partial,
            "mode": self.mode,
        }
        if self.weighted_mean is not None:
            doc["weighted_mean"] = self.weighted_mean
        if self.thresholds is not None:
            doc["thresholds"] = {
                "privilege_cutoff": self.thresholds.privilege_cutoff,
                "p": self.thresholds.p,
                "realized_fraction": self.thresholds.realized_fraction,
                "effort_scope": self.thresholds.effort_scope,
                "effort": {"|".join(k): v for k, v in sorted(self.thresholds.effort.items())},
                "fallbacks": list(self.thresholds.fallbacks),
            }
        return doc


def _finish(notion, cfg, groups, categories, weights, skipped, mode, thresholds) -> ViolationReport:
    """Aggregate per-cell totals (max decides pass/fail, weighted mean reported)."""
    totals, supports = [], []
    if categories is None:
        cells = [(t, None) for t in groups.values()]
    else:
        cells = [(t, a) for a, by_group in categories.items() for t in by_group.values()]
    for terms, _ in cells:
        if terms.computed:
            totals.append(terms.total)
            supports.append(weights.get(id(terms), 0))
    aggregate = max(totals) if totals else 0.0
    weighted_mean = None
    if categories is not None and totals and sum(supports) > 0:
        weighted_mean = float(np.dot(totals, supports) / sum(supports))
    if not totals:
        skipped = skipped + ["no cell produced a defined term; aggregate defaults to 0"]
    return ViolationReport(
        notion=notion, epsilon=cfg.epsilon, aggregate=aggregate,
        passed=aggregate <= cfg.epsilon, groups=groups, categories=categories,
        weighted_mean=weighted_mean, skipped=skipped, mode=mode, thresholds=thresholds,
    )


def _observed_groups(table: Table, cfg: NotionConfig) -> list[str]:
    if cfg.groups is not None:
        return list(cfg.groups)
    return table.levels(cfg.protected)


def _rate_gap_report(table, h, cfg, notion, condition=None) -> ViolationReport:
    """Shared body of EP and DP: |rate_overall - rate_group| per group.

    ``condition`` restricts the comparison to a row subset (y=1 for EP).
    """
    base_mask = np.ones(table.rows, dtype=bool) if condition is None else condition
    groups_col = table.column(cfg.protected)
    groups: dict[str, GroupTerms] = {}
    skipped: list[str] = []
    if not base_mask.any():
        for s in _observed_groups(table, cfg):
            groups[s] = GroupTerms()
            skipped.append(f"{notion}/{s}: conditioning event empty")
        return _finish(notion, cfg, groups, None, {}, skipped, "", None)
    baseline = float(np.mean(h[base_mask]))
    for s in _observed_groups(table, cfg):
        cell = base_mask & (groups_col == s)
        if not cell.any():
            groups[s] = GroupTerms()
            skipped.append(f"{notion}/{s}: no rows in conditioning event")
            continue
        gap = abs(baseline - float(np.mean(h[cell])))
        groups[s] = GroupTerms(t1=gap, computed=("T1",),
                               denominators={"n_group": int(cell.sum()),
                                             "n": int(base_mask.sum())})
    return _finish(notion, cfg, groups, None, {}, skipped, "", None)


def ep_violation(table: Table, predictions, cfg: NotionConfig,
                 mode: str = "hard", cutoff: float = 0.5) -> ViolationReport:
    """Equal-opportunity gaps: positive-decision rates among ground-truth positives."""
    h = positive_scores(predictions, table, mode, cutoff)
    rep = _rate_gap_report(table, h, cfg, "EP", condition=table.target == 1)
    rep.mode = mode
    return rep


def dp_violation(table: Table, predictions, cfg: NotionConfig,
                 mode: str = "hard", cutoff: float = 0.5) -> ViolationReport:
    """Demographic-parity gaps: per-group positive-decision rate vs. the population."""
    h = positive_scores(predictions, table, mode, cutoff)
    rep = _rate_gap_report(table, h, cfg, "DP")
    rep.mode = mode
    return rep


def cdp_violation(table: Table, predictions, cfg: NotionConfig,
                  mode: str = "hard", cutoff: float = 0.5) -> ViolationReport:
    """DP gaps within each category of the conditional column."""
    h = positive_scores(predictions, table, mode, cutoff)
    cats_col = table.column(cfg.conditional)
    groups_col = table.column(cfg.protected)
    categories: dict[str, dict[str, GroupTerms]] = {}
    weights: dict[int, int] = {}
    skipped: list[str] = []
    group_names = _observed_groups(table, cfg)
    overall: dict[str, GroupTerms] = {s: GroupTerms() for s in group_names}
    for a in table.levels(cfg.conditional):
        in_cat = cats_col == a
        baseline = float(np.mean(h[in_cat]))
        by_group: dict[str, GroupTerms] = {}
        for s in group_names:
            cell = in_cat & (groups_col == s)
            if not cell.any():
                by_group[s] = GroupTerms()
                skipped.append(f"CDP/({a},{s}): empty cell")
                continue
            gap = abs(baseline - float(np.mean(h[cell])))
            terms = GroupTerms(t1=gap, computed=("T1",),
                               denominators={"n_cell": int(cell.sum()),
                                             "n_category": int(in_cat.sum())})
            by_group[s] = terms
            weights[id(terms)] = int(cell.sum())
        categories[a] = by_group
    rep = _finish("CDP", cfg, overall, categories, weights, skipped, mode, None)
    # per-group summary: worst cell for that group across categories
    for s in group_names:
        cell_totals = [t.total for a in categories
                       for g, t in categories[a].items() if g == s and t.computed]
        if cell_totals:
            overall[s] = GroupTerms(t1=max(cell_totals), computed=("T1",))
    return rep


def _sep_cell_terms(
    h: np.ndarray,
    neg: np.ndarray,
    y: np.ndarray,
    efforts: np.ndarray,
    underpriv: np.ndarray,
    privileged: np.ndarray,
    baseline: float,
    group_cell: np.ndarray,
    threshold: float,
    weighting: EffortWeighting,
    t3_literal_b: bool,
    label: str,
    skipped: list[str],
) -> GroupTerms:
    """T1/T2/T3 for one (category slice, group) cell.

    ``underpriv`` masks the group's underprivileged rows inside the slice;
    ``privileged`` masks the slice's privileged rows (all demographics);
    ``group_cell`` masks the slice's rows of this group (the weighting cell).
    """
    terms = GroupTerms()
    computed = []
    denoms: dict[str, float | int | None] = {"A": None, "B": None, "B0": None, "C": None}
    if not underpriv.any():
        skipped.append(f"{label}: T1,T2,T3 skipped (no underprivileged rows)")
        terms.denominators = denoms
        return terms
    terms.t1 = abs(baseline - float(np.mean(h[underpriv])))
    computed.append("T1")

    cell_max = float(np.max(efforts[group_cell]))
    zeta = weighting.weights(efforts, threshold, cell_max, cell=group_cell)
    low = underpriv & (efforts < threshold)
    high = underpriv & (efforts >= threshold)
    a_count = int(low.sum())
    denoms["A"] = a_count
    if high.any():
        b_sum = float(np.sum(zeta[high]))
        denoms["B"] = b_sum
    if a_count == 0 or not high.any():
        skipped.append(f"{label}: T2 skipped (effort split leaves an empty side)")
    else:
        low_avg = float(np.sum(neg[low])) / a_count
        high_avg = float(np.sum(zeta[high] * neg[high])) / b_sum
        terms.t2 = abs(low_avg - high_avg)
        computed.append("T2")

    priv_neg = privileged & (y == 0)
    c_count = int(priv_neg.sum())
    denoms["C"] = c_count
    high_neg = high & (y == 0)
    if high_neg.any():
        b0_sum = float(np.sum(zeta[high_neg]))
        denoms["B0"] = b0_sum
    if c_count == 0 or not high_neg.any():
        skipped.append(f"{label}: T3 skipped (no privileged negatives or no "
                       f"high-effort underprivileged negatives)")
    else:
        norm = denoms["B"] if t3_literal_b else b0_sum
        priv_avg = float(np.sum(neg[priv_neg])) / c_count
        under_avg = float(np.sum(zeta[high_neg] * neg[high_neg])) / norm
        terms.t3 = abs(priv_avg - under_avg)
        computed.append("T3")

    terms.denominators = denoms
    terms.computed = tuple(computed)
    return terms


def sep_violation(table: Table, predictions, cfg: NotionConfig,
                  thresholds: Thresholds | None = None,
                  mode: str = "hard", cutoff: float = 0.5) -> ViolationReport:
    """Full socio-economic parity measure (T1 + T2 + T3 per group)."""
    h = positive_scores(predictions, table, mode, cutoff)
    if thresholds is None:
        thresholds = cfg.resolve_thresholds(table)
    neg = 1.0 - h
    y = table.target
    xp = table.column(cfg.privilege_column)
    efforts = table.column(cfg.effort_column)
    groups_col = table.column(cfg.protected)
    tau = thresholds.privilege_cutoff
    privileged = xp >= tau
    baseline = float(np.mean(h))
    groups: dict[str, GroupTerms] = {}
    skipped: list[str] = []
    for s in _observed_groups(table, cfg):
        in_group = groups_col == s
        groups[s] = _sep_cell_terms(
            h, neg, y, efforts,
            underpriv=in_group & ~privileged,
            privileged=privileged,
            baseline=baseline,
            group_cell=in_group,
            threshold=thresholds.effort_at((s,)),
            weighting=cfg.weighting,
            t3_literal_b=cfg.t3_literal_b,
            label=f"SEP/{s}",
            skipped=skipped,
        )
    return _finish("SEP", cfg, groups, None, {}, skipped, mode, thresholds)


def csep_violation(table: Table, predictions, cfg: NotionConfig,
                   thresholds: Thresholds | None = None,
                   mode: str = "hard", cutoff: float = 0.5) -> ViolationReport:
    """SEP computed within each category of the conditional column."""
    h = positive_scores(predictions, table, mode, cutoff)
    if thresholds is None:
        thresholds = cfg.resolve_thresholds(table)
    neg = 1.0 - h
    y = table.target
    xp = table.column(cfg.privilege_column)
    efforts = table.column(cfg.effort_column)
    groups_col = table.column(cfg.protected)
    cats_col = table.column(cfg.conditional)
    tau = thresholds.privilege_cutoff
    privileged_all = xp >= tau
    group_names = _observed_groups(table, cfg)
    categories: dict[str, dict[str, GroupTerms]] = {}
    weights: dict[int, int] = {}
    skipped: list[str] = []
    overall: dict[str, GroupTerms] = {s: GroupTerms() for s in group_names}
    for a in table.levels(cfg.conditional):
        in_cat = cats_col == a
        baseline = float(np.mean(h[in_cat]))
        by_group: dict[str, GroupTerms] = {}
        for s in group_names:
            cell = in_cat & (groups_col == s)
            if not cell.any():
                by_group[s] = GroupTerms()
                skipped.append(f"CSEP/({a},{s}): empty cell")
                continue
            terms = _sep_cell_terms(
                h, neg, y, efforts,
                underpriv=cell & ~privileged_all,
                privileged=in_cat & privileged_all,
                baseline=baseline,
                group_cell=cell,
                threshold=thresholds.effort_at((a, s)),
                weighting=cfg.weighting,
                t3_literal_b=cfg.t3_literal_b,
                label=f"CSEP/({a},{s})",
                skipped=skipped,
            )
            by_group[s] = terms
            weights[id(terms)] = int((cell & ~privileged_all).sum())
        categories[a] = by_group
    rep = _finish("CSEP", cfg, overall, categories, weights, skipped, mode, thresholds)
    for s in group_names:
        cell_totals = [t.total for a in categories
                       for g, t in categories[a].items() if g == s and t.computed]
        if cell_totals:
            overall[s] = GroupTerms(t1=max(cell_totals), computed=("T1",))
    return rep


def sep_relaxed(table: Table, predictions, cfg: NotionConfig,
                thresholds: Thresholds | None = None,
                mode: str = "hard", cutoff: float = 0.5) -> ViolationReport:
    """Relaxed measure: the parity term T1 alone, per group."""
    h = positive_scores(predictions, table, mode, cutoff)
    if thresholds is None:
        thresholds = cfg.resolve_thresholds(table)
    xp = table.column(cfg.privilege_column)
    groups_col = table.column(cfg.protected)
    underpriv_all = xp < thresholds.privilege_cutoff
    baseline = float(np.mean(h))
    groups: dict[str, GroupTerms] = {}
    skipped: list[str] = []
    for s in _observed_groups(table, cfg):
        u = underpriv_all & (groups_col == s)
        if not u.any():
            groups[s] = GroupTerms()
            skipped.append(f"SEP_relaxed/{s}: no underprivileged rows")
            continue
        gap = abs(baseline - float(np.mean(h[u])))
        groups[s] = GroupTerms(t1=gap, computed=("T1",),
                               denominators={"n_underprivileged": int(u.sum())})
    return _finish("SEP_relaxed", cfg, groups, None, {}, skipped, mode, thresholds)


_DISPATCH = {
    "EP": ep_violation,
    "DP": dp_violation,
    "CDP": cdp_violation,
    "SEP": sep_violation,
    "CSEP": csep_violation,
    "SEP_relaxed": sep_relaxed,
}


def violation(table: Table, predictions, cfg: NotionConfig,
              mode: str = "hard", cutoff: float = 0.5,
              thresholds: Thresholds | None = None) -> ViolationReport:
    """Evaluate the configured notion; dispatches on ``cfg.kind``."""
    fn = _DISPATCH[cfg.kind]
    if cfg.kind in SEP_FAMILY:
        return fn(table, predictions, cfg, thresholds=thresholds, mode=mode, cutoff=cutoff)
    return fn(table, predictions, cfg, mode=mode, cutoff=cutoff)
