"""Scoring arithmetic: parsing accuracy over scenario documents and a
linearly-weighted multi-rater agreement statistic for survey vote matrices.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .catalog import ElementCatalog
from .dsl import ScenarioRep, diff_scenarios


class MetricsError(Exception):
    pass


class DivisionUndefined(MetricsError):
    """No applicable slots (or votes) to average over."""


class DegenerateMatrix(MetricsError):
    """Expected agreement is 1, so chance correction divides by zero."""


# ---------------------------------------------------------------------------
# parsing accuracy

def rule_parsing_accuracy(
    pred: ScenarioRep, gold: ScenarioRep, catalog: ElementCatalog | None = None
) -> float:
    """Fraction of matching subcomponent slots between one parsed document
    and its reference."""
    mv = diff_scenarios(pred, gold, catalog)
    if mv.total == 0:
        raise DivisionUndefined("no slots to compare")
    return mv.matched_count / mv.total


def component_parsing_accuracy(
    pairs, subcomponent: str, catalog: ElementCatalog | None = None
) -> float:
    """Match rate of one subcomponent across many (pred, gold) pairs.
    Pairs that do not carry the subcomponent (say, no NPC present) stay out
    of the denominator."""
    matched = 0
    total = 0
    for pred, gold in pairs:
        for slot in diff_scenarios(pred, gold, catalog).slots:
            if slot.subcomponent == subcomponent:
                total += 1
                if slot.matched:
                    matched += 1
    if total == 0:
        raise DivisionUndefined(f"no {subcomponent!r} slots in the corpus")
    return matched / total


# ---------------------------------------------------------------------------
# weighted multi-rater agreement

@dataclass(frozen=True)
class VoteMatrix:
    """Subjects x ordered categories matrix of rating counts, with the same
    number of raters for every subject."""

    counts: tuple[tuple[int, ...], ...]
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.counts:
            raise ValueError("vote matrix needs at least one subject")
        k = len(self.counts[0])
        if k < 2:
            raise ValueError("vote matrix needs at least two categories")
        if any(len(row) != k for row in self.counts):
            raise ValueError("ragged vote matrix")
        if any(c < 0 for row in self.counts for c in row):
            raise ValueError("negative vote count")
        raters = {sum(row) for row in self.counts}
        if len(raters) != 1:
            raise ValueError(f"unequal raters per subject: {sorted(raters)}")
        if raters == {0}:
            raise ValueError("zero raters")
        if self.categories and len(self.categories) != k:
            raise ValueError("category labels do not match matrix width")

    @property
    def n_subjects(self) -> int:
        return len(self.counts)

    @property
    def n_categories(self) -> int:
        return len(self.counts[0])

    @property
    def n_raters(self) -> int:
        return sum(self.counts[0])


def load_votes_csv(path) -> VoteMatrix:
    """Rows are subjects, columns category counts.  A non-numeric first row
    is taken as category labels."""
    rows = []
    labels: tuple[str, ...] = ()
    with open(path, newline="", encoding="utf-8") as fh:
        for record in csv.reader(fh):
            cells = [c.strip() for c in record if c.strip() != ""]
            if not cells or cells[0].startswith("#"):
                continue
            if not rows and not labels and not all(_is_int(c) for c in cells):
                labels = tuple(cells)
                continue
            try:
                rows.append(tuple(int(c) for c in cells))
            except ValueError as exc:
                raise MetricsError(f"bad vote count in {path}: {exc}") from None
    if not rows:
        raise MetricsError(f"no vote rows in {path}")
    return VoteMatrix(tuple(rows), labels)


def _is_int(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


def weighted_fleiss_kappa(votes: VoteMatrix) -> float:
    """Chance-corrected agreement with linear category-distance weights
    w[i][j] = 1 - |i-j|/(k-1), computed over all rater pairs per subject."""
    k = votes.n_categories
    m = votes.n_raters
    if m < 2:
        raise MetricsError("agreement needs at least two raters")
    weights = [
        [1.0 - abs(i - j) / (k - 1) for j in range(k)] for i in range(k)
    ]

    pairs = m * (m - 1)
    observed = 0.0
    for row in votes.counts:
        s = 0.0
        for c in range(k):
            if row[c] == 0:
                continue
            for d in range(k):
                if row[d] == 0:
                    continue
                same = 1 if c == d else 0
                s += weights[c][d] * row[c] * (row[d] - same)
        observed += s / pairs
    p_obs = observed / votes.n_subjects

    total = votes.n_subjects * m
    marginals = [
        sum(row[c] for row in votes.counts) / total for c in range(k)
    ]
    p_exp = sum(
        weights[c][d] * marginals[c] * marginals[d]
        for c in range(k)
        for d in range(k)
    )

    if 1.0 - p_exp < 1e-12:
        raise DegenerateMatrix(
            "expected agreement is 1; agreement is undefined for a matrix "
            "concentrated on one category"
        )
    return (p_obs - p_exp) / (1.0 - p_exp)
