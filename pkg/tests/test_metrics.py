"""Agreement statistic vs a pairwise brute-force oracle, plus accuracy math."""

import random

import pytest

from rulescene.dsl import parse_scenario_text
from rulescene.metrics import (
    DegenerateMatrix,
    DivisionUndefined,
    MetricsError,
    VoteMatrix,
    component_parsing_accuracy,
    load_votes_csv,
    rule_parsing_accuracy,
    weighted_fleiss_kappa,
)


def kappa_pairwise(rows):
    """Direct definition: average linear-weight agreement over every ordered
    pair of raters, chance-corrected by the marginal category mix."""
    k = len(rows[0])
    m = sum(rows[0])
    w = [[1 - abs(i - j) / (k - 1) for j in range(k)] for i in range(k)]

    def expand(row):
        out = []
        for c, n in enumerate(row):
            out += [c] * n
        return out

    obs = 0.0
    for row in rows:
        ratings = expand(row)
        s = 0.0
        npairs = 0
        for a in range(m):
            for b in range(m):
                if a != b:
                    s += w[ratings[a]][ratings[b]]
                    npairs += 1
        obs += s / npairs
    p_obs = obs / len(rows)

    total = len(rows) * m
    marg = [sum(r[c] for r in rows) / total for c in range(k)]
    p_exp = sum(w[c][d] * marg[c] * marg[d] for c in range(k) for d in range(k))
    if 1.0 - p_exp < 1e-12:
        return None
    return (p_obs - p_exp) / (1.0 - p_exp)


def random_matrix(rng, n, k, m):
    rows = []
    for _ in range(n):
        row = [0] * k
        for _ in range(m):
            row[rng.randrange(k)] += 1
        rows.append(tuple(row))
    return tuple(rows)


# ---------------------------------------------------------------------------
# kappa

def test_perfect_agreement_is_exactly_one():
    votes = VoteMatrix(((4, 0, 0), (0, 4, 0), (0, 0, 4), (4, 0, 0)))
    assert weighted_fleiss_kappa(votes) == 1.0


def test_golden_small_matrix():
    votes = VoteMatrix(((2, 1, 0), (0, 2, 1), (1, 1, 1)))
    assert weighted_fleiss_kappa(votes) == pytest.approx(-0.125, abs=1e-12)


def test_matches_pairwise_oracle_on_random_matrices():
    rng = random.Random(501)
    checked = 0
    for _ in range(50):
        rows = random_matrix(
            rng, rng.randint(2, 8), rng.randint(2, 5), rng.randint(2, 6)
        )
        expected = kappa_pairwise(rows)
        if expected is None:
            with pytest.raises(DegenerateMatrix):
                weighted_fleiss_kappa(VoteMatrix(rows))
            continue
        assert weighted_fleiss_kappa(VoteMatrix(rows)) == pytest.approx(
            expected, abs=1e-9
        )
        checked += 1
    assert checked >= 40


def test_uniform_noise_sits_near_zero():
    rng = random.Random(77)
    votes = VoteMatrix(random_matrix(rng, 200, 5, 10))
    assert abs(weighted_fleiss_kappa(votes)) < 0.05


def test_two_categories_equal_unweighted_fleiss():
    # linear weights collapse to the identity when k == 2
    rng = random.Random(502)
    for _ in range(20):
        rows = random_matrix(rng, rng.randint(3, 8), 2, rng.randint(2, 5))
        m = sum(rows[0])
        p_obs = sum(
            sum(c * (c - 1) for c in row) / (m * (m - 1)) for row in rows
        ) / len(rows)
        total = len(rows) * m
        p_exp = sum((sum(r[c] for r in rows) / total) ** 2 for c in range(2))
        if 1.0 - p_exp < 1e-12:
            continue
        classic = (p_obs - p_exp) / (1.0 - p_exp)
        assert weighted_fleiss_kappa(VoteMatrix(rows)) == pytest.approx(
            classic, abs=1e-12
        )


def test_single_category_concentration_is_degenerate():
    with pytest.raises(DegenerateMatrix):
        weighted_fleiss_kappa(VoteMatrix(((3, 0), (3, 0))))


def test_single_rater_rejected():
    with pytest.raises(MetricsError, match="two raters"):
        weighted_fleiss_kappa(VoteMatrix(((1, 0), (0, 1))))


@pytest.mark.parametrize(
    "rows,labels,fragment",
    [
        ((), (), "at least one subject"),
        (((3,),), (), "two categories"),
        (((2, 1), (1, 1, 1)), (), "ragged"),
        (((2, -1),), (), "negative"),
        (((2, 1), (1, 1)), (), "unequal raters"),
        (((0, 0),), (), "zero raters"),
        (((2, 1),), ("a", "b", "c"), "labels"),
    ],
)
def test_vote_matrix_validation(rows, labels, fragment):
    with pytest.raises(ValueError, match=fragment):
        VoteMatrix(rows, labels)


def test_vote_matrix_properties():
    votes = VoteMatrix(((2, 1, 0), (1, 1, 1)), ("bad", "ok", "good"))
    assert votes.n_subjects == 2
    assert votes.n_categories == 3
    assert votes.n_raters == 3


# ---------------------------------------------------------------------------
# csv loading

def test_load_votes_csv(tmp_path):
    p = tmp_path / "votes.csv"
    p.write_text(
        "# realism survey\n"
        "low,medium,high\n"
        "3,1,0\n"
        "\n"
        "0,2,2\n"
    )
    votes = load_votes_csv(p)
    assert votes.categories == ("low", "medium", "high")
    assert votes.counts == ((3, 1, 0), (0, 2, 2))


def test_load_votes_csv_without_header(tmp_path):
    p = tmp_path / "votes.csv"
    p.write_text("2,2\n4,0\n")
    votes = load_votes_csv(p)
    assert votes.categories == ()
    assert votes.n_raters == 4


def test_load_votes_csv_bad_cell(tmp_path):
    p = tmp_path / "votes.csv"
    p.write_text("1,2\n1,x\n")
    with pytest.raises(MetricsError, match="bad vote count"):
        load_votes_csv(p)


def test_load_votes_csv_empty(tmp_path):
    p = tmp_path / "votes.csv"
    p.write_text("# nothing here\n")
    with pytest.raises(MetricsError, match="no vote rows"):
        load_votes_csv(p)


# ---------------------------------------------------------------------------
# parsing accuracy

def test_calibration_pair_scores_14_of_15(root, catalog):
    gold = parse_scenario_text(
        (root / "rules" / "calibration" / "gold" / "mismatch.rep.txt").read_text()
    )
    pred = parse_scenario_text(
        (root / "rules" / "calibration" / "pred" / "mismatch.rep.txt").read_text()
    )
    assert rule_parsing_accuracy(pred, gold, catalog) == pytest.approx(14 / 15)
    assert rule_parsing_accuracy(gold, gold, catalog) == 1.0


def test_component_accuracy_partitions_by_slot(root, catalog):
    gold = parse_scenario_text(
        (root / "rules" / "calibration" / "gold" / "mismatch.rep.txt").read_text()
    )
    pred = parse_scenario_text(
        (root / "rules" / "calibration" / "pred" / "mismatch.rep.txt").read_text()
    )
    pairs = [(pred, gold), (gold, gold)]
    assert component_parsing_accuracy(pairs, "weather", catalog) == 0.5
    assert component_parsing_accuracy(pairs, "time", catalog) == 1.0


def test_component_accuracy_missing_slot_is_undefined(root, catalog):
    gold = parse_scenario_text(
        (root / "rules" / "calibration" / "gold" / "mismatch.rep.txt").read_text()
    )
    with pytest.raises(DivisionUndefined, match="npc"):
        component_parsing_accuracy([(gold, gold)], "npc[3].behavior", catalog)
