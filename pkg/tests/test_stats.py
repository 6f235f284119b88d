"""Summary-statistics engine: unequal-variance t tests, goodness-of-fit,
Likert trichotomies, alignment-accuracy measurement, and the table runners."""

from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adgfeedback import (
    AlignConfig,
    CharNgramProvider,
    LikertCounts,
    PAIR_NAMES,
    StatsError,
    SummaryStats,
    Trichotomy,
    Verdict,
    alignment_accuracy,
    chi_square_gof,
    load_corpus,
    pairwise_trichotomy_tests,
    parse_count_rows,
    parse_summary_rows,
    run_count_table,
    run_likert_table,
    run_summary_table,
    trichotomize,
    two_level_marker,
    verdict_for,
    welch_t,
)
from adgfeedback import TestResult as Result

from _oracles import chi2_sf, t_two_sided_p
from conftest import load_fixture_json

# Grid points for cross-checking p-values against the independently coded
# distribution functions in _oracles. Reused by the acceptance suite.
T_GRID = [
    (5, 1.0, 0.5, 5, 1.2, 0.5), (5, 1.0, 0.5, 5, 2.0, 0.5),
    (8, 3.0, 1.0, 12, 3.5, 2.0), (10, 0.0, 1.0, 10, 0.0, 2.0),
    (10, 0.0, 1.0, 10, 1.0, 1.0), (12, 5.0, 2.5, 18, 3.2, 1.1),
    (15, 2.2, 0.3, 15, 2.25, 0.4), (20, 10.0, 4.0, 25, 12.5, 3.5),
    (30, 4.5, 1.5, 30, 5.5, 1.5), (35, 4.2, 1.4, 35, 5.2, 0.7),
    (35, 4.4, 1.0, 35, 4.6, 0.9), (40, 100.0, 15.0, 45, 94.0, 12.0),
    (50, 0.5, 0.1, 50, 0.52, 0.12), (60, 7.7, 3.3, 40, 8.8, 2.2),
    (2, 1.0, 0.8, 2, 3.0, 0.9), (3, 0.0, 1.0, 3, 5.0, 1.0),
    (100, 50.0, 10.0, 100, 52.0, 10.0), (200, 1.0, 2.0, 100, 1.1, 2.5),
    (7, 2.0, 0.6, 9, 1.0, 0.5), (11, 3.3, 1.2, 13, 3.9, 1.8),
]
CHI_GRID = [
    (2, 4), (22, 8, 5), (2, 32, 1), (10, 10), (1, 1, 1, 1), (5, 10, 15),
    (0, 4), (0, 12, 19), (33, 33, 34), (50, 25, 25), (1, 2, 3, 4, 5, 6),
    (40, 1), (17, 3), (8, 8, 8, 8, 8), (120, 80), (4, 12), (31, 4),
    (2, 4, 29), (7, 13, 11, 9), (3, 0, 0, 5, 1),
]


class TestSummaryStats:
    def test_holds_given_values(self):
        s = SummaryStats(n=35, mean=4.2, sd=1.4)
        assert (s.n, s.mean, s.sd) == (35, 4.2, 1.4)

    def test_rejects_n_below_two(self):
        with pytest.raises(ValueError):
            SummaryStats(n=1, mean=0.0, sd=1.0)

    def test_rejects_non_integer_n(self):
        with pytest.raises(ValueError):
            SummaryStats(n=35.0, mean=0.0, sd=1.0)

    def test_rejects_negative_sd(self):
        with pytest.raises(ValueError):
            SummaryStats(n=5, mean=0.0, sd=-0.1)

    def test_accepts_zero_sd(self):
        assert SummaryStats(n=5, mean=0.0, sd=0.0).sd == 0.0


class TestResultInvariants:
    def test_rejects_p_above_one(self):
        with pytest.raises(ValueError):
            Result(statistic=1.0, df=10.0, p_value=1.0000001, verdict=Verdict.NS)

    def test_rejects_negative_p(self):
        with pytest.raises(ValueError):
            Result(statistic=1.0, df=10.0, p_value=-0.01, verdict=Verdict.SIG_01)

    def test_accepts_boundary_p(self):
        assert Result(statistic=0.0, df=1.0, p_value=0.0, verdict=Verdict.SIG_01).p_value == 0.0
        assert Result(statistic=0.0, df=1.0, p_value=1.0, verdict=Verdict.NS).p_value == 1.0


class TestVerdicts:
    @pytest.mark.parametrize("p, expected", [
        (0.0, Verdict.SIG_01),
        (0.009999, Verdict.SIG_01),
        (0.01, Verdict.SIG_05),
        (0.049999, Verdict.SIG_05),
        (0.05, Verdict.NS),
        (0.5, Verdict.NS),
        (1.0, Verdict.NS),
    ])
    def test_thresholds_are_half_open(self, p, expected):
        assert verdict_for(p) is expected

    def test_markers(self):
        assert Verdict.SIG_01.marker == "**"
        assert Verdict.SIG_05.marker == "*"
        assert Verdict.NS.marker == "ns"

    def test_two_level_marker_collapses_the_middle(self):
        strong = Result(statistic=2.5, df=30.0, p_value=0.005, verdict=Verdict.SIG_01)
        middle = Result(statistic=2.0, df=30.0, p_value=0.03, verdict=Verdict.SIG_05)
        weak = Result(statistic=1.0, df=30.0, p_value=0.4, verdict=Verdict.NS)
        assert two_level_marker(strong) == "**"
        assert two_level_marker(middle) == "ns"
        assert two_level_marker(weak) == "ns"


class TestWelchT:
    def test_clear_difference_is_significant(self):
        r = welch_t(SummaryStats(35, 4.2, 1.4), SummaryStats(35, 5.2, 0.7))
        assert r.verdict is Verdict.SIG_01
        assert r.statistic < 0
        assert r.df == pytest.approx(50.0, abs=1e-9)
        assert r.p_value == pytest.approx(0.000419, abs=1e-6)

    def test_small_difference_is_not_significant(self):
        r = welch_t(SummaryStats(35, 4.4, 1.0), SummaryStats(35, 4.6, 0.9))
        assert r.verdict is Verdict.NS
        assert r.p_value == pytest.approx(0.382274, abs=1e-6)

    def test_identical_groups(self):
        s = SummaryStats(35, 4.2, 1.4)
        r = welch_t(s, s)
        assert r.statistic == 0.0
        assert r.p_value == 1.0
        assert r.df == 68.0
        assert r.verdict is Verdict.NS

    def test_zero_variance_equal_means(self):
        r = welch_t(SummaryStats(10, 3.0, 0.0), SummaryStats(10, 3.0, 0.0))
        assert (r.statistic, r.df, r.p_value) == (0.0, 18.0, 1.0)
        assert r.verdict is Verdict.NS

    def test_zero_variance_different_means(self):
        r = welch_t(SummaryStats(10, 3.0, 0.0), SummaryStats(10, 4.0, 0.0))
        assert r.statistic == -math.inf
        assert r.p_value == 0.0
        assert r.verdict is Verdict.SIG_01
        flipped = welch_t(SummaryStats(10, 4.0, 0.0), SummaryStats(10, 3.0, 0.0))
        assert flipped.statistic == math.inf

    @given(
        n1=st.integers(2, 60), n2=st.integers(2, 60),
        m1=st.floats(-50, 50, allow_nan=False), m2=st.floats(-50, 50, allow_nan=False),
        s1=st.floats(0, 10, allow_nan=False), s2=st.floats(0, 10, allow_nan=False),
    )
    @settings(max_examples=150)
    def test_antisymmetric_under_group_swap(self, n1, n2, m1, m2, s1, s2):
        a, b = SummaryStats(n1, m1, s1), SummaryStats(n2, m2, s2)
        forward = welch_t(a, b)
        backward = welch_t(b, a)
        assert backward.statistic == -forward.statistic
        assert backward.df == forward.df
        assert backward.p_value == forward.p_value
        assert backward.verdict is forward.verdict

    def test_p_decreases_as_means_separate(self):
        ps = []
        for gap in [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5]:
            r = welch_t(SummaryStats(20, 5.0, 1.0), SummaryStats(20, 5.0 + gap, 1.0))
            ps.append(r.p_value)
        assert all(later < earlier for earlier, later in zip(ps, ps[1:]))

    @pytest.mark.parametrize("row", T_GRID, ids=[str(i) for i in range(len(T_GRID))])
    def test_p_matches_independent_integration(self, row):
        r = welch_t(SummaryStats(*row[:3]), SummaryStats(*row[3:]))
        assert r.p_value == pytest.approx(t_two_sided_p(r.statistic, r.df), abs=1e-6)


class TestChiSquareGof:
    def test_skewed_three_way_split(self):
        r = chi_square_gof([22, 8, 5])
        assert r.verdict is Verdict.SIG_01
        assert r.statistic == pytest.approx(14.1143, abs=1e-4)
        assert r.df == 2.0
        assert r.p_value == pytest.approx(0.00086124, abs=1e-6)

    def test_landslide_majority(self):
        r = chi_square_gof([2, 32, 1])
        assert r.verdict is Verdict.SIG_01

    def test_small_imbalance_is_not_significant(self):
        r = chi_square_gof([2, 4])
        assert r.verdict is Verdict.NS
        assert r.p_value == pytest.approx(0.414216, abs=1e-6)

    def test_perfectly_uniform_counts(self):
        r = chi_square_gof([7, 7])
        assert r.statistic == 0.0
        assert r.p_value == 1.0

    def test_all_zero_counts_rejected(self):
        with pytest.raises(StatsError) as exc:
            chi_square_gof([0, 0, 0])
        assert exc.value.code == "empty-sample"

    def test_single_category_rejected(self):
        with pytest.raises(StatsError) as exc:
            chi_square_gof([5])
        assert exc.value.code == "too-few-categories"

    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            chi_square_gof([-1, 5])

    def test_expected_proportions_are_normalized(self):
        weighted = chi_square_gof([22, 8, 5], expected=[2, 1, 1])
        fractional = chi_square_gof([22, 8, 5], expected=[0.5, 0.25, 0.25])
        assert weighted.statistic == fractional.statistic
        assert weighted.statistic == pytest.approx(2.8286, abs=1e-4)
        assert weighted.p_value == pytest.approx(0.243099, abs=1e-6)

    def test_expected_must_be_positive(self):
        with pytest.raises(ValueError):
            chi_square_gof([3, 4], expected=[0.0, 1.0])
        with pytest.raises(ValueError):
            chi_square_gof([3, 4], expected=[-1.0, 2.0])

    def test_expected_length_must_match(self):
        with pytest.raises(ValueError):
            chi_square_gof([3, 4], expected=[1.0, 1.0, 1.0])

    def test_continuity_correction_shrinks_statistic(self):
        plain = chi_square_gof([22, 8, 5])
        corrected = chi_square_gof([22, 8, 5], yates=True)
        assert corrected.statistic < plain.statistic
        assert corrected.statistic == pytest.approx(12.4071, abs=1e-4)

    def test_continuity_correction_floors_at_zero(self):
        # Each deviation from 3.5 is exactly 0.5, so the corrected
        # differences vanish entirely.
        r = chi_square_gof([4, 3], yates=True)
        assert r.statistic == 0.0
        assert r.p_value == 1.0

    def test_p_decreases_as_counts_skew(self):
        ps = [chi_square_gof(c).p_value
              for c in ([10, 10], [13, 7], [16, 4], [19, 1])]
        assert all(later < earlier for earlier, later in zip(ps, ps[1:]))

    @pytest.mark.parametrize("counts", CHI_GRID, ids=[str(i) for i in range(len(CHI_GRID))])
    def test_p_matches_independent_integration(self, counts):
        r = chi_square_gof(counts)
        assert r.p_value == pytest.approx(chi2_sf(r.statistic, r.df), abs=1e-6)


class TestTrichotomy:
    @pytest.mark.parametrize("counts, expected", [
        ((0, 2, 1, 3, 13, 16), (2, 4, 29)),
        ((0, 1, 5, 7, 12, 10), (1, 12, 22)),
        ((0, 0, 0, 0, 0, 0), (0, 0, 0)),
    ])
    def test_collapses_adjacent_pairs(self, counts, expected):
        tri = trichotomize(LikertCounts(counts=counts))
        assert (tri.negative, tri.neutral, tri.positive) == expected

    @given(counts=st.tuples(*[st.integers(0, 200)] * 6))
    def test_total_is_preserved(self, counts):
        likert = LikertCounts(counts=counts)
        tri = trichotomize(likert)
        assert tri.total == likert.total
        assert tri.negative == counts[0] + counts[1]
        assert tri.neutral == counts[2] + counts[3]
        assert tri.positive == counts[4] + counts[5]

    def test_likert_requires_six_categories(self):
        with pytest.raises(ValueError):
            LikertCounts(counts=(1, 2, 3, 4, 5))

    def test_likert_rejects_negative_counts(self):
        with pytest.raises(ValueError):
            LikertCounts(counts=(1, 2, 3, -4, 5, 6))

    def test_totals(self):
        assert LikertCounts(counts=(1, 2, 3, 4, 5, 6)).total == 21
        assert Trichotomy(negative=2, neutral=4, positive=29).total == 35


class TestPairwiseTrichotomyTests:
    def test_pair_names_in_fixed_order(self):
        assert PAIR_NAMES == ("negative=neutral", "negative=positive", "neutral=positive")

    def test_each_pair_is_a_two_way_split_test(self):
        tests = pairwise_trichotomy_tests(LikertCounts(counts=(0, 2, 1, 3, 13, 16)))
        assert [name for name, _ in tests] == list(PAIR_NAMES)
        # Trichotomy is (2, 4, 29); each pair tested against an even split.
        assert tests[0][1].p_value == chi_square_gof([2, 4]).p_value
        assert tests[1][1].p_value == chi_square_gof([2, 29]).p_value
        assert tests[2][1].p_value == chi_square_gof([4, 29]).p_value

    @pytest.mark.parametrize("counts, expected_markers", [
        ((0, 2, 1, 3, 13, 16), ["ns", "**", "**"]),
        ((0, 1, 5, 7, 12, 10), ["**", "**", "ns"]),
        ((0, 0, 0, 4, 12, 19), ["ns", "**", "**"]),
        ((0, 0, 2, 5, 14, 14), ["**", "**", "**"]),
    ])
    def test_two_level_marker_patterns(self, counts, expected_markers):
        tests = pairwise_trichotomy_tests(LikertCounts(counts=counts))
        assert [two_level_marker(r) for _, r in tests] == expected_markers


class TestTableParsing:
    def test_summary_rows_from_fixture(self, fixtures_dir):
        rows = parse_summary_rows((fixtures_dir / "table1.tsv").read_text())
        assert len(rows) == 8
        assert rows[0] == ("q1", SummaryStats(35, 4.2, 1.4), SummaryStats(35, 5.2, 0.7))
        assert [row_id for row_id, _, _ in rows] == [f"q{i}" for i in range(1, 9)]

    def test_comments_and_blanks_are_skipped(self):
        text = "# header\n\nq1\t10\t1.0\t0.5\t12\t1.1\t0.6\n\n# trailing\n"
        assert len(parse_summary_rows(text)) == 1

    def test_comma_delimited_rows(self):
        rows = parse_summary_rows("q1,10,1.0,0.5,12,1.1,0.6")
        assert rows[0][1] == SummaryStats(10, 1.0, 0.5)

    def test_wrong_cell_count_is_an_error(self):
        with pytest.raises(StatsError) as exc:
            parse_summary_rows("q1\t35\t4.2")
        assert exc.value.code == "bad-row"
        assert "line 1" in str(exc.value)

    def test_count_rows_from_fixture(self, fixtures_dir):
        rows = parse_count_rows((fixtures_dir / "table2.tsv").read_text())
        assert rows == [("choice1", (22, 8, 5)), ("choice2", (2, 32, 1))]

    def test_count_rows_need_at_least_two_counts(self):
        with pytest.raises(StatsError) as exc:
            parse_count_rows("x\t1")
        assert exc.value.code == "bad-row"


class TestTableRunners:
    def test_summary_table_markers(self, fixtures_dir):
        results = run_summary_table((fixtures_dir / "table1.tsv").read_text())
        markers = [r.verdict.marker for _, r in results]
        # The last row lands just above the 0.05 boundary (p = 0.0530).
        assert markers == ["**", "**", "**", "**", "*", "ns", "ns", "ns"]
        assert [row_id for row_id, _ in results] == [f"q{i}" for i in range(1, 9)]

    def test_score_summary_table_markers(self, fixtures_dir):
        results = run_summary_table((fixtures_dir / "table5.tsv").read_text())
        assert [r.verdict.marker for _, r in results] == ["ns", "ns"]

    def test_count_table_majorities(self, fixtures_dir):
        results = run_count_table((fixtures_dir / "table2.tsv").read_text())
        assert [(row_id, r.verdict, majority) for row_id, r, majority in results] == [
            ("choice1", Verdict.SIG_01, 0),
            ("choice2", Verdict.SIG_01, 1),
        ]

    def test_likert_table_runs_all_pairs(self, fixtures_dir):
        results = run_likert_table((fixtures_dir / "table3.tsv").read_text())
        assert [row_id for row_id, _ in results] == [
            "individualization", "relevance", "demand", "progression",
        ]
        matrix = [[two_level_marker(r) for _, r in tests] for _, tests in results]
        assert matrix == [
            ["ns", "**", "**"],
            ["**", "**", "ns"],
            ["ns", "**", "**"],
            ["**", "**", "**"],
        ]

    def test_likert_table_requires_six_counts(self):
        with pytest.raises(StatsError) as exc:
            run_likert_table("bad\t1\t2\t3\t4\t5")
        assert exc.value.code == "bad-row"


class TestAlignmentAccuracy:
    def adgs(self, walkthrough_adg, ja_adg):
        return {"p1": walkthrough_adg, "p2": ja_adg}

    def test_exact_cues_align_perfectly(self, exact_corpus, walkthrough_adg, ja_adg):
        report = alignment_accuracy(exact_corpus, self.adgs(walkthrough_adg, ja_adg))
        assert report.evaluated == 11
        assert report.skipped == 0
        assert report.correct == 11
        assert report.top1 == 1.0
        assert report.mean_margin is not None and 0 < report.mean_margin <= 1

    def test_exact_confusion_is_diagonal(self, exact_corpus, walkthrough_adg, ja_adg):
        report = alignment_accuracy(exact_corpus, self.adgs(walkthrough_adg, ja_adg))
        assert sum(count for _, _, count in report.confusion) == 11
        assert all(gold == predicted for gold, predicted, _ in report.confusion)
        assert all(gold in ("sentence", "chunk") for gold, _, _ in report.confusion)

    def test_planted_misses_lower_top1(self, planted_corpus, walkthrough_adg):
        report = alignment_accuracy(planted_corpus, {"p1": walkthrough_adg})
        assert report.evaluated == 20
        assert report.correct == 18
        assert report.top1 == 0.9

    def test_missing_oracle_entries_are_skipped(self, walkthrough_adg, ja_adg):
        doc = load_fixture_json("exact_corpus.json")
        del doc["oracle_nodes"]["exact-en-1"]
        del doc["oracle_nodes"]["exact-en-2"]
        corpus = load_corpus(json.dumps(doc))
        report = alignment_accuracy(corpus, self.adgs(walkthrough_adg, ja_adg))
        assert report.skipped == 2
        assert report.evaluated == 9

    def test_unannotated_corpus_is_all_skipped(self, walkthrough_corpus, walkthrough_adg, ja_adg):
        report = alignment_accuracy(walkthrough_corpus, self.adgs(walkthrough_adg, ja_adg))
        assert report.evaluated == 0
        # Criteria without a cue are not even skipped; only cue-bearing
        # pairs lacking a gold annotation count.
        assert report.skipped == 5
        assert report.top1 is None
        assert report.mean_margin is None

    def test_empty_corpus_yields_empty_report(self, walkthrough_adg, ja_adg):
        doc = load_fixture_json("exact_corpus.json")
        doc["responses"] = []
        doc["oracle_nodes"] = {}
        report = alignment_accuracy(load_corpus(json.dumps(doc)),
                                    self.adgs(walkthrough_adg, ja_adg))
        assert (report.evaluated, report.skipped, report.correct) == (0, 0, 0)
        assert report.top1 is None
        assert report.mean_margin is None
        assert report.confusion == ()

    def test_missing_graph_is_an_error(self, exact_corpus, walkthrough_adg):
        with pytest.raises(StatsError) as exc:
            alignment_accuracy(exact_corpus, {"p1": walkthrough_adg})
        assert exc.value.code == "missing-graph"
        assert exc.value.subject == "p2"

    def test_alternate_provider_is_used(self, exact_corpus, walkthrough_adg, ja_adg):
        report = alignment_accuracy(exact_corpus, self.adgs(walkthrough_adg, ja_adg),
                                    provider=CharNgramProvider(n=2),
                                    config=AlignConfig(threshold=0.5))
        assert report.top1 == 1.0

    def test_report_document_shape(self, exact_corpus, walkthrough_adg, ja_adg):
        report = alignment_accuracy(exact_corpus, self.adgs(walkthrough_adg, ja_adg))
        doc = report.to_document()
        assert set(doc) == {"evaluated", "skipped", "correct", "top1",
                            "mean_margin", "confusion"}
        assert doc["top1"] == 1.0
        assert all(set(cell) == {"gold_kind", "predicted_kind", "count"}
                   for cell in doc["confusion"])
        json.dumps(doc)
        assert report.confusion_map[("chunk", "chunk")] >= 1
