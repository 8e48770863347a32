"""Evaluation metrics against hand counts and brute-force recomputation."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixqa.metrics import (
    PredictionRecord,
    gate_ratio,
    hits_at_1,
    precision_at_k,
    reader_report,
    recall_at_k,
    retrieval_report,
)


def record(pred, gold, g=None, cat=None, qid=0):
    return PredictionRecord(qid=qid, ranked=[(pred, 1.0)], gold=frozenset(gold), gate=g, category=cat)


class TestHitsAt1:
    def test_all_correct(self):
        records = [record(1, {1}), record(2, {2, 5})]
        assert hits_at_1(records) == 1.0

    def test_none_correct(self):
        records = [record(1, {2}), record(3, {4})]
        assert hits_at_1(records) == 0.0

    def test_half_correct(self):
        records = [record(1, {1}), record(2, {9}), record(3, {3}), record(4, {8})]
        assert hits_at_1(records) == 0.5

    def test_empty_prediction_counts_as_wrong(self):
        empty = PredictionRecord(qid=0, ranked=[], gold=frozenset({1}))
        assert hits_at_1([empty, record(1, {1})]) == 0.5

    def test_invariant_under_monotone_rescaling(self):
        # argmax only: probabilities scaled by any monotone map keep hits fixed
        recs = [
            PredictionRecord(qid=0, ranked=[(1, 0.9), (2, 0.1)], gold=frozenset({1})),
            PredictionRecord(qid=1, ranked=[(5, 0.6), (3, 0.4)], gold=frozenset({3})),
        ]
        base = hits_at_1(recs)
        squashed = [
            PredictionRecord(qid=r.qid, ranked=[(e, p**3) for e, p in r.ranked], gold=r.gold) for r in recs
        ]
        assert hits_at_1(squashed) == base


def brute_recall(rankings, oracle, k):
    vals = []
    for ranked, labels in zip(rankings, oracle):
        if not labels:
            continue
        vals.append(1.0 if set(ranked[:k]) & labels else 0.0)
    return sum(vals) / len(vals) if vals else 0.0


def brute_precision(rankings, oracle, k):
    vals = []
    for ranked, labels in zip(rankings, oracle):
        if not labels:
            continue
        vals.append(len(set(ranked[:k]) & labels) / len(labels))
    return sum(vals) / len(vals) if vals else 0.0


class TestRetrievalMetrics:
    def test_oracle_always_first_gives_recall_one(self):
        rankings = [[3, 1, 2], [7, 0]]
        oracle = [frozenset({3}), frozenset({7})]
        assert recall_at_k(rankings, oracle, 1) == 1.0

    def test_huge_k_with_labels_present_gives_one(self):
        rankings = [[1, 2, 3, 4]]
        oracle = [frozenset({4})]
        assert recall_at_k(rankings, oracle, 10**9) == 1.0

    def test_single_label_precision_at_1(self):
        rankings = [[3, 1], [5, 7]]
        oracle = [frozenset({3}), frozenset({7})]
        assert precision_at_k(rankings, oracle, 1) == 0.5

    def test_all_labels_within_k(self):
        rankings = [[1, 2, 3]]
        oracle = [frozenset({2, 3})]
        assert precision_at_k(rankings, oracle, 3) == 1.0

    def test_empty_oracle_excluded(self):
        rankings = [[1], [2]]
        oracle = [frozenset(), frozenset({2})]
        assert recall_at_k(rankings, oracle, 1) == 1.0
        report = retrieval_report(rankings, oracle, ks=(1,))
        assert report.n_excluded == 1
        assert report.n_questions == 1

    @settings(max_examples=80, deadline=None)
    @given(st.data())
    def test_matches_brute_force(self, data):
        n = data.draw(st.integers(1, 8))
        rankings = []
        oracle = []
        for _ in range(n):
            arts = data.draw(st.lists(st.integers(0, 9), max_size=6, unique=True))
            rankings.append(arts)
            oracle.append(frozenset(data.draw(st.sets(st.integers(0, 9), max_size=3))))
        for k in (1, 2, 5):
            assert recall_at_k(rankings, oracle, k) == pytest.approx(brute_recall(rankings, oracle, k))
            assert precision_at_k(rankings, oracle, k) == pytest.approx(brute_precision(rankings, oracle, k))

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_monotone_in_k(self, data):
        n = data.draw(st.integers(1, 6))
        rankings = [data.draw(st.lists(st.integers(0, 9), max_size=8, unique=True)) for _ in range(n)]
        oracle = [frozenset(data.draw(st.sets(st.integers(0, 9), min_size=1, max_size=3))) for _ in range(n)]
        r_prev = p_prev = 0.0
        for k in (1, 2, 3, 5, 8, 50):
            r, p = recall_at_k(rankings, oracle, k), precision_at_k(rankings, oracle, k)
            assert r >= r_prev - 1e-12 and p >= p_prev - 1e-12
            assert 0.0 <= r <= 1.0 and 0.0 <= p <= 1.0
            r_prev, p_prev = r, p


class TestGateRatio:
    def test_all_gates_closed(self):
        records = [record(1, {1}, g=0.0, cat="a"), record(1, {1}, g=0.2, cat="b")]
        assert gate_ratio(records) == {"a": 0.0, "b": 0.0}

    def test_hand_count(self):
        records = [
            record(1, {1}, g=0.9, cat="choice"),
            record(1, {1}, g=0.6, cat="choice"),
            record(1, {1}, g=0.4, cat="choice"),
            record(1, {1}, g=0.1, cat="span"),
            record(1, {1}, g=0.7, cat="span"),
        ]
        ratios = gate_ratio(records)
        assert ratios["choice"] == pytest.approx(2 / 3)
        assert ratios["span"] == pytest.approx(1 / 2)

    def test_missing_category_bucketed_as_unknown(self):
        records = [record(1, {1}, g=0.8, cat=None)]
        assert gate_ratio(records) == {"unknown": 1.0}

    def test_threshold_is_strict(self):
        records = [record(1, {1}, g=0.5, cat="x")]
        assert gate_ratio(records)["x"] == 0.0


class TestReports:
    def test_reader_report_overall_is_weighted_mean(self):
        records = [
            record(1, {1}, g=0.9, cat="a"),
            record(2, {9}, g=0.1, cat="a"),
            record(3, {3}, g=0.2, cat="b"),
        ]
        rep = reader_report(records)
        weighted = sum(row["hits_at_1"] * row["n"] for row in rep.per_category.values())
        assert rep.hits == pytest.approx(weighted / rep.n_questions)

    def test_reader_report_json_schema(self):
        rep = reader_report([record(1, {1}, g=0.9, cat="a")])
        payload = json.loads(rep.to_json())
        assert payload["schema_version"] == 1
        assert payload["kind"] == "reader"
        assert set(payload["per_category"]["a"]) == {"hits_at_1", "gate_open_ratio", "n"}

    def test_retrieval_report_json_and_text(self):
        rankings = [[1, 2], [3]]
        oracle = [frozenset({2}), frozenset({3})]
        rep = retrieval_report(rankings, oracle, ks=(1, 10))
        payload = json.loads(rep.to_json())
        assert payload["recall"]["10"] == 1.0
        assert payload["recall"]["1"] == 0.5
        assert "R@k" in rep.to_text()

    def test_values_in_unit_interval(self):
        rankings = [[0], [1], [2]]
        oracle = [frozenset({0}), frozenset({9}), frozenset({2})]
        rep = retrieval_report(rankings, oracle, ks=(1, 10, 30, 100))
        for k in rep.ks:
            assert 0.0 <= rep.recall[k] <= 1.0
            assert 0.0 <= rep.precision[k] <= 1.0
