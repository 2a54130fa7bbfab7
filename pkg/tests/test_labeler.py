import collections
import random

import pytest
from hypothesis import given, settings, strategies as st

from semiroute.corpus import SentencePair
from semiroute.errors import ConfigurationError, ValidationError
from semiroute.labeler import (
    DEFAULT_DOMAINS,
    REGIME_BY_CORPUS,
    REGIME_FOUR_DOMAIN,
    REGIME_THRESHOLD_FALLBACK,
    Classification,
    ClassifierClient,
    KeywordClassifier,
    LabelerConfig,
    label_by_corpus,
    label_regime_a,
    label_regime_b,
    partition_by_domain,
    read_labeled,
    write_labeled,
)


def make_pair(src, origin="test", line_no=1):
    return SentencePair(src, f"aistriúchán ar {src}", origin, line_no)


class ScriptedClassifier(ClassifierClient):
    """Returns a fixed score row per call, independent of the text."""

    def __init__(self, rows):
        self._rows = list(rows)
        self._cursor = 0

    def classify_batch(self, texts, labels, multi_label=True):
        out = []
        for _ in texts:
            row = self._rows[self._cursor]
            self._cursor += 1
            out.append(Classification(scores={l: row[l] for l in labels}))
        return out


class FailingClassifier(ClassifierClient):
    def classify_batch(self, texts, labels, multi_label=True):
        raise RuntimeError("classifier exploded")


class TestKeywordClassifier:
    def test_single_keyword_match(self):
        classifier = KeywordClassifier({"legal": ["court"]})
        scores = classifier.classify("the court ruled", ["legal", "medical"]).scores
        assert scores == {"legal": 1.0, "medical": 0.0}

    def test_matched_fraction(self):
        classifier = KeywordClassifier({"legal": ["court", "judge"]})
        assert classifier.classify("the court ruled", ["legal"]).scores["legal"] == 0.5

    def test_case_insensitive_and_punctuation_stripped(self):
        classifier = KeywordClassifier({"legal": ["court"]})
        assert classifier.classify("The Court!", ["legal"]).scores["legal"] == 1.0

    def test_label_without_keywords_scores_zero(self):
        classifier = KeywordClassifier({})
        assert classifier.classify("anything", ["legal"]).scores["legal"] == 0.0

    def test_deterministic(self):
        classifier = KeywordClassifier({"legal": ["court", "law"]})
        a = classifier.classify("court of law", ["legal"]).scores
        b = classifier.classify("court of law", ["legal"]).scores
        assert a == b

    def test_empty_label_set_rejected(self):
        classifier = KeywordClassifier({})
        with pytest.raises(ValidationError):
            classifier.classify("text", [])


class TestRegimeA:
    def test_argmax(self):
        classifier = ScriptedClassifier(
            [{"general": 0.7, "legal": 0.2, "medical": 0.05, "wiki_news": 0.05}]
        )
        result = label_regime_a([make_pair("x")], DEFAULT_DOMAINS, classifier)
        item = result.labeled[0]
        assert item.domain == "general"
        assert item.confidence == 0.7
        assert item.regime == REGIME_FOUR_DOMAIN

    def test_tie_breaks_to_configured_order(self):
        classifier = ScriptedClassifier(
            [{"general": 0.0, "legal": 0.5, "medical": 0.5, "wiki_news": 0.0}]
        )
        result = label_regime_a([make_pair("x")], DEFAULT_DOMAINS, classifier)
        assert result.labeled[0].domain == "legal"

    def test_keyword_mock_end_to_end(self):
        classifier = KeywordClassifier({"legal": ["court"]})
        result = label_regime_a([make_pair("the court ruled")], DEFAULT_DOMAINS, classifier)
        assert result.labeled[0].domain == "legal"
        assert result.labeled[0].confidence == 1.0

    def test_classifier_failure_recorded_and_pipeline_continues(self):
        pairs = [make_pair(f"s{i}", line_no=i + 1) for i in range(3)]
        result = label_regime_a(pairs, DEFAULT_DOMAINS, FailingClassifier())
        assert result.labeled == ()
        assert len(result.failures) == 3
        assert "exploded" in result.failures[0].error

    def test_empty_domains_rejected(self):
        with pytest.raises(ValidationError):
            label_regime_a([make_pair("x")], [], KeywordClassifier({}))

    def test_label_maximizes_score_property(self):
        rng = random.Random(5)
        rows = [
            {d: rng.random() for d in DEFAULT_DOMAINS}
            for _ in range(200)
        ]
        classifier = ScriptedClassifier(rows)
        pairs = [make_pair(f"s{i}", line_no=i + 1) for i in range(200)]
        result = label_regime_a(pairs, DEFAULT_DOMAINS, classifier)
        for item, row in zip(result.labeled, rows):
            assert row[item.domain] == max(row.values())


CANDIDATES = ("legal", "medical", "wiki_news")


class TestRegimeB:
    def _config(self, threshold=0.45):
        return LabelerConfig(
            threshold=threshold, fallback_domain="general", candidate_domains=CANDIDATES
        )

    def test_above_threshold_takes_argmax(self):
        classifier = ScriptedClassifier([{"legal": 0.50, "medical": 0.30, "wiki_news": 0.10}])
        result = label_regime_b([make_pair("x")], self._config(), classifier)
        item = result.labeled[0]
        assert item.domain == "legal"
        assert item.confidence == 0.50
        assert item.regime == REGIME_THRESHOLD_FALLBACK

    def test_none_above_threshold_falls_back(self):
        classifier = ScriptedClassifier([{"legal": 0.44, "medical": 0.44, "wiki_news": 0.44}])
        result = label_regime_b([make_pair("x")], self._config(), classifier)
        item = result.labeled[0]
        assert item.domain == "general"
        assert item.confidence == pytest.approx(1.0 - 0.44)

    def test_exactly_at_threshold_falls_back(self):
        # "exceeds" is read strictly: 0.45 is not above 0.45.
        classifier = ScriptedClassifier([{"legal": 0.45, "medical": 0.1, "wiki_news": 0.1}])
        result = label_regime_b([make_pair("x")], self._config(), classifier)
        assert result.labeled[0].domain == "general"
        assert result.labeled[0].confidence == pytest.approx(0.55)

    def test_fallback_inside_candidates_rejected(self):
        config = LabelerConfig(
            threshold=0.45, fallback_domain="legal", candidate_domains=CANDIDATES
        )
        with pytest.raises(ConfigurationError):
            label_regime_b([make_pair("x")], config, KeywordClassifier({}))

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValidationError):
            LabelerConfig(threshold=1.5)

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=1),
                st.floats(min_value=0, max_value=1),
                st.floats(min_value=0, max_value=1),
            ),
            min_size=1,
            max_size=50,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_threshold_law(self, rows):
        score_rows = [dict(zip(CANDIDATES, row)) for row in rows]
        classifier = ScriptedClassifier(score_rows)
        pairs = [make_pair(f"s{i}", line_no=i + 1) for i in range(len(rows))]
        result = label_regime_b(pairs, self._config(), classifier)
        for item, row in zip(result.labeled, score_rows):
            is_fallback = item.domain == "general"
            assert is_fallback == (max(row.values()) <= 0.45)


class TestLabelByCorpus:
    def test_origin_mapping(self):
        pairs = [make_pair("s1", origin="LoResMT"), make_pair("s2", origin="Focloir")]
        result = label_by_corpus(pairs, {"LoResMT": "medical", "Focloir": "general"})
        assert [i.domain for i in result.labeled] == ["medical", "general"]
        assert all(i.confidence == 1.0 for i in result.labeled)
        assert all(i.regime == REGIME_BY_CORPUS for i in result.labeled)

    def test_unmapped_origin_rejected_by_name(self):
        with pytest.raises(ConfigurationError) as err:
            label_by_corpus([make_pair("s", origin="X")], {"Y": "general"})
        assert "X" in str(err.value)


class TestPartition:
    def _label(self, pair, domain):
        from semiroute.labeler import LabeledPair

        return LabeledPair(pair=pair, domain=domain, confidence=1.0, regime=REGIME_BY_CORPUS)

    def test_small_partition(self):
        items = [
            self._label(make_pair("a", line_no=1), "general"),
            self._label(make_pair("b", line_no=2), "general"),
            self._label(make_pair("c", line_no=3), "legal"),
        ]
        buckets = partition_by_domain(items)
        assert len(buckets["general"]) == 2
        assert len(buckets["legal"]) == 1

    def test_empty_input(self):
        assert partition_by_domain([]) == {}

    def test_thousand_pairs_match_independent_histogram(self):
        rng = random.Random(99)
        labels = [rng.choice(DEFAULT_DOMAINS) for _ in range(1000)]
        items = [
            self._label(make_pair(f"s{i}", line_no=i + 1), label)
            for i, label in enumerate(labels)
        ]
        buckets = partition_by_domain(items)
        histogram = collections.Counter(labels)
        assert {d: len(c) for d, c in buckets.items()} == dict(histogram)
        assert sum(len(c) for c in buckets.values()) == 1000


class TestLabeledSerialization:
    def test_round_trip(self, tmp_path):
        classifier = KeywordClassifier({"legal": ["court"]})
        result = label_regime_a(
            [make_pair("the court ruled", line_no=3)], DEFAULT_DOMAINS, classifier
        )
        path = tmp_path / "labeled.jsonl"
        write_labeled(result.labeled, path)
        loaded = read_labeled(path)
        assert tuple(loaded) == result.labeled
