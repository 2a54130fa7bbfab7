import json
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from semiroute.centroids import MockEmbedder, build_index
from semiroute.corpus import SentencePair
from semiroute.errors import ConfigurationError, ValidationError
from semiroute.evaluation import (
    MODE_BY_CORPUS,
    MODE_CENTROID_ROUTED,
    MODE_CLASSIFIER_LABELED,
    corpus_bleu,
    render_report,
    report_from_dict,
    report_to_dict,
    stratified_eval,
    tokenize_eval,
)
from semiroute.labeler import LabeledPair


# ---------------------------------------------------------------------------
# Independent brute-force BLEU oracle. Plain dict loops and exact Fractions,
# no code shared with the implementation under test. Inputs are built from
# alphanumeric tokens joined by single spaces so that plain str.split() is
# the correct tokenization.
# ---------------------------------------------------------------------------


def _oracle_ngram_table(tokens, n):
    table = {}
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        table[gram] = table.get(gram, 0) + 1
    return table


def oracle_bleu(hyp_sentences, ref_sentences, smoothing=False):
    match = {n: 0 for n in range(1, 5)}
    total = {n: 0 for n in range(1, 5)}
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyp_sentences, ref_sentences):
        hyp_tokens = hyp.split()
        ref_tokens = ref.split()
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, 5):
            hyp_table = _oracle_ngram_table(hyp_tokens, n)
            ref_table = _oracle_ngram_table(ref_tokens, n)
            for gram, count in hyp_table.items():
                total[n] += count
                match[n] += min(count, ref_table.get(gram, 0))
    # Only orders that actually occur in the hypotheses count (a corpus of
    # two-token sentences has no 3-grams to be wrong about).
    precisions = []
    for n in range(1, 5):
        if total[n] == 0:
            continue
        if smoothing:
            precisions.append(Fraction(match[n] + 1, total[n] + 1))
        else:
            precisions.append(Fraction(match[n], total[n]))
    if hyp_len == 0 or not precisions:
        return 0.0
    if hyp_len < ref_len:
        bp = math.exp(1.0 - ref_len / hyp_len)
    else:
        bp = 1.0
    if any(p == 0 for p in precisions):
        return 0.0
    product = float(math.prod(precisions))
    return bp * (product ** (1.0 / len(precisions))) * 100.0


def random_corpus(rng, max_sentences=10, max_tokens=12, vocab_size=8):
    vocab = [f"w{i}" for i in range(vocab_size)]
    n = rng.randint(1, max_sentences)
    hyps, refs = [], []
    for _ in range(n):
        hyps.append(" ".join(rng.choice(vocab) for _ in range(rng.randint(1, max_tokens))))
        refs.append(" ".join(rng.choice(vocab) for _ in range(rng.randint(1, max_tokens))))
    return hyps, refs


class TestTokenizer:
    def test_punctuation_separated(self):
        assert tokenize_eval("Hello, world!") == ["Hello", ",", "world", "!"]

    def test_digit_internal_period_kept(self):
        assert tokenize_eval("3.14") == ["3.14"]

    def test_brackets(self):
        assert tokenize_eval("a(b)c") == ["a", "(", "b", ")", "c"]

    def test_case_preserved(self):
        assert tokenize_eval("Hello World") == ["Hello", "World"]

    def test_decimal_comma(self):
        assert tokenize_eval("1,5 kg") == ["1,5", "kg"]

    def test_period_at_number_end_split(self):
        assert tokenize_eval("It cost 3.") == ["It", "cost", "3", "."]

    def test_hyphenated_word_split(self):
        assert tokenize_eval("well-known") == ["well", "-", "known"]


class TestCorpusBleu:
    def test_identity_is_exactly_100(self):
        refs = ["the cat sat on the mat", "a quick brown fox jumps over it"]
        result = corpus_bleu(refs, refs)
        assert result.score == 100.0
        assert result.precisions == (1.0, 1.0, 1.0, 1.0)
        assert result.brevity_penalty == 1.0

    def test_disjoint_is_exactly_zero(self):
        result = corpus_bleu(["aa bb cc dd"], ["xx yy zz ww"])
        assert result.score == 0.0

    def test_clipped_unigram_example(self):
        # Classic clipping case: every hypothesis token is "the" but the
        # reference contains it only twice.
        result = corpus_bleu(
            ["the the the the the the the"], ["the cat is on the mat"]
        )
        assert result.precisions[0] == pytest.approx(2 / 7)
        assert result.score == 0.0  # no bigram match, unsmoothed
        assert result.hyp_len == 7
        assert result.ref_len == 6

    def test_clipped_example_smoothed_matches_oracle(self):
        hyp = ["the the the the the the the"]
        ref = ["the cat is on the mat"]
        result = corpus_bleu(hyp, ref, smoothing=True)
        assert result.score == pytest.approx(oracle_bleu(hyp, ref, smoothing=True), abs=1e-9)

    def test_brevity_penalty_applied_when_short(self):
        # hyp 2 tokens, ref 4 tokens: bp = exp(1 - 4/2) = exp(-1)
        result = corpus_bleu(["a b"], ["a b c d"], smoothing=True)
        assert result.brevity_penalty == pytest.approx(math.exp(-1.0))

    def test_brevity_penalty_one_when_long_enough(self):
        result = corpus_bleu(["a b c d e"], ["a b c d"])
        assert result.brevity_penalty == 1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            corpus_bleu(["a"], ["a", "b"])

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValidationError):
            corpus_bleu([], [])

    def test_matches_oracle_on_randomized_corpora(self):
        rng = random.Random(20240811)
        for _ in range(100):
            hyps, refs = random_corpus(rng)
            for smoothing in (False, True):
                expected = oracle_bleu(hyps, refs, smoothing=smoothing)
                actual = corpus_bleu(hyps, refs, smoothing=smoothing).score
                assert actual == pytest.approx(expected, abs=1e-9)

    def test_order_permutation_invariant(self):
        rng = random.Random(7)
        hyps, refs = random_corpus(rng, max_sentences=8)
        baseline = corpus_bleu(hyps, refs, smoothing=True).score
        indices = list(range(len(hyps)))
        for _ in range(5):
            rng.shuffle(indices)
            shuffled = corpus_bleu(
                [hyps[i] for i in indices], [refs[i] for i in indices], smoothing=True
            ).score
            assert shuffled == pytest.approx(baseline, abs=1e-12)

    @given(st.lists(st.from_regex(r"[a-z]{1,6}( [a-z]{1,6}){0,9}", fullmatch=True), min_size=1, max_size=6))
    @settings(max_examples=50, deadline=None)
    def test_self_bleu_is_100(self, sentences):
        assert corpus_bleu(sentences, sentences).score == 100.0


def _labeled(src, tgt, domain, origin="synth", line_no=1):
    return LabeledPair(
        pair=SentencePair(src, tgt, origin, line_no),
        domain=domain,
        confidence=1.0,
        regime="four_domain",
    )


class TestStratifiedEval:
    def test_single_domain(self):
        pairs = [_labeled(f"s {i}", f"t {i}", "legal", line_no=i + 1) for i in range(3)]
        report = stratified_eval(pairs, [p.pair.target_text for p in pairs], MODE_CLASSIFIER_LABELED)
        assert set(report.per_domain) == {"legal"}
        assert report.per_domain["legal"].bleu.score == 100.0
        assert report.per_domain["legal"].pair_count == 3

    def test_four_domains_identity_all_100(self):
        pairs = []
        for d in ("general", "legal", "medical", "wiki_news"):
            pairs += [
                _labeled(f"{d} src {i}", f"{d} tgt word {i}", d, line_no=i + 1) for i in range(4)
            ]
        report = stratified_eval(pairs, [p.pair.target_text for p in pairs], MODE_CLASSIFIER_LABELED)
        assert len(report.per_domain) == 4
        assert all(r.bleu.score == 100.0 for r in report.per_domain.values())
        assert sum(r.pair_count for r in report.per_domain.values()) == len(pairs)

    def test_shuffled_domain_scores_below_others(self):
        domains = ("general", "legal", "medical", "wiki_news")
        pairs = []
        for d in domains:
            pairs += [
                _labeled(
                    f"{d} source {i}",
                    f"{d} reference sentence number {i} with several words",
                    d,
                    line_no=i + 1,
                )
                for i in range(6)
            ]
        hypotheses = []
        for p in pairs:
            if p.domain == "medical":
                # rotate references within the domain so nothing lines up
                i = p.pair.line_no % 6
                hypotheses.append(f"medical reference sentence number {i} with several words")
            else:
                hypotheses.append(p.pair.target_text)
        report = stratified_eval(pairs, hypotheses, MODE_CLASSIFIER_LABELED)
        medical = report.per_domain["medical"].bleu.score
        for d in domains:
            if d != "medical":
                assert medical < report.per_domain[d].bleu.score

    def test_missing_hypotheses_reported_and_excluded(self):
        pairs = [_labeled(f"s {i}", f"t {i}", "legal", line_no=i + 1) for i in range(4)]
        hypotheses = [pairs[0].pair.target_text, None, pairs[2].pair.target_text, None]
        report = stratified_eval(pairs, hypotheses, MODE_CLASSIFIER_LABELED)
        result = report.per_domain["legal"]
        assert result.pair_count == 4
        assert result.missing == 2
        assert result.bleu.score == 100.0

    def test_all_missing_gives_absent_score(self):
        pairs = [_labeled("s", "t", "legal")]
        report = stratified_eval(pairs, [None], MODE_CLASSIFIER_LABELED)
        assert report.per_domain["legal"].bleu is None
        assert report.per_domain["legal"].missing == 1

    def test_by_corpus_mode(self):
        pairs = [
            _labeled("s1", "t1", "x", origin="LoResMT"),
            _labeled("s2", "t2", "x", origin="Focloir"),
        ]
        report = stratified_eval(
            pairs,
            ["t1", "t2"],
            MODE_BY_CORPUS,
            corpus_domain_map={"LoResMT": "medical", "Focloir": "general"},
        )
        assert set(report.per_domain) == {"medical", "general"}

    def test_by_corpus_unmapped_origin_rejected(self):
        pairs = [_labeled("s", "t", "x", origin="mystery")]
        with pytest.raises(ConfigurationError) as err:
            stratified_eval(pairs, ["t"], MODE_BY_CORPUS, corpus_domain_map={})
        assert "mystery" in str(err.value)

    def test_centroid_routed_mode(self):
        train = [
            _labeled("alpha beta gamma", "x", "greek", line_no=1),
            _labeled("un deux trois", "y", "french", line_no=2),
        ]
        embedder = MockEmbedder(dim=32, seed=3)
        index = build_index(train, embedder)
        pairs = [
            _labeled("alpha gamma", "ref greek", "whatever", line_no=1),
            _labeled("deux trois", "ref french", "whatever", line_no=2),
        ]
        report = stratified_eval(
            pairs,
            ["ref greek", "ref french"],
            MODE_CENTROID_ROUTED,
            index=index,
            embedder=embedder,
        )
        assert set(report.per_domain) == {"greek", "french"}
        assert report.routing_mode == MODE_CENTROID_ROUTED

    def test_centroid_routed_requires_index(self):
        with pytest.raises(ConfigurationError):
            stratified_eval([_labeled("s", "t", "d")], ["t"], MODE_CENTROID_ROUTED)

    def test_hypothesis_count_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            stratified_eval([_labeled("s", "t", "d")], [], MODE_CLASSIFIER_LABELED)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValidationError):
            stratified_eval([_labeled("s", "t", "d")], ["t"], "nonsense")


class TestRenderReport:
    def _example_report(self):
        pairs = [_labeled(f"s {i}", f"t {i}", "legal", line_no=i + 1) for i in range(2)]
        pairs += [_labeled(f"u {i}", f"v {i}", "medical", line_no=i + 1) for i in range(2)]
        return stratified_eval(
            pairs,
            [p.pair.target_text for p in pairs],
            MODE_CLASSIFIER_LABELED,
            config_id="cfg-a",
        )

    def test_json_round_trip(self):
        report = self._example_report()
        parsed = report_from_dict(json.loads(render_report(report, "json")))
        assert parsed == report

    def test_dict_round_trip(self):
        report = self._example_report()
        assert report_from_dict(report_to_dict(report)) == report

    def test_markdown_marks_best_per_column(self):
        report = self._example_report()
        # second configuration scores lower on legal
        low = stratified_eval(
            [_labeled("s 0", "t 0", "legal")],
            ["totally different words"],
            MODE_CLASSIFIER_LABELED,
            config_id="cfg-b",
            smoothing=True,
        )
        table = render_report([report, low], "markdown_table")
        lines = table.splitlines()
        assert lines[0] == "| Configuration | legal | medical |"
        assert "**100.00**" in lines[2]  # cfg-a best on legal
        assert "**" not in lines[3].split("|")[2] or "100.00" in lines[3]

    def test_single_report_marks_own_cells(self):
        table = render_report(self._example_report(), "markdown_table")
        assert "**100.00**" in table

    def test_empty_report_is_header_only(self):
        report = stratified_eval(
            [_labeled("s", "t", "legal")], [None], MODE_CLASSIFIER_LABELED
        )
        # one domain but no score: renders a dash
        table = render_report(report, "markdown_table")
        assert "| - |" in table.splitlines()[2]

    def test_unknown_format_rejected(self):
        with pytest.raises(ValidationError):
            render_report(self._example_report(), "csv")
