"""Word-confidence model: counts, scores, vocabulary, persistence."""

from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from earlyrisk.corpus import Label, LabeledSample
from earlyrisk.wordconf import (
    WordConfModel,
    confidence,
    extract_vocabulary,
    fit,
    load_model,
    save_model,
    score_text,
    sigmoid,
    validation_f1_positive,
)


def sample(text: str, label: Label) -> LabeledSample:
    return LabeledSample(text, label, "u", -1)


def small_model() -> WordConfModel:
    # pos: a=2, b=1 (total 3); neg: b=3 (total 3); V=2, smoothing 1
    return WordConfModel({"a": 2, "b": 1}, {"b": 3}, smoothing=1.0)


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid(0.0) == 0.5

    def test_symmetry(self):
        for x in (0.3, 1.7, 9.0):
            assert sigmoid(x) + sigmoid(-x) == pytest.approx(1.0, abs=1e-15)

    def test_extreme_inputs_do_not_overflow(self):
        assert sigmoid(1000.0) == 1.0
        assert sigmoid(-1000.0) == pytest.approx(0.0, abs=1e-300)

    @given(st.floats(min_value=-700, max_value=700))
    def test_range_and_monotone_regions(self, x):
        y = sigmoid(x)
        assert 0.0 <= y <= 1.0
        # weak inequalities: tiny |x| rounds to exactly 0.5
        if x >= 0:
            assert y >= 0.5
        if x <= 0:
            assert y <= 0.5


class TestFit:
    def test_counts_whitespace_tokens_per_class(self):
        samples = [
            sample("ayuno ayuno", Label.POSITIVE),
            sample("fiesta", Label.NEGATIVE),
        ]
        model = fit(samples)
        assert model.positive_counts == {"ayuno": 2}
        assert model.negative_counts == {"fiesta": 1}
        assert model.positive_total == 2
        assert model.negative_total == 1
        assert model.vocabulary == ["ayuno", "fiesta"]

    def test_accumulates_across_samples(self):
        samples = [
            sample("a b", Label.POSITIVE),
            sample("b c", Label.POSITIVE),
            sample("c", Label.NEGATIVE),
        ]
        model = fit(samples)
        assert model.positive_counts == {"a": 1, "b": 2, "c": 1}
        assert model.negative_counts == {"c": 1}

    def test_unknown_label_samples_are_rejected(self):
        samples = [sample("a", Label.POSITIVE), sample("b", Label.UNKNOWN)]
        with pytest.raises(ValueError):
            fit(samples)

    def test_needs_tokens_in_both_classes(self):
        with pytest.raises(ValueError, match="class"):
            fit([sample("solo positivo", Label.POSITIVE)])

    def test_custom_smoothing_is_kept(self):
        model = fit([sample("a", Label.POSITIVE), sample("b", Label.NEGATIVE)], smoothing=0.25)
        assert model.smoothing == 0.25

    def test_rejects_nonpositive_smoothing(self):
        samples = [sample("a", Label.POSITIVE), sample("b", Label.NEGATIVE)]
        for s in (0.0, -1.0):
            with pytest.raises(ValueError):
                fit(samples, smoothing=s)


class TestConfidence:
    def test_hand_computed_values(self):
        model = small_model()
        # confidence(a) = sigmoid(log(3/5) - log(1/5)) = sigmoid(log 3) = 3/4
        assert confidence(model, "a") == pytest.approx(0.75, abs=1e-12)
        # confidence(b) = sigmoid(log(2/5) - log(4/5)) = sigmoid(log 1/2) = 1/3
        assert confidence(model, "b") == pytest.approx(1 / 3, abs=1e-12)

    def test_unseen_token_with_balanced_totals_is_half(self):
        model = WordConfModel({"x": 2}, {"y": 2}, smoothing=1.0)
        assert confidence(model, "zzz") == 0.5

    def test_unseen_token_with_unbalanced_totals_is_not_half(self):
        model = small_model()
        # totals are equal here (3 vs 3), so build an unbalanced one
        unbalanced = WordConfModel({"x": 5}, {"y": 1}, smoothing=1.0)
        assert confidence(unbalanced, "zzz") != 0.5
        assert confidence(model, "zzz") == 0.5

    @given(
        pos=st.dictionaries(st.sampled_from("abcdef"), st.integers(0, 9), min_size=1),
        neg=st.dictionaries(st.sampled_from("defghi"), st.integers(0, 9), min_size=1),
        smoothing=st.floats(min_value=0.1, max_value=5.0),
    )
    @settings(max_examples=150, deadline=None)
    def test_confidence_is_a_probability(self, pos, neg, smoothing):
        model = WordConfModel(pos, neg, smoothing)
        for token in model.vocabulary + ["unseen"]:
            assert 0.0 < confidence(model, token) < 1.0

    def test_swapping_classes_flips_confidence(self):
        model = small_model()
        flipped = WordConfModel(dict(model.negative_counts), dict(model.positive_counts), model.smoothing)
        for token in model.vocabulary:
            assert confidence(model, token) + confidence(flipped, token) == pytest.approx(1.0, abs=1e-12)


class TestScoreText:
    def test_empty_text_is_half(self):
        assert score_text(small_model(), "") == 0.5
        assert score_text(small_model(), "   ") == 0.5

    def test_single_token_matches_confidence_bit_for_bit(self):
        model = small_model()
        for token in ("a", "b", "nunca_visto"):
            assert score_text(model, token) == confidence(model, token)

    def test_mean_log_odds(self):
        model = small_model()
        expected = sigmoid((math.log(3.0) + math.log(0.5)) / 2)
        assert score_text(model, "a b") == pytest.approx(expected, abs=1e-15)

    def test_repeated_token_same_as_single(self):
        model = small_model()
        assert score_text(model, "a a a") == pytest.approx(confidence(model, "a"), abs=1e-15)

    def test_order_invariant(self):
        model = small_model()
        assert score_text(model, "a b a") == pytest.approx(score_text(model, "a a b"), abs=1e-15)


class TestVocabulary:
    def test_sorted_by_confidence_then_token(self):
        model = WordConfModel({"alto": 9, "medio": 3, "bajo": 1}, {"bajo": 9, "medio": 3, "alto": 1}, 1.0)
        scores = extract_vocabulary(model, k=3)
        assert [s.token for s in scores] == ["alto", "medio", "bajo"]
        assert scores[0].confidence > scores[1].confidence > scores[2].confidence

    def test_ties_break_alphabetically(self):
        model = WordConfModel({"beta": 2, "alfa": 2}, {"beta": 1, "alfa": 1}, 1.0)
        scores = extract_vocabulary(model, k=2)
        assert [s.token for s in scores] == ["alfa", "beta"]
        assert scores[0].confidence == scores[1].confidence

    def test_k_bounds(self):
        model = small_model()
        with pytest.raises(ValueError):
            extract_vocabulary(model, k=0)
        with pytest.raises(ValueError):
            extract_vocabulary(model, k=3)
        assert len(extract_vocabulary(model, k=2)) == 2

    def test_prefix_consistency(self):
        model = WordConfModel(
            {f"w{i}": i + 1 for i in range(12)},
            {f"w{i}": 13 - i for i in range(12)},
            1.0,
        )
        full = extract_vocabulary(model, k=12)
        for k in range(1, 12):
            assert extract_vocabulary(model, k=k) == full[:k]


class TestValidationF1:
    def test_perfectly_separable(self):
        model = WordConfModel({"malo": 5}, {"bueno": 5}, 1.0)
        samples = [sample("malo malo", Label.POSITIVE), sample("bueno", Label.NEGATIVE)]
        assert validation_f1_positive(model, samples) == 1.0

    def test_none_for_empty(self):
        assert validation_f1_positive(small_model(), []) is None

    def test_all_misses_scores_zero(self):
        model = WordConfModel({"malo": 5}, {"bueno": 5}, 1.0)
        samples = [sample("bueno", Label.POSITIVE)]
        assert validation_f1_positive(model, samples) == 0.0


class TestPersistence:
    def test_round_trip(self, tmp_path):
        model = small_model()
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.positive_counts == model.positive_counts
        assert loaded.negative_counts == model.negative_counts
        assert loaded.smoothing == model.smoothing
        for token in model.vocabulary + ["otro"]:
            assert confidence(loaded, token) == confidence(model, token)

    def test_file_format_is_stable(self, tmp_path):
        path = tmp_path / "model.json"
        save_model(small_model(), path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert set(payload) == {"smoothing", "classes"}
        assert set(payload["classes"]) == {"pos", "neg"}
        assert payload["classes"]["pos"] == {"a": 2, "b": 1}

    def test_load_rejects_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="not found"):
            load_model(tmp_path / "nope.json")

    def test_load_rejects_bad_json(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ValueError):
            load_model(path)

    def test_load_rejects_missing_class(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"smoothing": 1.0, "classes": {"pos": {"a": 1}}}), encoding="utf-8")
        with pytest.raises(ValueError):
            load_model(path)

    def test_load_rejects_negative_count(self, tmp_path):
        path = tmp_path / "model.json"
        payload = {"smoothing": 1.0, "classes": {"pos": {"a": -1}, "neg": {"b": 1}}}
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(ValueError):
            load_model(path)


class TestModelValidation:
    def test_rejects_float_counts(self):
        with pytest.raises(ValueError):
            WordConfModel({"a": 1.5}, {"b": 1}, 1.0)

    def test_rejects_bool_counts(self):
        with pytest.raises(ValueError):
            WordConfModel({"a": True}, {"b": 1}, 1.0)

    def test_rejects_empty_vocabulary(self):
        with pytest.raises(ValueError):
            WordConfModel({}, {}, 1.0)
