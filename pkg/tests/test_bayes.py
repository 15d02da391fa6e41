import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fundusgate.bayes import (
    VARIANCE_FLOOR,
    ClassLabel,
    ModelFormatError,
    NaiveBayesModel,
    TrainingError,
    TrainingSet,
    joint_log_scores,
    load_model,
    posteriors,
    predict,
    predict_many,
    save_model,
    train,
)
from fundusgate.features import FeatureKind, FeatureMode, FeatureSpec

from oracles import bayes_posterior_direct

A, P = ClassLabel.ABNORMAL, ClassLabel.PROCESS_FURTHER
C, B = FeatureKind.CONTINUOUS, FeatureKind.BINARY


def random_model(rng: np.random.Generator, n_cont: int, n_bin: int) -> NaiveBayesModel:
    kinds = [C] * n_cont + [B] * n_bin
    rng.shuffle(kinds)
    p0 = rng.uniform(0.05, 0.95)
    return NaiveBayesModel(
        priors=np.array([p0, 1 - p0]),
        means=rng.uniform(-5, 5, (2, n_cont)),
        variances=rng.uniform(0.3, 4.0, (2, n_cont)),
        bernoulli=rng.uniform(0.05, 0.95, (2, n_bin)),
        kinds=tuple(kinds),
    )


def test_laplace_smoothing_by_hand():
    data = TrainingSet(np.array([[1.0], [0.0]]), [A, P], [B])
    m = train(data)
    assert m.bernoulli[0, 0] == pytest.approx(2 / 3)
    assert m.bernoulli[1, 0] == pytest.approx(1 / 3)


def test_variance_floor_engages():
    data = TrainingSet(np.array([[3.0], [3.0], [1.0], [2.0]]), [A, A, P, P], [C])
    m = train(data)
    assert m.variances[0, 0] == VARIANCE_FLOOR
    assert m.variances[1, 0] == pytest.approx(0.25)


def test_balanced_priors():
    X = np.random.default_rng(0).normal(size=(20, 3))
    m = train(TrainingSet(X, [A] * 10 + [P] * 10, [C] * 3))
    assert m.priors.tolist() == [0.5, 0.5]


def test_single_class_is_an_error():
    with pytest.raises(TrainingError):
        train(TrainingSet(np.zeros((3, 1)), [A] * 3, [C]))


def test_one_row_per_class_self_classifies():
    X = np.array([[1.0, 0.0, 5.0], [0.0, 1.0, 9.0]])
    m = train(TrainingSet(X, [A, P], [B, B, C]))
    for row, lbl in zip(X, (A, P)):
        pred = predict(m, row)
        assert pred.label is lbl and pred.posterior > 0.5


def test_symmetric_gaussian_tie_goes_to_abnormal():
    m = NaiveBayesModel(
        priors=np.array([0.5, 0.5]),
        means=np.array([[0.0], [10.0]]),
        variances=np.array([[1.0], [1.0]]),
        bernoulli=np.zeros((2, 0)),
        kinds=(C,),
    )
    pred = predict(m, np.array([5.0]))
    assert pred.posterior == 0.5
    assert pred.label is A
    assert predict(m, np.array([5.5])).label is P


def test_posteriors_match_direct_oracle_small():
    rng = np.random.default_rng(12)
    for _ in range(200):
        m = random_model(rng, rng.integers(0, 4), rng.integers(0, 4))
        v = rng.uniform(-3, 3, len(m.kinds))
        v[[k is B for k in m.kinds]] = rng.integers(0, 2, sum(k is B for k in m.kinds))
        got = posteriors(m, v[None, :])[0]
        want = bayes_posterior_direct(
            m.priors, m.means, m.variances, m.bernoulli, [k.value for k in m.kinds], v
        )
        assert abs(got[0] - want[0]) <= 1e-12 and abs(got[1] - want[1]) <= 1e-12
        assert abs(got.sum() - 1) <= 1e-12


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(-50, 50))
def test_shifting_scores_keeps_decision(seed, shift):
    rng = np.random.default_rng(seed)
    m = random_model(rng, 3, 2)
    X = rng.uniform(-3, 3, (5, 5))
    base = joint_log_scores(m, X)
    # adding a constant to both class scores is multiplying both probabilities
    moved = base + shift
    e = np.exp(moved - moved.max(axis=1, keepdims=True))
    np.testing.assert_allclose(e / e.sum(axis=1, keepdims=True), posteriors(m, X), atol=1e-12)
    assert np.array_equal(np.argmax(moved, axis=1), np.argmax(base, axis=1))


def test_no_nan_on_feature_ranges():
    rng = np.random.default_rng(3)
    X = np.column_stack([rng.uniform(0, 128, 30), rng.integers(0, 2, 30), np.full(30, 4.0)])
    m = train(TrainingSet(X, [A] * 15 + [P] * 15, [C, B, C]))
    probe = np.column_stack([rng.uniform(0, 255, 100), rng.integers(0, 2, 100), rng.uniform(0, 255, 100)])
    post = posteriors(m, probe)
    assert np.isfinite(post).all()
    assert np.isfinite(joint_log_scores(m, probe)).all()


def test_length_mismatch():
    m = train(TrainingSet(np.eye(2), [A, P], [C, C]))
    with pytest.raises(ValueError):
        predict(m, np.zeros(3))


def test_projection_of_full_vectors():
    spec = FeatureSpec(FeatureMode.COMBINED)
    X = np.random.default_rng(4).uniform(0, 50, (6, 8))
    X[:, 1::2] = X[:, 1::2] > 25
    data = TrainingSet(X, [A, P] * 3, spec.kinds(4))
    sub = train(data.subset_columns(spec.columns([1, 3])), spec, (1, 3), 4)
    assert [p for p in predict_many(sub, X)] == [p for p in predict_many(sub, X[:, spec.columns([1, 3])])]


# -------------------------------------------------------------- model file


def _trained():
    spec = FeatureSpec(FeatureMode.COMBINED, 5, 10)
    rng = np.random.default_rng(7)
    X = rng.uniform(0, 60, (12, 8))
    X[:, 1::2] = (X[:, 1::2] > 30).astype(float)
    return train(TrainingSet(X, [A] * 5 + [P] * 7, spec.kinds(4)), spec, None, 4)


def test_model_round_trip_is_exact():
    m = _trained()
    data = save_model(m)
    assert data.startswith(b"FUNDUSGATE-NB v1\n")
    back = load_model(data)
    for name in ("priors", "means", "variances", "bernoulli"):
        assert np.array_equal(getattr(back, name), getattr(m, name))
    assert back.kinds == m.kinds and back.spec == m.spec and back.subset == m.subset
    assert save_model(back) == data


def test_loaded_model_predicts_identically():
    m = _trained()
    back = load_model(save_model(m))
    X = np.random.default_rng(1).uniform(0, 60, (100, 8))
    X[:, 1::2] = X[:, 1::2] > 30
    for a, b in zip(predict_many(m, X), predict_many(back, X)):
        assert a.label is b.label and abs(a.posterior - b.posterior) <= 1e-12


def test_subset_round_trip():
    spec = FeatureSpec()
    X = np.random.default_rng(2).uniform(0, 10, (6, 6))
    data = TrainingSet(X, [A, P] * 3, spec.kinds(3))
    m = train(data.subset_columns(spec.columns([0, 2])), spec, (0, 2), 3)
    back = load_model(save_model(m))
    assert back.subset == (0, 2) and back.n_tiles == 3


@pytest.mark.parametrize(
    "mutate",
    [
        lambda t: t.replace("FUNDUSGATE-NB", "OTHER-NB", 1),
        lambda t: t.replace("v1", "v2", 1),
        lambda t: t.replace("priors", "prior", 1),
        lambda t: t.replace("\nend\n", "\n"),
        lambda t: t.replace(" continuous ", " gaussian ", 1),
        lambda t: "",
    ],
)
def test_malformed_model_files(mutate):
    text = save_model(_trained()).decode()
    with pytest.raises(ModelFormatError):
        load_model(mutate(text).encode())


def test_seventeen_digit_decimals():
    m = _trained()
    line = [ln for ln in save_model(m).decode().splitlines() if ln.startswith("priors")][0]
    assert all(float(tok) == p for tok, p in zip(line.split()[1:], m.priors))
    assert math.isclose(sum(float(t) for t in line.split()[1:]), 1.0)
