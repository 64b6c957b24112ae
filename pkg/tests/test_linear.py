import numpy as np
import pytest

from sdoh_extract.errors import ModelFormatError, UntrainedModel
from sdoh_extract.linear import LinearModel, OnlineTrainer, softmax


def model():
    w = np.array([[0.5, -1.25], [0.0, 3.0]])
    return LinearModel("ner", ("O", "B-Race"), "v1", ("bias", "w0=x"), w, {"seed": 1})


def test_softmax_rows_sum_to_one():
    p = softmax(np.array([[1000.0, 0.0, -1000.0], [1.0, 2.0, 3.0]]))
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.isfinite(p))


def test_text_round_trip(tmp_path):
    m = model()
    path = tmp_path / "m.model"
    m.save(path)
    back = LinearModel.load(path)
    assert back.to_text() == m.to_text()
    assert back.fingerprint == m.fingerprint
    assert np.array_equal(back.scores(["bias", "w0=x", "unknown"]), m.scores(["bias", "w0=x"]))
    header = path.read_text().splitlines()
    assert header[0] == "#sdoh-extract-model\t1"
    assert "w0=x\tB-Race\t3.0" in header


def test_rejects_bad_files():
    with pytest.raises(ModelFormatError):
        LinearModel.from_text("not a model\n")
    with pytest.raises(ModelFormatError):
        LinearModel("ner", ("O",), "v1", ("a",), np.array([[np.nan]]))
    with pytest.raises(ModelFormatError):
        LinearModel("ner", ("O",), "v1", ("a", "b"), np.zeros((1, 1)))


def test_untrained_raises():
    with pytest.raises(UntrainedModel):
        LinearModel("ner", ("O",), "v1").scores(["bias"])


def test_weights_read_only():
    with pytest.raises(ValueError):
        model().weights[0, 0] = 1.0


def test_trainer_learns_separable_problem():
    trainer = OnlineTrainer(("a", "b"), 0.5)
    data = [(["bias", "x"], 0), (["bias", "y"], 1)] * 20
    for feats, _ in data:
        trainer.add_features(feats)
    for feats, y in data:
        trainer.update(trainer.lookup(feats), y)
    m = trainer.snapshot(LinearModel, "ner", "v1", {})
    assert np.argmax(m.scores(["bias", "x"])) == 0
    assert np.argmax(m.scores(["bias", "y"])) == 1
