import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from facetgen.corpus import synthesize_corpus
from facetgen.estimator import FacetGenerator


@pytest.fixture(scope="module")
def corpus():
    return synthesize_corpus(10, {2: 1.0}, vocab_size=16, seed=4)


def test_params_roundtrip_and_clone():
    est = FacetGenerator(objective="set-pred", epochs=3, n_facets=2)
    params = est.get_params()
    assert params["objective"] == "set-pred" and params["n_facets"] == 2
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(beam_width=7)
    assert est.beam_width == 7


def test_invalid_params():
    with pytest.raises(ValueError):
        FacetGenerator(objective="nope").fit([{"query": "q", "facets": ["a"]}])
    with pytest.raises(TypeError):
        FacetGenerator(epochs=1.5).fit([{"query": "q", "facets": ["a"]}])


def test_not_fitted():
    with pytest.raises(NotFittedError):
        FacetGenerator().predict(["q"])


def test_bad_inputs():
    est = FacetGenerator(epochs=1)
    with pytest.raises(TypeError):
        est.fit("not a corpus")
    with pytest.raises(ValueError):
        est.fit([])
    with pytest.raises(ValueError):
        est.fit([{"query": "q"}])


@pytest.mark.parametrize("objective", ["seq-default", "set-pred", "seq-set-pred"])
def test_fit_predict(corpus, objective):
    est = FacetGenerator(objective=objective, embedding_dim=8, hidden_dim=16, epochs=40, n_facets=2, random_state=1)
    est.fit(corpus)
    preds = est.predict(corpus)
    assert len(preds) == len(corpus)
    assert all(len(p) == len(set(p)) and all(p) for p in preds)
    if objective != "seq-default":
        assert all(len(p) <= 2 for p in preds)
    assert 0.0 <= est.score(corpus) <= 1.0
    # facets are optional at prediction time
    no_facets = est.predict([{"query": r.query, "documents": list(r.documents)} for r in corpus[:2]])
    assert no_facets == preds[:2]
    assert len(est.predict([r.query for r in corpus[:2]])) == 2

def test_dict_input_and_save_load(corpus, tmp_path):
    rows = [r.to_dict() for r in corpus]
    est = FacetGenerator(objective="set-pred", embedding_dim=4, hidden_dim=6, epochs=2).fit(rows)
    est.save(tmp_path / "m.ckpt")
    back = FacetGenerator.load(tmp_path / "m.ckpt")
    assert back.get_params() == est.get_params()
    assert np.array_equal(back.params_.flat(), est.params_.flat())
    assert back.predict(corpus) == est.predict(corpus)
