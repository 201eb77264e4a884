import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gemini import GeminiClustering
from gemini.datasets import gen_gaussian_mixture
from gemini.metrics import ari


@pytest.fixture(scope="module")
def blobs():
    ds = gen_gaussian_mixture(3, 30, [[0.0, 0.0], [8.0, 0.0], [4.0, 7.0]], 0.7, seed=0)
    return ds.features, ds.labels


class TestGeminiClustering:
    def test_params_round_trip(self):
        est = GeminiClustering(objective="tv_ovo", n_clusters=4, epochs=3)
        params = est.get_params()
        assert params["objective"] == "tv_ovo" and params["n_clusters"] == 4
        assert clone(est).get_params() == params

    def test_fit_predict_recovers_blobs(self, blobs):
        X, y = blobs
        est = GeminiClustering("mmd_ovo", n_clusters=3, hidden_layer_sizes=(16,), epochs=300, learning_rate=1e-2)
        labels = est.fit_predict(X)
        assert ari(y, labels) > 0.9
        np.testing.assert_array_equal(labels, est.labels_)
        np.testing.assert_array_equal(est.predict(X), labels)

    def test_predict_proba_rows(self, blobs):
        X, _ = blobs
        est = GeminiClustering("kl_ova", n_clusters=3, hidden_layer_sizes=(8,), epochs=2).fit(X)
        P = est.predict_proba(X[:7])
        assert P.shape == (7, 3)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)

    def test_y_only_reported(self, blobs):
        X, y = blobs
        kw = dict(objective="kl_ova", n_clusters=3, hidden_layer_sizes=(8,), epochs=5)
        a = GeminiClustering(**kw).fit(X, y)
        b = GeminiClustering(**kw).fit(X)
        np.testing.assert_array_equal(a.labels_, b.labels_)
        assert a.report_.ari is not None and b.report_.ari is None

    def test_categorical_model(self, blobs):
        X, _ = blobs
        est = GeminiClustering("kl_ova", n_clusters=3, model="categorical", epochs=3).fit(X)
        assert est.predict_proba(X).shape == (len(X), 3)
        with pytest.raises(ValueError, match="own training"):
            est.predict_proba(X[:5])

    def test_not_fitted(self, blobs):
        with pytest.raises(NotFittedError):
            GeminiClustering().predict(blobs[0])

    def test_feature_count_checked(self, blobs):
        X, _ = blobs
        est = GeminiClustering("kl_ova", hidden_layer_sizes=(4,), epochs=1).fit(X)
        with pytest.raises(ValueError, match="features"):
            est.predict(np.zeros((2, 3)))

    @pytest.mark.parametrize(
        "kw", [{"model": "tree"}, {"n_clusters": 0}, {"objective": "nope_ova"}, {"geometry": "euclidean", "objective": "mmd_ova"}]
    )
    def test_invalid(self, blobs, kw):
        with pytest.raises(ValueError):
            GeminiClustering(**{"epochs": 1, **kw}).fit(blobs[0])

    def test_seeded(self, blobs):
        X, _ = blobs
        kw = dict(objective="hellinger_ova", hidden_layer_sizes=(8,), epochs=4, batch_size=16, random_state=7)
        a = GeminiClustering(**kw).fit(X).predict_proba(X)
        b = GeminiClustering(**kw).fit(X).predict_proba(X)
        assert a.tobytes() == b.tobytes()
