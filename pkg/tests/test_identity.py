import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idmark.chaos import KeyStream, derive_key, xor_apply
from idmark.errors import InputError, PreconditionError
from idmark.identity import (IdentityEmbedding, ProjectionModel, binarize, fit_projection,
                             generate_watermark, plain_watermark, project_and_scale, read_embeddings,
                             synthesize_embeddings, write_embeddings)

from conftest import params


def _embeddings(X, prefix="e"):
    return [IdentityEmbedding(f"{prefix}{i}", row) for i, row in enumerate(X)]


def test_components_orthonormal(model128):
    C = model128.components
    assert np.abs(C @ C.T - np.eye(128)).max() < 1e-9


def test_axis_aligned_data_gives_signed_permutation(rng):
    stds = np.array([1.0, 5.0, 0.3, 2.0])
    X = rng.standard_normal((400, 4)) * stds
    model = fit_projection(_embeddings(X), 4)
    C = model.components
    assert np.allclose(np.abs(C), np.abs(np.round(C)), atol=0.05)
    # strongest axis first
    assert np.argmax(np.abs(C), axis=1).tolist() == [1, 3, 0, 2]
    assert (C[np.arange(4), np.argmax(np.abs(C), axis=1)] > 0).all()


def test_pca_matches_covariance_eigendecomposition(rng):
    X = rng.standard_normal((10, 5)) @ rng.standard_normal((5, 5))
    model = fit_projection(_embeddings(X), 3)
    evals, evecs = np.linalg.eigh(np.cov(X, rowvar=False))
    order = np.argsort(evals)[::-1][:3]
    assert np.allclose(model.explained_variance, evals[order], rtol=1e-9)
    assert (np.diff(model.explained_variance) <= 0).all()
    for row, vec in zip(model.components, evecs[:, order].T):
        assert abs(abs(row @ vec) - 1.0) < 1e-9


def test_standard_lengths(people):
    assert fit_projection(people, 64).watermark_length == 64
    model = fit_projection(people, 128)
    assert model.watermark_length == 128 and model.embedding_dim == 512


def test_fit_is_deterministic(people):
    a, b = fit_projection(people, 32), fit_projection(people, 32)
    assert np.array_equal(a.components, b.components)
    assert np.array_equal(a.per_dim_min, b.per_dim_min)


@pytest.mark.parametrize("n, d, l", [(5, 8, 6), (10, 4, 6)])
def test_fit_preconditions(rng, n, d, l):
    with pytest.raises(PreconditionError):
        fit_projection(_embeddings(rng.standard_normal((n, d))), l)


def test_fit_rejects_zero_variance():
    with pytest.raises(PreconditionError):
        fit_projection(_embeddings(np.ones((6, 4))), 2)


def test_fit_rejects_mixed_dimensions(rng):
    embs = _embeddings(rng.standard_normal((4, 3))) + [IdentityEmbedding("x", np.zeros(4))]
    with pytest.raises(InputError):
        fit_projection(embs, 2)


def test_scaling_bounds(model128):
    lo = model128.mean + model128.components.T @ model128.per_dim_min
    hi = model128.mean + model128.components.T @ model128.per_dim_max
    assert np.allclose(project_and_scale(model128, lo), 0.0, atol=1e-9)
    assert np.allclose(project_and_scale(model128, hi), 1.0, atol=1e-9)
    assert str(plain_watermark(model128, IdentityEmbedding("hi", hi))) == "1" * 128


def test_out_of_range_embedding_is_clamped(model128):
    far = model128.mean + model128.components.T @ (3.0 * model128.per_dim_max - 2.0 * model128.per_dim_min)
    scaled = project_and_scale(model128, far)
    assert np.array_equal(scaled, np.ones(128))
    scaled = project_and_scale(model128, model128.mean - 50 * model128.components.T @ model128.per_dim_max)
    assert scaled.min() >= 0.0 and scaled.max() <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 100.0))
def test_scaling_range_property(model128, seed, magnitude):
    v = np.random.default_rng(seed).standard_normal(512) * magnitude
    s = project_and_scale(model128, v)
    assert s.shape == (128,) and s.min() >= 0.0 and s.max() <= 1.0


def test_degenerate_dimension_scales_to_half(rng, caplog):
    X = rng.standard_normal((20, 3))
    X[:, 2] = 0.0
    model = fit_projection(_embeddings(X), 3)
    assert model.degenerate_dims == (2,)
    assert "zero range" in caplog.text
    assert project_and_scale(model, X[0])[2] == 0.5
    assert plain_watermark(model, IdentityEmbedding("a", X[0])).bits[2] == 1


def test_binarize_examples():
    assert str(binarize([0.2, 0.7, 0.5], 0.5)) == "011"
    assert not binarize([0.2], 0.5).encrypted


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=64))
def test_binarize_extreme_cutoffs(values):
    assert set(binarize(values, 0.0)) == {1}
    assert list(binarize(values, 1.0)) == [int(v == 1.0) for v in values]


def test_generate_with_zero_key_equals_plain(model128, people):
    e = people[0]
    wm = generate_watermark(model128, e, KeyStream.zeros(128))
    assert wm == plain_watermark(model128, e) and wm.encrypted


def test_generate_decrypts_to_plain(model128, people, key128):
    e = people[5]
    assert xor_apply(generate_watermark(model128, e, key128), key128) == plain_watermark(model128, e)


def test_generate_is_deterministic(model128, people, key128):
    assert generate_watermark(model128, people[0], key128) == generate_watermark(model128, people[0], key128)


def test_generate_key_length_check(model128, people):
    with pytest.raises(PreconditionError):
        generate_watermark(model128, people[0], derive_key(params(64)))


def test_distinct_identities_differ(model128, key128):
    fresh = synthesize_embeddings(200, 512, seed=99)
    marks = [generate_watermark(model128, e, key128) for e in fresh]
    for a, b in zip(marks[0::2], marks[1::2]):
        assert a.hamming(b) > 0


def test_same_identity_samples_are_close(people, model128):
    # samples of one identity share most bits; unrelated identities share about half
    same = [plain_watermark(model128, a).hamming(plain_watermark(model128, b))
            for a, b in zip(people[0::2], people[1::2])]
    assert np.mean(same) < 128 * 0.25


def test_model_round_trip(tmp_path, model128):
    path = tmp_path / "model.json"
    model128.save(path)
    again = ProjectionModel.load(path)
    for name in ("mean", "components", "per_dim_min", "per_dim_max", "explained_variance"):
        assert np.array_equal(getattr(again, name), getattr(model128, name))
    assert again.cutoff == model128.cutoff


def test_model_load_rejects_garbage(tmp_path):
    path = tmp_path / "model.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(InputError):
        ProjectionModel.load(path)


def test_embedding_file_round_trip(tmp_path, people):
    path = tmp_path / "emb.txt"
    write_embeddings(path, people[:10])
    again = read_embeddings(path)
    assert [e.identity_id for e in again] == [e.identity_id for e in people[:10]]
    assert all(np.array_equal(a.vector, b.vector) for a, b in zip(again, people))
    assert path.read_text().startswith("# d_E=512\n")


@pytest.mark.parametrize("text", ["id0,1,2\n", "# d_E=2\nid0,1\n", "# d_E=2\nid0,1,x\n", "# d_E=2\n"])
def test_embedding_file_errors(tmp_path, text):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(InputError):
        read_embeddings(path)


def test_missing_embedding_file_names_path(tmp_path):
    with pytest.raises(InputError, match="nowhere.txt"):
        read_embeddings(tmp_path / "nowhere.txt")


def test_embedding_validation():
    with pytest.raises(InputError):
        IdentityEmbedding("a", np.array([1.0, np.nan]))
    with pytest.raises(InputError):
        IdentityEmbedding("a", np.array([]))


def test_synthesized_embeddings_unit_norm():
    embs = synthesize_embeddings(12, 64, samples_per_identity=3, seed=1)
    assert len(embs) == 36
    assert np.allclose([np.linalg.norm(e.vector) for e in embs], 1.0)
    assert embs[0].identity_id == "id00" and embs[-1].identity_id == "id11"
