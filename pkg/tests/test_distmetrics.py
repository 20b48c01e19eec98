import numpy as np
import pytest

from jvsync.distmetrics import (
    CompositeScores,
    GaussianStats,
    MetricTable,
    MmdConfig,
    SampleSet,
    composite_scores,
    cosine_consistency,
    frechet_distance,
    gaussian_stats,
    load_sample_set,
    mmd_poly,
    write_matrix_file,
)
from jvsync.embeddings import EmbeddingKey, write_embedding_store
from jvsync.errors import ParameterError, StoreError


def gauss_1d(mean, var):
    return GaussianStats(mean=np.array([mean]), cov=np.array([[var]]))


# --- gaussian_stats ---------------------------------------------------------


def test_gaussian_stats_hand_example():
    stats = gaussian_stats(SampleSet(np.array([[0.0], [2.0]])))
    assert stats.mean[0] == 1.0
    assert stats.cov[0, 0] == 2.0  # 1/(n-1) normalizer


def test_gaussian_stats_identical_rows_zero_cov():
    stats = gaussian_stats(SampleSet(np.tile([1.5, -0.5], (5, 1))))
    assert np.allclose(stats.cov, 0.0)


def test_gaussian_stats_permutation_invariant():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 4))
    a = gaussian_stats(SampleSet(x))
    b = gaussian_stats(SampleSet(x[rng.permutation(20)]))
    assert np.allclose(a.mean, b.mean, atol=1e-12)
    assert np.allclose(a.cov, b.cov, atol=1e-12)


def test_gaussian_stats_needs_two_samples():
    with pytest.raises(ParameterError):
        gaussian_stats(SampleSet(np.ones((1, 3))))


# --- frechet_distance ---------------------------------------------------------


def test_frechet_identity_is_zero():
    rng = np.random.default_rng(1)
    stats = gaussian_stats(SampleSet(rng.normal(size=(50, 8))))
    assert frechet_distance(stats, stats) <= 1e-6


def test_frechet_1d_closed_form():
    assert frechet_distance(gauss_1d(0.0, 1.0), gauss_1d(2.0, 1.0)) == pytest.approx(
        4.0, abs=1e-6
    )
    # differing variances: (mu)^2 + (sigma_a - sigma_b)^2
    assert frechet_distance(gauss_1d(0.0, 4.0), gauss_1d(1.0, 1.0)) == pytest.approx(
        1.0 + 1.0, abs=1e-6
    )


def test_frechet_symmetry():
    rng = np.random.default_rng(2)
    a = gaussian_stats(SampleSet(rng.normal(size=(40, 6))))
    b = gaussian_stats(SampleSet(rng.normal(loc=0.3, size=(45, 6))))
    assert abs(frechet_distance(a, b) - frechet_distance(b, a)) <= 1e-9


def test_frechet_rotation_invariance():
    rng = np.random.default_rng(3)
    d = 16
    x = rng.normal(size=(200, d))
    y = rng.normal(loc=0.5, scale=1.3, size=(220, d))
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    base = frechet_distance(gaussian_stats(SampleSet(x)), gaussian_stats(SampleSet(y)))
    rotated = frechet_distance(
        gaussian_stats(SampleSet(x @ q)), gaussian_stats(SampleSet(y @ q))
    )
    assert abs(base - rotated) <= 1e-6


def test_frechet_nonnegative_and_dim_checked():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = gaussian_stats(SampleSet(rng.normal(size=(10, 3))))
        b = gaussian_stats(SampleSet(rng.normal(size=(12, 3))))
        assert frechet_distance(a, b) >= 0.0
    with pytest.raises(ParameterError, match="dimension"):
        frechet_distance(gauss_1d(0, 1), gaussian_stats(SampleSet(rng.normal(size=(5, 2)))))


def test_frechet_halves_shrink_with_sample_size():
    rng = np.random.default_rng(7)
    values = []
    for n in (64, 256, 1024):
        sample = rng.normal(size=(2 * n, 8))
        a = gaussian_stats(SampleSet(sample[:n]))
        b = gaussian_stats(SampleSet(sample[n:]))
        values.append(frechet_distance(a, b))
    assert values[0] > values[1] > values[2]
    assert values[2] < 0.5


# --- mmd_poly -------------------------------------------------------------------


def test_mmd_identical_sets_biased_zero():
    rng = np.random.default_rng(5)
    x = SampleSet(rng.normal(size=(30, 4)))
    assert abs(mmd_poly(x, x, MmdConfig(estimator="biased"))) <= 1e-9


def test_mmd_1d_hand_kernel():
    x = SampleSet(np.array([[0.0]]))
    y = SampleSet(np.array([[1.0]]))
    cfg = MmdConfig(degree=3, coef=1.0, scale=1.0, estimator="biased")
    assert mmd_poly(x, y, cfg) == 7.0  # k(0,0) + k(1,1) - 2 k(0,1) = 1 + 8 - 2


def test_mmd_symmetry_exact():
    rng = np.random.default_rng(6)
    x = SampleSet(rng.normal(size=(15, 5)))
    y = SampleSet(rng.normal(size=(20, 5)))
    for estimator in ("biased", "unbiased"):
        cfg = MmdConfig(estimator=estimator)
        assert mmd_poly(x, y, cfg) == mmd_poly(y, x, cfg)


def test_mmd_unbiased_below_biased_on_null():
    rng = np.random.default_rng(8)
    unbiased_abs, biased_vals = [], []
    for _ in range(100):
        x = SampleSet(rng.normal(size=(24, 6)))
        y = SampleSet(rng.normal(size=(24, 6)))
        unbiased_abs.append(abs(mmd_poly(x, y, MmdConfig(estimator="unbiased"))))
        biased_vals.append(mmd_poly(x, y, MmdConfig(estimator="biased")))
    assert np.mean(unbiased_abs) < np.mean(biased_vals)


def test_mmd_guards():
    x = SampleSet(np.ones((1, 2)))
    with pytest.raises(ParameterError, match="unbiased"):
        mmd_poly(x, x, MmdConfig(estimator="unbiased"))
    with pytest.raises(ParameterError, match="dimension"):
        mmd_poly(SampleSet(np.ones((2, 2))), SampleSet(np.ones((2, 3))))


# --- cosine_consistency -----------------------------------------------------------


def test_cosine_consistency_cases():
    e0 = np.array([1.0, 0.0])
    e1 = np.array([0.0, 1.0])
    assert cosine_consistency([(e0, e0), (e1, e1)]) == 1.0
    assert cosine_consistency([(e0, e1), (e1, e0)]) == 0.0
    assert cosine_consistency([(e0, e0), (e0, e1)]) == 0.5
    with pytest.raises(ParameterError):
        cosine_consistency([])


# --- composite scores --------------------------------------------------------------


def test_composite_avq_formula():
    table = MetricTable(FVD=241.8, KVD=2.9, FAD=7.3)
    got = composite_scores(table, which=("AVQ",))
    assert got.S_AVQ == pytest.approx(6.048, abs=1e-9)


def test_composite_avc_and_avs():
    table = MetricTable(AV_IB=0.209, CAVP=0.801, AVHScore=0.186, JavisScore=0.153)
    got = composite_scores(table, which=("AVC", "AVS"))
    assert got.S_AVC == pytest.approx(1.196, abs=1e-9)
    assert got.S_AVS == 0.153


def test_composite_zero_table():
    table = MetricTable(FVD=0, KVD=0, FAD=0, AV_IB=0, CAVP=0, AVHScore=0, JavisScore=0)
    got = composite_scores(table)
    assert (got.S_AVQ, got.S_AVC, got.S_AVS) == (0.0, 0.0, 0.0)


def test_composite_linearity():
    rng = np.random.default_rng(9)
    names = ("FVD", "KVD", "FAD", "AV_IB", "CAVP", "AVHScore", "JavisScore")
    for _ in range(100):
        t1 = dict(zip(names, rng.uniform(-5, 5, len(names))))
        t2 = dict(zip(names, rng.uniform(-5, 5, len(names))))
        a, b = rng.uniform(-2, 2, 2)
        blended = {k: a * t1[k] + b * t2[k] for k in names}
        s1 = composite_scores(MetricTable(**t1))
        s2 = composite_scores(MetricTable(**t2))
        sb = composite_scores(MetricTable(**blended))
        for attr in ("S_AVQ", "S_AVC", "S_AVS"):
            want = a * getattr(s1, attr) + b * getattr(s2, attr)
            assert getattr(sb, attr) == pytest.approx(want, abs=1e-9)


def test_composite_missing_field_errors():
    with pytest.raises(ParameterError, match="FAD"):
        composite_scores(MetricTable(FVD=1.0, KVD=1.0), which=("AVQ",))
    assert composite_scores(MetricTable(JavisScore=0.2), which=("AVS",)).S_AVS == 0.2


# --- sample-set files ---------------------------------------------------------------


def test_load_sample_set_from_matrix(tmp_path):
    rng = np.random.default_rng(10)
    matrix = rng.normal(size=(6, 4)).astype(np.float32)
    write_matrix_file(tmp_path / "m.jvmat", matrix)
    loaded = load_sample_set(tmp_path / "m.jvmat")
    assert loaded.vectors.shape == (6, 4)
    assert np.array_equal(loaded.vectors, matrix.astype(np.float64))


def test_load_sample_set_from_store(tmp_path):
    rng = np.random.default_rng(11)
    entries = [
        (
            EmbeddingKey("m", 0, "video_frame", i),
            rng.normal(size=3).astype(np.float32),
        )
        for i in range(4)
    ]
    write_embedding_store(entries, tmp_path / "s.jvemb")
    loaded = load_sample_set(tmp_path / "s.jvemb")
    assert loaded.vectors.shape == (4, 3)
    assert np.array_equal(loaded.vectors[0], entries[0][1].astype(np.float64))


def test_load_sample_set_rejects_unknown(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"garbage")
    with pytest.raises(StoreError):
        load_sample_set(tmp_path / "x.bin")
