import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from survbench.core import Dataset, SeededRng, dataset_split
from survbench.impute import (
    IterativeImputer,
    KNNImputer,
    MedianImputer,
    NotFittedError,
    iterative_cycle,
    make_imputer,
)
from survbench.missingness import ampute_mcar, missing_fraction
from survbench.simulate import SimConfig, generate_dataset

STRATEGIES = ["median", "knn", "iterative"]


def masked(x, mask):
    n = len(x)
    return Dataset(np.asarray(x, float), np.asarray(mask, bool), np.ones(n), np.ones(n, bool))


@pytest.fixture(scope="module")
def mcar40():
    return ampute_mcar(generate_dataset(SimConfig(n=500, seed=0)), 0.4, SeededRng(0, 2))


def test_median_fit():
    ds = masked([[1.0], [0], [3.0], [0], [7.0]], [[0], [1], [0], [1], [0]])
    assert MedianImputer().fit(ds).medians_[0] == 3.0


def test_median_even_count_averages():
    ds = masked([[1.0], [2.0], [10.0], [20.0]], np.zeros((4, 1)))
    assert MedianImputer().fit(ds).medians_[0] == 6.0


def test_median_transform_constant_fill():
    train = masked([[1.0, 0.0], [3.0, 0.0], [5.0, 0.0]], np.zeros((3, 2)))
    test = masked([[0.0, 5.0]], [[True, False]])
    out = MedianImputer().fit(train).transform(test)
    assert out.x.tolist() == [[3.0, 5.0]]


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_transform_before_fit(strategy):
    with pytest.raises(NotFittedError):
        make_imputer(strategy).transform(masked([[1.0]], [[False]]))


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_all_missing_column_named(strategy):
    ds = masked([[1.0, 0.0], [2.0, 0.0]], [[0, 1], [0, 1]])
    with pytest.raises(ValueError, match="column 1"):
        make_imputer(strategy).fit(ds)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_complete_input_unchanged(strategy, paper_data):
    train = dataset_split(paper_data, range(400))
    test = dataset_split(paper_data, range(400, 500))
    out = make_imputer(strategy).fit(train).transform(test)
    assert np.array_equal(out.x, test.x)


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_observed_cells_preserved(strategy, mcar40):
    train = dataset_split(mcar40, range(400))
    test = dataset_split(mcar40, range(400, 500))
    out = make_imputer(strategy).fit(train).transform(test)
    assert missing_fraction(out) == 0.0
    assert np.all(np.isfinite(out.x))
    assert np.array_equal(out.x[~test.mask], test.x[~test.mask])


def test_knn_nearest_row():
    train = masked([[0.0, 0.0], [10.0, 10.0]], np.zeros((2, 2)))
    test = masked([[9.0, 0.0]], [[False, True]])
    for standardize in (False, True):
        out = KNNImputer(k=1, standardize=standardize).fit(train).transform(test)
        assert out.x[0, 1] == 10.0


def test_knn_partial_distance_scaling():
    imp = KNNImputer(k=1, standardize=False).fit(masked([[0.0, 0.0, 0.0]], np.zeros((1, 3))))
    d = imp.distances(np.array([[3.0, 0.0, 0.0]]), np.array([[False, True, True]]))
    # one shared coordinate out of three: sqrt(3 / 1) * 3
    assert d[0, 0] == pytest.approx(np.sqrt(3) * 3)


def test_knn_ties_go_to_lower_index():
    train = masked([[1.0, 5.0], [-1.0, 7.0]], np.zeros((2, 2)))
    test = masked([[0.0, 0.0]], [[False, True]])
    assert KNNImputer(k=1, standardize=False).fit(train).transform(test).x[0, 1] == 5.0


def test_knn_fallback_to_mean(caplog):
    train = masked([[1.0, 2.0], [3.0, 6.0]], np.zeros((2, 2)))
    test = masked([[0.0, 0.0]], [[True, True]])
    out = KNNImputer(k=1).fit(train).transform(test)
    assert out.x.tolist() == [[2.0, 4.0]]
    assert "column means" in caplog.text


def test_knn_matches_sklearn_on_raw_scale(mcar40):
    sklearn_impute = pytest.importorskip("sklearn.impute")
    train = dataset_split(mcar40, range(300))
    test = dataset_split(mcar40, range(300, 500))
    ours = KNNImputer(k=10, standardize=False).fit(train).transform(test).x
    ref = sklearn_impute.KNNImputer(n_neighbors=10).fit(train.x).transform(test.x)
    # rows with no shared coordinate use different fallbacks; compare the rest
    full = test.mask.all(axis=1)
    assert np.allclose(ours[~full], ref[~full], atol=1e-10)


def test_iterative_cycle_no_missing(paper_data):
    x = np.asarray(paper_data.x)
    out, coefs = iterative_cycle(x, np.zeros(x.shape, bool), 1e-3)
    assert np.array_equal(out, x)
    assert len(coefs) == 5


def test_iterative_exact_linear_relation():
    x = np.arange(1.0, 11.0)
    y = 2 * x
    data = np.column_stack([x, y])
    mask = np.zeros_like(data, dtype=bool)
    mask[3, 1] = True  # x = 4 there
    imp = IterativeImputer(ridge_alpha=1e-10).fit(masked(data, mask))
    assert imp.train_filled_[3, 1] == pytest.approx(8.0, abs=1e-6)
    test = masked([[4.0, 0.0]], [[False, True]])
    assert imp.transform(test).x[0, 1] == pytest.approx(8.0, abs=1e-6)


def test_iterative_converges_on_mcar40(mcar40):
    imp = IterativeImputer(max_iter=30, tol=1e-2).fit(mcar40)
    assert imp.converged_
    # measured once on this fixture and frozen
    assert imp.n_iter_ == 10


def test_iterative_stopping_rule(mcar40):
    """Replays the sweeps to check the stop happens at the first qualifying cycle."""
    imp = IterativeImputer(max_iter=30, tol=1e-2).fit(mcar40)
    mask = mcar40.mask
    obs = mcar40.x[~mask]
    thr = 1e-2 * (obs.max() - obs.min())
    means = np.nanmean(np.where(mask, np.nan, mcar40.x), axis=0)
    filled = np.where(mask, means, mcar40.x)
    changes = []
    for _ in range(imp.n_iter_):
        new, _ = iterative_cycle(filled, mask, 1e-3)
        changes.append(np.max(np.abs(new - filled)[mask]))
        filled = new
    assert changes[-1] <= thr
    assert all(c > thr for c in changes[:-1])


def test_iterative_one_cycle_cap(mcar40):
    imp = IterativeImputer(max_iter=1, tol=0.0).fit(mcar40)
    assert imp.n_iter_ == 1 and not imp.converged_


@pytest.mark.filterwarnings("ignore:.*Early stopping criterion")
@pytest.mark.parametrize("sweeps", [1, 3, 10])
def test_iterative_matches_sklearn(mcar40, sweeps):
    pytest.importorskip("sklearn")
    from sklearn.experimental import enable_iterative_imputer  # noqa: F401
    from sklearn.impute import IterativeImputer as Reference
    from sklearn.linear_model import Ridge

    train = dataset_split(mcar40, range(400))
    test = dataset_split(mcar40, range(400, 500))
    ours = IterativeImputer(max_iter=sweeps, tol=0.0).fit(train)
    ref = Reference(estimator=Ridge(alpha=1e-3), max_iter=sweeps, tol=0.0, imputation_order="roman")
    ref.fit(np.where(train.mask, np.nan, train.x))
    assert np.allclose(ours.train_filled_, ref.transform(np.where(train.mask, np.nan, train.x)), atol=1e-10)
    assert np.allclose(ours.transform(test).x, ref.transform(np.where(test.mask, np.nan, test.x)), atol=1e-10)


def test_iterative_transform_replays_training_trajectory(mcar40):
    imp = IterativeImputer().fit(mcar40)
    assert len(imp.sweeps_) == imp.n_iter_
    assert np.array_equal(imp.transform(mcar40).x, imp.train_filled_)


def test_iterative_beats_median_on_held_out_rows():
    full = generate_dataset(SimConfig(n=500, seed=0))
    data = ampute_mcar(full, 0.4, SeededRng(0, 2))
    train, test = dataset_split(data, range(400)), dataset_split(data, range(400, 500))
    truth = full.x[400:][test.mask]

    def rmse(imp):
        return np.sqrt(np.mean((imp.fit(train).transform(test).x[test.mask] - truth) ** 2))

    assert rmse(IterativeImputer()) < rmse(MedianImputer())


def test_iterative_single_pass_uses_last_sweep():
    x = np.array([[1.0, 2.0], [2.0, np.nan], [3.0, 6.5], [4.0, 8.0], [np.nan, 9.0]])
    imp = IterativeImputer(max_iter=4, tol=0.0, single_pass=True).fit(masked(np.nan_to_num(x), np.isnan(x)))
    (b0, b), (c0, c) = imp.coefs_
    out = imp.transform(masked([[0.0, 0.0]], [[True, True]])).x[0]
    first = b0 + imp.means_[1] * b[0]
    assert out.tolist() == [first, c0 + first * c[0]]


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_state_ignores_test_rows(strategy, mcar40):
    train = dataset_split(mcar40, range(400))
    test = dataset_split(mcar40, range(400, 500))
    imp = make_imputer(strategy).fit(train)
    before = imp.state()
    out1 = imp.transform(test)
    bumped = test.with_covariates(np.where(test.mask, 0.0, test.x) + 5.0 * (np.arange(100) == 7)[:, None],
                                  test.mask)
    out2 = imp.transform(bumped)
    after = imp.state()
    assert before.keys() == after.keys()
    assert all(np.array_equal(before[k], after[k]) for k in before)
    changed = np.flatnonzero(np.any(out1.x != out2.x, axis=1))
    assert set(changed) <= {7}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_median_permutation_invariant(seed):
    ds = ampute_mcar(generate_dataset(SimConfig(n=40, seed=seed)), 0.3, SeededRng(seed, 2))
    perm = np.random.default_rng(seed).permutation(ds.n)
    a = MedianImputer().fit(ds).medians_
    b = MedianImputer().fit(dataset_split(ds, perm)).medians_
    assert np.array_equal(a, b)


def test_unknown_strategy():
    with pytest.raises(ValueError):
        make_imputer("missforest")
