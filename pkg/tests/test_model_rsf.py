import copy

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from survbench.bench import kfold_indices
from survbench.core import Dataset, SeededRng, dataset_split
from survbench.metrics import harrell_c
from survbench.model_rsf import (
    RandomSurvivalForest,
    RsfConfig,
    _best_split,
    logrank_split_stat,
    rsf_fit,
    rsf_risk,
)

from oracles import logrank_loop


@pytest.fixture(scope="module")
def paper_forest(paper_data):
    return rsf_fit(paper_data, RsfConfig(seed=0))


def separable(seed=0):
    rng = np.random.default_rng(seed)
    x1 = np.concatenate([-rng.uniform(0.5, 2, 5), rng.uniform(0.5, 2, 5)])
    x2 = rng.normal(size=10)
    time = np.array([1, 2, 3, 4, 5, 100, 101, 102, 103, 104], float)
    return Dataset.complete(np.column_stack([x1, x2]), time, np.ones(10, bool))


def test_logrank_identical_sides():
    side = (np.array([1.0, 2, 3]), np.array([True, False, True]))
    assert logrank_split_stat(side, side) == 0.0


def test_logrank_hand_case():
    left = (np.ones(5), np.ones(5, bool))
    right = (np.full(5, 2.0), np.ones(5, bool))
    # t=1: y=10, y1=5, d=5, d1=5 -> O-E = 2.5, var = 5 * 1/4 * 5/9
    expected = 2.5 / np.sqrt(25 / 36)
    assert logrank_split_stat(left, right) == pytest.approx(expected)
    assert logrank_split_stat(left, right) == pytest.approx(logrank_loop(left, right))


def test_logrank_no_events():
    side = (np.array([1.0, 2.0]), np.zeros(2, bool))
    assert logrank_split_stat(side, side) == 0.0
    with pytest.raises(ValueError):
        logrank_split_stat(side, (np.zeros(0), np.zeros(0, bool)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_logrank_matches_loop_and_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    nl, nr = rng.integers(1, 15, 2)
    left = (rng.integers(1, 8, nl).astype(float), rng.random(nl) < 0.6)
    right = (rng.integers(1, 8, nr).astype(float), rng.random(nr) < 0.6)
    stat = logrank_split_stat(left, right)
    assert stat == pytest.approx(logrank_loop(left, right), abs=1e-12)
    assert stat == pytest.approx(logrank_split_stat(right, left), abs=1e-12)


def exhaustive_best(x, time, event, min_leaf):
    best = (-1.0, None, None)
    for f in range(x.shape[1]):
        vals = np.unique(x[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (a + b)
            go = x[:, f] <= thr
            if min(go.sum(), (~go).sum()) < min_leaf:
                continue
            s = logrank_loop((time[go], event[go]), (time[~go], event[~go]))
            if s > best[0] + 1e-12:
                best = (s, f, thr)
    return best


def test_separable_split_on_full_sample():
    ds = separable()
    stat, f, thr = _best_split(ds.x, ds.time, ds.event, [0, 1], 2)
    assert (f, thr) == exhaustive_best(ds.x, ds.time, ds.event, 2)[1:]
    assert f == 0 and ds.x[:5, 0].max() < thr < ds.x[5:, 0].min()


@pytest.mark.parametrize("seed", range(10))
def test_root_split_matches_exhaustive_search(seed):
    ds = separable()
    forest = rsf_fit(ds, RsfConfig(tree_count=1, min_leaf=2, mtry=2, seed=seed))
    tree = forest.trees[0]
    boot = tree.bootstrap_indices
    _, f, thr = exhaustive_best(ds.x[boot], ds.time[boot], ds.event[boot], 2)
    assert tree.feature[0] == f
    assert tree.threshold[0] == pytest.approx(thr)


def test_separable_risk_ordering():
    forest = rsf_fit(separable(), RsfConfig(tree_count=25, min_leaf=2, mtry=2, seed=0))
    assert rsf_risk(forest, [-1.0, 0.0]) > rsf_risk(forest, [1.0, 0.0])


def test_determinism(paper_data):
    cfg = RsfConfig(tree_count=10, seed=4)
    probe = paper_data.x[:50]
    assert np.array_equal(rsf_fit(paper_data, cfg).risk(probe), rsf_fit(paper_data, cfg).risk(probe))
    other = rsf_fit(paper_data, RsfConfig(tree_count=10, seed=5)).risk(probe)
    assert not np.array_equal(other, rsf_fit(paper_data, cfg).risk(probe))


def test_leaf_and_node_audit(paper_forest):
    assert len(paper_forest.trees) == 100
    for tree in paper_forest.trees:
        assert tree.leaf_sizes.min() >= 15
        assert tree.internal_sizes.size == 0 or tree.internal_sizes.min() >= 10


def test_single_leaf_forest_is_uninformative(paper_data):
    forest = rsf_fit(paper_data, RsfConfig(tree_count=1, min_split=10**6))
    risk = forest.risk(paper_data.x)
    assert np.all(risk == risk[0])
    assert harrell_c(risk, paper_data) == 0.5


def test_duplicated_trees_leave_risk_unchanged(paper_data):
    forest = rsf_fit(paper_data, RsfConfig(tree_count=7, seed=1))
    doubled = copy.copy(forest)
    doubled.trees = forest.trees + forest.trees
    probe = paper_data.x[:100]
    assert np.allclose(forest.risk(probe), doubled.risk(probe), rtol=1e-14)


def test_piecewise_constant(paper_data):
    forest = rsf_fit(paper_data, RsfConfig(tree_count=10, seed=2))
    thresholds = np.concatenate([t.threshold[t.feature >= 0] for t in forest.trees])
    probe = paper_data.x[:40]
    gap = np.min(np.abs(probe[:, :, None] - thresholds[None, None, :]))
    assert gap > 0
    assert np.array_equal(forest.risk(probe), forest.risk(probe + 0.5 * gap))


def test_out_of_bag_rows_exist(paper_forest, paper_data):
    oob = [paper_data.n - np.unique(t.bootstrap_indices).size for t in paper_forest.trees]
    assert min(oob) > 0
    # the expected out-of-bag share is (1 - 1/n)^n, close to e^-1
    assert np.mean(oob) / paper_data.n == pytest.approx(np.exp(-1), abs=0.02)


def test_noise_feature_robustness(paper_data):
    rng = np.random.default_rng(9)
    noisy = Dataset.complete(np.column_stack([paper_data.x, rng.normal(size=paper_data.n)]),
                             paper_data.time, paper_data.event)
    folds = kfold_indices(paper_data.n, 5, SeededRng(0, SeededRng.FOLDS))
    cfg = RsfConfig(tree_count=50, seed=0)

    def median_c(ds):
        scores = []
        for train_idx, test_idx in folds:
            forest = rsf_fit(dataset_split(ds, train_idx), cfg)
            test = dataset_split(ds, test_idx)
            scores.append(harrell_c(forest.risk(test.x), test))
        return np.median(scores)

    assert abs(median_c(paper_data) - median_c(noisy)) < 0.03


def test_errors(paper_data):
    forest = rsf_fit(paper_data, RsfConfig(tree_count=2))
    with pytest.raises(ValueError):
        forest.risk(np.zeros((2, 4)))
    no_events = Dataset.complete(paper_data.x, paper_data.time, np.zeros(paper_data.n, bool))
    with pytest.raises(ValueError, match="event"):
        rsf_fit(no_events)
    with pytest.raises(ValueError):
        rsf_fit(dataset_split(paper_data, range(20)))
    with pytest.raises(ValueError):
        RsfConfig(tree_count=0)


def test_risk_is_sum_of_ensemble_hazard(paper_data):
    forest = RandomSurvivalForest(RsfConfig(tree_count=3, seed=6)).fit(paper_data)
    x = paper_data.x[:5]
    per_tree = np.stack([t.leaf_chf[t.apply(x)] for t in forest.trees])
    assert np.allclose(forest.risk(x), per_tree.mean(axis=0).sum(axis=1))
    assert forest.grid_.size == np.unique(paper_data.time[paper_data.event]).size
