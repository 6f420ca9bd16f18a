import numpy as np
import pytest

from certify.data.synthetic import make_blobs_dataset
from certify.domain import Dataset, Tree
from certify.exceptions import (
    DimensionMismatchError,
    EmptyOverlapError,
    InvalidConfigError,
)
from certify.forest.document import ensemble_to_document
from certify.forest.service import (
    bootstrap_sample,
    default_max_features,
    predict_tree,
    train_forest,
    train_tree,
)
from certify.utils import derive_seeds


def gini(labels, n_classes):
    if not labels:
        return 0.0
    return 1.0 - sum((labels.count(k) / len(labels)) ** 2 for k in range(n_classes))


def split_gain(left, right, n_classes):
    total = len(left) + len(right)
    weighted = (len(left) * gini(left, n_classes) + len(right) * gini(right, n_classes)) / total
    return gini(left + right, n_classes) - weighted


def brute_force_root_split(X, y, n_classes):
    """Exhaustive search over every feature and midpoint, lowest feature then threshold on ties."""
    labels = list(y)
    best = (-np.inf, None, None)
    for f in range(X.shape[1]):
        values = sorted(set(X[:, f].tolist()))
        for low, high in zip(values, values[1:]):
            threshold = (low + high) / 2
            left = [labels[i] for i in range(len(labels)) if X[i, f] <= threshold]
            right = [labels[i] for i in range(len(labels)) if X[i, f] > threshold]
            gain = split_gain(left, right, n_classes)
            if gain > best[0] + 1e-12:
                best = (gain, f, threshold)
    return best


class TestBootstrapSample:

    def test_single_index_always_drawn(self):
        in_bag, oob_mask = bootstrap_sample(1, 5, seed=0)
        assert in_bag.tolist() == [0] * 5
        assert not oob_mask.any()

    @pytest.mark.parametrize(
        "draws, expected", [(10_000, np.exp(-1.0)), (5_000, np.exp(-0.5))]
    )
    def test_oob_fraction_limit(self, draws, expected):
        _, oob_mask = bootstrap_sample(10_000, draws, seed=3)
        assert oob_mask.mean() == pytest.approx(expected, abs=0.02)

    def test_mask_marks_exactly_the_undrawn_indices(self):
        in_bag, oob_mask = bootstrap_sample(50, 50, seed=9)
        assert set(in_bag.tolist()) == set(np.flatnonzero(~oob_mask).tolist())

    def test_deterministic_given_seed(self):
        first = bootstrap_sample(100, 100, seed=42)
        second = bootstrap_sample(100, 100, seed=42)
        np.testing.assert_array_equal(first[0], second[0])
        np.testing.assert_array_equal(first[1], second[1])

    def test_rejects_empty_draw(self):
        with pytest.raises(InvalidConfigError):
            bootstrap_sample(10, 0, seed=0)


class TestTrainTree:

    def test_single_class_is_one_leaf(self):
        data = Dataset(features=[[0.0], [1.0], [2.0]], labels=[1, 1, 1], n_classes=2)
        tree = train_tree(data, [0, 1, 2], max_features=1, seed=0)
        assert tree.node_count == 1
        assert tree.label[0] == 1

    def test_separable_points_split_once(self):
        data = Dataset(features=[[0.0], [1.0]], labels=[0, 1], n_classes=2)
        tree = train_tree(data, [0, 1], max_features=1, seed=0)
        assert tree.node_count == 3
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 0.5
        np.testing.assert_array_equal(predict_tree(tree, data.features), [0, 1])

    def test_conflicting_duplicates_take_majority(self):
        data = Dataset(features=[[1.0, 2.0]] * 3, labels=[0, 1, 1], n_classes=2)
        tree = train_tree(data, [0, 1, 2], max_features=2, seed=0)
        assert tree.node_count == 1
        assert tree.label[0] == 1

    def test_majority_tie_goes_to_lowest_label(self):
        data = Dataset(features=[[1.0], [1.0]], labels=[1, 0], n_classes=3)
        tree = train_tree(data, [0, 1], max_features=1, seed=0)
        assert tree.label[0] == 0

    def test_multiset_weights_the_majority(self):
        data = Dataset(features=[[1.0], [1.0]], labels=[0, 1], n_classes=2)
        tree = train_tree(data, [0, 1, 1], max_features=1, seed=0)
        assert tree.label[0] == 1

    @pytest.mark.parametrize("seed", range(10))
    def test_root_matches_exhaustive_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(8, 3))
        y = rng.integers(0, 2, size=8)
        y[:2] = [0, 1]
        data = Dataset(features=X, labels=y, n_classes=2)
        tree = train_tree(data, np.arange(8), max_features=3, seed=seed)
        best_gain, _, _ = brute_force_root_split(X, y, 2)
        goes_left = X[:, tree.feature[0]] <= tree.threshold[0]
        assert 0 < goes_left.sum() < 8
        root_gain = split_gain(y[goes_left].tolist(), y[~goes_left].tolist(), 2)
        assert root_gain == pytest.approx(best_gain, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_equal_gains_go_to_lowest_feature(self, seed):
        """Identical columns give identical gains whatever order they are visited in."""
        column = np.array([0.0, 1.0, 2.0, 3.0])
        data = Dataset(features=np.column_stack([column, column, column]), labels=[0, 0, 1, 1], n_classes=2)
        tree = train_tree(data, np.arange(4), max_features=3, seed=seed)
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 1.5

    def test_distinct_points_give_zero_training_error(self):
        data = make_blobs_dataset(200, 4, n_classes=3, separation=0.5, seed=5)
        tree = train_tree(data, np.arange(200), max_features=default_max_features(4), seed=1)
        np.testing.assert_array_equal(predict_tree(tree, data.features), data.labels)

    def test_leaves_are_pure_on_bootstrap_multiset(self):
        data = make_blobs_dataset(150, 3, seed=2)
        in_bag, _ = bootstrap_sample(150, 150, seed=8)
        tree = train_tree(data, in_bag, max_features=2, seed=8)
        np.testing.assert_array_equal(
            predict_tree(tree, data.features[in_bag]), data.labels[in_bag]
        )

    def test_preorder_children_follow_parents(self):
        data = make_blobs_dataset(100, 2, seed=6)
        tree = train_tree(data, np.arange(100), max_features=1, seed=6)
        internal = np.flatnonzero(tree.feature >= 0)
        assert np.all(tree.left[internal] == internal + 1)
        assert np.all(tree.right[internal] > tree.left[internal])

    def test_rejects_bad_max_features(self):
        data = Dataset(features=[[0.0], [1.0]], labels=[0, 1], n_classes=2)
        with pytest.raises(InvalidConfigError):
            train_tree(data, [0, 1], max_features=2, seed=0)


class TestPredictTree:

    def setup_method(self):
        self.stump = Tree(
            feature=[0, -1, -1],
            threshold=[0.5, 0.0, 0.0],
            left=[1, -1, -1],
            right=[2, -1, -1],
            label=[0, 0, 1],
            n_features=1,
            n_classes=2,
        )

    def test_hand_routed_labels(self):
        """0.5 sits on the threshold and goes left."""
        np.testing.assert_array_equal(predict_tree(self.stump, [[0.5], [0.7], [-3.0]]), [0, 1, 0])

    def test_pure_leaf_is_constant(self):
        leaf = Tree(feature=[-1], threshold=[0.0], left=[-1], right=[-1], label=[1], n_features=2, n_classes=2)
        np.testing.assert_array_equal(predict_tree(leaf, np.zeros((4, 2))), [1, 1, 1, 1])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            predict_tree(self.stump, np.zeros((2, 3)))


class TestTrainForest:

    def setup_method(self):
        self.data = make_blobs_dataset(120, 4, seed=1)

    def test_small_forest_bookkeeping(self):
        """Masks must match the bootstrap draws regenerated from the recorded seeds."""
        data = Dataset(features=[[0.0], [1.0], [2.0], [3.0]], labels=[0, 1, 0, 1], n_classes=2)
        for seed in range(30):
            try:
                ensemble = train_forest(data, 2, "full", seed=seed)
            except EmptyOverlapError:
                continue
            break
        else:
            pytest.fail("no seed produced two trees with out-of-bag samples")

        assert ensemble.size == 2
        assert list(ensemble.tree_seeds) == derive_seeds(seed, 2)
        for tree_seed, mask in zip(ensemble.tree_seeds, ensemble.oob_masks):
            _, expected = bootstrap_sample(4, 4, np.random.default_rng(tree_seed))
            np.testing.assert_array_equal(mask, expected)

    def test_deterministic_given_seed(self):
        first = train_forest(self.data, 5, "full", seed=7)
        second = train_forest(self.data, 5, "full", seed=7)
        assert ensemble_to_document(first) == ensemble_to_document(second)

    def test_workers_do_not_change_the_result(self):
        serial = train_forest(self.data, 4, "reduced", seed=3, workers=1)
        parallel = train_forest(self.data, 4, "reduced", seed=3, workers=2)
        assert ensemble_to_document(serial) == ensemble_to_document(parallel)

    @pytest.mark.parametrize("mode, low, high", [("full", 0.33, 0.40), ("reduced", 0.57, 0.64)])
    def test_mean_oob_fraction(self, mode, low, high):
        data = make_blobs_dataset(2000, 2, seed=0)
        ensemble = train_forest(data, 5, mode, seed=0)
        assert low <= ensemble.oob_masks.mean() <= high

    def test_needs_two_trees(self):
        with pytest.raises(InvalidConfigError):
            train_forest(self.data, 1)

    def test_unknown_mode(self):
        with pytest.raises(InvalidConfigError):
            train_forest(self.data, 3, "half")

    def test_empty_oob_names_the_tree(self):
        data = Dataset(features=[[0.0]], labels=[0], n_classes=2)
        with pytest.raises(EmptyOverlapError) as excinfo:
            train_forest(data, 2)
        assert excinfo.value.pair == (0, 0)
        assert "reduced bagging" in str(excinfo.value)

    def test_default_max_features(self):
        assert [default_max_features(d) for d in (1, 4, 5, 100)] == [1, 2, 3, 10]

    def test_members_fit_their_bags(self):
        ensemble = train_forest(self.data, 3, "full", seed=4)
        for tree, tree_seed in zip(ensemble.trees, ensemble.tree_seeds):
            in_bag, _ = bootstrap_sample(120, 120, np.random.default_rng(tree_seed))
            predictions = predict_tree(tree, self.data.features[in_bag])
            assert np.all(predictions == self.data.labels[in_bag])


def test_brute_force_helper_on_known_split():
    X = np.array([[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 6.0]])
    y = np.array([0, 0, 1, 1])
    gain, feature, threshold = brute_force_root_split(X, y, 2)
    assert (feature, threshold) == (0, 1.5)
    assert gain == pytest.approx(0.5)
