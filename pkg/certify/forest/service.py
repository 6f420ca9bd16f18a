import logging
import math
from multiprocessing import Pool

import numpy as np

from certify.constants import BAGGING_MODES, FULL_BAGGING, GINI_TOLERANCE, MAX_TREE_NODES
from certify.domain import Dataset, Ensemble, Tree
from certify.exceptions import (
    DimensionMismatchError,
    EmptyOverlapError,
    InvalidConfigError,
    TreeSizeError,
)
from certify.utils import derive_seeds

logger = logging.getLogger('mvcert')


def default_max_features(feature_count: int) -> int:
    return max(1, math.ceil(math.sqrt(feature_count)))


def bootstrap_sample(n: int, draw_count: int, seed) -> tuple:
    """
    Draws ``draw_count`` indices uniformly with replacement from range(n).

    Args:
        n (int): Number of samples.
        draw_count (int): Number of draws.
        seed: Integer seed or an existing numpy Generator (consumed in place).

    Returns:
        tuple: (in_bag index array, oob_mask marking indices never drawn)
    """
    if n < 1 or draw_count < 1:
        raise InvalidConfigError("bootstrap needs n >= 1 and draw_count >= 1")
    rng = np.random.default_rng(seed)
    in_bag = rng.integers(0, n, size=draw_count)
    oob_mask = np.bincount(in_bag, minlength=n) == 0
    return in_bag, oob_mask


def _gini(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    proportions = counts / totals[..., np.newaxis]
    return 1.0 - np.sum(proportions * proportions, axis=-1)


def best_split_on_feature(values: np.ndarray, onehot: np.ndarray, parent_gini: float) -> tuple:
    """
    Best Gini gain of a threshold split on one feature.

    Thresholds are midpoints between consecutive distinct sorted values;
    among equal gains the lowest threshold wins.

    Args:
        values (np.ndarray): Feature values of the node's samples.
        onehot (np.ndarray): One-hot labels of the same samples (n x c).
        parent_gini (float): Impurity of the node.

    Returns:
        tuple: (gain, threshold), gain -inf when the feature is constant.
    """
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    distinct = sorted_values[:-1] < sorted_values[1:]
    if not distinct.any():
        return -np.inf, 0.0

    n = values.shape[0]
    left_counts = np.cumsum(onehot[order], axis=0)[:-1]
    right_counts = left_counts[-1] + onehot[order][-1] - left_counts
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    weighted = (n_left * _gini(left_counts, n_left) + n_right * _gini(right_counts, n_right)) / n
    gains = np.where(distinct, parent_gini - weighted, -np.inf)

    position = int(np.argmax(gains))
    low, high = sorted_values[position], sorted_values[position + 1]
    threshold = low + (high - low) / 2.0
    if threshold >= high:
        threshold = low
    return float(gains[position]), float(threshold)


def train_tree(
    data: Dataset,
    in_bag,
    max_features: int,
    seed,
    gini_tolerance: float = GINI_TOLERANCE,
    max_nodes: int = MAX_TREE_NODES,
) -> Tree:
    """
    Grows an unpruned CART tree on the in-bag multiset until leaves are pure.

    Every node visits the features in a fresh random order and scores the first
    ``max_features``; if none of them reduces impurity the remaining features are
    tried one at a time until one does. The best gain wins, ties going to the
    lowest feature index and then the lowest threshold.

    Args:
        data (Dataset): Training data.
        in_bag: Indices (with repetitions) of the training multiset.
        max_features (int): Features scored per node, 1 <= max_features <= d.
        seed: Integer seed or numpy Generator.
        gini_tolerance (float): Gains at or below this count as no gain.
        max_nodes (int): Node cap; exceeding it raises TreeSizeError.

    Returns:
        Tree: Node arrays in preorder, root at 0.
    """
    in_bag = np.asarray(in_bag, dtype=np.int64)
    if in_bag.size == 0:
        raise InvalidConfigError("cannot train a tree on an empty sample")
    d = data.feature_count
    if not 1 <= max_features <= d:
        raise InvalidConfigError(f"max_features {max_features} outside [1, {d}]")

    rng = np.random.default_rng(seed)
    X = data.features[in_bag]
    y = data.labels[in_bag]
    onehot_all = np.eye(data.n_classes)[y]

    feature, threshold, left, right, label = [], [], [], [], []
    # (sample positions, parent node, is_left)
    stack = [(np.arange(in_bag.size), -1, True)]
    while stack:
        positions, parent, is_left = stack.pop()
        node = len(feature)
        if node >= max_nodes:
            raise TreeSizeError(f"tree exceeded {max_nodes} nodes")
        if parent >= 0:
            (left if is_left else right)[parent] = node

        counts = np.bincount(y[positions], minlength=data.n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        label.append(int(np.argmax(counts)))
        if counts.max() == positions.size:
            continue

        parent_gini = float(_gini(counts.astype(np.float64), np.array(float(positions.size))))
        onehot = onehot_all[positions]
        best_gain, best_feature, best_threshold = -np.inf, -1, 0.0
        for rank, f in enumerate(rng.permutation(d)):
            if rank >= max_features and best_gain > gini_tolerance:
                break
            gain, split = best_split_on_feature(X[positions, f], onehot, parent_gini)
            if gain > best_gain or (gain == best_gain and f < best_feature):
                best_gain, best_feature, best_threshold = gain, int(f), split

        if best_gain <= gini_tolerance:
            continue

        goes_left = X[positions, best_feature] <= best_threshold
        feature[node] = best_feature
        threshold[node] = best_threshold
        # right first so the left subtree is numbered next (preorder)
        stack.append((positions[~goes_left], node, False))
        stack.append((positions[goes_left], node, True))

    return Tree(
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        label=label,
        n_features=d,
        n_classes=data.n_classes,
    )


def predict_tree(tree: Tree, X) -> np.ndarray:
    """Routes every row from the root to a leaf (value <= threshold goes left)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.n_features:
        raise DimensionMismatchError(
            f"expected {tree.n_features} features, got shape {X.shape}"
        )
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = tree.feature[node] >= 0
    while active.any():
        current = node[active]
        go_left = X[rows[active], tree.feature[current]] <= tree.threshold[current]
        node[active] = np.where(go_left, tree.left[current], tree.right[current])
        active = tree.feature[node] >= 0
    return tree.label[node]


def draw_count_for(mode: str, n: int) -> int:
    if mode not in BAGGING_MODES:
        raise InvalidConfigError(f"unknown bagging mode {mode!r}")
    return n if mode == FULL_BAGGING else math.ceil(n / 2)


def _train_member(args) -> tuple:
    data, tree_seed, draw_count, max_features = args
    rng = np.random.default_rng(tree_seed)
    in_bag, oob_mask = bootstrap_sample(data.n_samples, draw_count, rng)
    tree = train_tree(data, in_bag, max_features, rng)
    return tree, oob_mask


def train_forest(
    data: Dataset,
    size: int,
    mode: str = FULL_BAGGING,
    seed: int = 0,
    max_features: int = None,
    workers: int = 1,
    dataset_hash: str = "",
) -> Ensemble:
    """
    Trains ``size`` bagged trees and records their out-of-bag masks.

    Tree h draws n (full) or ceil(n/2) (reduced) bootstrap indices from its own
    seed, derived from ``seed``; the result does not depend on ``workers``.

    Args:
        data (Dataset): Training data.
        size (int): Number of trees M >= 2.
        mode (str): "full" or "reduced".
        seed (int): Master seed.
        max_features (int): Features per split, default ceil(sqrt(d)).
        workers (int): Worker processes (1 trains in-process).
        dataset_hash (str): Recorded in the ensemble for later verification.

    Returns:
        Ensemble: Trees, masks and seeds.
    """
    if size < 2:
        raise InvalidConfigError(f"a forest needs at least two trees (got {size})")
    draw_count = draw_count_for(mode, data.n_samples)
    if max_features is None:
        max_features = default_max_features(data.feature_count)
    tree_seeds = derive_seeds(seed, size)
    jobs = [(data, tree_seed, draw_count, max_features) for tree_seed in tree_seeds]

    logger.info(
        "Training %d trees (%s bagging, %d draws of %d samples, %d workers).",
        size, mode, draw_count, data.n_samples, workers,
    )
    if workers > 1:
        with Pool(workers) as pool:
            members = pool.map(_train_member, jobs)
    else:
        members = [_train_member(job) for job in jobs]

    trees = [tree for tree, _ in members]
    oob_masks = np.stack([mask for _, mask in members])
    oob_fraction = oob_masks.mean()
    logger.info(
        "Forest trained: mean out-of-bag fraction %.4f, mean tree size %.1f nodes.",
        oob_fraction, np.mean([tree.node_count for tree in trees]),
    )
    empty = np.flatnonzero(oob_masks.sum(axis=1) == 0)
    if empty.size:
        logger.error("Trees without out-of-bag samples: %s.", empty.tolist())
        raise EmptyOverlapError((int(empty[0]), int(empty[0])))

    return Ensemble(
        trees=trees,
        oob_masks=oob_masks,
        bagging_mode=mode,
        seed=seed,
        tree_seeds=tree_seeds,
        dataset_hash=dataset_hash,
    )
