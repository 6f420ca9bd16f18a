"""Versioned JSON documents for trained ensembles."""
import logging
from pathlib import Path

import jsonschema
import numpy as np

from certify.constants import ARTIFACT_VERSION, BAGGING_MODES, DOCUMENT_VERSION
from certify.domain import Ensemble, Tree
from certify.exceptions import EnsembleDocumentError
from certify.utils import canonical_json, read_json, sha256_hex, to_jsonable, write_json

logger = logging.getLogger('mvcert')

_INT_ARRAY = {"type": "array", "items": {"type": "integer"}}

ENSEMBLE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "version", "bagging_mode", "seed", "n_features", "n_classes",
        "n_samples", "dataset_hash", "trees",
    ],
    "properties": {
        "version": {"const": DOCUMENT_VERSION},
        "artifact_version": {"type": "string"},
        "bagging_mode": {"enum": list(BAGGING_MODES)},
        "seed": {"type": "integer"},
        "n_features": {"type": "integer", "minimum": 1},
        "n_classes": {"type": "integer", "minimum": 2},
        "n_samples": {"type": "integer", "minimum": 1},
        "dataset_hash": {"type": "string"},
        "metadata": {"type": "object"},
        "trees": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["seed", "feature", "threshold", "left", "right", "label", "oob"],
                "properties": {
                    "seed": {"type": "integer", "minimum": 0},
                    "feature": _INT_ARRAY,
                    "threshold": {"type": "array", "items": {"type": "number"}},
                    "left": _INT_ARRAY,
                    "right": _INT_ARRAY,
                    "label": _INT_ARRAY,
                    "oob": {"type": "string", "pattern": "^[01]*$"},
                },
                "additionalProperties": False,
            },
        },
    },
}


def _mask_to_bits(mask: np.ndarray) -> str:
    return "".join("1" if flag else "0" for flag in mask)


def _bits_to_mask(bits: str) -> np.ndarray:
    return np.frombuffer(bits.encode("ascii"), dtype=np.uint8) == ord("1")


def ensemble_to_document(ensemble: Ensemble, metadata: dict = None) -> dict:
    """
    Builds the JSON document of an ensemble.

    Args:
        ensemble (Ensemble): Trained ensemble.
        metadata (dict): Free-form run details, e.g. the split that produced the training set.

    Returns:
        dict: Plain JSON-compatible document.
    """
    seeds = ensemble.tree_seeds or (0,) * ensemble.size
    document = {
        "version": DOCUMENT_VERSION,
        "artifact_version": ARTIFACT_VERSION,
        "bagging_mode": ensemble.bagging_mode,
        "seed": int(ensemble.seed),
        "n_features": ensemble.n_features,
        "n_classes": ensemble.n_classes,
        "n_samples": ensemble.n_samples,
        "dataset_hash": ensemble.dataset_hash,
        "trees": [
            {
                "seed": int(tree_seed),
                "feature": tree.feature,
                "threshold": tree.threshold,
                "left": tree.left,
                "right": tree.right,
                "label": tree.label,
                "oob": _mask_to_bits(mask),
            }
            for tree, mask, tree_seed in zip(ensemble.trees, ensemble.oob_masks, seeds)
        ],
    }
    if metadata:
        document["metadata"] = metadata
    return to_jsonable(document)


def _check_tree(position: int, node: dict, n_features: int, n_classes: int, n_samples: int):
    sizes = {len(node[key]) for key in ("feature", "threshold", "left", "right", "label")}
    if len(sizes) != 1 or 0 in sizes:
        raise EnsembleDocumentError(f"tree {position}: node arrays differ in length or are empty")
    count = sizes.pop()
    feature = np.asarray(node["feature"])
    left = np.asarray(node["left"])
    right = np.asarray(node["right"])
    labels = np.asarray(node["label"])
    if feature.min() < -1 or feature.max() >= n_features:
        raise EnsembleDocumentError(f"tree {position}: feature index outside [-1, {n_features - 1}]")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise EnsembleDocumentError(f"tree {position}: leaf label outside [0, {n_classes - 1}]")
    internal = feature >= 0
    parents = np.flatnonzero(internal)
    if np.any(left[internal] <= parents) or np.any(right[internal] <= parents):
        raise EnsembleDocumentError(f"tree {position}: children must follow their parent (preorder)")
    if np.any(left[internal] >= count) or np.any(right[internal] >= count):
        raise EnsembleDocumentError(f"tree {position}: child index outside the node array")
    if np.any(left[~internal] != -1) or np.any(right[~internal] != -1):
        raise EnsembleDocumentError(f"tree {position}: leaves must have no children")
    if len(node["oob"]) != n_samples:
        raise EnsembleDocumentError(
            f"tree {position}: out-of-bag mask has {len(node['oob'])} entries, expected {n_samples}"
        )


def ensemble_from_document(document: dict) -> tuple:
    """
    Validates a document against the schema and rebuilds the ensemble.

    Args:
        document (dict): Parsed JSON document.

    Returns:
        tuple: (Ensemble, metadata dict)
    """
    try:
        jsonschema.validate(instance=document, schema=ENSEMBLE_SCHEMA)
    except jsonschema.ValidationError as e:
        location = "/".join(str(part) for part in e.absolute_path) or "document"
        raise EnsembleDocumentError(f"{location}: {e.message}")

    n_features = document["n_features"]
    n_classes = document["n_classes"]
    n_samples = document["n_samples"]
    trees = []
    masks = []
    for position, node in enumerate(document["trees"]):
        _check_tree(position, node, n_features, n_classes, n_samples)
        trees.append(
            Tree(
                feature=node["feature"],
                threshold=node["threshold"],
                left=node["left"],
                right=node["right"],
                label=node["label"],
                n_features=n_features,
                n_classes=n_classes,
            )
        )
        masks.append(_bits_to_mask(node["oob"]))

    ensemble = Ensemble(
        trees=trees,
        oob_masks=np.stack(masks),
        bagging_mode=document["bagging_mode"],
        seed=document["seed"],
        tree_seeds=[node["seed"] for node in document["trees"]],
        dataset_hash=document["dataset_hash"],
    )
    return ensemble, document.get("metadata", {})


def ensemble_hash(ensemble: Ensemble) -> str:
    """sha256 of the canonical document (metadata excluded)."""
    return sha256_hex(canonical_json(ensemble_to_document(ensemble)))


def save_ensemble(ensemble: Ensemble, path, metadata: dict = None) -> Path:
    path = write_json(path, ensemble_to_document(ensemble, metadata))
    logger.info("Saved ensemble of %d trees to %s.", ensemble.size, path)
    return path


def load_ensemble(path) -> tuple:
    """Reads an ensemble document; returns (Ensemble, metadata)."""
    try:
        document = read_json(path)
    except ValueError as e:
        raise EnsembleDocumentError(f"{path} is not valid JSON ({e})")
    ensemble, metadata = ensemble_from_document(document)
    logger.info("Loaded ensemble of %d trees from %s.", ensemble.size, path)
    return ensemble, metadata
