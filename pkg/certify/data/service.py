import csv
import io
import json
import logging
import math
from pathlib import Path

import numpy as np

from certify.constants import CSV_FORMAT, DATASET_FORMATS, LIBSVM_FORMAT, MISSING_TOKENS
from certify.domain import Dataset, SplitSpec
from certify.exceptions import DatasetParseError, DegenerateDatasetError, InvalidConfigError
from certify.utils import sha256_hex

logger = logging.getLogger('mvcert')


def _decode(text) -> str:
    if isinstance(text, (bytes, bytearray)):
        try:
            return text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DatasetParseError(f"input is not valid UTF-8 ({e.reason})")
    return text


def _parse_number(token: str):
    try:
        value = float(token)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _label_key(token: str):
    """Numeric labels sort before non-numeric ones; "+1" and "1" are the same class."""
    value = _parse_number(token)
    if value is not None:
        return (0, value, "")
    return (1, 0.0, token)


def _remap_labels(tokens: list) -> tuple:
    """
    Maps original label tokens onto 0..c-1 in ascending label order.

    Args:
        tokens (list[str]): One label token per sample.

    Returns:
        tuple: (labels as int64 array, classes tuple of original tokens in remapped order)
    """
    first_token = {}
    for token in tokens:
        first_token.setdefault(_label_key(token), token)
    ordered_keys = sorted(first_token)
    index = {key: position for position, key in enumerate(ordered_keys)}
    labels = np.array([index[_label_key(token)] for token in tokens], dtype=np.int64)
    classes = tuple(first_token[key] for key in ordered_keys)
    return labels, classes


def _build_dataset(features: np.ndarray, tokens: list) -> Dataset:
    labels, classes = _remap_labels(tokens)
    if len(classes) < 2:
        raise DegenerateDatasetError(f"fewer than two classes (found {len(classes)})")
    return Dataset(features=features, labels=labels, n_classes=len(classes), classes=classes)


def parse_libsvm(text) -> Dataset:
    """
    Parses LIBSVM sparse text (``label idx:val ...``, 1-based increasing indices).

    Missing indices are zero; the feature count is the largest index seen.

    Args:
        text (bytes | str): Full file content, UTF-8.

    Returns:
        Dataset: Densified samples with labels remapped to 0..c-1.
    """
    text = _decode(text)
    tokens = []
    rows = []
    feature_count = 0
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        label = parts[0]
        if ":" in label:
            raise DatasetParseError("missing label", line_number)
        row = {}
        previous = 0
        for part in parts[1:]:
            index_token, sep, value_token = part.partition(":")
            if not sep:
                raise DatasetParseError(f"expected idx:val, got {part!r}", line_number)
            try:
                index = int(index_token)
            except ValueError:
                raise DatasetParseError(f"non-integer feature index {index_token!r}", line_number)
            if index < 1:
                raise DatasetParseError(f"feature index {index} is not 1-based", line_number)
            if index <= previous:
                raise DatasetParseError(
                    f"feature indices not strictly increasing ({previous} then {index})", line_number
                )
            value = _parse_number(value_token)
            if value is None:
                raise DatasetParseError(f"non-numeric value {value_token!r}", line_number)
            row[index] = value
            previous = index
        feature_count = max(feature_count, previous)
        tokens.append(label)
        rows.append(row)

    if not rows:
        raise DatasetParseError("no samples in input")
    if feature_count == 0:
        raise DegenerateDatasetError("dataset has no features")

    features = np.zeros((len(rows), feature_count), dtype=np.float64)
    for i, row in enumerate(rows):
        for index, value in row.items():
            features[i, index - 1] = value

    dataset = _build_dataset(features, tokens)
    logger.info(
        "Parsed LIBSVM dataset: %d samples, %d features, %d classes.",
        dataset.n_samples, dataset.feature_count, dataset.n_classes,
    )
    return dataset


def parse_csv(text, label_column: int = -1) -> Dataset:
    """
    Parses a rectangular CSV table with one label column.

    A first row whose feature cells are not all numeric is taken as a header.
    Rows with missing entries are dropped (logged as a warning).

    Args:
        text (bytes | str): Full file content, UTF-8.
        label_column (int): Index of the label column; negative counts from the end.

    Returns:
        Dataset: Samples with labels remapped to 0..c-1.
    """
    text = _decode(text)
    records = [
        (line_number, row)
        for line_number, row in enumerate(csv.reader(io.StringIO(text)), start=1)
        if row and any(cell.strip() for cell in row)
    ]
    if not records:
        raise DatasetParseError("empty file")

    width = len(records[0][1])
    if width < 2:
        raise DegenerateDatasetError("a CSV dataset needs a label column and at least one feature")
    column = label_column + width if label_column < 0 else label_column
    if not 0 <= column < width:
        raise InvalidConfigError(f"label column {label_column} outside a table of {width} columns")

    first_line, first_row = records[0]
    first_features = [cell.strip() for j, cell in enumerate(first_row) if j != column]
    if any(
        _parse_number(cell) is None and cell not in MISSING_TOKENS
        for cell in first_features
    ):
        logger.debug("CSV header detected on line %d.", first_line)
        records = records[1:]

    tokens = []
    rows = []
    dropped = 0
    for line_number, row in records:
        if len(row) != width:
            raise DatasetParseError(f"ragged row: {len(row)} columns, expected {width}", line_number)
        cells = [cell.strip() for cell in row]
        if any(cell in MISSING_TOKENS for cell in cells):
            dropped += 1
            continue
        values = []
        for j, cell in enumerate(cells):
            if j == column:
                continue
            value = _parse_number(cell)
            if value is None:
                raise DatasetParseError(f"non-numeric value {cell!r}", line_number)
            values.append(value)
        tokens.append(cells[column])
        rows.append(values)

    if dropped:
        logger.warning("Dropped %d CSV rows with missing entries.", dropped)
    if not rows:
        raise DatasetParseError("no samples in input")

    dataset = _build_dataset(np.array(rows, dtype=np.float64), tokens)
    logger.info(
        "Parsed CSV dataset: %d samples, %d features, %d classes.",
        dataset.n_samples, dataset.feature_count, dataset.n_classes,
    )
    return dataset


def _label_token(data: Dataset, label: int) -> str:
    return str(data.classes[label]) if data.classes else str(label)


def to_libsvm(data: Dataset) -> str:
    """Serializes to LIBSVM text; the last feature is always written so d survives."""
    last = data.feature_count - 1
    lines = []
    for row, label in zip(data.features, data.labels):
        cells = [_label_token(data, label)]
        for j, value in enumerate(row):
            if value != 0.0 or j == last:
                cells.append(f"{j + 1}:{float(value)!r}")
        lines.append(" ".join(cells))
    return "\n".join(lines) + "\n"


def to_csv(data: Dataset) -> str:
    """Serializes to header-less CSV with the label in the last column."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row, label in zip(data.features, data.labels):
        writer.writerow([repr(float(value)) for value in row] + [_label_token(data, label)])
    return buffer.getvalue()


def dataset_hash(data: Dataset) -> str:
    """sha256 over shapes, feature bytes, labels and the class map."""
    return sha256_hex(
        json.dumps([data.n_samples, data.feature_count, data.n_classes]),
        np.ascontiguousarray(data.features, dtype="<f8").tobytes(),
        np.ascontiguousarray(data.labels, dtype="<i8").tobytes(),
        json.dumps([str(token) for token in data.classes]),
    )


def load_dataset(path, fmt: str = LIBSVM_FORMAT, label_column: int = -1) -> Dataset:
    """
    Reads and parses a dataset file.

    Args:
        path: File path.
        fmt (str): "libsvm" or "csv".
        label_column (int): Label column for CSV input.

    Returns:
        Dataset: The parsed dataset.
    """
    if fmt not in DATASET_FORMATS:
        raise InvalidConfigError(f"unknown dataset format {fmt!r}")
    path = Path(path)
    logger.info("Loading %s dataset from %s.", fmt, path)
    content = path.read_bytes()
    if fmt == CSV_FORMAT:
        return parse_csv(content, label_column=label_column)
    return parse_libsvm(content)


def subset(data: Dataset, indices) -> Dataset:
    return data.subset(indices)


def stratified_counts(class_counts, fraction: float) -> np.ndarray:
    """
    Per-class sample counts for a stratified selection of ``fraction`` of the data.

    The total is round(N * fraction); each class gets the floor of its exact share
    and the remainder goes to the largest fractional parts (ties to the lower class).

    Args:
        class_counts: Samples per class.
        fraction (float): Share to select.

    Returns:
        np.ndarray: Selected samples per class.
    """
    class_counts = np.asarray(class_counts, dtype=np.int64)
    exact = class_counts * fraction
    counts = np.floor(exact).astype(np.int64)
    total = int(math.floor(class_counts.sum() * fraction + 0.5))
    remainder = total - int(counts.sum())
    if remainder > 0:
        # stable sort keeps the lower class first among equal fractional parts
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:remainder]] += 1
    return counts


def _stratified_indices(labels: np.ndarray, n_classes: int, fraction: float, seed: int) -> tuple:
    rng = np.random.default_rng(seed)
    counts = stratified_counts(np.bincount(labels, minlength=n_classes), fraction)
    selected = []
    rest = []
    for k in range(n_classes):
        members = rng.permutation(np.flatnonzero(labels == k))
        selected.append(members[:counts[k]])
        rest.append(members[counts[k]:])
    return np.sort(np.concatenate(selected)), np.sort(np.concatenate(rest))


def stratified_split(data: Dataset, spec: SplitSpec) -> tuple:
    """
    Splits into (train, test) with per-class test shares of ``spec.test_fraction``.

    Args:
        data (Dataset): Dataset to split.
        spec (SplitSpec): Fraction and seed.

    Returns:
        tuple[Dataset, Dataset]: Train and test sets, disjoint, each in original row order.
    """
    class_counts = data.class_counts()
    singletons = [k for k in range(data.n_classes) if 0 < class_counts[k] < 2]
    if singletons or np.count_nonzero(class_counts) < 2:
        raise DegenerateDatasetError(
            "every class needs at least two samples for a stratified split"
        )
    test_idx, train_idx = _stratified_indices(data.labels, data.n_classes, spec.test_fraction, spec.seed)
    if test_idx.size == 0 or train_idx.size == 0:
        raise DegenerateDatasetError(
            f"test fraction {spec.test_fraction} leaves an empty part of {data.n_samples} samples"
        )
    logger.info("Stratified split: %d train, %d test samples.", train_idx.size, test_idx.size)
    return data.subset(train_idx), data.subset(test_idx)


def split_unlabeled(data: Dataset, r: float, seed: int) -> tuple:
    """
    Keeps a stratified fraction ``r`` of the labels and strips the rest.

    Args:
        data (Dataset): Labeled data.
        r (float): Labeled fraction in (0, 1].
        seed (int): Selection seed.

    Returns:
        tuple[Dataset, np.ndarray]: The labeled part and the unlabeled feature matrix.
    """
    if not 0.0 < r <= 1.0:
        raise InvalidConfigError(f"labeled fraction {r} outside (0, 1]")
    if r == 1.0:
        return data, np.empty((0, data.feature_count), dtype=np.float64)
    labeled_idx, unlabeled_idx = _stratified_indices(data.labels, data.n_classes, r, seed)
    if labeled_idx.size == 0:
        raise DegenerateDatasetError(f"labeled fraction {r} selects no samples")
    logger.info("Kept %d labeled and %d unlabeled samples.", labeled_idx.size, unlabeled_idx.size)
    return data.subset(labeled_idx), data.features[unlabeled_idx]
