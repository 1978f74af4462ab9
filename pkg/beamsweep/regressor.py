"""Multi-output gradient-boosted regression trees over 2-D locations.

Every output is boosted independently with squared-error loss and shared
hyperparameters, while one parameter budget covers the whole ensemble.
Parameters are counted as 2 per internal node (feature id and threshold),
1 per leaf and 1 per output base prediction.
"""

import collections
import dataclasses
import enum
import itertools
import logging

import numpy as np
from tqdm import tqdm

from . import errors, storage
from .dataset import assign_folds

__all__ = [
    "ModelRole",
    "TrainConfig",
    "TreeEnsembleModel",
    "role_budget",
    "hyperparameter_grid",
    "train",
    "predict",
    "param_count",
    "kfold_tune",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

# Splits must reduce the squared error by more than this to be kept.
MIN_GAIN = 1e-12
PREDICT_CHUNK = 512
UE_BUDGET_FACTOR = 2
BS_BUDGET_FACTOR = 30


class ModelRole(enum.Enum):
    COUPLED = "coupled"
    DECOUPLED_F = "decoupled-f"
    DECOUPLED_W = "decoupled-w"
    LOCATION_FREE_W = "location-free-w"

    @property
    def on_ue(self):
        return self in (ModelRole.DECOUPLED_W, ModelRole.LOCATION_FREE_W)


def role_budget(role, num_pairs):
    """UE models get 2|B| parameters; BS models 30 times that."""
    budget = UE_BUDGET_FACTOR * num_pairs
    return budget if role.on_ue else BS_BUDGET_FACTOR * budget


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    tree_count: int = 100
    max_depth: int = 2
    learning_rate: float = 0.5
    min_samples_leaf: int = 2
    budget_parameters: int = 2048
    loss: str = "squared_error"

    def __post_init__(self):
        if self.loss != "squared_error":
            raise errors.ConfigError(f"Unsupported loss: {self.loss}")
        if not 0 < self.learning_rate <= 1:
            raise errors.ConfigError("learning_rate must lie in (0, 1].")
        if self.max_depth < 1 or self.tree_count < 0 or self.min_samples_leaf < 1:
            raise errors.ConfigError(
                "max_depth and min_samples_leaf must be positive, tree_count non-negative."
            )


def hyperparameter_grid(grid, budget_parameters):
    """Expand `{name: [values...]}` into TrainConfigs in row-major grid order."""
    names = list(grid)
    return [
        TrainConfig(budget_parameters=budget_parameters, **dict(zip(names, values)))
        for values in itertools.product(*(grid[name] for name in names))
    ]


@dataclasses.dataclass(frozen=True, eq=False)
class TreeEnsembleModel:
    role: ModelRole
    learning_rate: float
    max_depth: int
    base: np.ndarray
    # Packed nodes of every tree; feature -1 marks a leaf.
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    tree_outputs: np.ndarray
    # Training MSE per output after 0, 1, ... boosting rounds.
    train_loss: np.ndarray
    budget_parameters: int = 0

    @property
    def output_dimension(self):
        return len(self.base)

    @property
    def tree_count(self):
        return len(self.roots)

    def predict_many(self, locations):
        locations = np.asarray(locations, dtype=float).reshape(-1, 2)
        out = np.tile(self.base, (len(locations), 1))
        for start in range(0, len(locations), PREDICT_CHUNK):
            chunk = locations[start : start + PREDICT_CHUNK]
            out[start : start + len(chunk)] += self._tree_sum(chunk)
        return np.clip(out, 0.0, 1.0)

    def _tree_sum(self, points):
        total = np.zeros((self.output_dimension, len(points)))
        if not self.tree_count:
            return total.T
        columns = np.arange(len(points))
        node = np.repeat(self.roots[:, None], len(points), axis=1)
        for _ in range(self.max_depth):
            feature = self.feature[node]
            internal = feature >= 0
            if not internal.any():
                break
            coordinate = points.T[np.maximum(feature, 0), columns]
            child = np.where(
                coordinate <= self.threshold[node], self.left[node], self.right[node]
            )
            node = np.where(internal, child, node)
        np.add.at(total, self.tree_outputs, self.learning_rate * self.value[node])
        return total.T

    def tree_depths(self):
        depths = []
        for root in self.roots:
            deepest = 0
            stack = [(int(root), 0)]
            while stack:
                node, depth = stack.pop()
                deepest = max(deepest, depth)
                if self.feature[node] >= 0:
                    stack.append((int(self.left[node]), depth + 1))
                    stack.append((int(self.right[node]), depth + 1))
            depths.append(deepest)
        return depths

    def depth_histogram(self):
        return dict(sorted(collections.Counter(self.tree_depths()).items()))


def predict(model, location):
    return model.predict_many(np.asarray(location, dtype=float).reshape(1, 2))[0]


def param_count(model):
    internal = int(np.count_nonzero(model.feature >= 0))
    leaves = len(model.feature) - internal
    return 2 * internal + leaves + model.output_dimension


def _best_split(inputs, residual, mask, orders, min_samples_leaf):
    count = int(mask.sum())
    total = residual[mask].sum()
    best_gain = MIN_GAIN
    best = None
    for feature, order in enumerate(orders):
        index = order[mask[order]]
        values = inputs[index, feature]
        left_sum = np.cumsum(residual[index])[:-1]
        left_count = np.arange(1, count)
        right_count = count - left_count
        valid = (
            (values[:-1] < values[1:])
            & (left_count >= min_samples_leaf)
            & (right_count >= min_samples_leaf)
        )
        if not valid.any():
            continue
        gain = (
            left_sum**2 / left_count
            + (total - left_sum) ** 2 / right_count
            - total**2 / count
        )
        gain = np.where(valid, gain, -np.inf)
        position = int(np.argmax(gain))
        # Strictly greater: the lower feature index keeps ties.
        if gain[position] > best_gain:
            best_gain = gain[position]
            best = feature, (values[position] + values[position + 1]) / 2
    return best


def _fit_tree(inputs, residual, orders, config):
    """Fit one depth-limited tree; None if it would be a lone leaf."""
    nodes = []
    fitted = np.zeros(len(residual))

    def grow(mask, depth):
        position = len(nodes)
        nodes.append(None)
        split = None
        if depth < config.max_depth and mask.sum() >= 2 * config.min_samples_leaf:
            split = _best_split(inputs, residual, mask, orders, config.min_samples_leaf)
        if split is None:
            value = residual[mask].mean()
            nodes[position] = (-1, 0.0, -1, -1, value)
            fitted[mask] = value
            return position
        feature, threshold = split
        goes_left = inputs[:, feature] <= threshold
        left = grow(mask & goes_left, depth + 1)
        right = grow(mask & ~goes_left, depth + 1)
        nodes[position] = (feature, threshold, left, right, 0.0)
        return position

    grow(np.ones(len(residual), dtype=bool), 0)
    if len(nodes) == 1:
        return None, None
    return nodes, fitted


def _tree_cost(nodes):
    return sum(2 if node[0] >= 0 else 1 for node in nodes)


def train(inputs, targets, config, role=ModelRole.COUPLED, progress=False):
    """Boost one ensemble per target column under a global parameter budget.

    Each round fits one tree per output to the current residuals. Training
    stops at the first tree that would exceed the budget, keeping the trees
    of that round accepted so far, or when no output can be improved.
    """
    inputs = np.asarray(inputs, dtype=float).reshape(-1, 2)
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    if len(inputs) == 0:
        raise errors.TrainingError("No training data.")
    if len(inputs) != len(targets):
        raise errors.TrainingError(
            f"{len(inputs)} locations but {len(targets)} target rows."
        )
    if len(inputs) < config.min_samples_leaf:
        raise errors.TrainingError("Fewer training rows than min_samples_leaf.")
    if not (np.all(np.isfinite(inputs)) and np.all((targets >= 0) & (targets <= 1))):
        raise errors.TrainingError("Locations must be finite and targets within [0, 1].")
    dimension = targets.shape[1]
    if dimension > config.budget_parameters:
        raise errors.BudgetError(
            f"Budget of {config.budget_parameters} parameters cannot hold "
            f"{dimension} base predictions."
        )

    # Canonical row order makes the fit independent of the input order.
    canonical = np.lexsort(np.vstack([targets.T[::-1], inputs[:, 1], inputs[:, 0]]))
    inputs, targets = inputs[canonical], targets[canonical]
    orders = [np.argsort(inputs[:, feature], kind="stable") for feature in range(2)]

    base = targets.mean(axis=0)
    prediction = np.tile(base, (len(inputs), 1))
    losses = [np.mean((targets - prediction) ** 2, axis=0)]
    trees = []
    parameters = dimension
    exhausted = False
    for round_index in tqdm(range(config.tree_count), desc=role.value, disable=not progress):
        round_trees = []
        update = np.zeros_like(prediction)
        for output in range(dimension):
            nodes, fitted = _fit_tree(
                inputs, targets[:, output] - prediction[:, output], orders, config
            )
            if nodes is None:
                continue
            cost = _tree_cost(nodes)
            if parameters + cost > config.budget_parameters:
                logger.debug(
                    "%s: budget of %d parameters reached in round %d.",
                    role.value,
                    config.budget_parameters,
                    round_index,
                )
                exhausted = True
                break
            parameters += cost
            round_trees.append((output, nodes))
            update[:, output] = fitted
        if round_trees:
            prediction += config.learning_rate * update
            losses.append(np.mean((targets - prediction) ** 2, axis=0))
            trees.extend(round_trees)
        if exhausted or not round_trees:
            break

    return _pack(role, config, base, trees, np.array(losses))


def _pack(role, config, base, trees, losses):
    feature, threshold, left, right, value = [], [], [], [], []
    roots, tree_outputs = [], []
    for output, nodes in trees:
        offset = len(feature)
        roots.append(offset)
        tree_outputs.append(output)
        for node_feature, node_threshold, node_left, node_right, node_value in nodes:
            internal = node_feature >= 0
            feature.append(node_feature)
            threshold.append(node_threshold)
            left.append(node_left + offset if internal else -1)
            right.append(node_right + offset if internal else -1)
            value.append(node_value)
    return TreeEnsembleModel(
        role=role,
        learning_rate=config.learning_rate,
        max_depth=config.max_depth,
        base=np.asarray(base, dtype=float),
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float),
        roots=np.array(roots, dtype=np.int64),
        tree_outputs=np.array(tree_outputs, dtype=np.int64),
        train_loss=losses,
        budget_parameters=config.budget_parameters,
    )


def kfold_tune(locations, targets, grid, folds=10, seed=0, *, fold_assignments=None):
    """Return the grid point with the lowest mean validation MSE across folds.

    Ties go to the smaller mean parameter count, then to the earlier grid point.
    """
    grid = list(grid)
    if not grid:
        raise errors.TrainingError("Hyperparameter grid is empty.")
    if len(grid) == 1:
        return grid[0]
    locations = np.asarray(locations, dtype=float).reshape(-1, 2)
    targets = np.asarray(targets, dtype=float)
    if fold_assignments is None:
        fold_assignments = assign_folds(len(locations), folds, seed)
    fold_ids = np.unique(fold_assignments)

    best_score = None
    best_config = None
    for position, config in enumerate(grid):
        fold_errors = []
        fold_params = []
        for fold in fold_ids:
            held_out = fold_assignments == fold
            model = train(locations[~held_out], targets[~held_out], config)
            prediction = model.predict_many(locations[held_out])
            fold_errors.append(np.mean((prediction - targets[held_out]) ** 2))
            fold_params.append(param_count(model))
        score = (float(np.mean(fold_errors)), float(np.mean(fold_params)), position)
        logger.info(
            "Grid point %d %s: validation MSE %.6g, %.0f parameters.",
            position,
            config,
            score[0],
            score[1],
        )
        if best_score is None or score < best_score:
            best_score, best_config = score, config
    return best_config


def save_model(path, model):
    storage.write_arrays(
        path,
        "model",
        {
            name: getattr(model, name)
            for name in (
                "base",
                "feature",
                "threshold",
                "left",
                "right",
                "value",
                "roots",
                "tree_outputs",
                "train_loss",
            )
        },
        attrs={
            "role": model.role.value,
            "learning_rate": model.learning_rate,
            "max_depth": model.max_depth,
            "budget_parameters": model.budget_parameters,
        },
    )


def load_model(path):
    arrays, attrs = storage.read_arrays(path, "model")
    return TreeEnsembleModel(
        role=ModelRole(attrs["role"]),
        learning_rate=attrs["learning_rate"],
        max_depth=attrs["max_depth"],
        budget_parameters=attrs["budget_parameters"],
        **arrays,
    )
