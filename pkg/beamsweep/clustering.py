import logging

import numpy as np

from . import errors
from .utils import KMEANS_STREAM, seed_stream

__all__ = ["kmeans"]

logger = logging.getLogger(__name__)


def _squared_distances(points, centroids):
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _plus_plus(points, count, rng):
    centroids = [points[rng.integers(len(points))]]
    for _ in range(1, count):
        nearest = _squared_distances(points, np.array(centroids)).min(axis=1)
        centroids.append(points[rng.choice(len(points), p=nearest / nearest.sum())])
    return np.array(centroids)


def kmeans(locations, count, seed=0, max_iters=100):
    """Seeded k-means++ followed by Lloyd iterations.

    Iterates until the assignment stops changing or `max_iters` is reached.
    Points go to the nearest centroid, lowest index on ties. A cluster that
    empties is re-seeded with the point farthest from its centroid.
    Returns `(centroids, assignments)`.
    """
    points = np.asarray(locations, dtype=float).reshape(-1, 2)
    distinct = len(np.unique(points, axis=0))
    if count < 1 or count > distinct:
        raise errors.ClusteringError(
            f"Cannot form {count} clusters from {distinct} distinct locations."
        )

    centroids = _plus_plus(points, count, seed_stream(seed, KMEANS_STREAM))
    assignments = None
    for iteration in range(max_iters):
        distances = _squared_distances(points, centroids)
        updated = np.argmin(distances, axis=1)
        for cluster in range(count):
            if np.any(updated == cluster):
                continue
            nearest = distances[np.arange(len(points)), updated]
            farthest = int(np.argmax(nearest))
            updated[farthest] = cluster
            distances[farthest] = 0.0
            logger.debug("Re-seeded empty cluster %d with point %d.", cluster, farthest)
        if assignments is not None and np.array_equal(updated, assignments):
            break
        assignments = updated
        centroids = np.array(
            [points[assignments == cluster].mean(axis=0) for cluster in range(count)]
        )
    else:
        logger.debug("k-means stopped after %d iterations without converging.", max_iters)
    return centroids, assignments
