import numpy as np

from src.models.errors import DegenerateInputError, ShapeError
from src.models.models import NeighborGraph

# Upper bound on the number of float64 differences held at once
_CHUNK_ELEMENTS = 1 << 24


def pairwise_sq_distances(features):
    """Exact squared Euclidean distances from direct differences, computed in row chunks."""
    features = np.asarray(features, dtype=np.float64)
    n, dim = features.shape
    out = np.empty((n, n))
    rows_per_chunk = max(1, _CHUNK_ELEMENTS // max(1, n * dim))
    for start in range(0, n, rows_per_chunk):
        stop = min(n, start + rows_per_chunk)
        diff = features[start:stop, None, :] - features[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def knn(features, k):
    """Brute-force k nearest neighbours; self excluded, ties go to the smaller index."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] < 1:
        raise ShapeError(f"knn expects an N x D matrix with D >= 1, got shape {features.shape}")
    n = features.shape[0]
    if k >= n:
        raise DegenerateInputError(f"knn needs k < N, got k={k} with N={n}")
    if k < 1:
        raise DegenerateInputError(f"knn needs k >= 1, got {k}")
    distances = pairwise_sq_distances(features)
    np.fill_diagonal(distances, np.inf)
    order = np.argsort(distances, axis=1, kind="stable")
    return NeighborGraph(order[:, :k].astype(np.int64))


def nearest_neighbor(queries, reference):
    """Index of the closest reference row for every query row (ties to the smaller index)."""
    queries = np.asarray(queries, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    out = np.empty(queries.shape[0], dtype=np.int64)
    rows_per_chunk = max(1, _CHUNK_ELEMENTS // max(1, reference.shape[0] * reference.shape[1]))
    for start in range(0, queries.shape[0], rows_per_chunk):
        diff = queries[start:start + rows_per_chunk, None, :] - reference[None, :, :]
        out[start:start + rows_per_chunk] = np.einsum("ijk,ijk->ij", diff, diff).argmin(axis=1)
    return out


def is_connected(graph):
    """Whether the symmetrised k-NN graph has a single component."""
    n = graph.n_nodes
    adjacency = [set() for _ in range(n)]
    for i, row in enumerate(graph.neighbors):
        for j in row:
            adjacency[i].add(int(j))
            adjacency[int(j)].add(i)
    seen = {0}
    frontier = [0]
    while frontier:
        node = frontier.pop()
        for other in adjacency[node] - seen:
            seen.add(other)
            frontier.append(other)
    return len(seen) == n
