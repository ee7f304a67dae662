"""Heat kernel signatures from a Gaussian-weighted normalised k-NN graph Laplacian."""
import io
import logging

import numpy as np

from src.models.errors import ConvergenceError, DegenerateInputError, ShapeError
from src.models.models import GraphLaplacian, HeatKernelSignature, RewireMode, SpectralDecomposition
from src.services.diffusion_service import FeatureDiffusionDynamics, GraphODEBlock
from src.services.knn_service import knn, pairwise_sq_distances
from src.tensor.parameters import Linear
from src.tensor.tensor import Tensor

logger = logging.getLogger(__name__)

MAX_DENSE_NODES = 4096
JACOBI_TOLERANCE = 1e-14
JACOBI_MAX_SWEEPS = 60
DISCONNECTED_EIGENVALUE = 1e-12
HKS_TIME_CONSTANT = 4.0 * np.log(10.0)


def build_laplacian(points, k):
    """L = I - D^-1/2 W D^-1/2 on the symmetrised k-NN graph, W_ij = exp(-|x_i - x_j|^2 / (4 sigma_h))."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    graph = knn(points, k)
    sq = pairwise_sq_distances(points)
    rows = np.repeat(np.arange(n), k)
    cols = graph.neighbors.reshape(-1)
    bandwidth = float(sq[rows, cols].mean())
    if bandwidth <= 0.0:
        raise DegenerateInputError("All k-NN distances are zero; the Laplacian bandwidth is undefined")
    adjacency = np.zeros((n, n), dtype=bool)
    adjacency[rows, cols] = True
    adjacency |= adjacency.T
    weights = np.where(adjacency, np.exp(-sq / (4.0 * bandwidth)), 0.0)
    degree = weights.sum(axis=1)
    isolated = np.flatnonzero(degree <= 0.0)
    if isolated.size:
        raise DegenerateInputError(f"Node {int(isolated[0])} has zero degree; cannot normalise the Laplacian")
    inv_sqrt = 1.0 / np.sqrt(degree)
    laplacian = np.eye(n) - inv_sqrt[:, None] * weights * inv_sqrt[None, :]
    return GraphLaplacian(0.5 * (laplacian + laplacian.T), bandwidth)


def _round_robin_pairs(size):
    """Yield size-1 rounds of disjoint (p, q) pairs covering every pair once."""
    players = list(range(size))
    for _ in range(size - 1):
        half = size // 2
        yield np.array(players[:half]), np.array(players[size - 1:half - 1:-1])
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigh(matrix, tol=JACOBI_TOLERANCE, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi on a dense symmetric matrix with parallel (round-robin) ordering.

    Each round applies n/2 disjoint plane rotations at once. Returns the
    unsorted eigenvalues and the matrix of eigenvectors (columns).
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ShapeError(f"jacobi_eigh needs a square matrix, got {a.shape}")
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return np.diag(a).copy(), v
    size = n + (n % 2)
    for sweep in range(1, max_sweeps + 1):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            logger.debug(f"Jacobi converged after {sweep - 1} sweeps (n={n})")
            return np.diag(a).copy(), v
        for left, right in _round_robin_pairs(size):
            keep = (left < n) & (right < n)
            p = np.minimum(left[keep], right[keep])
            q = np.maximum(left[keep], right[keep])
            apq = a[p, q]
            active = apq != 0.0
            safe_apq = np.where(active, apq, 1.0)
            theta = (a[q, q] - a[p, p]) / (2.0 * safe_apq)
            big = np.abs(theta) > 1e150
            root = np.sqrt(np.where(big, 1.0, theta * theta) + 1.0)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = np.where(big, 0.5 / np.where(big, theta, 1.0), sign / (np.abs(theta) + root))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            row_p, row_q = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            col_p, col_q = a[:, p].copy(), a[:, q].copy()
            a[:, p] = col_p * c - col_q * s
            a[:, q] = col_p * s + col_q * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vec_p * c - vec_q * s
            v[:, q] = vec_p * s + vec_q * c
    raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps (n={n})")


def fix_signs(vectors, threshold=1e-12):
    """Flip each column so its first component above threshold is positive."""
    vectors = vectors.copy()
    for column in range(vectors.shape[1]):
        significant = np.flatnonzero(np.abs(vectors[:, column]) > threshold)
        if significant.size and vectors[significant[0], column] < 0:
            vectors[:, column] *= -1.0
    return vectors


def eig_smallest(laplacian, m):
    matrix = laplacian.matrix if isinstance(laplacian, GraphLaplacian) else np.asarray(laplacian, dtype=np.float64)
    n = matrix.shape[0]
    if n > MAX_DENSE_NODES:
        raise ShapeError(f"Dense eigensolver is limited to {MAX_DENSE_NODES} nodes, got {n}")
    if not 1 <= m <= n:
        raise ShapeError(f"Requested {m} eigenpairs from a {n}x{n} matrix")
    eigenvalues, eigenvectors = jacobi_eigh(matrix)
    order = np.argsort(eigenvalues, kind="stable")[:m]
    return SpectralDecomposition(eigenvalues[order], fix_signs(eigenvectors[:, order]))


def hks_times(spectrum, m_t):
    """Log-spaced times over [4 ln10 / lambda_m, 4 ln10 / lambda_2]."""
    if m_t < 2:
        raise ShapeError(f"Need at least two HKS times, got {m_t}")
    eigenvalues = spectrum.eigenvalues
    if eigenvalues.size < 2:
        raise DegenerateInputError("HKS time window needs at least two eigenvalues")
    lambda_2, lambda_m = float(eigenvalues[1]), float(eigenvalues[-1])
    if lambda_2 <= DISCONNECTED_EIGENVALUE:
        raise DegenerateInputError(f"graph disconnected (lambda_2 = {lambda_2:.3e})")
    if lambda_m <= lambda_2:
        raise DegenerateInputError(f"HKS time window collapses: lambda_m = lambda_2 = {lambda_2:.6g}")
    return np.geomspace(HKS_TIME_CONSTANT / lambda_m, HKS_TIME_CONSTANT / lambda_2, m_t)


def hks_compute(spectrum, times):
    """h(x, t) = sum_i exp(-lambda_i t) phi_i(x)^2."""
    times = np.asarray(times, dtype=np.float64)
    eigenvalues = np.clip(spectrum.eigenvalues, 0.0, None)
    decay = np.exp(-np.outer(eigenvalues, times))
    return HeatKernelSignature(spectrum.eigenvectors ** 2 @ decay, times)


def heat_kernel_signature(points, k, n_eigs, n_times):
    """Laplacian, truncated spectrum and HKS for a raw cloud."""
    points = np.asarray(points, dtype=np.float64)
    laplacian = build_laplacian(points, k)
    spectrum = eig_smallest(laplacian, min(n_eigs, points.shape[0]))
    return hks_compute(spectrum, hks_times(spectrum, n_times))


def hks_to_csv(signature):
    buffer = io.StringIO()
    m_t = signature.values.shape[1]
    buffer.write(",".join(["point_index"] + [f"t_{i}" for i in range(1, m_t + 1)]) + "\n")
    for index, row in enumerate(signature.values):
        buffer.write(",".join([str(index)] + [f"{v:.17g}" for v in row]) + "\n")
    return buffer.getvalue()


class HksEmbedding:
    """Graph-ODE filter over the k-NN graph of HKS rows, then a linear map m_t -> width."""

    def __init__(self, store, config, name="hks"):
        self.k = config.k
        self.block = GraphODEBlock(
            FeatureDiffusionDynamics(store, f"{name}.diffuse", config.hks_times),
            config.k, config.ode_T, config.ode_steps, config.ode_method, RewireMode.FIXED,
        )
        self.fc = Linear(store, f"{name}.fc", config.hks_times, config.width)

    def __call__(self, signature):
        values = signature.values if isinstance(signature, HeatKernelSignature) else np.asarray(signature)
        filtered = self.block(Tensor(values))
        return self.fc(filtered)
