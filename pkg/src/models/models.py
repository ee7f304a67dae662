import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.models.errors import CloudFormatError, DegenerateInputError, InvalidTransformError

# Tolerance for the SO(3) invariants carried by every RigidTransform
SO3_TOLERANCE = 1e-9
MIN_REGISTRATION_POINTS = 4


class OdeMethod(enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


class RewireMode(enum.Enum):
    FIXED = "fixed"
    PER_EVAL = "per_eval"


class AttentionMode(enum.Enum):
    HKS = "hks"
    VANILLA = "vanilla"
    NONE = "none"


class LossMode(enum.Enum):
    TOTAL = "total"
    POINT = "point"
    RT = "rt"


class RotationMetric(enum.Enum):
    GEODESIC = "geodesic"
    EULER = "euler"


class ErrorReduction(enum.Enum):
    NORM = "norm"
    AXIS = "axis"


@dataclass
class PointCloud:
    points: np.ndarray
    intensity: Optional[np.ndarray] = None  # kept for round trips only

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.size == 0:
            points = points.reshape(0, 3)
        if points.ndim != 2 or points.shape[1] != 3:
            raise CloudFormatError(f"Point array must be N x 3, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise CloudFormatError("Point coordinates must be finite")
        self.points = points
        if self.intensity is not None:
            intensity = np.asarray(self.intensity, dtype=np.float64).reshape(-1)
            if intensity.shape[0] != points.shape[0]:
                raise CloudFormatError(
                    f"Intensity length {intensity.shape[0]} does not match {points.shape[0]} points"
                )
            self.intensity = intensity

    def __len__(self):
        return self.points.shape[0]

    def __repr__(self):
        return f"<PointCloud {len(self)} points>"

    def require_registrable(self, minimum=MIN_REGISTRATION_POINTS):
        if len(self) < minimum:
            raise DegenerateInputError(f"Registration needs at least {minimum} points, got {len(self)}")
        return self

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        intensity = None if self.intensity is None else self.intensity[indices]
        return PointCloud(self.points[indices], intensity)


@dataclass
class RigidTransform:
    """Rotation plus translation acting as y = R x + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=np.float64)
        translation = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise InvalidTransformError(
                f"Expected 3x3 rotation and 3-vector translation, got {rotation.shape} and {translation.shape}"
            )
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise InvalidTransformError("Transform entries must be finite")
        orthogonality = np.linalg.norm(rotation.T @ rotation - np.eye(3))
        determinant = np.linalg.det(rotation)
        if orthogonality > SO3_TOLERANCE or abs(determinant - 1.0) > SO3_TOLERANCE:
            raise InvalidTransformError(
                f"Rotation is not in SO(3): |R^T R - I| = {orthogonality:.3e}, det = {determinant:.12f}"
            )
        self.rotation = rotation
        self.translation = translation

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape not in ((3, 4), (4, 4)):
            raise InvalidTransformError(f"Expected a 3x4 or 4x4 matrix, got {matrix.shape}")
        return cls(matrix[:3, :3], matrix[:3, 3])

    def as_matrix(self):
        """3x4 row-major [R|t]."""
        return np.hstack([self.rotation, self.translation[:, None]])

    def apply(self, points):
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose(self, other):
        """self after other: x -> self(other(x))."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self):
        rotation_t = self.rotation.T
        return RigidTransform(rotation_t, -rotation_t @ self.translation)

    def __repr__(self):
        return f"<RigidTransform t={np.array2string(self.translation, precision=4)}>"


@dataclass
class PairRecord:
    source: PointCloud
    target: PointCloud
    ground_truth: RigidTransform
    id: str

    def __repr__(self):
        return f"<PairRecord {self.id} ({len(self.source)} -> {len(self.target)} points)>"


@dataclass
class NeighborGraph:
    """Row i lists the k nearest nodes to i (self excluded), nearest first."""

    neighbors: np.ndarray

    @property
    def n_nodes(self):
        return self.neighbors.shape[0]

    @property
    def k(self):
        return self.neighbors.shape[1]


@dataclass
class GraphLaplacian:
    matrix: np.ndarray
    bandwidth: float


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # N x m, column i pairs with eigenvalues[i]


@dataclass
class HeatKernelSignature:
    values: np.ndarray  # N x m_t
    times: np.ndarray


@dataclass
class Svd3Result:
    u: np.ndarray
    singular_values: np.ndarray  # descending, non-negative
    v: np.ndarray


@dataclass
class Metrics:
    trans_mae_cm: float
    trans_rmse_cm: float
    rot_mae_deg: float
    rot_rmse_deg: float
    rr_percent: float
    n_pairs: int
    rr_trans_cm: float
    rr_rot_deg: float
    translation_errors_cm: list = field(default_factory=list)
    rotation_errors_deg: list = field(default_factory=list)
    percentiles: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "trans_mae_cm": self.trans_mae_cm,
            "trans_rmse_cm": self.trans_rmse_cm,
            "rot_mae_deg": self.rot_mae_deg,
            "rot_rmse_deg": self.rot_rmse_deg,
            "rr_percent": self.rr_percent,
            "n_pairs": self.n_pairs,
            "thresholds": {"trans_cm": self.rr_trans_cm, "rot_deg": self.rr_rot_deg},
            "percentiles": self.percentiles,
        }


@dataclass
class CorrespondenceSet:
    """Top-K' rows of the source frame with their argmax columns in the target frame.

    source_points and soft_targets are K' x 3; soft_targets is a Tensor so the
    losses can reach the attention weights that produced it.
    """

    rows: np.ndarray
    cols: np.ndarray
    scores: np.ndarray  # non-increasing
    source_points: np.ndarray
    soft_targets: object

    def __len__(self):
        return self.rows.shape[0]


@dataclass
class ProcrustesWeights:
    """Positive K' x 3 weights for the centroids (wx, wy) and the cross-covariance (wm)."""

    wx: object
    wy: object
    wm: object
