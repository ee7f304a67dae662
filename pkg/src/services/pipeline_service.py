"""End-to-end registration network: diffusion features, HKS attention, correspondences, weighted Kabsch."""
import hashlib
import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from src.models.models import AttentionMode, CorrespondenceSet, PointCloud, ProcrustesWeights, RigidTransform
from src.services.attention_service import SelfCrossAttention
from src.services.correspondence_service import correspond
from src.services.diffusion_service import PointDiffusionNet
from src.services.perturbation_service import downsample
from src.services.procrustes_service import WeightHeads, solve_transform
from src.services.spectral_service import HksEmbedding, heat_kernel_signature
from src.tensor import ops
from src.tensor.parameters import ParameterStore

logger = logging.getLogger(__name__)

# Least recently used signatures beyond this many are dropped
SIGNATURE_CACHE_SIZE = 512


@dataclass
class RegistrationOutput:
    rotation: object  # 3 x 3 Tensor
    translation: object  # 1 x 3 Tensor
    transform: RigidTransform
    correspondences: CorrespondenceSet
    weights: ProcrustesWeights


class LossParams:
    """Learnable uncertainty weights of the training losses, all starting at 0."""

    def __init__(self, store, name="loss"):
        self.gamma_t = store.zeros(f"{name}.gamma_t", (1, 1))
        self.gamma_r = store.zeros(f"{name}.gamma_r", (1, 1))
        self.eta_p = store.zeros(f"{name}.eta_p", (1, 1))
        self.eta_rt = store.zeros(f"{name}.eta_rt", (1, 1))


def _points(cloud):
    return cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)


class RegistrationModel:
    """Siamese network predicting the transform that maps a source cloud onto a target cloud.

    Both frames share every parameter. The parameter set does not depend on
    the ablation switches, so model files stay interchangeable between arms.
    """

    def __init__(self, config, store=None):
        self.config = config
        self.store = store if store is not None else ParameterStore(config.seed)
        self.diffusion = PointDiffusionNet(self.store, config)
        self.hks_embedding = HksEmbedding(self.store, config)
        self.attention = SelfCrossAttention(self.store, config)
        self.weight_heads = WeightHeads(self.store, config.width)
        self.loss_params = LossParams(self.store)
        self._signatures = OrderedDict()
        self._lock = threading.Lock()

    def signature(self, points):
        """Heat kernel signature of a cloud, cached by coordinate bytes in a bounded LRU."""
        points = np.ascontiguousarray(points, dtype=np.float64)
        key = hashlib.sha1(points.tobytes()).hexdigest()
        with self._lock:
            cached = self._signatures.get(key)
            if cached is not None:
                self._signatures.move_to_end(key)
        if cached is None:
            cfg = self.config
            cached = heat_kernel_signature(points, cfg.k, cfg.hks_eigs, cfg.hks_times)
            with self._lock:
                self._signatures[key] = cached
                while len(self._signatures) > SIGNATURE_CACHE_SIZE:
                    self._signatures.popitem(last=False)
        return cached

    def cached_signatures(self):
        with self._lock:
            return len(self._signatures)

    def embed(self, points):
        """(F, embedded HKS or None) for one frame."""
        features = self.diffusion(points)
        if self.config.attention_mode is not AttentionMode.HKS:
            return features, None
        return features, self.hks_embedding(self.signature(points))

    def forward(self, source, target):
        source_points, target_points = _points(source), _points(target)
        features_x, hks_x = self.embed(source_points)
        features_y, hks_y = self.embed(target_points)
        attended_x, attended_y = self.attention(features_x, features_y, hks_x, hks_y)
        pairs = correspond(
            features_x, attended_x, features_y, attended_y,
            source_points, target_points, self.config.topk_fraction, self.config.att_dim,
        )
        weights = self.weight_heads(ops.gather_rows(attended_x, pairs.rows), ops.gather_rows(attended_y, pairs.cols))
        rotation, translation, transform = solve_transform(pairs.source_points, pairs.soft_targets, weights)
        return RegistrationOutput(rotation, translation, transform, pairs, weights)

    def register(self, source, target):
        return self.forward(source, target).transform


def prepare_cloud(cloud, config, rng):
    """Downsample to points_per_frame when the cloud is larger."""
    cloud.require_registrable()
    if len(cloud) > config.points_per_frame:
        return downsample(cloud, config.points_per_frame, rng)
    return cloud
