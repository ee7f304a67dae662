import pytest
import os

# Add project root to sys.path to allow imports from src
import sys
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir))
sys.path.insert(0, PROJECT_ROOT)

import numpy as np
from click.testing import CliRunner

from src.main import create_cli
from src.models.config import RunConfig
from src.models.models import PairRecord, PointCloud, RigidTransform
from src.services.cloud_io_service import save_pair
from src.services.pipeline_service import RegistrationModel
from src.tensor.tensor import ComputeTape, Tensor, reverse_accumulate


def random_rotation(rng):
    """Uniform rotation from the QR factor of a Gaussian matrix, det +1."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def jittered_grid(rng, shape=(4, 4, 2), spacing=1.0, jitter=0.05):
    axes = [np.arange(n) * spacing for n in shape]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return grid + rng.uniform(-jitter, jitter, size=grid.shape)


@pytest.fixture(scope='function')
def make_cloud():
    def _make_cloud(n=64, seed=0, scale=5.0, grid=False):
        rng = np.random.default_rng(seed)
        if grid:
            return PointCloud(jittered_grid(rng))
        return PointCloud(rng.uniform(-scale, scale, size=(n, 3)))
    return _make_cloud


@pytest.fixture(scope='function')
def make_transform():
    def _make_transform(seed=0, max_translation=2.0):
        rng = np.random.default_rng(seed)
        return RigidTransform(random_rotation(rng), rng.uniform(-max_translation, max_translation, size=3))
    return _make_transform


@pytest.fixture(scope='function')
def tiny_config():
    """Network small enough for gradient checks and one-epoch runs."""
    return RunConfig(
        points_per_frame=32,
        k=6,
        d=8,
        heads=2,
        head_dim=8,
        att_dim=16,
        ode_steps=1,
        hks_eigs=8,
        hks_times=4,
        epochs=1,
        lr=1e-3,
        frame_extent=(6.0, 3.0),
        crop_region=(1.0, 1.0),
    )


@pytest.fixture(scope='function')
def tiny_model(tiny_config):
    return RegistrationModel(tiny_config)


@pytest.fixture(scope='function')
def grid_pair(make_transform):
    """Jittered 4x4x2 grid and a shuffled rigid copy of it."""
    def _grid_pair(seed=0, pair_id="00000"):
        rng = np.random.default_rng(seed)
        source = PointCloud(jittered_grid(rng))
        transform = make_transform(seed + 100, max_translation=0.5)
        target = PointCloud(transform.apply(source.points)[rng.permutation(len(source))])
        return PairRecord(source, target, transform, pair_id)
    return _grid_pair


@pytest.fixture(scope='function')
def dataset_dir(tmp_path, grid_pair):
    """Directory holding three grid pairs in the dataset layout."""
    directory = tmp_path / "dataset"
    directory.mkdir()
    for index in range(3):
        save_pair(grid_pair(seed=index, pair_id=f"{index:05d}"), str(directory))
    return str(directory)


@pytest.fixture(scope='function')
def runner():
    """A test runner for click commands."""
    return CliRunner(mix_stderr=False)


@pytest.fixture(scope='function')
def cli():
    return create_cli()


@pytest.fixture(scope='session')
def gradcheck():
    """Compare tape gradients against central finite differences.

    build() must return a single-value Tensor computed from `inputs`.
    Returns the largest relative error over all inputs.
    """
    def _gradcheck(build, inputs, eps=1e-6):
        for tensor in inputs:
            tensor.zero_grad()
        with ComputeTape() as tape:
            loss = build()
            reverse_accumulate(tape, loss)
        worst = 0.0
        for tensor in inputs:
            analytic = tensor.grad.copy()
            numeric = np.zeros_like(tensor.values)
            flat = tensor.values.reshape(-1)
            for index in range(flat.size):
                original = flat[index]
                flat[index] = original + eps
                upper = build().item()
                flat[index] = original - eps
                lower = build().item()
                flat[index] = original
                numeric.reshape(-1)[index] = (upper - lower) / (2.0 * eps)
            scale = max(np.linalg.norm(numeric), np.linalg.norm(analytic), 1e-8)
            worst = max(worst, np.linalg.norm(analytic - numeric) / scale)
        return worst
    return _gradcheck


def leaf(values):
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)
