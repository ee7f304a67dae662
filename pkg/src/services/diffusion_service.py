"""Point-Diffusion Net: EdgeConv layers integrated as graph neural ODEs."""
import logging

import numpy as np

from src.models.errors import NonFiniteError, ShapeError
from src.models.models import OdeMethod, RewireMode
from src.services.knn_service import knn
from src.tensor import ops
from src.tensor.parameters import Linear
from src.tensor.tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)

REFINE_WIDTHS = (16, 16, 32, 64)


class EdgeConvLayer:
    """out_i = max_j relu(W . e_ij + b) over the k neighbours j of i.

    edge_mode "center_offset" builds e_ij = concat(x_i, x_j - x_i) (in_dim = 2D);
    "offset" builds e_ij = x_j - x_i (in_dim = D). Extra per-node features
    passed at call time are appended as concat(e_ij, extra_i).
    """

    def __init__(self, store, name, in_dim, out_dim, edge_mode="center_offset"):
        if edge_mode not in ("center_offset", "offset"):
            raise ValueError(f"Unknown edge mode {edge_mode}")
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.edge_mode = edge_mode
        self.linear = Linear(store, name, in_dim, out_dim)

    def __call__(self, features, graph, extra=None):
        return edge_conv(features, graph, self, extra)


def edge_conv(features, graph, layer, extra=None):
    features = as_tensor(features)
    n, dim = features.shape
    if graph.n_nodes != n:
        raise ShapeError(f"{layer.name}: graph has {graph.n_nodes} nodes, features have {n} rows")
    expected = (2 * dim if layer.edge_mode == "center_offset" else dim) + (extra.shape[1] if extra is not None else 0)
    if layer.in_dim != expected:
        raise ShapeError(f"{layer.name}: layer expects edge width {layer.in_dim}, input builds {expected}")
    # W . concat(x_i, x_j - x_i, e_i) splits into a per-centre term
    # x_i (W_c - W_o) + e_i W_e + b and a per-neighbour term x_j W_o.
    weight = layer.linear.weight
    row = 0
    center_weight = None
    if layer.edge_mode == "center_offset":
        center_weight = ops.slice_rows(weight, 0, dim)
        row = dim
    offset_weight = ops.slice_rows(weight, row, row + dim)
    row += dim
    center_proj = ops.sub(center_weight, offset_weight) if center_weight is not None else -offset_weight
    per_center = ops.matmul(features, center_proj)
    if extra is not None:
        per_center = per_center + ops.matmul(extra, ops.slice_rows(weight, row, layer.in_dim))
    per_center = ops.add(per_center, layer.linear.bias)
    per_neighbor = ops.matmul(features, offset_weight)
    k = graph.k
    centers = np.repeat(np.arange(n), k)
    out = ops.gather_rows(per_center, centers) + ops.gather_rows(per_neighbor, graph.neighbors.reshape(-1))
    return ops.group_max(ops.relu(out), k)


def ode_integrate(dynamics, z0, horizon=1.0, steps=4, method=OdeMethod.RK4):
    """Fixed-step explicit integration of dZ/dt = dynamics(Z) from 0 to horizon."""
    if steps < 1 or horizon <= 0:
        raise ValueError(f"Integration needs steps >= 1 and horizon > 0, got {steps}, {horizon}")
    h = horizon / steps
    z = as_tensor(z0)
    for step in range(1, steps + 1):
        try:
            if method is OdeMethod.EULER:
                z = z + dynamics(z) * h
            else:
                k1 = dynamics(z)
                k2 = dynamics(z + k1 * (h / 2.0))
                k3 = dynamics(z + k2 * (h / 2.0))
                k4 = dynamics(z + k3 * h)
                z = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
        except NonFiniteError as e:
            raise NonFiniteError(f"ODE state became non-finite during step {step}/{steps}: {e}") from None
        if not np.all(np.isfinite(z.values)):
            raise NonFiniteError(f"ODE state became non-finite at step {step}/{steps}")
    return z


class GraphODEBlock:
    """Graph ODE whose dynamics take (state, NeighborGraph)."""

    def __init__(self, dynamics, k, horizon=1.0, steps=4, method=OdeMethod.RK4, rewire=RewireMode.FIXED):
        if steps < 1 or horizon <= 0:
            raise ValueError(f"GraphODEBlock needs steps >= 1 and T > 0, got {steps}, {horizon}")
        self.dynamics = dynamics
        self.k = k
        self.horizon = horizon
        self.steps = steps
        self.method = method
        self.rewire = rewire

    def __call__(self, z0, graph=None):
        z0 = as_tensor(z0)
        if self.rewire is RewireMode.PER_EVAL:
            def f(z):
                return self.dynamics(z, knn(z.values, self.k))
        else:
            fixed = graph if graph is not None else knn(z0.values, self.k)

            def f(z):
                return self.dynamics(z, fixed)
        return ode_integrate(f, z0, self.horizon, self.steps, self.method)


class DgcnnStack:
    """Four EdgeConv layers plus a pointwise readout over their concatenation.

    With dynamic=True each layer rewires its k-NN graph in the previous
    layer's feature space; otherwise every layer shares the graph passed in.
    """

    def __init__(self, store, name, in_dim, widths, out_dim, k, dynamic):
        self.k = k
        self.dynamic = dynamic
        self.layers = []
        previous = in_dim
        for index, width in enumerate(widths, start=1):
            self.layers.append(EdgeConvLayer(store, f"{name}.ec{index}", 2 * previous, width))
            previous = width
        self.readout = Linear(store, f"{name}.ec{len(widths) + 1}", sum(widths), out_dim)

    def __call__(self, x, graph=None):
        outputs = []
        h = x
        for layer in self.layers:
            if self.dynamic or graph is None:
                layer_graph = knn(h.values, self.k)
                if not self.dynamic:
                    graph = layer_graph
            else:
                layer_graph = graph
            h = layer(h, layer_graph)
            outputs.append(h)
        return self.readout(ops.concat(outputs))


class FeatureDiffusionDynamics:
    """Two EdgeConv layers: offsets only, then concat(x_i, x_j - x_i, h1_i)."""

    def __init__(self, store, name, dim):
        self.dim = dim
        self.first = EdgeConvLayer(store, f"{name}.ec1", dim, dim, edge_mode="offset")
        self.second = EdgeConvLayer(store, f"{name}.ec2", 3 * dim, dim)

    def __call__(self, z, graph):
        hidden = self.first(z, graph)
        return self.second(z, graph, extra=hidden)


class PointDiffusionNet:
    def __init__(self, store, config, name="pdn"):
        self.config = config
        self.k = config.k
        self.use_diffusion = config.feature_diffusion
        if self.use_diffusion:
            refine_dynamics = DgcnnStack(store, f"{name}.refine", 3, REFINE_WIDTHS, 3, config.k, dynamic=False)
            self.refine_block = GraphODEBlock(
                refine_dynamics, config.k, config.ode_T, config.ode_steps, config.ode_method, RewireMode.FIXED
            )
            self.diffuse_block = GraphODEBlock(
                FeatureDiffusionDynamics(store, f"{name}.diffuse", config.d),
                config.k, config.ode_T, config.ode_steps, config.ode_method, RewireMode.FIXED,
            )
        self.backbone = DgcnnStack(store, f"{name}.backbone", 3, config.backbone_widths, config.d, config.k, dynamic=True)

    def point_refine(self, points):
        """Z_p(T_p): coordinates filtered by the refinement ODE (N x 3)."""
        points = np.asarray(points, dtype=np.float64)
        if points.shape[0] <= self.k:
            raise ShapeError(f"point_refine needs N > k ({self.k}), got {points.shape[0]}")
        cloud = Tensor(points)
        return self.refine_block(cloud, knn(points, self.k))

    def gnn_backbone(self, refined):
        return self.backbone(as_tensor(refined))

    def feature_diffuse(self, backbone_features):
        return self.diffuse_block(backbone_features)

    def forward_parts(self, points):
        """(F_G, diffused F_G) for a raw N x 3 cloud."""
        if self.use_diffusion:
            backbone_features = self.gnn_backbone(self.point_refine(points))
            return backbone_features, self.feature_diffuse(backbone_features)
        backbone_features = self.gnn_backbone(Tensor(points))
        return backbone_features, backbone_features

    def __call__(self, points):
        """F^X = concat(F_G(X), diffused F_G(X)), N x 2d."""
        backbone_features, diffused = self.forward_parts(points)
        return ops.concat([backbone_features, diffused])
