"""Graph network building blocks.

Everything here is permutation-equivariant by construction: layers see
nodes only through an explicit edge index, and aggregation is a segment
statistic over incoming messages. Layers hold trainable tensors and are
callable on (features, edges); stacking and activation policy live in the
small network classes at the bottom, which the flows and codecs share.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .diffcore import tensor as T
from .diffcore.tensor import Tensor


class WidthMismatch(ValueError):
    pass


class ZeroNodes(ValueError):
    pass


class TooFewPoints(ValueError):
    pass


class OutOfRange(ValueError):
    pass


# ---------------------------------------------------------------------------
# edge indexes


@dataclass
class EdgeIndex:
    """Directed (src, dst) pairs over ``n`` nodes.

    Aggregation plans and normalization weights are computed lazily and
    cached, so a reused edge index (complete graphs, training molecules)
    pays for its sorting once.
    """

    src: np.ndarray
    dst: np.ndarray
    n: int

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.intp)
        self.dst = np.asarray(self.dst, dtype=np.intp)
        self._gcn = None
        self._src_plan = None
        self._dst_plan = None

    def __len__(self) -> int:
        return len(self.src)

    def src_plan(self) -> T.SegmentPlan:
        if self._src_plan is None:
            self._src_plan = T.SegmentPlan(self.src, self.n)
        return self._src_plan

    def dst_plan(self) -> T.SegmentPlan:
        if self._dst_plan is None:
            self._dst_plan = T.SegmentPlan(self.dst, self.n)
        return self._dst_plan

    def gcn_norm(self):
        """Self-loop-augmented edge list with symmetric normalization weights
        and the matching aggregation plans."""
        if self._gcn is None:
            loops = np.arange(self.n, dtype=np.intp)
            src = np.concatenate([self.src, loops])
            dst = np.concatenate([self.dst, loops])
            deg = np.bincount(dst, minlength=self.n).astype(np.float64)
            coef = 1.0 / np.sqrt(deg[src] * deg[dst])
            self._gcn = (src, coef[:, None], T.SegmentPlan(src, self.n),
                         T.SegmentPlan(dst, self.n))
        return self._gcn


@lru_cache(maxsize=None)
def complete_graph_edges(n: int, self_loops: bool = False) -> EdgeIndex:
    """All ordered pairs src != dst, plus the n self-loops when requested."""
    if n < 1:
        raise ZeroNodes(f"complete graph needs at least one node, got {n}")
    src, dst = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    src, dst = src.ravel(), dst.ravel()
    if not self_loops:
        keep = src != dst
        src, dst = src[keep], dst[keep]
    return EdgeIndex(src, dst, n)


def edges_from_pairs(n: int, pairs) -> EdgeIndex:
    """Directed edge index with both orientations of each undirected pair."""
    if not pairs:
        return EdgeIndex(np.empty(0, dtype=np.intp), np.empty(0, dtype=np.intp), n)
    a = np.array([p[0] for p in pairs], dtype=np.intp)
    b = np.array([p[1] for p in pairs], dtype=np.intp)
    return EdgeIndex(np.concatenate([a, b]), np.concatenate([b, a]), n)


# ---------------------------------------------------------------------------
# parameter initialization


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def bias_init(rng: np.random.Generator, width: int) -> np.ndarray:
    # small noise rather than zeros: an all-zero layer output would park
    # every downstream ReLU exactly on its kink
    return rng.uniform(-0.01, 0.01, size=width)


# ---------------------------------------------------------------------------
# layers


class PnaLayer:
    """Aggregates neighbor messages with mean/min/max/std, concatenates the
    node's own features with the four statistics, then applies one linear
    map. Isolated nodes aggregate a zero message.

    Keeping the self features in the update is what lets a stack of these
    layers reconstruct per-node identity on a complete graph; aggregates
    alone wash it out.
    """

    def __init__(self, in_width: int, out_width: int, rng: np.random.Generator,
                 name: str = "pna"):
        self.in_width = in_width
        self.out_width = out_width
        self.W = T.param(glorot(rng, 5 * in_width, out_width), name=f"{name}.W")
        self.b = T.param(bias_init(rng, out_width), name=f"{name}.b")

    def __call__(self, x: Tensor, e: EdgeIndex) -> Tensor:
        if x.data.shape[1] != self.in_width:
            raise WidthMismatch(f"expected width {self.in_width}, got {x.data.shape[1]}")
        msgs = T.gather_rows(x, e.src, e.src_plan())
        plan = e.dst_plan()
        agg = T.concat([
            x,
            T.segment_mean(msgs, plan, e.n),
            T.segment_min(msgs, plan, e.n),
            T.segment_max(msgs, plan, e.n),
            T.segment_std(msgs, plan, e.n),
        ], axis=1)
        return T.add(T.matmul(agg, self.W), self.b)

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [(self.W.name, self.W), (self.b.name, self.b)]


class GcnLayer:
    """Graph convolution with self-loops and symmetric degree normalization."""

    def __init__(self, in_width: int, out_width: int, rng: np.random.Generator,
                 name: str = "gcn"):
        self.in_width = in_width
        self.out_width = out_width
        self.W = T.param(glorot(rng, in_width, out_width), name=f"{name}.W")
        self.b = T.param(bias_init(rng, out_width), name=f"{name}.b")

    def __call__(self, x: Tensor, e: EdgeIndex) -> Tensor:
        if x.data.shape[1] != self.in_width:
            raise WidthMismatch(f"expected width {self.in_width}, got {x.data.shape[1]}")
        src, coef, src_plan, dst_plan = e.gcn_norm()
        msgs = T.mul(T.gather_rows(x, src, src_plan), T.tensor(coef))
        mixed = T.segment_sum(msgs, dst_plan, e.n)
        return T.add(T.matmul(mixed, self.W), self.b)

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [(self.W.name, self.W), (self.b.name, self.b)]


class GraphConvLayer:
    """Convolution with separate self and neighbor-mean weight paths.

    Unlike the symmetric-normalized flavor, this keeps per-node identity
    intact on dense graphs: a complete graph averages every node's
    neighborhood to the same vector, and a shared-weight update would then
    collapse all rows. Restoration networks run on complete graphs, so
    they use this layer.
    """

    def __init__(self, in_width: int, out_width: int, rng: np.random.Generator,
                 name: str = "graphconv"):
        self.in_width = in_width
        self.out_width = out_width
        self.W_self = T.param(glorot(rng, in_width, out_width), name=f"{name}.Ws")
        self.W_nbr = T.param(glorot(rng, in_width, out_width), name=f"{name}.Wn")
        self.b = T.param(bias_init(rng, out_width), name=f"{name}.b")

    def __call__(self, x: Tensor, e: EdgeIndex) -> Tensor:
        if x.data.shape[1] != self.in_width:
            raise WidthMismatch(f"expected width {self.in_width}, got {x.data.shape[1]}")
        msgs = T.gather_rows(x, e.src, e.src_plan())
        mixed = T.segment_mean(msgs, e.dst_plan(), e.n)
        return T.add(T.add(T.matmul(x, self.W_self), T.matmul(mixed, self.W_nbr)), self.b)

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [(self.W_self.name, self.W_self), (self.W_nbr.name, self.W_nbr),
                (self.b.name, self.b)]


class Dense:
    def __init__(self, in_width: int, out_width: int, rng: np.random.Generator,
                 name: str = "dense"):
        self.W = T.param(glorot(rng, in_width, out_width), name=f"{name}.W")
        self.b = T.param(bias_init(rng, out_width), name=f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.W), self.b)

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [(self.W.name, self.W), (self.b.name, self.b)]


class Mlp:
    """Dense stack with ReLU between layers, linear output."""

    def __init__(self, widths: list[int], rng: np.random.Generator, name: str = "mlp"):
        self.layers = [Dense(widths[i], widths[i + 1], rng, name=f"{name}.{i}")
                       for i in range(len(widths) - 1)]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = T.relu(x)
        return x

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [p for layer in self.layers for p in layer.named_params()]


# ---------------------------------------------------------------------------
# E(3)-invariant pair features


@lru_cache(maxsize=None)
def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Unordered pair index arrays (i < j); cached, treat as read-only."""
    return np.triu_indices(n, k=1)


@lru_cache(maxsize=None)
def pair_gather_plans(n: int) -> tuple["T.SegmentPlan", "T.SegmentPlan"]:
    """Scatter plans for gathering node rows by pair endpoints."""
    i_idx, j_idx = pair_indices(n)
    return T.SegmentPlan(i_idx, n), T.SegmentPlan(j_idx, n)


def egnn_distance_features(cloud) -> Tensor:
    """Per unordered pair: Euclidean distance and squared distance.

    Invariant under any orthogonal transform plus translation of the cloud.
    The sqrt gradient at coincident points is taken as 0.
    """
    x = cloud if isinstance(cloud, Tensor) else T.tensor(cloud)
    n = x.data.shape[0]
    if n < 2:
        raise TooFewPoints(f"need at least 2 points, got {n}")
    i_idx, j_idx = pair_indices(n)
    plan_i, plan_j = pair_gather_plans(n)
    diff = T.sub(T.gather_rows(x, i_idx, plan_i), T.gather_rows(x, j_idx, plan_j))
    d2 = T.row_sum(T.mul(diff, diff))
    dist = T.sqrt(d2)
    return T.concat([dist, d2], axis=1)


# ---------------------------------------------------------------------------
# time encodings


@dataclass(frozen=True)
class TimeEncoding:
    mode: str = "normalized"  # or "sinusoidal"
    pairs: int = 4

    @property
    def width(self) -> int:
        return 1 if self.mode == "normalized" else 2 * self.pairs


def time_encode(t: float, total: float, enc: TimeEncoding) -> np.ndarray:
    """Encode a timestep; normalized mode is t/total, sinusoidal mode emits
    (sin, cos) pairs over geometrically spaced frequencies."""
    if not (0 <= t <= total):
        raise OutOfRange(f"t={t} outside [0, {total}]")
    if enc.mode == "normalized":
        return np.array([t / total], dtype=np.float64)
    if enc.mode != "sinusoidal":
        raise ValueError(f"unknown time encoding mode {enc.mode!r}")
    tau = t / total
    k = enc.pairs
    omega = np.array([1000.0 ** (i / (k - 1)) if k > 1 else 1.0 for i in range(k)])
    out = np.empty(2 * k, dtype=np.float64)
    out[0::2] = np.sin(tau * omega)
    out[1::2] = np.cos(tau * omega)
    return out


# ---------------------------------------------------------------------------
# network stacks shared by codecs and flows


class GcnStack:
    """Graph convolutions with ReLU between layers, linear output.

    ``conv`` picks the layer flavor: "gcn" (symmetric normalized, for
    sparse molecular graphs) or "graph" (self/neighbor split, for complete
    graphs).
    """

    def __init__(self, widths: list[int], rng: np.random.Generator,
                 name: str = "gcnstack", conv: str = "gcn"):
        layer_cls = {"gcn": GcnLayer, "graph": GraphConvLayer}[conv]
        self.layers = [layer_cls(widths[i], widths[i + 1], rng, name=f"{name}.{i}")
                       for i in range(len(widths) - 1)]

    def __call__(self, x: Tensor, e: EdgeIndex) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x, e)
            if i < len(self.layers) - 1:
                x = T.relu(x)
        return x

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [p for layer in self.layers for p in layer.named_params()]


class FlowFieldNet:
    """Velocity network: initial graph convolution over the complete graph,
    a tower of dense hidden layers with ReLU, and a linear output head.
    Sinusoidal time features are concatenated onto every node."""

    def __init__(self, width: int, rng: np.random.Generator, hidden: int = 64,
                 hidden_layers: int = 10, name: str = "flowfield"):
        self.width = width
        self.time_enc = TimeEncoding("sinusoidal", pairs=4)
        self.entry = GraphConvLayer(width + self.time_enc.width, hidden, rng,
                                    name=f"{name}.entry")
        self.hidden = [Dense(hidden, hidden, rng, name=f"{name}.h{i}")
                       for i in range(hidden_layers)]
        self.out = Dense(hidden, width, rng, name=f"{name}.out")

    def __call__(self, x: Tensor, t: float) -> Tensor:
        n = x.data.shape[0]
        e = complete_graph_edges(n)
        # RK4 stage times can overshoot the interval by one rounding step
        enc = time_encode(min(max(t, 0.0), 1.0), 1.0, self.time_enc)
        feat = T.concat([x, T.tensor(np.tile(enc, (n, 1)))], axis=1)
        h = T.relu(self.entry(feat, e))
        for layer in self.hidden:
            h = T.relu(layer(h))
        return self.out(h)

    def velocity(self, t: float, x: np.ndarray) -> np.ndarray:
        return self(T.tensor(x), t).data

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = self.entry.named_params()
        for layer in self.hidden:
            out.extend(layer.named_params())
        out.extend(self.out.named_params())
        return out


class EgnnNet:
    """Coordinate-update network built purely from pairwise-distance
    invariants; its displacement output co-rotates with the input cloud.

    Each layer computes per-pair messages from (distance, squared distance,
    hidden states, time), moves every point along its difference vectors
    with learned scalar weights, and updates the hidden state from the mean
    message. The returned prediction is the total displacement.
    """

    def __init__(self, width: int, rng: np.random.Generator, hidden: int = 64,
                 layers: int = 4, name: str = "egnn"):
        self.width = width
        self.hidden = hidden
        self.embed = Dense(1, hidden, rng, name=f"{name}.embed")  # from h_t
        self.edge_mlps = [Mlp([2 * hidden + 2, hidden, hidden], rng, name=f"{name}.edge{i}")
                          for i in range(layers)]
        self.coord_mlps = [Mlp([hidden, hidden, 1], rng, name=f"{name}.coord{i}")
                           for i in range(layers)]
        self.node_mlps = [Mlp([2 * hidden, hidden], rng, name=f"{name}.node{i}")
                          for i in range(layers)]

    def __call__(self, x: Tensor, h_t: float) -> Tensor:
        n = x.data.shape[0]
        if n < 2:
            return T.mul(x, 0.0)
        e = complete_graph_edges(n)
        src, dst = e.src, e.dst
        h = self.embed(T.tensor(np.full((n, 1), h_t)))
        x0 = x
        src_plan, dst_plan = e.src_plan(), e.dst_plan()
        for edge_mlp, coord_mlp, node_mlp in zip(self.edge_mlps, self.coord_mlps,
                                                 self.node_mlps):
            diff = T.sub(T.gather_rows(x, dst, dst_plan), T.gather_rows(x, src, src_plan))
            d2 = T.row_sum(T.mul(diff, diff))
            dist = T.sqrt(d2)
            pair_in = T.concat(
                [T.gather_rows(h, dst, dst_plan), T.gather_rows(h, src, src_plan),
                 dist, d2], axis=1)
            m = edge_mlp(pair_in)
            w = coord_mlp(m)
            # move each dst point along its incoming difference vectors
            shift = T.segment_mean(T.mul(diff, w), dst_plan, n)
            x = T.add(x, shift)
            agg = T.segment_mean(m, dst_plan, n)
            h = T.add(h, node_mlp(T.concat([h, agg], axis=1)))
        return T.sub(x, x0)

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = self.embed.named_params()
        for group in (self.edge_mlps, self.coord_mlps, self.node_mlps):
            for mlp in group:
                out.extend(mlp.named_params())
        return out
