"""Autoencoding stack: molecule -> latent point cloud -> molecule.

The graph encoder embeds each atom (one-hot element, molecular edges) into
z dimensions with a 2-layer PNA; the atom-type encoder adds 2 more columns.
Decoding runs the reverse: a PNA over the complete graph of latent points
produces 4-wide output features, an MLP scores every unordered pair, and
pairs at or above the threshold become edges. Bond types are assigned
afterwards by a separate graph-convolutional classifier whose argmax is
masked to valence-feasible types.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .chem import BOND_TYPES, ELEMENTS, BondType, Element, MolGraph
from .diffcore import tensor as T
from .diffcore.tensor import Tensor
from .gnn import (
    Dense,
    EdgeIndex,
    Mlp,
    PnaLayer,
    GcnLayer,
    GcnStack,
    TooFewPoints,
    complete_graph_edges,
    edges_from_pairs,
    egnn_distance_features,
    pair_gather_plans,
    pair_indices,
)

_ELEM_INDEX = {el: i for i, el in enumerate(ELEMENTS)}
_BOND_INDEX = {bt: i for i, bt in enumerate(BOND_TYPES)}


def atom_onehot(m: MolGraph) -> np.ndarray:
    x = np.zeros((m.n, len(ELEMENTS)), dtype=np.float64)
    for i, el in enumerate(m.atoms):
        x[i, _ELEM_INDEX[el]] = 1.0
    return x


@lru_cache(maxsize=65536)
def molecular_edges(m: MolGraph) -> EdgeIndex:
    return edges_from_pairs(m.n, sorted((i, j) for i, j, _ in m.bonds))


@dataclass
class LatentCloud:
    """Per-atom latent rows: columns [0, z) from the graph encoder, the
    final two from the atom-type encoder."""

    points: np.ndarray
    z: int

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def width(self) -> int:
        return self.points.shape[1]


@dataclass
class UntypedGraph:
    """Decoder candidate: atoms plus an edge set awaiting bond types."""

    atoms: tuple[Element, ...]
    edges: list[tuple[int, int]]

    @property
    def n(self) -> int:
        return len(self.atoms)


class AtomTypeAutoencoder:
    """One-hot element -> 2-d embedding -> softmax over elements."""

    def __init__(self, rng: np.random.Generator, name: str = "atomae"):
        self.enc = Dense(4, 2, rng, name=f"{name}.enc")
        self.dec = Dense(2, 4, rng, name=f"{name}.dec")

    def encode(self, x: Tensor) -> Tensor:
        return self.enc(x)

    def decode_probs(self, z: Tensor) -> Tensor:
        return T.softmax(self.dec(z))

    def named_params(self):
        return self.enc.named_params() + self.dec.named_params()


class GraphAutoencoder:
    """PNA encoder/decoder with a thresholded pair-MLP edge predictor.

    kind="gnn" decodes from the latent points directly; kind="egnn" decodes
    from an augmented graph whose per-pair dummy nodes carry only pairwise
    distances, making the decoded edge set invariant to orthogonal
    transforms of the cloud.
    """

    def __init__(self, z: int, rng: np.random.Generator, kind: str = "gnn",
                 hidden: int = 64, edge_hidden: int = 32, tau: float = 0.5,
                 name: str = "graphae"):
        if kind not in ("gnn", "egnn"):
            raise ValueError(f"unknown decoder kind {kind!r}")
        self.z = z
        self.kind = kind
        self.tau = tau
        self.enc1 = PnaLayer(4, hidden, rng, name=f"{name}.enc1")
        self.enc2 = PnaLayer(hidden, z, rng, name=f"{name}.enc2")
        if kind == "gnn":
            self.dec1 = PnaLayer(z + 2, hidden, rng, name=f"{name}.dec1")
            self.dec2 = PnaLayer(hidden, 4, rng, name=f"{name}.dec2")
            self.edge_mlp = Mlp([8, edge_hidden, 1], rng, name=f"{name}.edge")
        else:
            self.dec1 = PnaLayer(2, hidden, rng, name=f"{name}.dec1")
            self.dec2 = PnaLayer(hidden, 4, rng, name=f"{name}.dec2")
            self.edge_mlp = Mlp([4, edge_hidden, 1], rng, name=f"{name}.edge")
        # molecular adjacency is sparse; bias the edge head toward "no edge"
        self.edge_mlp.layers[-1].b.data[:] = -1.1

    @property
    def width(self) -> int:
        return self.z + 2

    def named_params(self):
        out = []
        for part in (self.enc1, self.enc2, self.dec1, self.dec2, self.edge_mlp):
            out.extend(part.named_params())
        return out


def encode_t(ae: GraphAutoencoder, at: AtomTypeAutoencoder, m: MolGraph) -> Tensor:
    """Tape-aware encoding: (n, z+2) tensor of latent rows."""
    x = T.tensor(atom_onehot(m))
    e = molecular_edges(m)
    g = ae.enc2(T.relu(ae.enc1(x, e)), e)
    a = at.encode(x)
    return T.concat([g, a], axis=1)


def encode(ae: GraphAutoencoder, at: AtomTypeAutoencoder, m: MolGraph) -> LatentCloud:
    return LatentCloud(points=encode_t(ae, at, m).data, z=ae.z)


def edge_probs_gnn(ae: GraphAutoencoder, cloud: Tensor) -> Tensor:
    """Symmetrized edge probabilities for every unordered pair, (P, 1)."""
    n = cloud.data.shape[0]
    e = complete_graph_edges(n)
    f = ae.dec2(T.relu(ae.dec1(cloud, e)), e)
    i_idx, j_idx = pair_indices(n)
    plan_i, plan_j = pair_gather_plans(n)
    fi = T.gather_rows(f, i_idx, plan_i)
    fj = T.gather_rows(f, j_idx, plan_j)
    fwd = T.concat([fi, fj], axis=1)
    rev = T.concat([fj, fi], axis=1)
    logits = T.mul(T.add(ae.edge_mlp(fwd), ae.edge_mlp(rev)), 0.5)
    return T.sigmoid(logits)


def _egnn_augmented(cloud: Tensor) -> tuple[Tensor, EdgeIndex, int]:
    n = cloud.data.shape[0]
    i_idx, j_idx = pair_indices(n)
    p = len(i_idx)
    dummies = np.arange(n, n + p, dtype=np.intp)
    src = np.concatenate([i_idx, j_idx, dummies, dummies])
    dst = np.concatenate([dummies, dummies, i_idx, j_idx])
    feats = T.concat([T.tensor(np.zeros((n, 2))), egnn_distance_features(cloud)], axis=0)
    return feats, EdgeIndex(src, dst, n + p), p


def edge_probs_egnn(ae: GraphAutoencoder, cloud: Tensor) -> Tensor:
    """Edge probabilities from per-pair dummy nodes carrying distances."""
    n = cloud.data.shape[0]
    if n < 2:
        raise TooFewPoints(f"EGNN decoding needs at least 2 points, got {n}")
    feats, aug_e, p = _egnn_augmented(cloud)
    f = ae.dec2(T.relu(ae.dec1(feats, aug_e)), aug_e)
    dummy_f = T.narrow(f, 0, n, p)
    return T.sigmoid(ae.edge_mlp(dummy_f))


def edge_probs(ae: GraphAutoencoder, cloud: Tensor) -> Tensor:
    return edge_probs_gnn(ae, cloud) if ae.kind == "gnn" else edge_probs_egnn(ae, cloud)


def _decode_atoms(ae: GraphAutoencoder, at: AtomTypeAutoencoder,
                  cloud: Tensor) -> tuple[Element, ...]:
    atom_cols = T.narrow(cloud, 1, ae.z, 2)
    probs = at.decode_probs(atom_cols).data
    return tuple(ELEMENTS[k] for k in probs.argmax(axis=1))


def _threshold_edges(probs: np.ndarray, n: int, tau: float) -> list[tuple[int, int]]:
    i_idx, j_idx = pair_indices(n)
    keep = probs.ravel() >= tau
    return [(int(a), int(b)) for a, b, k in zip(i_idx, j_idx, keep) if k]


def decode_gnn(ae: GraphAutoencoder, at: AtomTypeAutoencoder,
               cloud: LatentCloud) -> UntypedGraph:
    """Threshold decode over the complete graph of latent points."""
    pts = T.tensor(cloud.points)
    atoms = _decode_atoms(ae, at, pts)
    if cloud.n < 2:
        return UntypedGraph(atoms, [])
    probs = edge_probs_gnn(ae, pts).data
    return UntypedGraph(atoms, _threshold_edges(probs, cloud.n, ae.tau))


def decode_egnn(ae: GraphAutoencoder, at: AtomTypeAutoencoder,
                cloud: LatentCloud) -> UntypedGraph:
    """Distance-feature decode; the edge set ignores cloud orientation."""
    if cloud.n < 2:
        raise TooFewPoints(f"EGNN decoding needs at least 2 points, got {cloud.n}")
    pts = T.tensor(cloud.points)
    atoms = _decode_atoms(ae, at, pts)
    probs = edge_probs_egnn(ae, pts).data
    return UntypedGraph(atoms, _threshold_edges(probs, cloud.n, ae.tau))


def decode(ae: GraphAutoencoder, at: AtomTypeAutoencoder,
           cloud: LatentCloud) -> UntypedGraph:
    if ae.kind == "egnn" and cloud.n >= 2:
        return decode_egnn(ae, at, cloud)
    return decode_gnn(ae, at, cloud)


def reconstruction_loss(ae: GraphAutoencoder, at: AtomTypeAutoencoder,
                        m: MolGraph) -> Tensor:
    """MSE between pair probabilities and 0/1 adjacency, plus MSE between
    the atom-type softmax and the one-hot elements."""
    cloud = encode_t(ae, at, m)
    onehot = atom_onehot(m)
    atom_cols = T.narrow(cloud, 1, ae.z, 2)
    atom_probs = at.decode_probs(atom_cols)
    loss = T.mse(atom_probs, T.tensor(onehot))
    if m.n >= 2:
        probs = edge_probs(ae, cloud)
        bonded = {(i, j) for i, j, _ in m.bonds}
        i_idx, j_idx = pair_indices(m.n)
        target = np.array([[1.0 if (a, b) in bonded else 0.0]
                           for a, b in zip(i_idx, j_idx)])
        loss = T.add(loss, T.mse(probs, T.tensor(target)))
    return loss


# ---------------------------------------------------------------------------
# bond-type prediction


class EdgeTypeModel:
    """Two graph convolutions then an MLP over concatenated endpoint
    embeddings; logits are symmetrized by averaging both orientations."""

    def __init__(self, rng: np.random.Generator, hidden: int = 32,
                 name: str = "edgetype"):
        self.gcn1 = GcnLayer(4, hidden, rng, name=f"{name}.gcn1")
        self.gcn2 = GcnLayer(hidden, hidden, rng, name=f"{name}.gcn2")
        self.head = Mlp([2 * hidden, hidden, len(BOND_TYPES)], rng, name=f"{name}.head")

    def pair_logits(self, atoms: tuple[Element, ...], edges: list[tuple[int, int]]) -> Tensor:
        n = len(atoms)
        x = np.zeros((n, len(ELEMENTS)))
        for i, el in enumerate(atoms):
            x[i, _ELEM_INDEX[el]] = 1.0
        e = edges_from_pairs(n, edges)
        h = T.relu(self.gcn2(T.relu(self.gcn1(T.tensor(x), e)), e))
        i_idx = np.array([p[0] for p in edges], dtype=np.intp)
        j_idx = np.array([p[1] for p in edges], dtype=np.intp)
        fwd = T.concat([T.gather_rows(h, i_idx), T.gather_rows(h, j_idx)], axis=1)
        rev = T.concat([T.gather_rows(h, j_idx), T.gather_rows(h, i_idx)], axis=1)
        return T.mul(T.add(self.head(fwd), self.head(rev)), 0.5)

    def named_params(self):
        return (self.gcn1.named_params() + self.gcn2.named_params()
                + self.head.named_params())


def edge_type_loss(etm: EdgeTypeModel, m: MolGraph) -> Tensor | None:
    """Cross-entropy against ground-truth bond types; None when bondless."""
    bonds = sorted(m.bonds, key=lambda e: (e[0], e[1]))
    if not bonds:
        return None
    edges = [(i, j) for i, j, _ in bonds]
    targets = np.array([_BOND_INDEX[t] for _, _, t in bonds], dtype=np.intp)
    logits = etm.pair_logits(m.atoms, edges)
    return T.softmax_cross_entropy(logits, targets)


def predict_edge_types(etm: EdgeTypeModel,
                       candidate: UntypedGraph) -> tuple[MolGraph, list[tuple[int, int]]]:
    """Assign a bond type to every candidate edge, honoring valence caps.

    Edges are processed in descending confidence (max logit); each pick is
    masked to types that keep both endpoints within their maximum valence
    given the orders already committed. An edge with no feasible type is
    dropped and reported in the second return value.
    """
    if not candidate.edges:
        return MolGraph(candidate.atoms, frozenset()), []

    logits = etm.pair_logits(candidate.atoms, candidate.edges).data
    order = np.argsort(-logits.max(axis=1), kind="stable")

    cap = [2 * el.max_valence for el in candidate.atoms]
    used = [0] * candidate.n
    typed: set[tuple[int, int, BondType]] = set()
    dropped: list[tuple[int, int]] = []

    for e in order:
        i, j = candidate.edges[e]
        best_k, best_logit = -1, -np.inf
        for k, bt in enumerate(BOND_TYPES):
            if used[i] + bt.half_order > cap[i] or used[j] + bt.half_order > cap[j]:
                continue
            if logits[e, k] > best_logit:
                best_k, best_logit = k, logits[e, k]
        if best_k < 0:
            dropped.append((i, j))
            continue
        bt = BOND_TYPES[best_k]
        used[i] += bt.half_order
        used[j] += bt.half_order
        typed.add((min(i, j), max(i, j), bt))

    return MolGraph(candidate.atoms, frozenset(typed)), dropped


# ---------------------------------------------------------------------------
# edges-as-nodes construction (input-space pipeline)


@dataclass
class EdgesAsNodesGraph:
    """Original atoms plus one auxiliary node per unordered pair.

    Feature layout (width 9): columns 0-3 one-hot element on original rows,
    column 4 edge presence on auxiliary rows, columns 5-8 bond-type one-hot
    on auxiliary rows. Auxiliary node k connects to both its endpoints.
    """

    features: np.ndarray
    edges: EdgeIndex
    n_original: int
    pairs: list[tuple[int, int]] = field(default_factory=list)

    FEATURE_WIDTH = 9

    @property
    def n_aux(self) -> int:
        return len(self.pairs)


def _aux_edge_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    i_idx, j_idx = pair_indices(n)
    aux = np.arange(n, n + len(i_idx), dtype=np.intp)
    src = np.concatenate([i_idx.astype(np.intp), j_idx.astype(np.intp), aux, aux])
    dst = np.concatenate([aux, aux, i_idx.astype(np.intp), j_idx.astype(np.intp)])
    return src, dst


def build_edges_as_nodes(m: MolGraph) -> EdgesAsNodesGraph:
    if m.n < 2:
        raise TooFewPoints(f"edges-as-nodes needs at least 2 atoms, got {m.n}")
    n = m.n
    i_idx, j_idx = pair_indices(n)
    pairs = list(zip(i_idx.tolist(), j_idx.tolist()))
    p = len(pairs)
    feats = np.zeros((n + p, EdgesAsNodesGraph.FEATURE_WIDTH))
    feats[:n, :4] = atom_onehot(m)
    typed = {(i, j): t for i, j, t in m.bonds}
    for k, (a, b) in enumerate(pairs):
        t = typed.get((a, b))
        if t is not None:
            feats[n + k, 4] = 1.0
            feats[n + k, 5 + _BOND_INDEX[t]] = 1.0
    src, dst = _aux_edge_arrays(n)
    return EdgesAsNodesGraph(features=feats, edges=EdgeIndex(src, dst, n + p),
                             n_original=n, pairs=pairs)


class InputSpaceAutoencoder:
    """4-layer graph-convolution encoder/decoder over the edges-as-nodes
    graph; compresses every node (original and auxiliary) to z features."""

    def __init__(self, z: int, rng: np.random.Generator, hidden: int = 32,
                 name: str = "inputae"):
        self.z = z
        w = EdgesAsNodesGraph.FEATURE_WIDTH
        self.enc = GcnStack([w, hidden, hidden, hidden, z], rng, name=f"{name}.enc")
        self.dec = GcnStack([z, hidden, hidden, hidden, w], rng, name=f"{name}.dec")

    @property
    def width(self) -> int:
        return self.z

    def encode_t(self, g: EdgesAsNodesGraph) -> Tensor:
        return self.enc(T.tensor(g.features), g.edges)

    def decode_t(self, latent: Tensor, edges: EdgeIndex) -> Tensor:
        return self.dec(latent, edges)

    def named_params(self):
        return self.enc.named_params() + self.dec.named_params()


def input_space_loss(ae: InputSpaceAutoencoder, g: EdgesAsNodesGraph) -> Tensor:
    """Presence and atom-type reconstruction error for one molecule."""
    latent = ae.encode_t(g)
    out = ae.decode_t(latent, g.edges)
    n = g.n_original
    presence = T.sigmoid(T.narrow(T.narrow(out, 0, n, g.n_aux), 1, 4, 1))
    presence_target = g.features[n:, 4:5]
    atom_probs = T.softmax(T.narrow(T.narrow(out, 0, 0, n), 1, 0, 4))
    loss = T.mse(atom_probs, T.tensor(g.features[:n, :4]))
    return T.add(loss, T.mse(presence, T.tensor(presence_target)))


def input_space_decode(ae: InputSpaceAutoencoder, latent: np.ndarray,
                       n_original: int, tau: float = 0.5) -> UntypedGraph:
    """Decode an (n + C(n,2)) x z latent matrix back into a candidate graph."""
    n = n_original
    i_idx, j_idx = pair_indices(n)
    edges_ix = EdgeIndex(*_aux_edge_arrays(n), n + len(i_idx))
    out = ae.decode_t(T.tensor(latent), edges_ix).data
    atoms = tuple(ELEMENTS[k] for k in out[:n, :4].argmax(axis=1))
    presence = 1.0 / (1.0 + np.exp(-out[n:, 4]))
    edges = [(int(a), int(b)) for a, b, keep in zip(i_idx, j_idx, presence >= tau) if keep]
    return UntypedGraph(atoms, edges)
