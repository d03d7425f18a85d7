"""Training orchestration: autoencoders first, then the flow on frozen embeddings.

A run produces two checkpoints in the run directory: ``codec.mdl1`` (graph
autoencoder, atom-type autoencoder, bond-type classifier) and ``flow.mdl1``
(restoration model plus the embedding standardizer and schedule constants
in the metadata header). Wall-clock seconds for the two phases and the
total trainable parameter count are recorded alongside.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .. import codec, flows
from ..chem import Dataset, MolGraph
from ..diffcore import AdamState, Tape, adam_step, backward, load_params, save_params
from ..gnn import FlowFieldNet
from .config import ConfigInvalid, ExperimentConfig
from .data import resolve_dataset


class CheckpointMismatch(ValueError):
    pass


@dataclass
class Standardizer:
    """Per-column affine map fitted on the training embedding rows."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, rows: np.ndarray, scale: float = 1.0) -> "Standardizer":
        """Map rows to mean 0 and standard deviation ``scale`` per column."""
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        return cls(mean=mean, std=np.maximum(std, 1e-6) / scale)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def invert(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean


@dataclass
class TrainedPipeline:
    cfg: ExperimentConfig
    dataset: Dataset
    subset: list[MolGraph]
    graph_ae: codec.GraphAutoencoder | None
    input_ae: codec.InputSpaceAutoencoder | None
    atom_ae: codec.AtomTypeAutoencoder | None
    edge_type: codec.EdgeTypeModel
    flow: object  # DdpmModel | HeatModel | FlowField
    standardizer: Standardizer
    ae_seconds: float = 0.0
    flow_seconds: float = 0.0
    param_count: int = 0
    history: dict = field(default_factory=dict)

    @property
    def flow_width(self) -> int:
        if self.input_ae is not None:
            return self.input_ae.width
        return self.graph_ae.width


def _spawn(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _param_list(named):
    return [p for _, p in named]


def _train_loop(loss_fn, items, epochs, params, lr, rng) -> list[float]:
    """Generic per-item training loop; returns mean loss per epoch."""
    state = AdamState(params, lr=lr)
    epoch_losses = []
    idx = np.arange(len(items))
    for _ in range(epochs):
        rng.shuffle(idx)
        total, counted = 0.0, 0
        for i in idx:
            with Tape() as tape:
                loss = loss_fn(items[i])
                if loss is None:
                    continue
                grads = backward(tape, loss)
            adam_step(state, grads)
            total += float(loss.data)
            counted += 1
        epoch_losses.append(total / max(counted, 1))
    return epoch_losses


def _select_subset(dataset: Dataset, cfg: ExperimentConfig,
                   rng: np.random.Generator) -> list[MolGraph]:
    mols = dataset.molecules
    if cfg.subset is None or cfg.subset >= len(mols):
        return list(mols)
    picks = rng.choice(len(mols), size=cfg.subset, replace=False)
    return [mols[int(i)] for i in picks]


def _build_codec(cfg: ExperimentConfig, rng: np.random.Generator):
    if cfg.experiment == "input_space_gaussian":
        return None, None, codec.InputSpaceAutoencoder(cfg.latent_z, rng)
    kind = "egnn" if cfg.experiment == "egnn_gaussian" else "gnn"
    return (codec.GraphAutoencoder(cfg.latent_z, rng, kind=kind),
            codec.AtomTypeAutoencoder(rng), None)


def _build_flow(cfg: ExperimentConfig, width: int, rng: np.random.Generator):
    if cfg.experiment == "egnn_gaussian":
        return flows.DdpmModel(flows.EgnnRestorer(width, rng), flows.DdpmSchedule())
    if cfg.experiment in ("gnn_gaussian", "input_space_gaussian"):
        return flows.DdpmModel(flows.GnnRestorer(width, rng), flows.DdpmSchedule())
    if cfg.experiment == "heat_1d":
        return flows.HeatModel(width, flows.HeatSchedule(), rng)
    if cfg.experiment == "flow_matching":
        return flows.FlowField(FlowFieldNet(width, rng))
    raise ConfigInvalid(f"no flow for experiment {cfg.experiment!r}")


def _flow_kind(cfg: ExperimentConfig) -> str:
    return {"gnn_gaussian": "ddpm_gnn", "egnn_gaussian": "ddpm_egnn",
            "input_space_gaussian": "ddpm_gnn", "heat_1d": "heat",
            "flow_matching": "flow_matching"}[cfg.experiment]


def _flow_meta(cfg: ExperimentConfig, flow) -> dict:
    meta = {"flow": _flow_kind(cfg), "experiment": cfg.experiment,
            "latent_z": cfg.latent_z}
    if isinstance(flow, flows.DdpmModel):
        meta.update(steps=flow.sched.steps, beta_start=flow.sched.beta_start,
                    beta_end=flow.sched.beta_end)
    elif isinstance(flow, flows.HeatModel):
        s = flow.sched
        meta.update(steps=s.steps, sigma_min=s.sigma_min, sigma_max=s.sigma_max,
                    train_noise_std=s.train_noise_std, eta=s.eta,
                    kl_mean=s.kl_mean, kl_var=s.kl_var)
    elif isinstance(flow, flows.FlowField):
        meta.update(sigma_min=flow.sigma_min, ode_steps=flow.ode_steps)
    return meta


def _encode_subset(pipe_parts, cfg, subset):
    """Frozen-encoder embeddings for every training molecule."""
    graph_ae, atom_ae, input_ae = pipe_parts
    clouds = []
    for m in subset:
        if input_ae is not None:
            if m.n < 2:
                continue
            g = codec.build_edges_as_nodes(m)
            clouds.append(input_ae.encode_t(g).data)
        else:
            clouds.append(codec.encode_t(graph_ae, atom_ae, m).data)
    return clouds


def train_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> TrainedPipeline:
    """Run both training phases and write checkpoints under cfg.run_dir."""
    if dataset is None:
        dataset = resolve_dataset(cfg)
    rngs = _spawn(cfg.seed, 5)
    init_rng, subset_rng, ae_rng, flow_rng, _ = rngs

    subset = _select_subset(dataset, cfg, subset_rng)
    graph_ae, atom_ae, input_ae = _build_codec(cfg, init_rng)
    edge_type = codec.EdgeTypeModel(init_rng)

    # phase 1: autoencoder(s) plus the bond-type classifier
    t0 = time.perf_counter()
    if input_ae is not None:
        graphs = [codec.build_edges_as_nodes(m) for m in subset if m.n >= 2]
        ae_params = _param_list(input_ae.named_params())
        ae_hist = _train_loop(lambda g: codec.input_space_loss(input_ae, g),
                              graphs, cfg.epochs, ae_params, cfg.lr, ae_rng)
    else:
        ae_params = _param_list(graph_ae.named_params() + atom_ae.named_params())
        ae_hist = _train_loop(lambda m: codec.reconstruction_loss(graph_ae, atom_ae, m),
                              subset, cfg.epochs, ae_params, cfg.lr, ae_rng)
    et_params = _param_list(edge_type.named_params())
    et_hist = _train_loop(lambda m: codec.edge_type_loss(edge_type, m),
                          subset, cfg.epochs, et_params, cfg.lr, ae_rng)
    ae_seconds = time.perf_counter() - t0

    # phase 2: flow on frozen-encoder embeddings
    clouds = _encode_subset((graph_ae, atom_ae, input_ae), cfg, subset)
    standardizer = Standardizer.fit(np.concatenate(clouds, axis=0))
    flow_data = [standardizer.apply(c) for c in clouds]
    if cfg.experiment == "heat_1d":
        # the heat process degrades and restores in the exponentiated space
        flow_data = [np.exp(c) for c in flow_data]

    width = input_ae.width if input_ae is not None else graph_ae.width
    flow = _build_flow(cfg, width, init_rng)
    flow_params = _param_list(flow.named_params())

    t0 = time.perf_counter()
    if isinstance(flow, flows.DdpmModel):
        flow_loss = lambda c: flows.ddpm_loss(flow, c, flow_rng)
    elif isinstance(flow, flows.HeatModel):
        flow_loss = lambda c: flows.heat_loss(flow, c, flow_rng)
    else:
        flow_loss = lambda c: flows.fm_loss(flow, c, flow_rng)
    flow_hist = _train_loop(flow_loss, flow_data, cfg.epochs, flow_params,
                            cfg.lr, flow_rng)
    flow_seconds = time.perf_counter() - t0

    param_count = sum(p.data.size for p in ae_params + et_params + flow_params)

    pipeline = TrainedPipeline(
        cfg=cfg, dataset=dataset, subset=subset, graph_ae=graph_ae,
        input_ae=input_ae, atom_ae=atom_ae, edge_type=edge_type, flow=flow,
        standardizer=standardizer, ae_seconds=ae_seconds,
        flow_seconds=flow_seconds, param_count=param_count,
        history={"ae": ae_hist, "edge_type": et_hist, "flow": flow_hist},
    )
    save_pipeline(pipeline)
    return pipeline


# ---------------------------------------------------------------------------
# checkpoint I/O


def _named_arrays(named) -> dict[str, np.ndarray]:
    return {name: p.data for name, p in named}


def save_pipeline(pipe: TrainedPipeline) -> None:
    cfg = pipe.cfg
    run_dir = cfg.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)

    codec_named = []
    if pipe.input_ae is not None:
        codec_named += pipe.input_ae.named_params()
    else:
        codec_named += pipe.graph_ae.named_params() + pipe.atom_ae.named_params()
    codec_named += pipe.edge_type.named_params()
    codec_meta = {"experiment": cfg.experiment, "latent_z": cfg.latent_z}
    save_params(run_dir / "codec.mdl1", _named_arrays(codec_named), meta=codec_meta)

    flow_named = dict(_named_arrays(pipe.flow.named_params()))
    flow_named["standardizer.mean"] = pipe.standardizer.mean
    flow_named["standardizer.std"] = pipe.standardizer.std
    save_params(run_dir / "flow.mdl1", flow_named, meta=_flow_meta(cfg, pipe.flow))

    record = {
        "config": json.loads(cfg.to_json()),
        "ae_seconds": pipe.ae_seconds,
        "flow_seconds": pipe.flow_seconds,
        "param_count": pipe.param_count,
        "history": pipe.history,
        "dataset": pipe.dataset.source,
        "subset_size": len(pipe.subset),
    }
    (run_dir / "training.json").write_text(json.dumps(record, indent=2))


def _restore(named_params, stored: dict[str, np.ndarray], path) -> None:
    for name, p in named_params:
        if name not in stored:
            raise CheckpointMismatch(f"{path}: missing parameter {name}")
        if stored[name].shape != p.data.shape:
            raise CheckpointMismatch(
                f"{path}: {name} has shape {stored[name].shape}, expected {p.data.shape}")
        p.data = stored[name].copy()


def load_pipeline(cfg: ExperimentConfig, dataset: Dataset | None = None) -> TrainedPipeline:
    """Rebuild a pipeline from the checkpoints in cfg.run_dir."""
    if dataset is None:
        dataset = resolve_dataset(cfg)
    run_dir = cfg.run_dir
    codec_stored, codec_meta = load_params(run_dir / "codec.mdl1")
    if codec_meta.get("experiment") != cfg.experiment or codec_meta.get("latent_z") != cfg.latent_z:
        raise CheckpointMismatch(
            f"{run_dir}: checkpoint is for {codec_meta.get('experiment')}"
            f" z={codec_meta.get('latent_z')}, config wants {cfg.experiment} z={cfg.latent_z}")

    rng = np.random.default_rng(0)
    graph_ae, atom_ae, input_ae = _build_codec(cfg, rng)
    edge_type = codec.EdgeTypeModel(rng)
    named = []
    if input_ae is not None:
        named += input_ae.named_params()
    else:
        named += graph_ae.named_params() + atom_ae.named_params()
    named += edge_type.named_params()
    _restore(named, codec_stored, run_dir / "codec.mdl1")

    flow_stored, flow_meta = load_params(run_dir / "flow.mdl1")
    if flow_meta.get("flow") != _flow_kind(cfg):
        raise CheckpointMismatch(
            f"{run_dir}: flow checkpoint is {flow_meta.get('flow')},"
            f" config wants {_flow_kind(cfg)}")
    width = input_ae.width if input_ae is not None else graph_ae.width
    flow = _build_flow(cfg, width, rng)
    _restore(flow.named_params(), flow_stored, run_dir / "flow.mdl1")
    standardizer = Standardizer(mean=flow_stored["standardizer.mean"],
                                std=flow_stored["standardizer.std"])

    rec_path = run_dir / "training.json"
    record = json.loads(rec_path.read_text()) if rec_path.exists() else {}

    subset = _select_subset(dataset, cfg, _spawn(cfg.seed, 5)[1])
    return TrainedPipeline(
        cfg=cfg, dataset=dataset, subset=subset, graph_ae=graph_ae,
        input_ae=input_ae, atom_ae=atom_ae, edge_type=edge_type, flow=flow,
        standardizer=standardizer,
        ae_seconds=record.get("ae_seconds", 0.0),
        flow_seconds=record.get("flow_seconds", 0.0),
        param_count=record.get("param_count", 0),
        history=record.get("history", {}),
    )
