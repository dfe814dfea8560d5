"""Full model assembly: encoder, dual GIN streams, fusion head, per-subject loss.

Parameters live in a flat ParamStore under dotted names (encoder.*, cdgin.*,
project.*, fusion.*, classifier.*) so checkpoints and the optimizer see one
deterministic namespace. Adjacencies depend only on the data, so they are
precomputed once per subject and reused across epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import cdgin, diffcore as dc, dynamic_fc as dfc, fusion_head as fh
from . import temporal_encoder as te
from .data_io import RoiTimeSeries, zscore_columns
from .errors import ShapeError, WindowBudgetError

STREAMS = ("r", "d")


@dataclass(frozen=True)
class ModelDims:
    """Shape bundle; n_windows_ref fixes the temporal kernel width."""

    m: int
    d: int
    d_p: int
    layers: int
    n_windows_ref: int
    streams: tuple[str, ...] = STREAMS

    def __post_init__(self):
        if self.m < 2 or self.d < 1 or self.d_p < 1 or self.layers < 1:
            raise ShapeError(f"invalid model dims {self}")
        if not self.streams or any(s not in STREAMS for s in self.streams):
            raise ShapeError(f"streams must be drawn from {STREAMS}, got {self.streams}")

    @property
    def fused_channels(self) -> int:
        return len(self.streams) * self.d

    @property
    def kernel_width(self) -> int:
        return fh.temporal_kernel_width(self.n_windows_ref)


def init_params(dims: ModelDims, seed: int) -> dc.ParamStore:
    """Glorot-initialized store; epsilons exactly zero, biases zero."""
    rng = np.random.default_rng(seed)
    store = dc.ParamStore()
    m, d, d_p = dims.m, dims.d, dims.d_p

    def glorot(name, shape, fan_in, fan_out):
        store.add(name, dc.glorot_uniform(rng, shape, fan_in, fan_out))

    def zeros(name, shape):
        store.add(name, np.zeros(shape))

    glorot("encoder.lstm.w_x", (m, 4 * d), m, 4 * d)
    glorot("encoder.lstm.w_h", (d, 4 * d), d, 4 * d)
    zeros("encoder.lstm.b", 4 * d)
    glorot("encoder.w_m", (d, m + d), m + d, d)

    for layer in range(dims.layers):
        for s in dims.streams:
            base = f"cdgin.layer{layer}.{s}"
            store.add(f"{base}.eps", 0.0)
            glorot(f"{base}.w", (d, d), d, d)
            glorot(f"{base}.mlp.w1", (d, d), d, d)
            zeros(f"{base}.mlp.b1", d)
            glorot(f"{base}.mlp.w2", (d, d), d, d)
            zeros(f"{base}.mlp.b2", d)
            glorot(f"{base}.readout.w_q", (d, d), d, d)
            glorot(f"{base}.readout.w_k", (d, d), d, d)

    glorot("project.w1", (d_p, d), d, d_p)
    zeros("project.b1", d_p)
    glorot("project.w2", (d_p, d_p), d_p, d_p)
    zeros("project.b2", d_p)

    c = dims.fused_channels
    reduced = max(1, c // fh.CHANNEL_REDUCTION)
    for layer in range(dims.layers):
        base = f"fusion.layer{layer}"
        glorot(f"{base}.chan.w1", (reduced, c), c, reduced)
        zeros(f"{base}.chan.b1", reduced)
        glorot(f"{base}.chan.w2", (c, reduced), reduced, c)
        zeros(f"{base}.chan.b2", c)
        glorot(f"{base}.temporal.kernel", (2, dims.kernel_width),
               2 * dims.kernel_width, 1)

    hidden = 2 * d
    glorot("classifier.w1", (hidden, dims.layers * c), dims.layers * c, hidden)
    zeros("classifier.b1", hidden)
    glorot("classifier.w2", (1, hidden), hidden, 1)
    zeros("classifier.b2", 1)
    return store


def gin_params(store: dc.ParamStore, layer: int, stream: str) -> cdgin.GinLayerParams:
    base = f"cdgin.layer{layer}.{stream}"
    return cdgin.GinLayerParams(
        eps=store[f"{base}.eps"], w=store[f"{base}.w"],
        mlp_w1=store[f"{base}.mlp.w1"], mlp_b1=store[f"{base}.mlp.b1"],
        mlp_w2=store[f"{base}.mlp.w2"], mlp_b2=store[f"{base}.mlp.b2"],
        w_q=store[f"{base}.readout.w_q"], w_k=store[f"{base}.readout.w_k"])


def cbam_params(store: dc.ParamStore, layer: int) -> fh.CbamLayerParams:
    base = f"fusion.layer{layer}"
    return fh.CbamLayerParams(
        chan_w1=store[f"{base}.chan.w1"], chan_b1=store[f"{base}.chan.b1"],
        chan_w2=store[f"{base}.chan.w2"], chan_b2=store[f"{base}.chan.b2"],
        temporal_kernel=store[f"{base}.temporal.kernel"])


def classifier_params(store: dc.ParamStore) -> fh.ClassifierParams:
    return fh.ClassifierParams(w1=store["classifier.w1"], b1=store["classifier.b1"],
                               w2=store["classifier.w2"], b2=store["classifier.b2"])


@dataclass
class PreparedSubject:
    """Parameter-independent per-subject work, cached across epochs."""

    subject_id: str
    label: int
    encoder_input: np.ndarray  # (T, M), z-scored
    starts: list[int]
    window_size: int
    adjacency: dict[str, list[np.ndarray]]  # stream -> per-window binary A


def prepare_subject(ts: RoiTimeSeries, wspec: dfc.WindowSpec,
                    kind: dfc.DistanceKind, streams: tuple[str, ...] = STREAMS,
                    normalize_fc: bool = True) -> PreparedSubject:
    """Normalize, window, and binarize one subject.

    The encoder always sees z-scored signals. normalize_fc controls only the
    matrix construction input; both Pearson and the rank-based threshold are
    scale-invariant, so it matters to the distance stream alone.
    """
    if wspec.window_size > ts.signals.shape[0]:
        raise WindowBudgetError(
            f"subject {ts.subject_id!r}: window size {wspec.window_size} exceeds "
            f"T={ts.signals.shape[0]}")
    z = zscore_columns(ts.signals)
    fc_input = z if normalize_fc else ts.signals
    pairs = dfc.build_fc_pairs(fc_input, wspec, kind)
    adjacency = {}
    if "r" in streams:
        adjacency["r"] = [p.a_r for p in pairs]
    if "d" in streams:
        adjacency["d"] = [p.a_d for p in pairs]
    return PreparedSubject(subject_id=ts.subject_id, label=ts.label,
                           encoder_input=z, starts=[p.start for p in pairs],
                           window_size=wspec.window_size, adjacency=adjacency)


@dataclass
class SubjectForward:
    y_hat: dc.Tensor
    projections: dict[str, list[dc.Tensor]]
    channel_factors: list[dc.Tensor] = field(default_factory=list)  # per layer (C,)
    temporal_factors: list[dc.Tensor] = field(default_factory=list)  # per layer (N_w,)
    readout_weights: dict[str, list[list[dc.Tensor]]] = field(default_factory=dict)


def forward_subject(store: dc.ParamStore, dims: ModelDims,
                    prep: PreparedSubject) -> SubjectForward:
    """One subject's probability, projections, and attention records."""
    hidden = te.lstm_forward(prep.encoder_input, store["encoder.lstm.w_x"],
                             store["encoder.lstm.w_h"], store["encoder.lstm.b"])
    node_blocks = te.assemble_node_features(hidden, prep.starts, prep.window_size,
                                            store["encoder.w_m"], dims.m)
    n_w = len(node_blocks)

    readouts: dict[str, list[list[dc.Tensor]]] = {}
    weights: dict[str, list[list[dc.Tensor]]] = {}
    for s in dims.streams:
        readouts[s] = [[] for _ in range(dims.layers)]
        weights[s] = [[] for _ in range(dims.layers)]
        for t in range(n_w):
            h = node_blocks[t]
            for layer in range(dims.layers):
                h, vec, attn = cdgin.gin_layer(h, prep.adjacency[s][t],
                                               gin_params(store, layer, s))
                readouts[s][layer].append(vec)
                weights[s][layer].append(attn)

    h_a_layers = []
    channel_factors = []
    temporal_factors = []
    for layer in range(dims.layers):
        rows = []
        for t in range(n_w):
            parts = [readouts[s][layer][t] for s in dims.streams]
            rows.append(parts[0] if len(parts) == 1 else dc.concat(parts, axis=0))
        h_f = dc.stack_rows(rows)  # (N_w, C)
        p = cbam_params(store, layer)
        cf = fh.channel_attention(h_f, p)
        tf = fh.temporal_attention(h_f, p)
        h_a_layers.append(fh.apply_attention(h_f, cf, tf))
        channel_factors.append(cf)
        temporal_factors.append(tf)

    y_hat = fh.classify(h_a_layers, classifier_params(store))

    projections = {}
    for s in dims.streams:
        projections[s] = [cdgin.project(vec, store["project.w1"], store["project.b1"],
                                        store["project.w2"], store["project.b2"])
                          for vec in readouts[s][dims.layers - 1]]
    return SubjectForward(y_hat=y_hat, projections=projections,
                          channel_factors=channel_factors,
                          temporal_factors=temporal_factors,
                          readout_weights=weights)


def subject_loss_parts(
        store: dc.ParamStore, dims: ModelDims, prep: PreparedSubject,
        ccfg: cdgin.ContrastiveConfig,
) -> tuple[dc.Tensor, dc.Tensor, dc.Tensor | None]:
    """(total, bce term, contrastive term or None) for one subject."""
    out = forward_subject(store, dims, prep)
    l_info = None
    if ccfg.alpha > 0.0:
        n_w = len(prep.starts)
        if n_w < ccfg.delta + 1:
            raise WindowBudgetError(
                f"subject {prep.subject_id!r}: {n_w} windows < delta+1="
                f"{ccfg.delta + 1} required by the contrastive term")
        if len(dims.streams) == 2:
            l_info = cdgin.contrastive_loss(out.projections["r"],
                                            out.projections["d"], ccfg)
        else:
            only = dims.streams[0]
            l_info = contrastive_loss_single(out.projections[only], ccfg)
    l_bce = fh.bce(out.y_hat, prep.label)
    total = l_bce
    if l_info is not None:
        total = dc.add(total, dc.mul_scalar(l_info, ccfg.alpha))
    return total, l_bce, l_info


def subject_loss(store: dc.ParamStore, dims: ModelDims, prep: PreparedSubject,
                 ccfg: cdgin.ContrastiveConfig) -> dc.Tensor:
    """BCE plus the alpha-weighted contrastive term for one subject."""
    return subject_loss_parts(store, dims, prep, ccfg)[0]


def contrastive_loss_single(z: list[dc.Tensor],
                            cfg: cdgin.ContrastiveConfig) -> dc.Tensor:
    """Same-stream-only variant used when one stream is ablated.

    Identical conventions minus the cross-stream denominator sum. Anchors
    whose denominator would hold only the positive contribute -log(1) = 0.
    """
    n = len(z)
    norms = [cdgin._norm(t) for t in z]
    anchor_losses = []
    for i in range(n):
        positives = [p for p in (i - cfg.delta, i + cfg.delta) if 0 <= p < n]
        if not positives:
            continue
        excluded = {i, i - cfg.delta, i + cfg.delta}
        negs = [dc.exp(cdgin._cosine(z[i], z[j], norms[i], norms[j]))
                for j in range(n) if j not in excluded]
        per_pos = []
        for p in positives:
            s_pos = cdgin._cosine(z[i], z[p], norms[i], norms[p])
            denom = dc.exp(s_pos)
            for t in negs:
                denom = dc.add(denom, t)
            per_pos.append(dc.sub(dc.log(denom), s_pos))
        total = per_pos[0]
        for t in per_pos[1:]:
            total = dc.add(total, t)
        anchor_losses.append(dc.mul_scalar(total, 1.0 / len(per_pos)))
    total = anchor_losses[0]
    for t in anchor_losses[1:]:
        total = dc.add(total, t)
    return dc.mul_scalar(total, 1.0 / len(anchor_losses))
