"""Reverse-mode autodiff substrate: float64 tensors, primitive ops, Adam, checkpoints.

Everything trainable in the model lives in a :class:`ParamStore` of named
:class:`Tensor` objects. Forward passes build a fresh op graph each time;
:func:`backward` walks it once in reverse topological order and accumulates
gradients into the leaves. The primitive set is deliberately small and every
primitive has a hand-written adjoint that is finite-difference tested.

All arithmetic is 64-bit; gradient checks at 1e-4 relative tolerance are not
reliable below that precision.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError, ParseError, ShapeError, StateError

LOG_FLOOR = 1e-12


class Tensor:
    """A float64 array with an optional gradient slot and graph linkage.

    Leaves created with ``requires_grad=True`` accumulate into ``grad`` on
    :func:`backward`; intermediates keep transient buffers only for the
    duration of one backward walk, so backward-ing the same graph twice
    exactly doubles the leaf gradients.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape})"


def const(data) -> Tensor:
    return Tensor(data)


def param(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _make(out: np.ndarray, op: str, parents: tuple, backward) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise NumericsError(f"non-finite values produced by op '{op}'")
    if any(p.requires_grad for p in parents):
        return Tensor(out, requires_grad=True, parents=parents, backward=backward, op=op)
    return Tensor(out, op=op)


# ---------------------------------------------------------------------------
# primitive ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add: {a.data.shape} vs {b.data.shape}")
    out = a.data + b.data
    return _make(out, "add", (a, b), lambda g: ((a, g), (b, g)))


def add_bias(m: Tensor, v: Tensor) -> Tensor:
    """Row-broadcast add of a length-C bias onto an (R, C) matrix."""
    if m.data.ndim != 2 or v.data.shape != (m.data.shape[1],):
        raise ShapeError(f"add_bias: {m.data.shape} vs {v.data.shape}")
    out = m.data + v.data
    return _make(out, "add_bias", (m, v), lambda g: ((m, g), (v, g.sum(axis=0))))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub: {a.data.shape} vs {b.data.shape}")
    out = a.data - b.data
    return _make(out, "sub", (a, b), lambda g: ((a, g), (b, -g)))


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, "neg", (a,), lambda g: ((a, -g),))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul: {a.data.shape} vs {b.data.shape}")
    out = a.data * b.data
    return _make(out, "mul", (a, b), lambda g: ((a, g * b.data), (b, g * a.data)))


def mul_scalar(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, "mul_scalar", (a,), lambda g: ((a, g * c),))


def scale(a: Tensor, s: Tensor) -> Tensor:
    """Multiply an array by a scalar () tensor (e.g. the learnable epsilon)."""
    if s.data.shape != ():
        raise ShapeError("scale: scalar tensor required")
    out = a.data * s.data
    return _make(out, "scale", (a, s),
                 lambda g: ((a, g * float(s.data)), (s, np.asarray((g * a.data).sum()))))


def div(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"div: {a.data.shape} vs {b.data.shape}")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data
    return _make(out, "div", (a, b),
                 lambda g: ((a, g / b.data), (b, -g * a.data / (b.data * b.data))))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data
    return _make(out, "matmul", (a, b),
                 lambda g: ((a, g @ b.data.T), (b, a.data.T @ g)))


def matvec(m: Tensor, v: Tensor) -> Tensor:
    if m.data.ndim != 2 or v.data.shape != (m.data.shape[1],):
        raise ShapeError(f"matvec: {m.data.shape} @ {v.data.shape}")
    out = m.data @ v.data
    return _make(out, "matvec", (m, v),
                 lambda g: ((m, np.outer(g, v.data)), (v, m.data.T @ g)))


def vecmat(v: Tensor, m: Tensor) -> Tensor:
    if m.data.ndim != 2 or v.data.shape != (m.data.shape[0],):
        raise ShapeError(f"vecmat: {v.data.shape} @ {m.data.shape}")
    out = v.data @ m.data
    return _make(out, "vecmat", (v, m),
                 lambda g: ((v, m.data @ g), (m, np.outer(v.data, g))))


def dot(u: Tensor, v: Tensor) -> Tensor:
    if u.data.shape != v.data.shape or u.data.ndim != 1:
        raise ShapeError(f"dot: {u.data.shape} vs {v.data.shape}")
    out = np.asarray(u.data @ v.data)
    return _make(out, "dot", (u, v),
                 lambda g: ((u, float(g) * v.data), (v, float(g) * u.data)))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("transpose: 2-D only")
    return _make(a.data.T, "transpose", (a,), lambda g: ((a, g.T),))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape
    out = a.data.reshape(shape)
    return _make(out, "reshape", (a,), lambda g: ((a, g.reshape(old)),))


def sum_all(a: Tensor) -> Tensor:
    out = np.asarray(a.data.sum())
    return _make(out, "sum", (a,),
                 lambda g: ((a, np.full(a.data.shape, float(g))),))


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = np.asarray(a.data.mean())
    return _make(out, "mean", (a,),
                 lambda g: ((a, np.full(a.data.shape, float(g) / n)),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    return _make(out, "sigmoid", (a,), lambda g: ((a, g * out * (1.0 - out)),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, "tanh", (a,), lambda g: ((a, g * (1.0 - out * out)),))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _make(out, "exp", (a,), lambda g: ((a, g * out),))


def log(a: Tensor) -> Tensor:
    """Natural log with the argument floored at LOG_FLOOR; zero grad below the floor."""
    clipped = np.maximum(a.data, LOG_FLOOR)
    out = np.log(clipped)
    mask = a.data > LOG_FLOOR
    return _make(out, "log", (a,), lambda g: ((a, g * mask / clipped),))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _make(out, "sqrt", (a,), lambda g: ((a, g * 0.5 / out),))


def clip_min(a: Tensor, lo: float) -> Tensor:
    lo = float(lo)
    out = np.maximum(a.data, lo)
    mask = a.data > lo
    return _make(out, "clip_min", (a,), lambda g: ((a, g * mask),))


def softmax(a: Tensor) -> Tensor:
    """Stable softmax over a 1-D vector (max-subtraction)."""
    if a.data.ndim != 1:
        raise ShapeError("softmax: 1-D only")
    e = np.exp(a.data - a.data.max())
    out = e / e.sum()
    return _make(out, "softmax", (a,),
                 lambda g: ((a, out * (g - np.dot(g, out))),))


def mean_pool(a: Tensor, axis: int) -> Tensor:
    if a.data.ndim != 2 or axis not in (0, 1):
        raise ShapeError("mean_pool: 2-D input, axis 0 or 1")
    n = a.data.shape[axis]
    out = a.data.mean(axis=axis)

    def bk(g):
        if axis == 0:
            return ((a, np.tile(g / n, (n, 1))),)
        return ((a, np.tile((g / n)[:, None], (1, n))),)

    return _make(out, "mean_pool", (a,), bk)


def max_pool(a: Tensor, axis: int) -> Tensor:
    """Max over one axis of a 2-D array; gradient routes to the first argmax."""
    if a.data.ndim != 2 or axis not in (0, 1):
        raise ShapeError("max_pool: 2-D input, axis 0 or 1")
    idx = a.data.argmax(axis=axis)
    out = a.data.max(axis=axis)

    def bk(g):
        ga = np.zeros_like(a.data)
        if axis == 0:
            ga[idx, np.arange(a.data.shape[1])] = g
        else:
            ga[np.arange(a.data.shape[0]), idx] = g
        return ((a, ga),)

    return _make(out, "max_pool", (a,), bk)


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat: empty input")
    arrays = [p.data for p in parts]
    out = np.concatenate(arrays, axis=axis)
    sizes = [arr.shape[axis] for arr in arrays]
    offsets = np.cumsum([0] + sizes)

    def bk(g):
        slices = []
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            slices.append((p, g[tuple(sl)]))
        return tuple(slices)

    return _make(out, "concat", tuple(parts), bk)


def stack_rows(vectors: list[Tensor]) -> Tensor:
    """Stack n length-d vectors into an (n, d) matrix."""
    if not vectors:
        raise ShapeError("stack_rows: empty input")
    out = np.stack([v.data for v in vectors], axis=0)

    def bk(g):
        return tuple((v, g[i]) for i, v in enumerate(vectors))

    return _make(out, "stack_rows", tuple(vectors), bk)


def segment(v: Tensor, start: int, stop: int) -> Tensor:
    if v.data.ndim != 1:
        raise ShapeError("segment: 1-D only")
    out = v.data[start:stop]

    def bk(g):
        gv = np.zeros_like(v.data)
        gv[start:stop] = g
        return ((v, gv),)

    return _make(out, "segment", (v,), bk)


def row(m: Tensor, i: int) -> Tensor:
    if m.data.ndim != 2:
        raise ShapeError("row: 2-D only")
    out = m.data[i]

    def bk(g):
        gm = np.zeros_like(m.data)
        gm[i] = g
        return ((m, gm),)

    return _make(out, "row", (m,), bk)


def conv1d_same(x: Tensor, kernel: Tensor) -> Tensor:
    """1-D convolution with 'same' zero padding.

    ``x`` is (C, L), ``kernel`` is (C, w) with w odd; channels are summed into
    a single length-L output.
    """
    if x.data.ndim != 2 or kernel.data.ndim != 2 or x.data.shape[0] != kernel.data.shape[0]:
        raise ShapeError(f"conv1d_same: {x.data.shape} with kernel {kernel.data.shape}")
    w = kernel.data.shape[1]
    if w % 2 != 1:
        raise ShapeError("conv1d_same: kernel width must be odd")
    pad = (w - 1) // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, w, axis=1)  # (C, L, w)
    out = np.einsum("clw,cw->l", win, kernel.data)

    def bk(g):
        gk = np.einsum("clw,l->cw", win, g)
        L = x.data.shape[1]
        gx = np.empty_like(x.data)
        for c in range(x.data.shape[0]):
            full = np.convolve(g, kernel.data[c], mode="full")  # length L + w - 1
            gx[c] = full[pad:pad + L]
        return ((x, gx), (kernel, gk))

    return _make(out, "conv1d_same", (x, kernel), bk)


def lstm(x: np.ndarray, w_x: Tensor, w_h: Tensor, b: Tensor) -> Tensor:
    """Single-layer LSTM over a constant (T, M) input; returns the (T, D) hidden sequence.

    Fused into one op with a hand-written BPTT adjoint: the per-timestep graph
    would otherwise dominate runtime. Gate layout along the 4D axis is
    input, forget, cell, output.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    T = x.shape[0]
    four_d = w_x.data.shape[1]
    if four_d % 4 != 0 or w_h.data.shape != (four_d // 4, four_d) or b.data.shape != (four_d,):
        raise ShapeError("lstm: inconsistent gate shapes")
    if x.shape[1] != w_x.data.shape[0]:
        raise ShapeError(f"lstm: input width {x.shape[1]} vs w_x {w_x.data.shape}")
    D = four_d // 4

    xw = x @ w_x.data  # (T, 4D)
    I = np.empty((T, D)); F = np.empty((T, D)); G = np.empty((T, D)); O = np.empty((T, D))
    C = np.empty((T, D)); TC = np.empty((T, D)); Hprev = np.empty((T, D))
    h = np.zeros(D)
    c = np.zeros(D)
    for t in range(T):
        Hprev[t] = h
        a = xw[t] + h @ w_h.data + b.data
        ia = a[:D]; fa = a[D:2 * D]; ga = a[2 * D:3 * D]; oa = a[3 * D:]
        i_t = 1.0 / (1.0 + np.exp(-ia))
        f_t = 1.0 / (1.0 + np.exp(-fa))
        g_t = np.tanh(ga)
        o_t = 1.0 / (1.0 + np.exp(-oa))
        c = f_t * c + i_t * g_t
        tc = np.tanh(c)
        h = o_t * tc
        I[t], F[t], G[t], O[t], C[t], TC[t] = i_t, f_t, g_t, o_t, c, tc
    H = O * TC

    def bk(g):
        DA = np.empty((T, 4 * D))
        dh = np.zeros(D)
        dc = np.zeros(D)
        for t in range(T - 1, -1, -1):
            dh = dh + g[t]
            do = dh * TC[t]
            dc = dc + dh * O[t] * (1.0 - TC[t] * TC[t])
            di = dc * G[t]
            dg = dc * I[t]
            c_prev = C[t - 1] if t > 0 else np.zeros(D)
            df = dc * c_prev
            dc = dc * F[t]
            DA[t, :D] = di * I[t] * (1.0 - I[t])
            DA[t, D:2 * D] = df * F[t] * (1.0 - F[t])
            DA[t, 2 * D:3 * D] = dg * (1.0 - G[t] * G[t])
            DA[t, 3 * D:] = do * O[t] * (1.0 - O[t])
            dh = DA[t] @ w_h.data.T
        return ((w_x, x.T @ DA), (w_h, Hprev.T @ DA), (b, DA.sum(axis=0)))

    return _make(H, "lstm", (w_x, w_h, b), bk)


# ---------------------------------------------------------------------------
# backward
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``."""
    if loss.data.shape != ():
        raise ShapeError("backward: loss must be scalar")
    if not loss.requires_grad:
        return

    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    # grads maps id(tensor) -> (buffer, owned); borrowed buffers are never
    # mutated in place, ownership is taken on the second contribution.
    grads: dict[int, tuple[np.ndarray, bool]] = {id(loss): (np.ones(()), True)}

    def _accumulate(t: Tensor, contrib: np.ndarray) -> None:
        key = id(t)
        cur = grads.get(key)
        if cur is None:
            grads[key] = (contrib, False)
        else:
            buf, owned = cur
            if owned:
                buf += contrib
            else:
                # np.asarray: 0-d sums come back as immutable numpy scalars,
                # which would silently drop later in-place accumulations
                grads[key] = (np.asarray(buf + contrib), True)

    for node in reversed(order):
        g = grads.pop(id(node))[0]
        if node._backward is None:
            if node.grad is None:
                node.grad = np.array(g)
            else:
                node.grad += g
        else:
            for parent, contrib in node._backward(g):
                if parent.requires_grad:
                    _accumulate(parent, contrib)


# ---------------------------------------------------------------------------
# parameters and optimizer
# ---------------------------------------------------------------------------

class ParamStore:
    """Named parameter tensors; iteration is always sorted by name."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data) -> Tensor:
        if name in self._params:
            raise StateError(f"duplicate parameter name {name!r}")
        t = param(data)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        return [(n, self._params[n]) for n in sorted(self._params)]

    def zero_grad(self) -> None:
        for _, p in self.items():
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            else:
                p.grad.fill(0.0)

    def n_coordinates(self) -> int:
        return sum(p.data.size for p in self._params.values())


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...],
                   fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class AdamState:
    """Adam moments plus hyperparameters; weight decay is decoupled."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState) -> None:
    """One Adam update with bias correction; decay applied before the Adam delta."""
    if all(p.grad is None for _, p in store.items()):
        raise StateError("adam_step called before any backward pass populated gradients")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in store.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if state.weight_decay:
            p.data -= state.lr * state.weight_decay * p.data
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_err: float
    n_coords: int
    worst_param: str
    worst_index: int
    analytic: float
    numeric: float


def finite_diff_check(build_loss, named_tensors: list[tuple[str, Tensor]],
                      coords: dict[str, np.ndarray], h: float = 1e-5,
                      denom_floor: float = 1e-6) -> GradCheckReport:
    """Compare reverse-mode gradients of ``build_loss()`` against central differences.

    ``build_loss`` must rebuild the forward graph from the live tensors on
    every call. Relative error uses max(|analytic|, |numeric|, denom_floor)
    as the denominator. The floor matters: central differences carry roundoff
    noise near eps*|loss|/(2h), about 1e-11 at h=1e-5, so coordinates with
    gradients that small would fail any relative test no matter how exact the
    reverse pass is. Flooring at 1e-6 turns those into an absolute check
    (|analytic - numeric| < tol * 1e-6) with a healthy margin over the noise.
    """
    for _, t in named_tensors:
        t.grad = None
    loss = build_loss()
    backward(loss)
    analytic = {name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
                for name, t in named_tensors}

    report = GradCheckReport(0.0, 0, "", -1, 0.0, 0.0)
    for name, t in named_tensors:
        flat = t.data.reshape(-1)
        for idx in coords.get(name, ()):
            idx = int(idx)
            orig = flat[idx]
            flat[idx] = orig + h
            fp = float(build_loss().data)
            flat[idx] = orig - h
            fm = float(build_loss().data)
            flat[idx] = orig
            fd = (fp - fm) / (2.0 * h)
            ad = float(analytic[name].reshape(-1)[idx])
            rel = abs(ad - fd) / max(abs(ad), abs(fd), denom_floor)
            report.n_coords += 1
            if rel > report.max_rel_err:
                report.max_rel_err = rel
                report.worst_param = name
                report.worst_index = idx
                report.analytic = ad
                report.numeric = fd
    return report


def sample_coords(store_items: list[tuple[str, Tensor]], target: int,
                  rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Pick >= ``target`` coordinates spread over every tensor (all of the small ones)."""
    per = max(1, int(np.ceil(target / max(1, len(store_items)))))
    coords = {}
    for name, t in store_items:
        n = t.data.size
        if n <= per:
            coords[name] = np.arange(n)
        else:
            coords[name] = rng.choice(n, size=per, replace=False)
    return coords


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"CDGIN1"
CHECKPOINT_SCHEMA_VERSION = 1


def save_params(path: str, store: ParamStore) -> None:
    """Write a versioned binary checkpoint: magic, schema, sorted (name, shape, float64 LE)."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_SCHEMA_VERSION, len(store)))
        for name, p in store.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", p.data.ndim))
            for d in p.data.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_params(path: str) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ParseError(f"{path}: not a checkpoint (bad magic)")
        version, count = struct.unpack("<II", f.read(8))
        if version != CHECKPOINT_SCHEMA_VERSION:
            raise ParseError(f"{path}: unsupported checkpoint schema_version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", f.read(2))
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim)) if ndim else ()
            n = int(np.prod(shape)) if ndim else 1
            buf = f.read(8 * n)
            if len(buf) != 8 * n:
                raise ParseError(f"{path}: truncated checkpoint")
            out[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return out


def load_into(store: ParamStore, path: str) -> None:
    values = load_params(path)
    missing = set(store.names()) - set(values)
    extra = set(values) - set(store.names())
    if missing or extra:
        raise ParseError(f"{path}: parameter names do not match model "
                         f"(missing={sorted(missing)}, extra={sorted(extra)})")
    for name, p in store.items():
        if values[name].shape != p.data.shape:
            raise ShapeError(f"{path}: shape mismatch for {name!r}: "
                             f"{values[name].shape} vs {p.data.shape}")
        p.data[...] = values[name]
