"""Dense/LSTM parameter sets, forward passes, Adam, and bit-exact checkpoints.

Everything is float64 and sized for the 2-layer/256-unit networks used by the
value functions, policy, and the LSTM auto-encoders.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tensor, as_tensor
from .errors import DatasetFormatError, NumericError

HIDDEN_UNITS = 256
ADAM_LR = 3e-4


class ParamSet:
    """Ordered named parameter tensors with a flat view for checksumming."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def flat(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self._params.values()])

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name, t in self._params.items():
            h.update(name.encode())
            h.update(t.data.tobytes())
        return h.hexdigest()

    def copy(self) -> "ParamSet":
        out = ParamSet()
        for name, t in self._params.items():
            out.add(name, t.data.copy())
        return out

    def assert_finite(self) -> None:
        for name, t in self._params.items():
            if not np.isfinite(t.data).all():
                raise NumericError(f"non-finite values in parameter {name!r}")


# --- dense / MLP ---

def init_dense(params: ParamSet, prefix: str, n_in: int, n_out: int,
               rng: np.random.Generator) -> None:
    """Uniform fan-in scaling: U(-1/sqrt(n_in), 1/sqrt(n_in))."""
    bound = 1.0 / np.sqrt(n_in)
    params.add(f"{prefix}.W", rng.uniform(-bound, bound, size=(n_in, n_out)))
    params.add(f"{prefix}.b", rng.uniform(-bound, bound, size=(n_out,)))


def dense(params: ParamSet, prefix: str, x: Tensor) -> Tensor:
    return x @ params[f"{prefix}.W"] + params[f"{prefix}.b"]


def init_mlp(dims: tuple[int, ...], rng: np.random.Generator) -> ParamSet:
    """dims = (in, hidden..., out); ReLU between layers, linear output."""
    params = ParamSet()
    for i in range(len(dims) - 1):
        init_dense(params, f"layer{i}", dims[i], dims[i + 1], rng)
    params.add("meta.dims", np.asarray(dims, dtype=np.float64))
    return params


def mlp_forward(params: ParamSet, x) -> Tensor:
    """Affine/ReLU stack with a linear head; heads (tanh mean, Q/V scalar)
    are composed by the caller."""
    dims = params["meta.dims"].data.astype(int)
    h = as_tensor(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    if h.shape[1] != dims[0]:
        raise ValueError(f"expected input dim {dims[0]}, got {h.shape[1]}")
    n_layers = len(dims) - 1
    for i in range(n_layers):
        h = dense(params, f"layer{i}", h)
        if i < n_layers - 1:
            h = h.relu()
    return h


def mlp_parameters(params: ParamSet) -> list[Tensor]:
    return [t for name, t in zip(params.names(), params.tensors())
            if not name.startswith("meta.")]


# --- LSTM ---

def init_lstm(n_in: int, n_hidden: int, rng: np.random.Generator) -> ParamSet:
    """Gate order (i, f, g, o); forget-gate bias initialized to 1."""
    params = ParamSet()
    bound = 1.0 / np.sqrt(n_in + n_hidden)
    params.add("Wx", rng.uniform(-bound, bound, size=(n_in, 4 * n_hidden)))
    params.add("Wh", rng.uniform(-bound, bound, size=(n_hidden, 4 * n_hidden)))
    b = np.zeros(4 * n_hidden)
    b[n_hidden:2 * n_hidden] = 1.0
    params.add("b", b)
    params.add("meta.dims", np.asarray([n_in, n_hidden], dtype=np.float64))
    return params


def lstm_cell(params: ParamSet, x: Tensor, h: Tensor, c: Tensor
              ) -> tuple[Tensor, Tensor]:
    """One LSTM step as a single fused tape node (memory-lean over long
    sequences); returns (h_new, c_new)."""
    n_hidden = int(params["meta.dims"].data[1])
    wx, wh, b = params["Wx"], params["Wh"], params["b"]

    def sigmoid(v):
        return 1.0 / (1.0 + np.exp(-v))

    x_d, h_d, c_d = x.data, h.data, c.data
    gates = x_d @ wx.data + h_d @ wh.data + b.data
    i = sigmoid(gates[:, 0:n_hidden])
    f = sigmoid(gates[:, n_hidden:2 * n_hidden])
    g = np.tanh(gates[:, 2 * n_hidden:3 * n_hidden])
    o = sigmoid(gates[:, 3 * n_hidden:4 * n_hidden])
    c_new = f * c_d + i * g
    tc = np.tanh(c_new)
    h_new = o * tc

    def backward(grad):
        dh = grad[:, 0:n_hidden]
        dc_out = grad[:, n_hidden:2 * n_hidden]
        do = dh * tc
        dc = dc_out + dh * o * (1.0 - tc * tc)
        df = dc * c_d
        dc_prev = dc * f
        di = dc * g
        dg = dc * i
        dgates = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ], axis=1)
        return (dgates @ wx.data.T,  # dx
                dgates @ wh.data.T,  # dh_prev
                dc_prev,
                x_d.T @ dgates,  # dWx
                h_d.T @ dgates,  # dWh
                dgates.sum(axis=0))  # db

    packed = Tensor._make(np.concatenate([h_new, c_new], axis=1),
                          (x, h, c, wx, wh, b), backward)
    return packed.cols(0, n_hidden), packed.cols(n_hidden, 2 * n_hidden)


def lstm_forward(params: ParamSet, seq) -> Tensor:
    """Run the recurrence over seq (T, n_in) or (B, T, n_in); returns the
    final hidden state. Empty sequences are an error (callers own the
    empty-prefix convention)."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim == 2:
        seq = seq[None, :, :]
    if seq.shape[1] == 0:
        raise ValueError("lstm_forward requires a nonempty sequence")
    n_in, n_hidden = (int(v) for v in params["meta.dims"].data)
    if seq.shape[2] != n_in:
        raise ValueError(f"expected input dim {n_in}, got {seq.shape[2]}")
    batch = seq.shape[0]
    h = as_tensor(np.zeros((batch, n_hidden)))
    c = as_tensor(np.zeros((batch, n_hidden)))
    for t in range(seq.shape[1]):
        h, c = lstm_cell(params, as_tensor(seq[:, t, :]), h, c)
    return h


def lstm_parameters(params: ParamSet) -> list[Tensor]:
    return [params["Wx"], params["Wh"], params["b"]]


# --- Adam ---

@dataclass
class AdamState:
    lr: float = ADAM_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @staticmethod
    def for_tensors(tensors: list[Tensor], lr: float = ADAM_LR) -> "AdamState":
        return AdamState(lr=lr,
                         m=[np.zeros_like(t.data) for t in tensors],
                         v=[np.zeros_like(t.data) for t in tensors])


def adam_update(tensors: list[Tensor], state: AdamState) -> None:
    """Standard bias-corrected Adam step in place; missing grads count as zero."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for i, t in enumerate(tensors):
        g = t.grad
        m, v = state.m[i], state.v[i]
        m *= b1
        v *= b2
        if g is not None:
            m += (1.0 - b1) * g
            v += (1.0 - b2) * (g * g)
        denom = np.sqrt(v / bc2)
        denom += state.eps
        t.data -= (state.lr / bc1) * m / denom


# --- checkpoints: JSON manifest + little-endian float64 sidecar ---

MANIFEST_NAME = "manifest.json"
ARRAYS_NAME = "params.bin"


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray],
                meta: dict | None = None) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with open(path / ARRAYS_NAME, "wb") as f:
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            entries.append({"name": name, "shape": list(arr.shape),
                            "offset": offset, "count": int(arr.size)})
            f.write(arr.tobytes())
            offset += arr.size * 8
    manifest = {"format": "digrl-checkpoint", "version": 1,
                "arrays": entries, "meta": meta or {}}
    (path / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST_NAME).read_text())
    except FileNotFoundError as e:
        raise DatasetFormatError(f"missing {MANIFEST_NAME} in {path}") from e
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{MANIFEST_NAME}: parse error at byte {e.pos}") from e
    if manifest.get("version") != 1:
        raise DatasetFormatError(f"unsupported checkpoint version {manifest.get('version')!r}")
    raw = (path / ARRAYS_NAME).read_bytes()
    arrays = {}
    for entry in manifest["arrays"]:
        start = entry["offset"]
        end = start + entry["count"] * 8
        if end > len(raw):
            raise DatasetFormatError(
                f"{ARRAYS_NAME}: truncated at byte {len(raw)}, need {end}")
        arrays[entry["name"]] = np.frombuffer(
            raw[start:end], dtype="<f8").reshape(entry["shape"]).copy()
    return arrays, manifest.get("meta", {})


def save_param_set(path: str | Path, params: ParamSet, meta: dict | None = None) -> None:
    save_arrays(path, {name: params[name].data for name in params.names()}, meta)


def load_param_set(path: str | Path) -> tuple[ParamSet, dict]:
    arrays, meta = load_arrays(path)
    params = ParamSet()
    for name, arr in arrays.items():
        params.add(name, arr)
    return params, meta
