"""Mask-estimation network, auxiliary summary network and training loss.

The main network is a stack of bidirectional LSTM layers, each followed by
a tanh dense projection, and a final sigmoid dense layer producing one mask
value per Mel band. When an adaptation vector ``lam`` is given, the
concatenated first-layer LSTM outputs are scaled by it elementwise.

Parameters live in flat ``dict[str, ndarray]`` objects so the optimiser and
checkpoint code can treat them uniformly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError
from .layers import lstm_backward, lstm_forward, sigmoid


@dataclass(frozen=True)
class SizeProfile:
    name: str
    n_layers: int
    hidden: int
    proj: int
    aux_hidden: int = 128
    n_mels: int = 128


PAPER = SizeProfile("paper", n_layers=3, hidden=300, proj=256)
DESK = SizeProfile("desk", n_layers=2, hidden=32, proj=64)
PROFILES = {"paper": PAPER, "desk": DESK}


@dataclass(frozen=True)
class Variant:
    name: str
    features: str  # "log" or "pcen"
    uses_aux: bool


VARIANTS = {
    "M1": Variant("M1", "log", False),
    "M1+": Variant("M1+", "log", True),
    "M2": Variant("M2", "pcen", False),
    "M2+": Variant("M2+", "pcen", True),
}


def get_variant(name: str) -> Variant:
    try:
        return VARIANTS[name]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; expected one of {sorted(VARIANTS)}") from None


def _uniform(rng, fan_in, shape, dtype):
    lim = np.sqrt(3.0 / fan_in)
    return rng.uniform(-lim, lim, size=shape).astype(dtype)


def _orthogonal_blocks(rng, H, n_blocks, dtype):
    blocks = []
    for _ in range(n_blocks):
        q, r = np.linalg.qr(rng.standard_normal((H, H)))
        blocks.append(q * np.sign(np.diag(r)))
    return np.concatenate(blocks, axis=1).astype(dtype)


def init_mask_net(profile: SizeProfile, seed: int, dtype=np.float32) -> dict:
    rng = np.random.default_rng(seed)
    H = profile.hidden
    params = {}
    d_in = profile.n_mels
    for layer in range(1, profile.n_layers + 1):
        for direction in ("fwd", "bwd"):
            p = f"l{layer}.{direction}"
            params[f"{p}.W"] = _uniform(rng, d_in, (d_in, 4 * H), dtype)
            params[f"{p}.U"] = _orthogonal_blocks(rng, H, 4, dtype)
            b = np.zeros(4 * H, dtype=dtype)
            b[H:2 * H] = 1.0  # forget gate
            params[f"{p}.b"] = b
        params[f"l{layer}.proj.W"] = _uniform(rng, 2 * H, (2 * H, profile.proj), dtype)
        params[f"l{layer}.proj.b"] = np.zeros(profile.proj, dtype=dtype)
        d_in = profile.proj
    params["out.W"] = _uniform(rng, profile.proj, (profile.proj, profile.n_mels), dtype)
    params["out.b"] = np.zeros(profile.n_mels, dtype=dtype)
    return params


def init_aux_net(profile: SizeProfile, seed: int, dtype=np.float32) -> dict:
    rng = np.random.default_rng(seed)
    A = profile.aux_hidden
    return {
        "aux.d1.W": _uniform(rng, profile.n_mels, (profile.n_mels, A), dtype),
        "aux.d1.b": np.zeros(A, dtype=dtype),
        "aux.d2.W": _uniform(rng, A, (A, A), dtype),
        "aux.d2.b": np.zeros(A, dtype=dtype),
        # small weights and unit bias: lam starts near 1, i.e. near the M1 network
        "aux.out.W": 0.1 * _uniform(rng, A, (A, 2 * profile.hidden), dtype),
        "aux.out.b": np.ones(2 * profile.hidden, dtype=dtype),
    }


def n_layers(params: dict) -> int:
    return sum(1 for k in params if k.endswith(".fwd.W"))


def _batched(x):
    x = np.asarray(x)
    return (x[None], True) if x.ndim == 2 else (x, False)


def aux_forward(aux: dict, adapt_feats, return_cache=False):
    """Frame-wise two-layer ReLU network followed by a linear map, averaged over frames."""
    a, single = _batched(adapt_feats)
    if a.shape[1] < 1:
        raise ValueError("empty adaptation input")
    z1 = a @ aux["aux.d1.W"] + aux["aux.d1.b"]
    h1 = np.maximum(z1, 0)
    z2 = h1 @ aux["aux.d2.W"] + aux["aux.d2.b"]
    h2 = np.maximum(z2, 0)
    lam = (h2 @ aux["aux.out.W"] + aux["aux.out.b"]).mean(axis=1)
    if single:
        lam = lam[0]
    if return_cache:
        return lam, (a, z1, h1, z2, h2, single)
    return lam


def aux_backward(aux: dict, dlam, cache) -> dict:
    a, z1, h1, z2, h2, single = cache
    dlam = np.asarray(dlam)
    if single:
        # one adaptation segment shared by the whole batch
        dlam = dlam.reshape(-1, dlam.shape[-1]).sum(axis=0)[None]
    n_frames = a.shape[1]
    dout = np.broadcast_to(dlam[:, None, :] / n_frames, h2.shape[:2] + dlam.shape[-1:])
    g = {"aux.out.W": np.einsum("bti,btj->ij", h2, dout), "aux.out.b": dout.sum(axis=(0, 1))}
    dz2 = (dout @ aux["aux.out.W"].T) * (z2 > 0)
    g["aux.d2.W"] = np.einsum("bti,btj->ij", h1, dz2)
    g["aux.d2.b"] = dz2.sum(axis=(0, 1))
    dz1 = (dz2 @ aux["aux.d2.W"].T) * (z1 > 0)
    g["aux.d1.W"] = np.einsum("bti,btj->ij", a, dz1)
    g["aux.d1.b"] = dz1.sum(axis=(0, 1))
    return g


def forward(params: dict, feats, lam=None, mode: str = "eval", dropout: float = 0.0,
            dropout_seed: int | None = None, return_cache: bool = False):
    """Mel-domain mask in (0, 1) for every frame of ``feats`` (``(T, F)`` or ``(B, T, F)``)."""
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x, single = _batched(feats)
    x = x.astype(params["out.W"].dtype, copy=False)
    L = n_layers(params)
    H = params["l1.fwd.U"].shape[0]
    if lam is not None:
        lam = np.asarray(lam, dtype=x.dtype)
        if lam.shape[-1] != 2 * H:
            raise ValueError(f"lambda has width {lam.shape[-1]}, first layer outputs {2 * H}")
        lam = lam.reshape(-1, 1, 2 * H)
    rng = np.random.default_rng(dropout_seed) if mode == "train" and dropout > 0 else None

    caches = []
    h = x
    for layer in range(1, L + 1):
        p = f"l{layer}"
        hf, cf = lstm_forward(h, params[f"{p}.fwd.W"], params[f"{p}.fwd.U"], params[f"{p}.fwd.b"])
        hb, cb = lstm_forward(h, params[f"{p}.bwd.W"], params[f"{p}.bwd.U"], params[f"{p}.bwd.b"], reverse=True)
        r = np.concatenate([hf, hb], axis=-1)
        s = r * lam if (layer == 1 and lam is not None) else r
        keep = None
        if rng is not None:
            keep = (rng.random(s.shape) >= dropout).astype(x.dtype) / (1.0 - dropout)
            s = s * keep
        y = np.tanh(s @ params[f"{p}.proj.W"] + params[f"{p}.proj.b"])
        caches.append((h, cf, cb, r, s, keep, y))
        h = y
    mask = sigmoid(h @ params["out.W"] + params["out.b"])
    if not np.all(np.isfinite(mask)):
        raise NumericError("non-finite activations in mask network")
    out = mask[0] if single else mask
    if return_cache:
        return out, {"layers": caches, "top": h, "mask": mask, "lam": lam, "single": single}
    return out


def loss(mask_mel, mix_mel, fg_mel) -> float:
    """Squared Frobenius error of the masked mixture, summed per sequence, batch-averaged."""
    mask_mel, mix_mel, fg_mel = (np.asarray(a) for a in (mask_mel, mix_mel, fg_mel))
    if not mask_mel.shape == mix_mel.shape == fg_mel.shape:
        raise ValueError(f"shape mismatch: {mask_mel.shape}, {mix_mel.shape}, {fg_mel.shape}")
    err = mask_mel * mix_mel - fg_mel
    batch = err.shape[0] if err.ndim == 3 else 1
    return float(np.sum(np.square(err, dtype=np.float64)) / batch)


def backward(params: dict, cache: dict, mix_mel, fg_mel, aux: dict | None = None, aux_cache=None):
    """Exact gradients of :func:`loss` for the forward pass recorded in ``cache``.

    Returns ``(loss, grads)``; when ``aux``/``aux_cache`` are given the
    gradient also flows through the adaptation vector into the aux network.
    """
    mask = cache["mask"]
    mix_mel = np.asarray(mix_mel, dtype=mask.dtype).reshape(mask.shape)
    fg_mel = np.asarray(fg_mel, dtype=mask.dtype).reshape(mask.shape)
    B = mask.shape[0]
    err = mask * mix_mel - fg_mel
    value = float(np.sum(np.square(err, dtype=np.float64)) / B)

    grads = {}
    dz = (2.0 / B) * err * mix_mel * mask * (1.0 - mask)
    top = cache["top"]
    grads["out.W"] = np.einsum("bti,btj->ij", top, dz)
    grads["out.b"] = dz.sum(axis=(0, 1))
    dh = dz @ params["out.W"].T
    lam = cache["lam"]
    dlam = None
    for layer in range(len(cache["layers"]), 0, -1):
        p = f"l{layer}"
        h_in, cf, cb, r, s, keep, y = cache["layers"][layer - 1]
        da = dh * (1.0 - y * y)
        grads[f"{p}.proj.W"] = np.einsum("bti,btj->ij", s, da)
        grads[f"{p}.proj.b"] = da.sum(axis=(0, 1))
        ds = da @ params[f"{p}.proj.W"].T
        if keep is not None:
            ds = ds * keep
        if layer == 1 and lam is not None:
            dlam = (ds * r).sum(axis=1)
            dr = ds * lam
        else:
            dr = ds
        H = dr.shape[-1] // 2
        dxf, grads[f"{p}.fwd.W"], grads[f"{p}.fwd.U"], grads[f"{p}.fwd.b"] = lstm_backward(dr[..., :H], cf)
        dxb, grads[f"{p}.bwd.W"], grads[f"{p}.bwd.U"], grads[f"{p}.bwd.b"] = lstm_backward(dr[..., H:], cb)
        dh = dxf + dxb

    if aux is not None:
        if aux_cache is not None and dlam is not None:
            grads.update(aux_backward(aux, dlam, aux_cache))
        else:
            grads.update({k: np.zeros_like(v) for k, v in aux.items()})

    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")
    return value, grads
