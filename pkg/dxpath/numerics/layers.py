"""
Neural layers built on the tape primitives.

Every layer is a Module: parameters are discovered by walking attributes in
definition order, so `named_parameters()` is deterministic and doubles as
the checkpoint layout.
"""

from typing import List, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, ShapeError
from . import tensor as T
from .tensor import Parameter, Tensor


class Module:
    """Base class for parameter containers."""

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Parameter]]:
        found: List[Tuple[str, Parameter]] = []
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                found.append((name, value))
            elif isinstance(value, Module):
                found.extend(value.named_parameters(f"{name}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.extend(item.named_parameters(f"{name}.{i}."))
        return found

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Linear(Module):
    """Affine map x @ weight + bias with weight of shape (in_dim, out_dim)."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Parameter("weight", _glorot(rng, in_dim, out_dim, (in_dim, out_dim)))
        self.bias = Parameter("bias", np.zeros(out_dim)) if bias else None

    def forward(self, x) -> Tensor:
        x = T.as_tensor(x)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"Linear: expected last dim {self.in_dim}, got shape {x.shape}")
        out = T.matmul(x, self.weight)
        if self.bias is not None:
            out = T.add(out, self.bias)
        return out

    def set_weights(self, weight, bias=None) -> None:
        """Overwrite parameters in place (shape-checked)."""
        weight = np.asarray(weight, dtype=np.float64)
        if weight.shape != self.weight.shape:
            raise ShapeError(f"Linear: weight shape {weight.shape} != {self.weight.shape}")
        self.weight.data[...] = weight
        if bias is not None and self.bias is not None:
            self.bias.data[...] = np.asarray(bias, dtype=np.float64)


class MLP(Module):
    """Stack of Linear layers with ReLU between them (none after the last)."""

    def __init__(self, dims: Sequence[int], rng: np.random.Generator):
        if len(dims) < 2:
            raise ConfigError("MLP needs at least an input and an output dim")
        self.dims = tuple(dims)
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]

    def forward(self, x) -> Tensor:
        out = T.as_tensor(x)
        for i, layer in enumerate(self.layers):
            out = layer(out)
            if i < len(self.layers) - 1:
                out = T.relu(out)
        return out

    def init_identity(self) -> None:
        """
        Set weights so the MLP computes the identity map exactly.

        Square layers become I; a doubling layer becomes [I, -I] and a halving
        layer [I; -I], so relu(x) - relu(-x) passes negative values through.

        Raises:
            ConfigError: If the dims do not admit an exact identity
        """
        if self.dims[0] != self.dims[-1]:
            raise ConfigError(f"MLP {self.dims} cannot be an identity map")
        for layer in self.layers:
            a, b = layer.in_dim, layer.out_dim
            if a == b:
                weight = np.eye(a)
            elif b == 2 * a:
                weight = np.hstack([np.eye(a), -np.eye(a)])
            elif a == 2 * b:
                weight = np.vstack([np.eye(b), -np.eye(b)])
            else:
                raise ConfigError(f"MLP {self.dims} cannot be an identity map")
            layer.set_weights(weight, np.zeros(b))


class MultiheadAttention(Module):
    """
    Scaled dot-product attention split over `heads` heads.

    Inputs are (L, dim) or batched (B, L, dim). Each head sees a dim/heads
    slice of the projected queries, keys and values; head outputs are
    concatenated and passed through the output projection.
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if heads < 1 or dim % heads != 0:
            raise ConfigError(f"Attention dim {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = Linear(dim, dim, rng)
        self.k_proj = Linear(dim, dim, rng)
        self.v_proj = Linear(dim, dim, rng)
        self.out_proj = Linear(dim, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        lead = x.shape[:-1]
        x = T.reshape(x, lead + (self.heads, self.head_dim))
        return T.swapaxes(x, -2, -3)

    def forward(self, query, key, value, return_weights: bool = False):
        query, key, value = T.as_tensor(query), T.as_tensor(key), T.as_tensor(value)
        if key.shape != value.shape or query.shape[-1] != self.dim or key.shape[-1] != self.dim:
            raise ShapeError(
                f"MultiheadAttention: shapes query={query.shape} key={key.shape} value={value.shape}"
            )
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))

        scores = T.matmul(q, T.swapaxes(k, -1, -2)) * (1.0 / np.sqrt(self.head_dim))
        weights = T.softmax(scores, axis=-1)
        heads_out = T.matmul(weights, v)
        merged = T.swapaxes(heads_out, -2, -3)
        merged = T.reshape(merged, query.shape[:-1] + (self.dim,))
        out = self.out_proj(merged)
        if return_weights:
            return out, weights
        return out


def trilinear_form(x, v, p, U, V, W) -> Tensor:
    """
    Factorized trilinear form sum_k (U x)_k (V v)_k (W p)_k.

    U, V, W have shape (rank, dim). `p` may carry leading batch axes; the
    result then has those axes.
    """
    x, v, p = T.as_tensor(x), T.as_tensor(v), T.as_tensor(p)
    U, V, W = T.as_tensor(U), T.as_tensor(V), T.as_tensor(W)
    dim = U.shape[1]
    for name, t in (("x", x), ("v", v), ("p", p)):
        if t.shape[-1] != dim:
            raise ShapeError(f"trilinear_form: {name} has shape {t.shape}, expected last dim {dim}")
    ux = T.matmul(U, x)
    vv = T.matmul(V, v)
    wp = T.matmul(p, T.swapaxes(W, 0, 1))
    return T.sum(T.mul(T.mul(ux, vv), wp), axis=-1)


def trilinear_dense(x, v, p, weight: np.ndarray, max_dim: int = 16) -> float:
    """Dense sum_abc x_a v_b p_c W_abc, limited to small dims."""
    weight = np.asarray(weight, dtype=np.float64)
    dim = weight.shape[0]
    if dim > max_dim:
        raise ShapeError(f"trilinear_dense: dim {dim} exceeds {max_dim}")
    if weight.shape != (dim, dim, dim):
        raise ShapeError(f"trilinear_dense: weight must be cubic, got {weight.shape}")
    x, v, p = (np.asarray(a, dtype=np.float64) for a in (x, v, p))
    if not (x.shape == v.shape == p.shape == (dim,)):
        raise ShapeError(f"trilinear_dense: vectors must have shape ({dim},)")
    return float(np.einsum("a,b,c,abc->", x, v, p, weight))


class Trilinear(Module):
    """Rank-factorized trilinear form; the dense tensor is W_abc = sum_k U_ka V_kb T_kc."""

    def __init__(self, dim: int, rank: int, rng: np.random.Generator):
        if rank < 1:
            raise ConfigError("Trilinear rank must be >= 1")
        self.dim = dim
        self.rank = rank
        scale = 1.0 / np.sqrt(dim)
        self.U = Parameter("U", rng.normal(0.0, scale, size=(rank, dim)))
        self.V = Parameter("V", rng.normal(0.0, scale, size=(rank, dim)))
        self.T = Parameter("T", rng.normal(0.0, scale, size=(rank, dim)))

    def forward(self, x, v, p) -> Tensor:
        return trilinear_form(x, v, p, self.U, self.V, self.T)

    def dense_weight(self) -> np.ndarray:
        return np.einsum("ka,kb,kc->abc", self.U.data, self.V.data, self.T.data)
