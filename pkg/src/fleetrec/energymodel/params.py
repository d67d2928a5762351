from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..features import FeatureSchema

COMPONENTS = ("recurrent", "linear", "deep")
_PREFIX = {"recurrent": "rnn.", "linear": "lin.", "deep": "deep."}


@dataclass(frozen=True)
class ModelConfig:
    d: int
    n_vehicles: int
    n_links: int
    hidden: int = 128
    emb_dim: int = 32
    deep_hidden: tuple[int, ...] = (64, 32)
    output_activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "deep_hidden", tuple(int(h) for h in self.deep_hidden))
        if self.output_activation not in ("relu", "sigmoid"):
            raise ValueError("output_activation must be 'relu' or 'sigmoid'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["deep_hidden"] = list(self.deep_hidden)
        return d


def tensor_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    D, H, E = cfg.d, cfg.hidden, cfg.emb_dim
    shapes = {
        "rnn.Wx": (D, 4 * H),
        "rnn.Wh": (H, 4 * H),
        "rnn.b": (4 * H,),
        "rnn.w_out": (H, 2),
        "rnn.b_out": (2,),
        "lin.w1": (D, 2),
        "lin.w2": (D, 2),
        "lin.b": (2,),
        "lin.W_cross": (D, D),
        "lin.b_cross": (D,),
        "deep.veh_emb": (cfg.n_vehicles + 1, E),
        "deep.link_emb": (cfg.n_links + 1, E),
    }
    widths = (2 * E,) + cfg.deep_hidden + (2,)
    for k in range(len(widths) - 1):
        shapes[f"deep.W{k + 1}"] = (widths[k], widths[k + 1])
        shapes[f"deep.b{k + 1}"] = (widths[k + 1],)
    return shapes


def component_of(name: str) -> str:
    for comp, pre in _PREFIX.items():
        if name.startswith(pre):
            return comp
    raise KeyError(name)


@dataclass
class ModelParams:
    """Trainable tensors plus the frozen normalization constants they depend on."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]
    schema: FeatureSchema
    output_scale: np.ndarray = field(default_factory=lambda: np.ones(2))

    def copy(self) -> "ModelParams":
        return replace(
            self,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            output_scale=self.output_scale.copy(),
        )

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self, component: str | None = None) -> list[str]:
        if component is None:
            return list(self.tensors)
        return [k for k in self.tensors if component_of(k) == component]

    @property
    def n_deep_layers(self) -> int:
        return len(self.config.deep_hidden) + 1

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.tensors.values())

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}


def init_params(cfg: ModelConfig, schema: FeatureSchema, output_scale=None, seed: int = 0) -> ModelParams:
    """Fan-in uniform dense weights, N(0, 0.01) embeddings, forget-gate bias 1."""
    rng = np.random.default_rng([seed, 77])
    t: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(cfg).items():
        if name.endswith("_emb"):
            t[name] = rng.normal(0.0, 0.1, size=shape)
        elif len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[0])
            t[name] = rng.uniform(-bound, bound, size=shape)
        else:
            t[name] = np.zeros(shape)
    H = cfg.hidden
    t["rnn.b"][H : 2 * H] = 1.0
    for head in ("rnn.b_out", "lin.b", f"deep.b{len(cfg.deep_hidden) + 1}"):
        t[head][:] = 0.05
    scale = np.ones(2) if output_scale is None else np.asarray(output_scale, dtype=np.float64)
    return ModelParams(cfg, t, schema, scale)
