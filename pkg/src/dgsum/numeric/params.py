"""Named trainable parameters: initialization and checkpoint round trips."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError
from .tensor import Tensor, default_dtype

CHECKPOINT_VERSION = 1


def xavier_bound(shape: tuple[int, ...]) -> float:
    """Glorot uniform bound; vectors are treated as fan_out = 1."""
    if len(shape) >= 2:
        fan_in, fan_out = shape[0], shape[1]
    else:
        fan_in, fan_out = shape[0], 1
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


class ParamStore:
    """Ordered name -> Tensor map for every trainable parameter."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, shape: tuple[int, ...], rng: np.random.Generator,
            init: str = "xavier") -> Tensor:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        if init == "xavier":
            b = xavier_bound(shape)
            data = rng.uniform(-b, b, size=shape)
        elif init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        else:
            raise ConfigError(f"unknown init {init!r}")
        t = Tensor(np.asarray(data, dtype=default_dtype()), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def total_count(self) -> int:
        return sum(t.size for t in self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def clone(self) -> "ParamStore":
        out = ParamStore()
        for name, t in self._params.items():
            c = Tensor(t.data.copy(), requires_grad=True)
            out._params[name] = c
        return out

    def copy_data_from(self, other: "ParamStore") -> None:
        for name, t in self._params.items():
            t.data[...] = other[name].data

    # checkpointing -----------------------------------------------------
    def save(self, path) -> None:
        arrays = {"__format_version__": np.asarray([CHECKPOINT_VERSION])}
        for name, t in self._params.items():
            arrays[name] = t.data
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "ParamStore":
        try:
            with np.load(path) as archive:
                if "__format_version__" not in archive:
                    raise DataError(f"{path}: missing checkpoint format header")
                version = int(archive["__format_version__"][0])
                if version != CHECKPOINT_VERSION:
                    raise DataError(f"{path}: unsupported checkpoint version {version}")
                out = cls()
                for name in archive.files:
                    if name == "__format_version__":
                        continue
                    out._params[name] = Tensor(archive[name], requires_grad=True)
                return out
        except FileNotFoundError:
            raise DataError(f"checkpoint not found: {path}")

    def load_data_from(self, path) -> None:
        """Fill this store's tensors from a checkpoint, validating shapes."""
        loaded = ParamStore.load(path)
        missing = set(self._params) - set(loaded._params)
        extra = set(loaded._params) - set(self._params)
        if missing or extra:
            raise ConfigError(
                f"checkpoint mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, t in self._params.items():
            src = loaded[name]
            if src.shape != t.shape:
                raise ConfigError(
                    f"checkpoint parameter {name!r}: shape {src.shape} != expected {t.shape}")
            t.data[...] = src.data
