import logging
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from sigvwap.errors import CheckpointError, ShapeError
from sigvwap.nn_core.tensor import DTYPE, Tensor
from sigvwap.utils import atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

STORE_HEADER = "sigvwap-parameter-store/1"
MANIFEST_SUFFIX = ".manifest"
BLOB_SUFFIX = ".bin"

Initializer = Callable[[Tuple[int, ...]], np.ndarray]


class ParameterStore:
    """
    Named, shaped float64 arrays with gradient and optimizer slots.

    Trainable entries are leaf tensors with ``requires_grad``; buffers (e.g.
    running statistics) are stored the same way but never receive gradients
    and are skipped by the optimizer. Free-form string metadata travels with
    the store into checkpoints.
    """

    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self._slots: Dict[str, Dict[str, np.ndarray]] = {}
        self.metadata: Dict[str, str] = {}

    def create(
        self,
        name: str,
        shape: Tuple[int, ...],
        init: Initializer,
        trainable: bool = True,
    ) -> Tensor:
        if name in self._params:
            raise RuntimeError(f"Duplicate parameter name {name}")
        value = np.asarray(init(tuple(shape)), dtype=DTYPE)
        if value.shape != tuple(shape):
            raise ShapeError(f"initializer for {name} gave {value.shape}, wanted {shape}")
        tensor = Tensor(value, requires_grad=trainable, name=name)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def get(self, name: str) -> Optional[Tensor]:
        return self._params.get(name)

    def names(self) -> List[str]:
        return list(self._params)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def trainable(self) -> Iterator[Tuple[str, Tensor]]:
        return ((n, t) for n, t in self._params.items() if t.requires_grad)

    def num_parameters(self) -> int:
        return sum(t.value.size for _, t in self.trainable())

    def slots(self, name: str) -> Dict[str, np.ndarray]:
        return self._slots.setdefault(name, {})

    def zero_grad(self) -> None:
        for _, tensor in self.trainable():
            tensor.grad = np.zeros_like(tensor.value)

    def gradients(self) -> Dict[str, np.ndarray]:
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.value))
            for name, t in self.trainable()
        }

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: t.value.copy() for name, t in self._params.items()}

    def restore(self, snapshot: Dict[str, np.ndarray]) -> None:
        for name, value in snapshot.items():
            target = self._params[name]
            if target.value.shape != value.shape:
                raise ShapeError(f"{name}: stored {value.shape}, model {target.value.shape}")
            # in place, so layers holding the tensor see the new values
            target.value[...] = value

    def load_from(self, other: "ParameterStore") -> None:
        """Copy every value of ``other`` into this store; names and shapes must match."""
        missing = sorted(set(self._params) ^ set(other.names()))
        if missing:
            raise ShapeError(f"parameter sets differ: {missing[:5]}")
        self.restore(other.snapshot())

    def __repr__(self):
        return "\n".join(f"{name}: {t.shape}" for name, t in self._params.items())

    # Persistence

    def save(self, path_prefix: Path) -> Tuple[Path, Path]:
        """
        Writes ``<prefix>.manifest`` (key-value text: header, metadata and one
        ``param.<name> = <shape> @ <offset>`` line per array) and ``<prefix>.bin``
        (little-endian float64 values, concatenated in manifest order).
        """
        path_prefix = Path(path_prefix)
        manifest_path = path_prefix.with_name(path_prefix.name + MANIFEST_SUFFIX)
        blob_path = path_prefix.with_name(path_prefix.name + BLOB_SUFFIX)

        lines = [f"header = {STORE_HEADER}"]
        lines += [f"meta.{key} = {value}" for key, value in sorted(self.metadata.items())]
        chunks = []
        offset = 0
        for name, tensor in self._params.items():
            shape = "x".join(str(n) for n in tensor.shape) or "scalar"
            kind = "param" if tensor.requires_grad else "buffer"
            lines.append(f"{kind}.{name} = {shape} @ {offset}")
            chunks.append(tensor.value.astype("<f8").tobytes())
            offset += tensor.value.size

        atomic_write_bytes(blob_path, b"".join(chunks))
        atomic_write_text(manifest_path, "\n".join(lines) + "\n")
        logger.info("Saved %d arrays to %s", len(self._params), manifest_path)
        return manifest_path, blob_path

    @classmethod
    def load(cls, path_prefix: Path) -> "ParameterStore":
        path_prefix = Path(path_prefix)
        manifest_path = path_prefix.with_name(path_prefix.name + MANIFEST_SUFFIX)
        blob_path = path_prefix.with_name(path_prefix.name + BLOB_SUFFIX)
        if not manifest_path.exists() or not blob_path.exists():
            raise CheckpointError(f"no checkpoint at {path_prefix}")

        blob = np.frombuffer(blob_path.read_bytes(), dtype="<f8")
        store = cls()
        header_seen = False
        for line_no, line in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            key, _, value = (part.strip() for part in line.partition("="))
            if key == "header":
                if value != STORE_HEADER:
                    raise CheckpointError(f"{manifest_path}: unsupported header {value!r}")
                header_seen = True
            elif key.startswith("meta."):
                store.metadata[key[len("meta."):]] = value
            elif key.startswith(("param.", "buffer.")):
                kind, _, name = key.partition(".")
                shape_text, _, offset_text = (p.strip() for p in value.partition("@"))
                shape = (
                    () if shape_text == "scalar" else tuple(int(n) for n in shape_text.split("x"))
                )
                offset = int(offset_text)
                size = int(np.prod(shape)) if shape else 1
                if offset + size > blob.size:
                    raise CheckpointError(f"{manifest_path}:{line_no}: {name} runs past blob end")
                values = blob[offset : offset + size].astype(DTYPE).reshape(shape)
                store.create(name, shape, lambda _s, v=values: v.copy(), trainable=kind == "param")
            else:
                raise CheckpointError(f"{manifest_path}:{line_no}: unknown key {key!r}")
        if not header_seen:
            raise CheckpointError(f"{manifest_path}: missing header line")
        return store
