"""
Checkpoint file: a versioned text header followed by named float64 blobs.

    ADOCMT-CHECKPOINT
    version=1
    model.<key>=<value>        ModelConfig
    meta.<key>=<value>         train state (stage, step, seed, tau, ...)
    vocabulary=<tokens>        task tokens after the reserved block
    end-header
    blob <name> <shape> <nbytes>\n<little-endian float64 bytes>
"""
import hashlib
from dataclasses import dataclass, field
from typing import BinaryIO, Dict, Optional, Tuple

import numpy as np
import torch

from adaptive_docmt.corpus.vocabulary import Vocabulary
from adaptive_docmt.model.model_config import ModelConfig
from adaptive_docmt.utils.app_exception import CheckpointError
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

MAGIC = "ADOCMT-CHECKPOINT"
FORMAT_VERSION = 1
END_HEADER = "end-header"

MODEL_PREFIX = "model."
PREDICTOR_PREFIX = "predictor."
OPTIMIZER_PREFIX = "optim."


@dataclass
class Checkpoint:
    model_config: ModelConfig
    vocabulary: Vocabulary
    tensors: Dict[str, torch.Tensor]
    meta: Dict[str, str] = field(default_factory=dict)

    def section(self, prefix: str) -> Dict[str, torch.Tensor]:
        return {name[len(prefix):]: t for name, t in self.tensors.items() if name.startswith(prefix)}

    @property
    def model_state(self) -> Dict[str, torch.Tensor]:
        return self.section(MODEL_PREFIX)

    @property
    def predictor_state(self) -> Dict[str, torch.Tensor]:
        return self.section(PREDICTOR_PREFIX)

    @property
    def optimizer_state(self) -> Dict[str, torch.Tensor]:
        return self.section(OPTIMIZER_PREFIX)

    @property
    def has_predictor(self) -> bool:
        return bool(self.predictor_state)

    @property
    def step(self) -> int:
        return int(self.meta.get("step", 0))

    @property
    def stage(self) -> str:
        return self.meta.get("stage", "")


def _header_value(value) -> str:
    text = repr(value) if isinstance(value, float) else str(value)
    if "\n" in text:
        raise CheckpointError(f"header value {text!r} contains a newline")
    return text


def _write_blob(file: BinaryIO, name: str, tensor: torch.Tensor):
    array = tensor.detach().cpu().to(torch.float64).contiguous().numpy().astype("<f8")
    shape = ",".join(str(s) for s in array.shape) or "scalar"
    data = array.tobytes()
    file.write(f"blob {name} {shape} {len(data)}\n".encode("utf-8"))
    file.write(data)


def save_checkpoint(checkpoint: Checkpoint, path: str) -> str:
    """Write a checkpoint; blobs are written in sorted name order. Returns the sha256 digest."""
    lines = [MAGIC, f"version={FORMAT_VERSION}"]
    for key, value in checkpoint.model_config.to_dict().items():
        lines.append(f"{MODEL_PREFIX}{key}={_header_value(value)}")
    for key, value in sorted(checkpoint.meta.items()):
        lines.append(f"meta.{key}={_header_value(value)}")
    lines.append("vocabulary=" + " ".join(checkpoint.vocabulary.task_tokens))
    lines.append(END_HEADER)

    with open(path, "wb") as file:
        file.write(("\n".join(lines) + "\n").encode("utf-8"))
        for name in sorted(checkpoint.tensors):
            _write_blob(file, name, checkpoint.tensors[name])
    log.info(f"saved checkpoint {path} ({len(checkpoint.tensors)} tensors)")
    return checkpoint_digest(path)


def _parse_config_value(key: str, value: str):
    if key in ("variant", "dtype"):
        return value
    if key == "doc_tips":
        return value == "True"
    if key == "dropout":
        return float(value)
    return int(value)


def _read_header(file: BinaryIO, path: str) -> Tuple[Dict[str, str], Dict[str, str], Vocabulary]:
    magic = file.readline().decode("utf-8").rstrip("\n")
    if magic != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic '{magic[:32]}')")
    model_values, meta, vocabulary = {}, {}, None
    version = None
    while True:
        raw = file.readline()
        if not raw:
            raise CheckpointError(f"{path}: header is not terminated")
        line = raw.decode("utf-8").rstrip("\n")
        if line == END_HEADER:
            break
        key, _, value = line.partition("=")
        if key == "version":
            version = int(value)
        elif key == "vocabulary":
            vocabulary = Vocabulary(value.split())
        elif key.startswith(MODEL_PREFIX):
            model_values[key[len(MODEL_PREFIX):]] = value
        elif key.startswith("meta."):
            meta[key[len("meta."):]] = value
        else:
            raise CheckpointError(f"{path}: unknown header key '{key}'")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    if vocabulary is None:
        raise CheckpointError(f"{path}: header carries no vocabulary")
    return model_values, meta, vocabulary


def load_checkpoint(path: str, dtype: Optional[torch.dtype] = None) -> Checkpoint:
    with open(path, "rb") as file:
        model_values, meta, vocabulary = _read_header(file, path)
        model_config = ModelConfig(
            {key: _parse_config_value(key, value) for key, value in model_values.items()}
        )
        dtype = dtype or model_config.torch_dtype()
        tensors = {}
        while True:
            raw = file.readline()
            if not raw:
                break
            parts = raw.decode("utf-8").split()
            if len(parts) != 4 or parts[0] != "blob":
                raise CheckpointError(f"{path}: malformed blob header {raw[:64]!r}")
            _, name, shape_text, nbytes = parts
            data = file.read(int(nbytes))
            if len(data) != int(nbytes):
                raise CheckpointError(f"{path}: blob {name} is truncated")
            shape = () if shape_text == "scalar" else tuple(int(s) for s in shape_text.split(","))
            array = np.frombuffer(data, dtype="<f8").reshape(shape).astype(np.float64)
            tensors[name] = torch.from_numpy(array.copy()).to(dtype)
    return Checkpoint(model_config, vocabulary, tensors, meta)


def checkpoint_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for chunk in iter(lambda: file.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_model(checkpoint: Checkpoint):
    """Instantiate the checkpoint's model with its stored weights."""
    from adaptive_docmt.model.model_factory import model_factory

    model = model_factory.build(checkpoint.model_config)
    try:
        model.load_state_dict(checkpoint.model_state)
    except RuntimeError as error:
        raise CheckpointError(f"checkpoint weights do not fit the model: {error}")
    return model


def build_predictor(checkpoint: Checkpoint, tau: Optional[float] = None):
    """The checkpoint's context predictor; CheckpointError when it carries none."""
    from adaptive_docmt.predictor.context_predictor import PredictorHead

    if not checkpoint.has_predictor:
        raise CheckpointError("checkpoint carries no context predictor")
    config = checkpoint.model_config
    state = checkpoint.predictor_state
    tau = float(checkpoint.meta.get("tau", 1.0)) if tau is None else tau
    if tuple(state.get("W", torch.empty(0)).shape) != (config.d_model, config.n_options):
        raise CheckpointError(
            f"predictor shape does not match {config.n_options} options of width {config.d_model}"
        )
    predictor = PredictorHead(config.d_model, config.n_options, tau).to(config.torch_dtype())
    predictor.load_state_dict(state)
    return predictor
