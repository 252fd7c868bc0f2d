import pytest
import torch

from adaptive_docmt.corpus.vocabulary import Vocabulary
from adaptive_docmt.model.checkpoint import (
    MAGIC,
    MODEL_PREFIX,
    PREDICTOR_PREFIX,
    Checkpoint,
    build_model,
    build_predictor,
    checkpoint_digest,
    load_checkpoint,
    save_checkpoint,
)
from adaptive_docmt.model.model_config import CONCATENATE, CONTEXT_UNIT
from adaptive_docmt.predictor.context_predictor import PredictorHead
from adaptive_docmt.utils.app_exception import CheckpointError
from adaptive_docmt.utils.logger import logger
from test_fixtures import tiny_config, tiny_model

log = logger(__name__)


def make_checkpoint(variant=CONCATENATE, with_predictor=True, **overrides) -> Checkpoint:
    model = tiny_model(variant, seed=2, **overrides)
    tensors = {MODEL_PREFIX + name: value for name, value in model.state_dict().items()}
    if with_predictor:
        predictor = PredictorHead(model.config.d_model, model.config.n_options, tau=0.5)
        with torch.no_grad():
            predictor.W.normal_(generator=torch.Generator().manual_seed(1))
            predictor.b.copy_(torch.arange(model.config.n_options, dtype=torch.float32))
        tensors.update({PREDICTOR_PREFIX + name: value for name, value in predictor.state_dict().items()})
    meta = {"stage": "doc_finetune", "step": "12", "seed": "3", "tau": "0.5"}
    return Checkpoint(model.config, Vocabulary(["a", "b", "c"]), tensors, meta)


@pytest.mark.unit
class TestCheckpointFile:
    @pytest.mark.parametrize("variant", [CONCATENATE, CONTEXT_UNIT])
    def test_round_trip(self, tmp_path, variant):
        checkpoint = make_checkpoint(variant)
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(checkpoint, path)
        loaded = load_checkpoint(path)

        assert loaded.model_config == checkpoint.model_config
        assert loaded.vocabulary == checkpoint.vocabulary
        assert loaded.meta == checkpoint.meta
        assert loaded.step == 12 and loaded.stage == "doc_finetune"
        assert set(loaded.tensors) == set(checkpoint.tensors)
        for name, tensor in checkpoint.tensors.items():
            assert torch.equal(loaded.tensors[name], tensor.to(torch.float64)), name

    def test_digest_is_stable(self, tmp_path):
        checkpoint = make_checkpoint()
        first, second = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
        assert save_checkpoint(checkpoint, first) == save_checkpoint(checkpoint, second)
        assert checkpoint_digest(first) == checkpoint_digest(second)

    def test_rewrite_is_bitwise(self, tmp_path):
        first, second = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(make_checkpoint(CONTEXT_UNIT), str(first))
        save_checkpoint(load_checkpoint(str(first)), str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_float32_load(self, tmp_path):
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(make_checkpoint(dtype="float32"), path)
        loaded = load_checkpoint(path)
        assert all(tensor.dtype == torch.float32 for tensor in loaded.tensors.values())
        assert load_checkpoint(path, dtype=torch.float64).tensors[MODEL_PREFIX + "mask_head.bias"].dtype == torch.float64

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"not a checkpoint\n")
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(make_checkpoint(), str(path))
        path.write_bytes(path.read_bytes().replace(b"version=1\n", b"version=9\n", 1))
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_truncated(self, tmp_path):
        path = tmp_path / "model.ckpt"
        save_checkpoint(make_checkpoint(), str(path))
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_unterminated_header(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(f"{MAGIC}\nversion=1\n".encode())
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))


@pytest.mark.unit
class TestCheckpointModels:
    def test_build_model_restores_weights(self, tmp_path):
        checkpoint = make_checkpoint(CONTEXT_UNIT)
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(checkpoint, path)
        model = build_model(load_checkpoint(path))
        for name, value in model.state_dict().items():
            assert torch.equal(value, checkpoint.tensors[MODEL_PREFIX + name]), name

    def test_build_predictor(self, tmp_path):
        checkpoint = make_checkpoint()
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(checkpoint, path)
        predictor = build_predictor(load_checkpoint(path))
        assert predictor.tau == 0.5
        assert predictor.b.tolist() == [0.0, 1.0, 2.0, 3.0]
        assert build_predictor(load_checkpoint(path), tau=2.0).tau == 2.0

    def test_missing_predictor(self):
        checkpoint = make_checkpoint(with_predictor=False)
        assert not checkpoint.has_predictor
        with pytest.raises(CheckpointError):
            build_predictor(checkpoint)

    def test_predictor_shape_mismatch(self):
        checkpoint = make_checkpoint()
        checkpoint.tensors[PREDICTOR_PREFIX + "W"] = torch.zeros(3, 3)
        with pytest.raises(CheckpointError):
            build_predictor(checkpoint)

    def test_weights_must_fit_the_model(self):
        checkpoint = make_checkpoint()
        checkpoint.model_config = tiny_config(CONCATENATE, d_model=16)
        with pytest.raises(CheckpointError):
            build_model(checkpoint)
