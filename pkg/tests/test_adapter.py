import pytest

from adaptive_docmt.adapters.adapter import Adapter
from adaptive_docmt.adapters.cli_adapter import CliAdapter
from adaptive_docmt.operation import Operation
from adaptive_docmt.services.command_service import COMMANDS, CommandService
from adaptive_docmt.services.service import Service
from adaptive_docmt.utils.app_exception import USAGE_ERROR, ConfigurationError


class MockService(Service):
    def __init__(self):
        self.operations = []

    def execute(self, operation):
        self.operations.append(operation)
        return f"ran {operation.command}"


# Mock adapter provides the abstract functions of the Adapter class
class MockAdapter(Adapter):
    def unmarshal(self, event):
        return Operation(command="bleu", params={"hypotheses": event})


@pytest.mark.unit
class TestAdapter:
    def test_adapter(self):
        service = MockService()
        result = MockAdapter(service).process_event("hyp.txt")
        assert result == "ran bleu"
        assert service.operations[0].params == {"hypotheses": "hyp.txt"}


@pytest.mark.unit
class TestCliAdapter:
    def unmarshal(self, argv, env=None):
        service = MockService()
        CliAdapter(service, env=env or {}).process_event(argv)
        return service.operations[0]

    def test_defaults(self):
        operation = self.unmarshal(["finetune", "--corpus", "train.txt"])
        assert operation.command == "finetune"
        assert operation.params["corpus"] == "train.txt"
        assert operation.params["lr"] == 2e-3
        assert operation.params["predictor_warmup"] == 500
        assert operation.params["no_div"] is False
        assert set(operation.params) == set(COMMANDS["finetune"].defaults)

    def test_precedence(self, tmp_path):
        config = tmp_path / "finetune.yaml"
        config.write_text("lr: 0.1\nseed: 3\nbatchSize: 5\n")
        operation = self.unmarshal(
            ["finetune", "--config", str(config), "--seed", "9"],
            env={"DOCMT_LR": "0.5", "DOCMT_SEED": "4"},
        )
        assert operation.params["seed"] == 9
        assert operation.params["lr"] == 0.5
        assert operation.params["batch_size"] == 5
        assert operation.params["max_steps"] == 2000
        assert operation.config_path == str(config)

    def test_flags_are_typed(self):
        operation = self.unmarshal(
            ["gen-corpus", "--output", "c.txt", "--n-docs", "3", "--fractions", "0.1,0.2,0.3,0.4"]
        )
        assert operation.params["n_docs"] == 3
        assert operation.params["fractions"] == [0.1, 0.2, 0.3, 0.4]

    def test_removal_switches(self):
        operation = self.unmarshal(["ablate", "--no-div", "--no-doc-tips"])
        assert operation.params["no_div"] is True
        assert operation.params["no_doc_tips"] is True
        assert operation.params["no_uni"] is False

    def test_predictor_warmup_flag(self):
        operation = self.unmarshal(["finetune", "--predictor-warmup", "0"])
        assert operation.params["predictor_warmup"] == 0

    def test_boolean_pair(self):
        assert self.unmarshal(["pretrain", "--no-doc-tips"]).params["doc_tips"] is False
        assert self.unmarshal(["bleu", "--smooth"]).params["smooth"] is True

    def test_unknown_flag(self):
        with pytest.raises(ConfigurationError) as error:
            self.unmarshal(["bleu", "--colour", "red"])
        assert error.value.status_code == USAGE_ERROR
        assert "usage:" in error.value.message

    def test_unknown_command(self):
        with pytest.raises(ConfigurationError):
            self.unmarshal(["serve"])

    def test_usage_names_the_command(self):
        adapter = CliAdapter(MockService(), env={})
        assert "translate" in adapter.usage(["translate", "--beam", "2"])
        assert adapter.usage([]).startswith("usage: adaptive-docmt")


@pytest.mark.unit
class TestCommandService:
    def test_missing_required_keys(self):
        operation = Operation(command="translate", params={**COMMANDS["translate"].defaults, "corpus": "c.txt"})
        with pytest.raises(ConfigurationError) as error:
            CommandService().execute(operation)
        assert "--checkpoint" in error.value.message and "--output" in error.value.message

    def test_unknown_command(self):
        with pytest.raises(ConfigurationError):
            CommandService().execute(Operation(command="serve"))
