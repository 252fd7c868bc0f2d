import argparse
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

from adaptive_docmt.adapters.adapter import Adapter
from adaptive_docmt.operation import Operation
from adaptive_docmt.services.command_service import COMMANDS, Command
from adaptive_docmt.utils.app_exception import ConfigurationError
from adaptive_docmt.utils.config_loader import env_values, load_config_file, resolve_config
from adaptive_docmt.utils.logger import logger

log = logger(__name__)

PROG = "adaptive-docmt"


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so the caller owns the exit code."""

    def error(self, message):
        raise ConfigurationError(f"{message}\n{self.format_usage().rstrip()}")


def flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def add_command_flags(parser: argparse.ArgumentParser, command: Command):
    """One flag per configuration key; every flag defaults to None (not given)."""
    parser.add_argument("--config", default=None, help="flat YAML key-value configuration file")
    for key, default in command.defaults.items():
        required = " (required)" if key in command.required else ""
        if isinstance(default, bool) and key.startswith("no_"):
            parser.add_argument(flag_name(key), dest=key, action="store_true", default=None,
                                help=f"default: off{required}")
        elif isinstance(default, bool):
            parser.add_argument(flag_name(key), dest=key, action=argparse.BooleanOptionalAction,
                                default=None, help=f"default: {default}{required}")
        else:
            shown = ",".join(str(v) for v in default) if isinstance(default, (list, tuple)) else default
            parser.add_argument(flag_name(key), dest=key, default=None,
                                help=f"default: {shown!r}{required}" if shown != "" else f"path{required}")


def build_parser() -> Tuple[UsageParser, Dict[str, UsageParser]]:
    parser = UsageParser(prog=PROG, description="Context-adaptive document-level machine translation")
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    commands = {}
    for command in COMMANDS.values():
        commands[command.name] = subparsers.add_parser(command.name, help=command.help)
        add_command_flags(commands[command.name], command)
    return parser, commands


class CliAdapter(Adapter):
    """Turns command-line arguments into an Operation with fully resolved parameters."""

    def __init__(self, service=None, env: Optional[Mapping[str, str]] = None) -> None:
        super().__init__(service)
        self.env = env
        self.parser, self.command_parsers = build_parser()

    def unmarshal(self, event: Sequence[str]) -> Operation:
        """
        Parse argv and resolve every key with precedence flag > env > file > default.

        Parameters:
        - event (list): command-line arguments without the program name.

        Returns:
        - Operation carrying the command name and the resolved parameters.
        """
        args = vars(self.parser.parse_args(list(event)))
        name = args.pop("command")
        config_path = args.pop("config")
        command = COMMANDS[name]

        file_values = load_config_file(config_path) if config_path else {}
        flags: Dict[str, Any] = {key: value for key, value in args.items() if value is not None}
        params = resolve_config(command.defaults, file_values, env_values(self.env), flags)
        return Operation(command=name, params=params, config_path=config_path)

    def usage(self, argv: Sequence[str]) -> str:
        """Usage line of the command named in argv, or of the program."""
        name = next((arg for arg in argv if arg in self.command_parsers), None)
        parser = self.command_parsers[name] if name else self.parser
        return parser.format_usage().rstrip()
