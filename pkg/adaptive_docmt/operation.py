from typing import Any, Dict, Optional


class Operation:
    def __init__(
        self,
        *,
        command: str,
        params: Optional[Dict[str, Any]] = None,
        config_path: Optional[str] = None,
    ):
        self.command = command
        self.params = params if params is not None else {}
        self.config_path = config_path

    def __repr__(self):
        return f"Operation(command={self.command}, params={self.params})"
