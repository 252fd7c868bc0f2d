from adaptive_docmt.operation import Operation
from adaptive_docmt.utils.logger import logger

log = logger(__name__)


class Service:
    def execute(self, operation: Operation) -> str:
        raise NotImplementedError
