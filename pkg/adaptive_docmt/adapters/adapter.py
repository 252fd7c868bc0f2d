import abc
from typing import Optional

from adaptive_docmt.operation import Operation
from adaptive_docmt.services.command_service import CommandService
from adaptive_docmt.services.service import Service
from adaptive_docmt.utils.logger import logger

log = logger(__name__)


class Adapter(metaclass=abc.ABCMeta):
    service: Service

    @classmethod
    def __subclasshook__(cls, __subclass: type) -> bool:
        return (
            hasattr(__subclass, "marshal")
            and callable(__subclass.marshal)
            and hasattr(__subclass, "unmarshal")
            and callable(__subclass.unmarshal)
        )

    def __init__(self, service: Optional[Service] = None) -> None:
        self.service = service if service is not None else CommandService()

    def unmarshal(self, event) -> Operation:
        """
        Unmarshal the event into an operation for processing

        Parameters:
        - event: the raw request, e.g. command-line arguments.

        Returns:
        - Operation containing the command and its resolved parameters
        """
        raise NotImplementedError

    def marshal(self, result: str) -> str:
        """
        Marshal the service result into the response

        Parameters:
        - result (str): the report produced by the service

        Returns:
        - the response text
        """
        return result

    def process_event(self, event) -> str:
        """
        Process one request through the service.

        Parameters:
        - event: the raw request.

        Returns:
        - str: the marshalled result.
        """
        operation = self.unmarshal(event)

        result = self.service.execute(operation)
        log.debug(f"adapter result: {result}")

        return self.marshal(result)
