import logging
import os

# Configuring the logging module with basic settings, including format and log level,
# where the log level is obtained from the environment variable LOGGING_LEVEL
# with a default of INFO, and force=True to ensure the configuration is applied immediately.
logging.basicConfig(
    format="%(name)s:%(lineno)s - %(levelname)s - %(message)s",
    level=os.getenv("LOGGING_LEVEL", "INFO").upper(),
    force=True,
)

WARN = logging.WARN
INFO = logging.INFO
DEBUG = logging.DEBUG


def logger(name=None):
    """
    Function to create a logger with a specified name or default name.

    Parameters:
        name (str): Name of the logger. If not provided, the root logger is returned.

    Returns:
        logging.Logger: Logger object with the specified name or the root logger.
    """
    loggingLevel = os.getenv("LOGGING_LEVEL", "INFO").upper()
    logging.getLogger().setLevel(loggingLevel)
    return logging.getLogger(name)


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


def format_record(kind: str, **fields) -> str:
    """
    Render one structured text record, `kind key=value key=value ...`.

    Field order follows the keyword order so records are stable across runs.
    """
    parts = [kind]
    for key, value in fields.items():
        parts.append(f"{key}={format_value(value)}")
    return " ".join(parts)


def parse_record(line: str) -> tuple[str, dict[str, str]]:
    kind, *pairs = line.strip().split(" ")
    fields = {}
    for pair in pairs:
        key, _, value = pair.partition("=")
        fields[key] = value
    return kind, fields


def write_report_file(file_path: str, content: str):
    """
    Write a report or artifact to a file, creating its folder if needed.

    Parameters:
        file_path (str): Destination path.
        content (str): The string content to write to the file.
    """
    dir_path = os.path.dirname(file_path)
    if dir_path:
        os.makedirs(dir_path, exist_ok=True)

    with open(file_path, "w", encoding="utf-8") as file:
        file.write(content if content.endswith("\n") else content + "\n")
