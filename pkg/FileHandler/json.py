import json
import os
from pathlib import Path
from typing import Any, List, Union

from FileHandler.interfaces import FileAppender, FileReader, FileWriter
from errors import DatasetError


def write_atomic(path: Union[str, Path], payload: bytes) -> None:
    """
    Write bytes to a file through a temporary sibling and a rename.

    Args:
        path: Destination file
        payload: Bytes to write
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp_path, 'wb') as file:
        file.write(payload)
        file.flush()
        os.fsync(file.fileno())
    os.replace(tmp_path, path)


class JSONFileHandler(FileReader, FileWriter):
    """Handler for JSON artifacts implementing both read and write operations."""
    
    def __init__(self, file_path: Union[str, Path]):
        """
        Initialize the JSON file handler.
        
        Args:
            file_path: Path to the JSON file
        """
        self._file_path = Path(file_path)

    @property
    def path(self) -> Path:
        return self._file_path

    def exists(self) -> bool:
        return self._file_path.exists()
    
    def read(self) -> Any:
        """
        Read and parse JSON data from the file.
        
        Returns:
            Parsed JSON data
            
        Raises:
            FileNotFoundError: If the file does not exist
            DatasetError: If the file is not valid JSON
        """
        if not self._file_path.exists():
            raise FileNotFoundError(f"File not found: {self._file_path}")
            
        try:
            with open(self._file_path, 'r') as file:
                return json.load(file)
        except json.JSONDecodeError as e:
            raise DatasetError(f"Error reading file: {self._file_path}: {e}") from e

    def write(self, data: Any) -> bool:
        """
        Write JSON data to the file atomically.

        Keys are sorted so that equal data always produces equal bytes.
        
        Args:
            data: Data to write to the file
            
        Returns:
            True if the write operation was successful
        """
        text = json.dumps(data, indent=4, sort_keys=True) + "\n"
        write_atomic(self._file_path, text.encode('utf-8'))
        return True


class JSONLinesFileHandler(FileReader, FileAppender):
    """Handler for append-only files with one JSON object per line."""

    def __init__(self, file_path: Union[str, Path]):
        self._file_path = Path(file_path)

    def read(self) -> List[Any]:
        if not self._file_path.exists():
            return []
        with open(self._file_path, 'r') as file:
            return [json.loads(line) for line in file if line.strip()]

    def append(self, record: Any) -> bool:
        self._file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self._file_path, 'a') as file:
            file.write(json.dumps(record, sort_keys=True) + "\n")
        return True
