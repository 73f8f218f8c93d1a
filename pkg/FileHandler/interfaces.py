from abc import ABC, abstractmethod
from typing import Any


class FileReader(ABC):
    """Interface for reading artifacts from files."""
    
    @abstractmethod
    def read(self) -> Any:
        """Read data from a file."""
        pass


class FileWriter(ABC):
    """Interface for writing artifacts to files."""
    
    @abstractmethod
    def write(self, data: Any) -> bool:
        """Write data to a file, replacing any previous content."""
        pass


class FileAppender(ABC):
    """Interface for appending records to a file."""

    @abstractmethod
    def append(self, record: Any) -> bool:
        """Append one record to the end of a file."""
        pass
