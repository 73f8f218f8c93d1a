from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Sequence


class Connection(ABC):
    """Opens and closes the underlying store."""

    @abstractmethod
    def connect(self):
        pass

    @abstractmethod
    def close(self):
        pass


class SchemaOperations(ABC):
    """Declares tables keyed by a single primary column."""

    @abstractmethod
    def ensure_table(self, table_name: str, key: str, columns: Dict[str, str]):
        """Create `table_name` with primary key `key` unless it already exists."""
        pass


class RowOperations(ABC):
    """Keyed row access. Rows are written by upsert and never deleted."""

    @abstractmethod
    def upsert(self, table_name: str, key: str, row: Dict[str, Any]) -> None:
        pass

    @abstractmethod
    def select(self, table_name: str, columns: Optional[List[str]] = None,
               order_by: Optional[str] = None) -> List[Dict[str, Any]]:
        pass


class Database(Connection, SchemaOperations, RowOperations):
    """Complete keyed-row database."""

    def __del__(self):
        self.close()


class ResultStore(ABC):
    """Committed sweep rows keyed by grid cell index."""

    @abstractmethod
    def committed_cells(self) -> List[int]:
        pass

    @abstractmethod
    def commit(self, cell_index: int, row: Dict[str, Any]) -> None:
        pass

    @abstractmethod
    def rows(self) -> List[Dict[str, Any]]:
        pass

    @abstractmethod
    def close(self) -> None:
        pass
