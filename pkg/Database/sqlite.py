import json
import logging
import sqlite3
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from Database.interfaces import Database, ResultStore
from errors import StoreError

logger = logging.getLogger(__name__)


class SQLiteConnection:
    """Owns one sqlite3 connection and turns driver errors into StoreError."""

    def __init__(self, db_path: Union[str, Path]):
        self.db_path = str(db_path)
        self.connection: Optional[sqlite3.Connection] = None

    def connect(self):
        """
        Open the database file.

        Raises:
            StoreError: If the file cannot be opened as a database
        """
        try:
            self.connection = sqlite3.connect(self.db_path)
        except sqlite3.Error as e:
            logger.error("Result store %s cannot be opened: %s", self.db_path, e)
            raise StoreError(f"cannot open result store {self.db_path}: {e}") from e

    def close(self):
        if self.connection is not None:
            self.connection.close()
            self.connection = None

    def execute(self, statement: str, parameters: Sequence[Any] = ()) -> sqlite3.Cursor:
        """Run one statement inside its own transaction."""
        if self.connection is None:
            raise StoreError(f"result store {self.db_path} is not connected")
        try:
            with self.connection:
                return self.connection.execute(statement, list(parameters))
        except sqlite3.Error as e:
            logger.error("Statement failed on %s: %s", self.db_path, e)
            raise StoreError(f"{self.db_path}: {e}") from e

    def __del__(self):
        self.close()


class SQLiteSchemaManager:
    def __init__(self, connection: SQLiteConnection):
        self.connection = connection

    def ensure_table(self, table_name: str, key: str, columns: Dict[str, str]):
        declared = [f"{key} {columns[key]} PRIMARY KEY"]
        declared += [f"{name} {kind}" for name, kind in columns.items() if name != key]
        self.connection.execute(f"CREATE TABLE IF NOT EXISTS {table_name} ({', '.join(declared)})")


class SQLiteRowManager:
    def __init__(self, connection: SQLiteConnection):
        self.connection = connection

    def upsert(self, table_name: str, key: str, row: Dict[str, Any]) -> None:
        """Insert `row`, replacing any existing row with the same `key` value."""
        names = list(row)
        updates = ", ".join(f"{name} = excluded.{name}" for name in names if name != key)
        statement = (f"INSERT INTO {table_name} ({', '.join(names)}) "
                     f"VALUES ({', '.join('?' for _ in names)})")
        statement += f" ON CONFLICT({key}) DO UPDATE SET {updates}" if updates else f" ON CONFLICT({key}) DO NOTHING"
        self.connection.execute(statement, list(row.values()))

    def select(self, table_name: str, columns: Optional[List[str]] = None,
               order_by: Optional[str] = None) -> List[Dict[str, Any]]:
        """
        Read rows as dictionaries.

        Args:
            table_name: Table to read
            columns: Columns to return, or None for all of them
            order_by: Column to sort by, or None for storage order
        """
        statement = f"SELECT {', '.join(columns) if columns else '*'} FROM {table_name}"
        if order_by:
            statement += f" ORDER BY {order_by}"
        cursor = self.connection.execute(statement)
        names = [description[0] for description in cursor.description]
        return [dict(zip(names, values)) for values in cursor.fetchall()]


class SQLiteDatabase(Database):
    """SQLite database composed from a connection, a schema manager and a row manager."""

    def __init__(self, connection: SQLiteConnection, schema: Optional[SQLiteSchemaManager] = None,
                 rows: Optional[SQLiteRowManager] = None):
        self.connection = connection
        self.schema = schema or SQLiteSchemaManager(connection)
        self.row_manager = rows or SQLiteRowManager(connection)
        self.connect()

    def connect(self):
        self.connection.connect()

    def close(self):
        self.connection.close()

    def ensure_table(self, table_name, key, columns):
        self.schema.ensure_table(table_name, key, columns)

    def upsert(self, table_name, key, row):
        self.row_manager.upsert(table_name, key, row)

    def select(self, table_name, columns=None, order_by=None):
        return self.row_manager.select(table_name, columns, order_by)


CELLS_TABLE = "cells"
CELLS_KEY = "cell_index"
CELLS_COLUMNS = {CELLS_KEY: "INTEGER", "payload": "TEXT NOT NULL"}


class SQLiteResultStore(ResultStore):
    """
    Sweep result store backed by one SQLite file.

    Rows are stored as canonical JSON so a row read back is equal to the row
    committed. Only the sweep orchestrator writes to the store.
    """

    def __init__(self, db_path: Union[str, Path]):
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)
        self.database = SQLiteDatabase(SQLiteConnection(db_path))
        self.database.ensure_table(CELLS_TABLE, CELLS_KEY, CELLS_COLUMNS)

    def committed_cells(self) -> List[int]:
        return [row[CELLS_KEY] for row in self.database.select(CELLS_TABLE, [CELLS_KEY], order_by=CELLS_KEY)]

    def commit(self, cell_index: int, row: Dict[str, Any]) -> None:
        payload = json.dumps(row, sort_keys=True)
        self.database.upsert(CELLS_TABLE, CELLS_KEY, {CELLS_KEY: cell_index, "payload": payload})

    def rows(self) -> List[Dict[str, Any]]:
        return [json.loads(record["payload"])
                for record in self.database.select(CELLS_TABLE, ["payload"], order_by=CELLS_KEY)]

    def close(self) -> None:
        self.database.close()
