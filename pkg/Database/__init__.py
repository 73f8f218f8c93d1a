from Database.interfaces import ResultStore
from Database.sqlite import SQLiteDatabase, SQLiteResultStore
