from FileHandler.hashing import row_hashes, stable_hash, tensor_hash
from FileHandler.json import JSONFileHandler, JSONLinesFileHandler, write_atomic
from FileHandler.checkpoint import load_state, save_state
