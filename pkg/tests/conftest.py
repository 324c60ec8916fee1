import sys
from pathlib import Path

# make sibling helper modules (oracle_utils, bench_utils) importable
sys.path.insert(0, str(Path(__file__).resolve().parent))
