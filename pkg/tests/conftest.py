import sys
from pathlib import Path

# make helpers.py importable regardless of where pytest is invoked from
sys.path.insert(0, str(Path(__file__).parent))
