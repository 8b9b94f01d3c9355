import sys
from pathlib import Path

# allow importing test-local oracle helpers (tests/_solar_oracle.py etc.)
sys.path.insert(0, str(Path(__file__).parent))
