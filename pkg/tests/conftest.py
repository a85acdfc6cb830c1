import sys
from pathlib import Path

# make fdcheck and other test helpers importable regardless of invocation dir
sys.path.insert(0, str(Path(__file__).parent))
