"""
trumpet command-line entry point.

Usage:
    python scripts/trumpet.py simulate --config configs/fast_config.yaml
    python scripts/trumpet.py analyze results/fast/tags.ptag --config configs/fast_config.yaml
    python scripts/trumpet.py budget --config configs/paper_device.yaml
    python scripts/trumpet.py localize amplitudes.csv --catalog configs/catalog_device.json
    python scripts/trumpet.py recipe fig4c --out results
"""

import sys
from pathlib import Path

# Add project root to path
PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.append(str(PROJECT_ROOT))

from src.pipeline.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
