"""
Frequency-Attention GCN - Main Entry Point

Run this file with a subcommand, e.g.

    python run_pipeline.py --seed 7 synth --preset mini-like --out data/mini
    python run_pipeline.py --seed 7 loocv --data data/mini --out reports/loocv.csv
"""
import sys
from pathlib import Path

# Make the repo root importable when launched from elsewhere
sys.path.insert(0, str(Path(__file__).parent))

from pipeline.cli import main

if __name__ == "__main__":
    sys.exit(main())
