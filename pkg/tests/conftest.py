import os
import sys

# src/ modules import each other as siblings, the way main.py runs them
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
