import os
import sys

# allow cross-imports between test modules (e.g. the QP oracle helper)
sys.path.insert(0, os.path.dirname(__file__))
