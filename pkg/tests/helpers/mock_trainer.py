"""Mock trainer: records where the labels came from so a mock predictor
can replay them. Usage: mock_trainer.py MANIFEST LABELS OUT"""

import json
import sys

manifest, labels, out = sys.argv[1:4]
with open(out, "w") as fh:
    json.dump({"kind": "mock", "labels_dir": labels, "manifest": manifest}, fh)
