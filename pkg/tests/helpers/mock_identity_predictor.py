"""Mock predictor: replays the training labels unchanged (a non-improving
teacher). Usage: mock_identity_predictor.py MODEL IMAGES OUT"""

import json
import shutil
import sys
from pathlib import Path

model_path, images, out = sys.argv[1:4]
model = json.loads(Path(model_path).read_text())
src = Path(model["labels_dir"])
dst = Path(out)
dst.mkdir(parents=True, exist_ok=True)
for p in sorted(src.glob("*.png")):
    shutil.copy(p, dst / p.name)
