"""
Fusing two detectors on a single frame
======================================

Two detectors see the same drone.  Their boxes disagree by a few pixels
and both emit a stray box.  Weighted fusion merges the agreeing pair and
keeps the strays at a reduced score.
"""

from lae_ensemble import BoundingBox, Detection, FusionConfig, calibrate_weights, fuse_frame, identify, nms
from lae_ensemble.core import DEFAULT_REGISTRY

# per-model AP measured on some validation set
weights = calibrate_weights({"one_stage": 0.81, "two_stage": 0.83})
print("weights:", {m: round(w, 4) for m, w in weights.items()})

one = [
    Detection(BoundingBox(100, 80, 160, 130), 0, 0.82, "one_stage", 0),
    Detection(BoundingBox(102, 79, 158, 133), 0, 0.64, "one_stage", 1),  # duplicate of det 0
    Detection(BoundingBox(600, 400, 640, 430), 1, 0.35, "one_stage", 2),
]
two = [
    Detection(BoundingBox(104, 82, 161, 131), 0, 0.91, "two_stage", 0),
    Detection(BoundingBox(900, 100, 950, 140), 2, 0.22, "two_stage", 1),
]

# plain NMS on one model removes its own duplicate
print("one_stage after NMS:", [d.det_id for d in nms(one, 0.5)])

cfg = FusionConfig(weights)
fused = fuse_frame({"one_stage": one, "two_stage": two}, cfg)
for f in fused:
    print(f"fused {f.det_id}: class={f.class_id} score={f.score:.3f} "
          f"box={tuple(round(c, 1) for c in f.bbox.as_tuple())} from {f.contributors}")

# anything at or above the decision threshold is flagged
for ident in identify(fused, DEFAULT_REGISTRY, 0.5):
    print(f"  {ident.class_name:>10} {ident.detection.score:.3f} -> {ident.verdict}")
