import numpy as np

from stall_sentinel.frames import load_manifest
from stall_sentinel.pgm import write_pgm


def write_video(tmp_path, frames, timestamps=None, subdir="video"):
    """Write a list of uint8 arrays as a frames/ directory plus manifest.txt
    and return the loaded FrameManifest."""
    out = tmp_path / subdir
    (out / "frames").mkdir(parents=True)
    if timestamps is None:
        timestamps = [float(i) for i in range(len(frames))]
    lines = []
    for i, (frame, ts) in enumerate(zip(frames, timestamps)):
        rel = f"frames/frame_{i:06d}.pgm"
        write_pgm(out / rel, np.asarray(frame, dtype=np.uint8))
        lines.append(f"{i} {ts:.6f} {rel}")
    (out / "manifest.txt").write_text("".join(line + "\n" for line in lines))
    return load_manifest(out / "manifest.txt")
