"""Frame preprocessing: 210x160 RGB -> stacked 4x84x84 observations."""

from __future__ import annotations

from collections import deque

import numpy as np
from PIL import Image

from .errors import ShapeError
from .validation import check_shape

FRAME_HEIGHT = 210
FRAME_WIDTH = 160
OBS_SIZE = 84
OBS_STACK = 4

# ITU-R 601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def grayscale_downsample(frame: np.ndarray) -> np.ndarray:
    """Luma-grayscale a 210x160x3 frame to [0,1] and bilinearly resize to 84x84."""
    check_shape(frame, (FRAME_HEIGHT, FRAME_WIDTH, 3), "frame")
    luma = (frame.astype(np.float64) @ _LUMA) / 255.0
    img = Image.fromarray(luma.astype(np.float32), mode="F")
    small = img.resize((OBS_SIZE, OBS_SIZE), Image.BILINEAR)
    return np.clip(np.asarray(small, dtype=np.float32), 0.0, 1.0)


def stack_observation(history) -> np.ndarray:
    """Stack the last four grayscale frames, newest at channel 3.

    Shorter histories are padded by repeating the earliest frame; longer
    ones keep only the most recent four.
    """
    frames = list(history)
    if not frames:
        raise ShapeError("observation history is empty")
    frames = frames[-OBS_STACK:]
    while len(frames) < OBS_STACK:
        frames.insert(0, frames[0])
    for f in frames:
        check_shape(f, (OBS_SIZE, OBS_SIZE), "grayscale frame")
    return np.stack(frames).astype(np.float32)


class FrameStacker:
    """Keeps the rolling four-frame history during a rollout."""

    def __init__(self):
        self._history: deque[np.ndarray] = deque(maxlen=OBS_STACK)

    def reset(self) -> None:
        self._history.clear()

    def push(self, gray: np.ndarray) -> np.ndarray:
        self._history.append(gray)
        return stack_observation(self._history)
