"""Environment interface contract and a deterministic toy game.

``CatchEnv`` is a desk-scale stand-in for an emulated console: objects fall
from the top of a 210x160 screen, the avatar slides along the bottom, and a
well-timed ``catch`` with the avatar under the object scores a point. The
128-byte RAM exposes the full game state, which the scripted reference
policy reads directly.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ConfigError

RAM_SIZE = 128

ACTION_NOOP = 0
ACTION_LEFT = 1
ACTION_RIGHT = 2
ACTION_CATCH = 3

_N_COLS = 16
_COL_W = 10
_AVATAR_TOP = 188
_AVATAR_BOTTOM = 202
_OBJ_H = 8
_FALL_SPEED = 7
_SPAWN_Y = 4
_LANDING_Y = _AVATAR_TOP - _OBJ_H  # object bottom reaches the avatar band
_MAX_TRACKED = 16

_BG = (12, 12, 40)
_GROUND = (72, 72, 72)
_AVATAR = (236, 236, 236)
_OBJECT = (200, 116, 52)


@runtime_checkable
class Environment(Protocol):
    """Minimal contract an emulator adapter must satisfy: deterministic
    given the reset seed and the action sequence."""

    @property
    def n_actions(self) -> int: ...

    def reset(self, seed: int) -> tuple[np.ndarray, np.ndarray]: ...

    def step(self, action: int) -> tuple[np.ndarray, np.ndarray, float, bool]: ...


class CatchEnv:
    """Falling-object catching game on a 210x160 RGB screen.

    Actions: 0 noop, 1 left, 2 right, 3 catch. A landing object scores +1
    exactly when the catch action fires with the avatar within one column.
    Episodes end after ``horizon`` steps.
    """

    env_id = "toy-catch"

    def __init__(self, horizon: int = 500, spawn_period: int = 4, catch_radius: int = 1):
        self.horizon = horizon
        self.spawn_period = spawn_period
        self.catch_radius = catch_radius
        self._rng: np.random.Generator | None = None

    @property
    def n_actions(self) -> int:
        return 4

    def reset(self, seed: int) -> tuple[np.ndarray, np.ndarray]:
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._t = 0
        self._score = 0
        self._avatar = _N_COLS // 2
        self._objects: list[list[int]] = []  # [col, y]
        self._last_action = ACTION_NOOP
        self._spawn()
        return self._render(), self._ram()

    def _require_reset(self):
        if self._rng is None:
            raise ConfigError("environment used before reset")

    def _spawn(self) -> None:
        col = int(self._rng.integers(0, _N_COLS))
        self._objects.append([col, _SPAWN_Y])

    def step(self, action: int) -> tuple[np.ndarray, np.ndarray, float, bool]:
        self._require_reset()
        if not 0 <= action < self.n_actions:
            raise ConfigError(f"action {action} out of range [0, {self.n_actions})")
        self._t += 1
        self._last_action = action
        if action == ACTION_LEFT:
            self._avatar = max(0, self._avatar - 1)
        elif action == ACTION_RIGHT:
            self._avatar = min(_N_COLS - 1, self._avatar + 1)

        reward = 0.0
        kept = []
        for col, y in self._objects:
            y += _FALL_SPEED
            if y >= _LANDING_Y:
                if action == ACTION_CATCH and abs(col - self._avatar) <= self.catch_radius:
                    reward += 1.0
            else:
                kept.append([col, y])
        self._objects = kept
        if self._t % self.spawn_period == 0:
            self._spawn()
        self._score += int(reward)
        done = self._t >= self.horizon
        return self._render(), self._ram(), reward, done

    def _render(self) -> np.ndarray:
        frame = np.empty((210, 160, 3), dtype=np.uint8)
        frame[:] = _BG
        frame[_AVATAR_BOTTOM + 2 :, :] = _GROUND
        x0 = self._avatar * _COL_W
        frame[_AVATAR_TOP:_AVATAR_BOTTOM, x0 : x0 + _COL_W] = _AVATAR
        for col, y in self._objects:
            frame[y : y + _OBJ_H, col * _COL_W : (col + 1) * _COL_W] = _OBJECT
        return frame

    def _ram(self) -> np.ndarray:
        ram = np.zeros(RAM_SIZE, dtype=np.uint8)
        ram[0] = self._avatar
        ram[1] = min(len(self._objects), _MAX_TRACKED)
        for i, (col, y) in enumerate(self._objects[:_MAX_TRACKED]):
            ram[2 + 2 * i] = col
            ram[3 + 2 * i] = y
        ram[40] = self._score & 0xFF
        ram[41] = (self._score >> 8) & 0xFF
        ram[42] = self._t & 0xFF
        ram[43] = (self._t >> 8) & 0xFF
        ram[44] = self._last_action
        return ram


def scripted_policy(ram: np.ndarray) -> int:
    """Reference policy for CatchEnv that reads the RAM directly: chase the
    object closest to landing, catching when it arrives."""
    avatar = int(ram[0])
    n = int(ram[1])
    if n == 0:
        return ACTION_NOOP
    objs = [(int(ram[3 + 2 * i]), int(ram[2 + 2 * i])) for i in range(n)]  # (y, col)
    y, col = max(objs)
    if y + _FALL_SPEED >= _LANDING_Y:
        if abs(col - avatar) <= 1:
            return ACTION_CATCH
        return ACTION_LEFT if col < avatar else ACTION_RIGHT
    if col < avatar:
        return ACTION_LEFT
    if col > avatar:
        return ACTION_RIGHT
    return ACTION_NOOP
