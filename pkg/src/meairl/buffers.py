"""Replay storage and the real/synthetic mixing schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ReplayBuffer:
    """Bounded FIFO transition store backed by preallocated arrays.

    Physical storage is sized once (phys_capacity, default = capacity);
    the logical capacity can move below that at any time. Shrinking drops
    the oldest entries. Sampling is uniform with replacement, which also
    covers batches larger than the current size.
    """

    def __init__(self, capacity: int, state_shape=(), action_shape=(),
                 dtype=np.int64, phys_capacity: int = None):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        phys = int(capacity if phys_capacity is None else phys_capacity)
        if phys < capacity:
            raise ValueError(f"phys_capacity {phys} < capacity {capacity}")
        self._phys = phys
        self.capacity = int(capacity)
        self.states = np.zeros((phys, *state_shape), dtype=dtype)
        self.actions = np.zeros((phys, *action_shape), dtype=dtype)
        self.next_states = np.zeros((phys, *state_shape), dtype=dtype)
        self._head = 0  # next write position
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def add(self, state, action, next_state) -> None:
        self.states[self._head] = state
        self.actions[self._head] = action
        self.next_states[self._head] = next_state
        self._head = (self._head + 1) % self._phys
        self._count = min(self._count + 1, self.capacity)

    def add_batch(self, states, actions, next_states) -> None:
        for s, a, n in zip(states, actions, next_states):
            self.add(s, a, n)

    def set_capacity(self, capacity: int) -> None:
        capacity = int(min(capacity, self._phys))
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        if self._count > capacity:
            self._count = capacity

    def _indices(self, n, rng) -> np.ndarray:
        if self._count == 0:
            raise ValueError("cannot sample from an empty buffer")
        offsets = rng.integers(0, self._count, size=n)
        return (self._head - self._count + offsets) % self._phys

    def sample(self, n, rng):
        idx = self._indices(n, rng)
        return self.states[idx], self.actions[idx], self.next_states[idx]

    def oldest_first(self):
        """Contents in insertion order (oldest first); for tests."""
        idx = (self._head - self._count + np.arange(self._count)) % self._phys
        return self.states[idx], self.actions[idx], self.next_states[idx]

    def newest(self, k: int):
        """The k most recently added transitions, no randomness involved."""
        k = min(k, self._count)
        idx = (self._head - k + np.arange(k)) % self._phys
        return self.states[idx], self.actions[idx], self.next_states[idx]


@dataclass
class RatioSchedule:
    """Synthetic share of policy-update batches, plus the synthetic buffer size.

    The fraction ramps linearly from `start` to `end` over `ramp_steps`
    and stays at `end` after. The buffer capacity grows linearly from
    cap_init at rate cap_growth per step, clipped at cap_max.
    """

    start: float
    end: float
    ramp_steps: int
    cap_init: int
    cap_growth: float
    cap_max: int

    def __post_init__(self):
        for name in ("start", "end"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.ramp_steps < 0:
            raise ValueError(f"ramp_steps must be >= 0, got {self.ramp_steps}")
        if self.cap_init < 1 or self.cap_max < self.cap_init:
            raise ValueError(f"need 1 <= cap_init <= cap_max, got "
                             f"{self.cap_init}, {self.cap_max}")
        if self.cap_growth < 0.0:
            raise ValueError(f"cap_growth must be >= 0, got {self.cap_growth}")

    def fraction(self, step: int) -> float:
        if self.ramp_steps == 0 or step >= self.ramp_steps:
            return self.end
        return self.start + (self.end - self.start) * (step / self.ramp_steps)

    def capacity(self, step: int) -> int:
        return int(min(self.cap_max, self.cap_init + self.cap_growth * step))
