"""Network/training configuration and the replay buffer."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class NetConfig:
    """Architecture and training knobs.

    The input layer is always 3 wide (stage, state, age) and the output
    layer one unit per action. Training starts once the replay buffer
    holds ``min_replay`` transitions and fits a batch of ``batch_size``
    every environment step; the target network is refreshed every
    ``target_update_period`` fits.
    """

    nhl: int
    nn: int
    batch_size: int
    episodes: int
    replay_capacity: int = 5000
    min_replay: int = 4000
    target_update_period: int = 100

    def __post_init__(self):
        if self.nhl < 1:
            raise ValueError("need at least one hidden layer")
        if self.nn < 1:
            raise ValueError("hidden width must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.replay_capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        if not (1 <= self.min_replay <= self.replay_capacity):
            raise ValueError("min_replay must be in 1..replay_capacity")
        if self.target_update_period < 1:
            raise ValueError("target update period must be >= 1")


@dataclass
class ReplayStats:
    """Instrumentation counters kept by the trainer."""

    pushes: int = 0
    max_len: int = 0
    fits: int = 0
    target_syncs: int = 0
    len_at_first_fit: int | None = None
    sync_fit_indices: list = field(default_factory=list)


class ReplayMemory:
    """Bounded FIFO of transitions backed by a ring buffer (O(1) push and
    random access)."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items = []
        self._pos = 0

    def __len__(self):
        return len(self._items)

    def push(self, item) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._pos] = item
            self._pos = (self._pos + 1) % self.capacity

    def __getitem__(self, index):
        return self._items[index]

    def sample_indices(self, rng, batch_size: int):
        """Uniform sample of positions; falls back to sampling with
        replacement (with a warning) when the buffer is still smaller than
        the batch."""
        n = len(self._items)
        if batch_size > n:
            import warnings

            warnings.warn(
                f"batch size {batch_size} exceeds replay length {n}; "
                "sampling with replacement",
                stacklevel=2,
            )
            return rng.integers(0, n, size=batch_size)
        return rng.choice(n, size=batch_size, replace=False)
