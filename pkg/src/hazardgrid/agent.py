"""Episode loops binding the engine to the learner."""
from __future__ import annotations

import random
from typing import Optional

from hazardgrid.engine import Episode, Status
from hazardgrid.learn import (
    DecayUnit,
    LearnerConfig,
    QTablePair,
    argmax,
    decay_epsilon,
    greedy_values,
    update,
)


def run_episode(
    episode: Episode,
    tables: QTablePair,
    cfg: LearnerConfig,
    epsilon: float,
    rng: random.Random,
    learn: bool = True,
) -> tuple[Status, int, float]:
    """Play ``episode`` to the end.

    Returns ``(outcome, steps, epsilon)`` where ``epsilon`` is the value
    after any per-step decay (unchanged for per-episode decay).
    """
    if not episode.running:
        return episode.status, 0, epsilon
    per_step = cfg.decay_unit is DecayUnit.STEP
    key = episode.state_key()
    steps = 0
    while True:
        # same draw order as select_action, but skips ranking when exploring
        if rng.random() > epsilon or epsilon == 0:
            action = argmax(greedy_values(tables, key, cfg))
        else:
            action = rng.randrange(tables.n_actions)
        reward, terminal = episode.step(action)
        steps += 1
        next_key: Optional[str] = None if terminal else episode.state_key()
        if learn:
            update(tables, key, action, reward, next_key, terminal, cfg)
            if per_step:
                epsilon = decay_epsilon(epsilon, cfg)
        if terminal:
            return episode.status, steps, epsilon
        key = next_key
