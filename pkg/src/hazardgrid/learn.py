"""Tabular value learning: dynamic Q-table pair, double/boundary/single Q
updates and epsilon-greedy selection.

Rows are created on demand as zero vectors. Argmax ties always resolve to
the lowest action code. The double Q target for the table being updated
(``A``) picks ``a* = argmax A[s']`` and evaluates it with the other table:
``r + gamma * B[s'][a*]`` (just ``r`` on terminal transitions).
"""
from __future__ import annotations

import enum
import io
import random
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

N_ACTIONS = 8


class UpdateRule(str, enum.Enum):
    DOUBLE_Q = "double_q"
    BOUNDARY_DOUBLE_Q = "boundary_double_q"
    SINGLE_Q = "single_q"


class Interleave(str, enum.Enum):
    ALTERNATE = "alternate"
    COIN_FLIP = "coin_flip"


class AlphaSchedule(str, enum.Enum):
    CONSTANT = "constant"
    INVERSE_VISIT = "inverse_visit"


class DecayUnit(str, enum.Enum):
    EPISODE = "episode"
    STEP = "step"


class LearnerConfigError(ValueError):
    pass


class RewardRangeError(ValueError):
    pass


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.5
    gamma: float = 0.8
    epsilon0: float = 1.0
    epsilon_decay: float = 0.999
    epsilon_min: float = 0.0
    update_rule: UpdateRule = UpdateRule.DOUBLE_Q
    interleave: Interleave = Interleave.ALTERNATE
    alpha_schedule: AlphaSchedule = AlphaSchedule.CONSTANT
    decay_unit: DecayUnit = DecayUnit.EPISODE

    def __post_init__(self):
        for name, enum_type in (("update_rule", UpdateRule), ("interleave", Interleave),
                                ("alpha_schedule", AlphaSchedule), ("decay_unit", DecayUnit)):
            try:
                object.__setattr__(self, name, enum_type(getattr(self, name)))
            except ValueError:
                raise LearnerConfigError(
                    f"{name} must be one of {[e.value for e in enum_type]}, got {getattr(self, name)!r}"
                ) from None
        if not 0 < self.alpha <= 1:
            raise LearnerConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            raise LearnerConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0 <= self.epsilon0 <= 1:
            raise LearnerConfigError(f"epsilon0 must lie in [0, 1], got {self.epsilon0}")
        if not 0 < self.epsilon_decay <= 1:
            raise LearnerConfigError(f"epsilon_decay must lie in (0, 1], got {self.epsilon_decay}")
        if not self.epsilon_min >= 0:
            raise LearnerConfigError(f"epsilon_min must be >= 0, got {self.epsilon_min}")

    def to_dict(self) -> dict:
        return {k: (v.value if isinstance(v, enum.Enum) else v) for k, v in asdict(self).items()}


def argmax(values: Sequence[float]) -> int:
    """Index of the largest value, lowest index on ties."""
    return values.index(max(values)) if isinstance(values, list) else list(values).index(max(values))


@dataclass
class QTablePair:
    """Two dynamically grown tables ``q`` and ``u`` (the second estimator).

    ``turn`` is 0 when ``q`` updates next and 1 for ``u``. ``visits``
    counts updates per (table id, key) row, used by the 1/n step size.
    """

    n_actions: int = N_ACTIONS
    seed: Optional[int] = None
    q: dict[str, list[float]] = field(default_factory=dict)
    u: dict[str, list[float]] = field(default_factory=dict)
    turn: int = 0
    visits: dict[tuple[str, str], list[int]] = field(default_factory=dict)

    def __post_init__(self):
        self._rng = random.Random(self.seed)

    def table(self, which: int) -> dict[str, list[float]]:
        return self.u if which else self.q

    def row(self, which: int, key: str) -> list[float]:
        table = self.u if which else self.q
        row = table.get(key)
        if row is None:
            row = table[key] = [0.0] * self.n_actions
        return row

    def __len__(self) -> int:
        return len(self.q.keys() | self.u.keys())

    def values(self):
        """Every stored action value across both tables."""
        for table in (self.q, self.u):
            for row in table.values():
                yield from row

    def swapped(self) -> "QTablePair":
        """Copy with the two tables exchanged and the turn flipped."""
        return QTablePair(
            self.n_actions,
            self.seed,
            {k: list(v) for k, v in self.u.items()},
            {k: list(v) for k, v in self.q.items()},
            1 - self.turn,
            {(("U" if t == "Q" else "Q"), k): list(v) for (t, k), v in self.visits.items()},
        )

    def to_snapshot(self) -> str:
        buf = io.StringIO()
        for table_id, table in (("Q", self.q), ("U", self.u)):
            for key in sorted(table):
                values = "\t".join(format(v, ".17g") for v in table[key])
                buf.write(f"{table_id}\t{key}\t{values}\n")
        return buf.getvalue()

    @classmethod
    def from_snapshot(cls, text: str) -> "QTablePair":
        tables = cls()
        n_actions = None
        for lineno, line in enumerate(text.split("\n"), start=1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) < 3 or parts[0] not in ("Q", "U"):
                raise ValueError(f"snapshot line {lineno}: expected 'Q|U<TAB>key<TAB>values'")
            values = [float(v) for v in parts[2:]]
            if n_actions is None:
                n_actions = len(values)
            elif len(values) != n_actions:
                raise ValueError(f"snapshot line {lineno}: expected {n_actions} values, got {len(values)}")
            tables.table(parts[0] == "U")[parts[1]] = values
        if n_actions is not None:
            tables.n_actions = n_actions
        return tables

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_snapshot())

    @classmethod
    def load(cls, path) -> "QTablePair":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return cls.from_snapshot(fh.read())


def q_values_for_selection(tables: QTablePair, key: str) -> list[float]:
    """Elementwise mean of both tables' rows; missing rows count as zeros."""
    q = tables.q.get(key)
    u = tables.u.get(key)
    if q is None and u is None:
        return [0.0] * tables.n_actions
    if q is None:
        return [v / 2 for v in u]
    if u is None:
        return [v / 2 for v in q]
    return [(a + b) / 2 for a, b in zip(q, u)]


def select_action(values: Sequence[float], epsilon: float, rng: random.Random) -> int:
    """Epsilon-greedy: exploit when a uniform draw exceeds ``epsilon``.

    One uniform draw is always consumed; ``epsilon == 0`` exploits even on
    a draw of exactly 0.
    """
    var = rng.random()
    if var > epsilon or epsilon == 0:
        return argmax(values)
    return rng.randrange(len(values))


def decay_epsilon(epsilon: float, cfg: LearnerConfig) -> float:
    return max(cfg.epsilon_min, epsilon * cfg.epsilon_decay)


def _check(tables: QTablePair, action: int, reward: float, next_key, terminal: bool) -> None:
    if not 0.0 <= reward <= 1.0:
        raise RewardRangeError(f"reward must lie in [0, 1], got {reward}")
    if not 0 <= action < tables.n_actions:
        raise ValueError(f"action code {action} outside 0..{tables.n_actions - 1}")
    if not terminal and next_key is None:
        raise ValueError("next state key is required for non-terminal transitions")


def _step_size(tables: QTablePair, which: int, key: str, action: int, cfg: LearnerConfig) -> float:
    if cfg.alpha_schedule is AlphaSchedule.CONSTANT:
        return cfg.alpha
    counts = tables.visits.get(("U" if which else "Q", key))
    if counts is None:
        counts = tables.visits[("U" if which else "Q", key)] = [0] * tables.n_actions
    counts[action] += 1
    return 1.0 / counts[action]


def _pick_table(tables: QTablePair, cfg: LearnerConfig) -> int:
    if cfg.interleave is Interleave.COIN_FLIP:
        return 1 if tables._rng.random() < 0.5 else 0
    which = tables.turn
    tables.turn = 1 - which
    return which


def _double_target(tables, which, reward, next_key, terminal, gamma) -> float:
    if terminal:
        return reward
    own = tables.row(which, next_key)
    other = tables.row(1 - which, next_key)
    return reward + gamma * other[argmax(own)]


def update_double_q(tables: QTablePair, key: str, action: int, reward: float,
                    next_key: Optional[str], terminal: bool, cfg: LearnerConfig) -> QTablePair:
    """Update whichever table's turn it is towards the cross-evaluated target."""
    _check(tables, action, reward, next_key, terminal)
    which = _pick_table(tables, cfg)
    row = tables.row(which, key)
    target = _double_target(tables, which, reward, next_key, terminal, cfg.gamma)
    alpha = _step_size(tables, which, key, action, cfg)
    row[action] += alpha * (target - row[action])
    return tables


def update_boundary(tables: QTablePair, key: str, action: int, reward: float,
                    next_key: Optional[str], terminal: bool, cfg: LearnerConfig) -> QTablePair:
    """Double Q update with the TD error scaled by ``1 - Q(s, a)``.

    Values stay inside [0, 1] whenever targets never exceed 1 (e.g. reward
    only on terminal transitions) or ``alpha * (1 + gamma) <= 1``.
    """
    _check(tables, action, reward, next_key, terminal)
    which = _pick_table(tables, cfg)
    row = tables.row(which, key)
    target = _double_target(tables, which, reward, next_key, terminal, cfg.gamma)
    alpha = _step_size(tables, which, key, action, cfg)
    current = row[action]
    td = alpha * (target - current)
    td = (1.0 - current) * td
    row[action] = current + td
    return tables


def update_single_q(tables: QTablePair, key: str, action: int, reward: float,
                    next_key: Optional[str], terminal: bool, cfg: LearnerConfig) -> QTablePair:
    """Classical Q-learning on ``tables.q`` alone."""
    _check(tables, action, reward, next_key, terminal)
    row = tables.row(0, key)
    if terminal:
        target = reward
    else:
        target = reward + cfg.gamma * max(tables.row(0, next_key))
    alpha = _step_size(tables, 0, key, action, cfg)
    row[action] += alpha * (target - row[action])
    return tables


UPDATES = {
    UpdateRule.DOUBLE_Q: update_double_q,
    UpdateRule.BOUNDARY_DOUBLE_Q: update_boundary,
    UpdateRule.SINGLE_Q: update_single_q,
}


def update(tables: QTablePair, key: str, action: int, reward: float,
           next_key: Optional[str], terminal: bool, cfg: LearnerConfig) -> QTablePair:
    return UPDATES[cfg.update_rule](tables, key, action, reward, next_key, terminal, cfg)


def greedy_values(tables: QTablePair, key: str, cfg: LearnerConfig) -> list[float]:
    """Values the behaviour policy ranks actions by under ``cfg``."""
    if cfg.update_rule is UpdateRule.SINGLE_Q:
        row = tables.q.get(key)
        return list(row) if row is not None else [0.0] * tables.n_actions
    return q_values_for_selection(tables, key)
