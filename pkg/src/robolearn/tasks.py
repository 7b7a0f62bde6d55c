"""The three experiments: action semantics, reward tables, termination rules,
epoch orchestration, the three-map curriculum with table transfer, and the
scripted prey.

Task 1 avoids obstacles on IR alone, task 2 forages green food with the
camera, task 3 chases a red prey. Rewards are exact table lookups on the
discrete state; there is no shaping and no step cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import normalize_angle
from .metrics import EpochMetrics, StepRecorder
from .perception import (
    STATE_SETS,
    PerceptionConfig,
    PerceptionMemory,
    detect_blobs,
    discretize_task1,
    discretize_task2,
    discretize_task3,
)
from .qcore import (
    Hyperparams,
    QTable,
    TASK_HYPERPARAMS,
    TransitionRecord,
    epsilon_for_epoch,
    q_update,
    select_action,
)
from .rng import RngStreams
from .worldsim import (
    SPEED_SCALE,
    STEP_DT,
    WorldMap,
    WorldState,
    initial_world,
    ir_readings,
    read_ir,
    render_camera,
    resolve_map,
    spawn_food,
    step_kinematics,
    step_prey_kinematics,
)


@dataclass(frozen=True)
class ActionSpec:
    """A named action and its wheel command; `forward_chance` is the
    probability the command is replaced by plain Forwards (task 3)."""

    label: str
    wheels: tuple[float, float]
    forward_chance: float = 0.0


_FORWARDS = (1.0, 1.0)

TASK1_ACTIONS = (
    ActionSpec("Forwards", _FORWARDS),
    ActionSpec("Up Left", (0.3, 1.0)),
    ActionSpec("Up Right", (1.0, 0.3)),
    ActionSpec("Back Left", (-0.3, -1.0)),
    ActionSpec("Back Right", (-1.0, -0.3)),
    ActionSpec("Backwards", (-1.0, -1.0)),
)
TASK2_ACTIONS = TASK1_ACTIONS
TASK3_ACTIONS = (
    ActionSpec("Forwards", _FORWARDS),
    ActionSpec("Up Left", (0.3, 1.0)),
    ActionSpec("Up Right", (1.0, 0.3)),
    ActionSpec("Backwards", (-1.0, -1.0)),
    ActionSpec("Turn Around Axis (Clockwise) or Forwards (50% chance)",
               (1.0, -1.0), forward_chance=0.5),
    ActionSpec("Turn Around Axis (Counter-Clockwise) or Forwards (50% chance)",
               (-1.0, 1.0), forward_chance=0.5),
)

ACTION_SETS = {1: TASK1_ACTIONS, 2: TASK2_ACTIONS, 3: TASK3_ACTIONS}
_ACTIONS_BY_LABEL = {
    task: {a.label: a for a in actions} for task, actions in ACTION_SETS.items()
}

REWARD_TABLES: dict[int, dict[str, float]] = {
    1: {
        "Object Front": -1.0,
        "Object Left": -1.0,
        "Object Right": -1.0,
        "Object Back Left": -1.0,
        "Object Back Right": -1.0,
        "Object Back Left & Back Right": -1.0,
        "Nothing Detected": 1.0,
    },
    2: {
        "Target Far Left": 5.0,
        "Target Far Center": 5.0,
        "Target Far Right": 5.0,
        "Target Close Left": 10.0,
        "Target Close Center": 10.0,
        "Target Close Right": 10.0,
        "Object Front": -10.0,
        "Object Left": -10.0,
        "Object Right": -10.0,
        "Nothing Detected but last seen Left": -1.0,
        "Nothing Detected but last seen Right": -1.0,
        "Nothing Detected": -5.0,
    },
    3: {
        "Target Far Left": 5.0,
        "Target Far Center": 5.0,
        "Target Far Right": 5.0,
        "Target Close Left": 10.0,
        "Target Close Center": 20.0,
        "Target Close Right": 10.0,
        "Object Front": -10.0,
        "Object Left": -10.0,
        "Object Right": -10.0,
        "Nothing Detected but last seen Left": -10.0,
        "Nothing Detected but last seen Right": -10.0,
        "Nothing Detected": -10.0,
    },
}

DEFAULT_MAPS = {1: ("walls", "obstacles", "maze"), 2: ("obstacles",), 3: ("walls",)}


@dataclass(frozen=True)
class PreyPolicy:
    """Scripted prey: wander with wall avoidance, flee when the predator is
    near. `mode="flee"` forces fleeing regardless of distance."""

    mode: str = "wander"
    flee_trigger_distance: float = 0.5
    speed_scale: float = 0.8

    def __post_init__(self):
        if self.mode not in ("wander", "flee"):
            raise ValueError(f"prey mode must be 'wander' or 'flee', got {self.mode!r}")
        if not 0.0 < self.speed_scale <= 1.0:
            raise ValueError("speed_scale must be in (0, 1]")


@dataclass
class EpisodeConfig:
    """Everything one training or evaluation run needs, minus file paths."""

    task: int
    maps: tuple[str, ...] = ()
    hyperparams: Hyperparams | None = None
    seed: int = 0
    food_count: int = 7
    food_goal: int = 6
    catch_distance: float = 0.13
    perception: PerceptionConfig = field(default_factory=PerceptionConfig)
    prey: PreyPolicy = field(default_factory=PreyPolicy)
    ir_noise: bool = False
    crash_threshold: float = 0.95

    def __post_init__(self):
        if self.task not in (1, 2, 3):
            raise ValueError(f"task must be 1, 2 or 3, got {self.task}")
        if not self.maps:
            self.maps = DEFAULT_MAPS[self.task]
        self.maps = tuple(self.maps)
        if self.hyperparams is None:
            self.hyperparams = TASK_HYPERPARAMS[self.task]
        if self.food_goal > self.food_count:
            raise ValueError("food_goal must not exceed food_count")


def new_qtable(task: int) -> QTable:
    return QTable.zeros(STATE_SETS[task], tuple(a.label for a in ACTION_SETS[task]))


def reward_for(task: int, state: str) -> float:
    """Exact reward-table lookup for the task's discrete state."""
    table = REWARD_TABLES.get(task)
    if table is None:
        raise KeyError(f"unknown task id: {task!r}")
    try:
        return table[state]
    except KeyError:
        raise KeyError(f"task {task} has no state {state!r}") from None


def apply_action(task: int, action: str, rng: np.random.Generator) -> tuple[float, float]:
    """Wheel command for an action label; stochastic task-3 turns draw from
    the policy stream."""
    try:
        spec = _ACTIONS_BY_LABEL[task][action]
    except KeyError:
        raise KeyError(f"task {task} has no action {action!r}") from None
    if spec.forward_chance > 0.0 and rng.random() < spec.forward_chance:
        return _FORWARDS
    return spec.wheels


# ---------------------------------------------------------------------------
# Prey controller


def step_prey(state: WorldState, policy: PreyPolicy,
              rng: np.random.Generator) -> tuple[float, float]:
    """Wheel command for the prey given the predator's current pose."""
    if state.prey is None:
        raise ValueError("world has no prey")
    prey = state.prey
    pred = state.robot
    away_x = prey.pose.x - pred.x
    away_y = prey.pose.y - pred.y
    dist = math.hypot(away_x, away_y)

    if policy.mode == "flee" or dist < policy.flee_trigger_distance:
        desired = math.atan2(away_y, away_x)
        err = normalize_angle(desired - prey.pose.heading)
        base = policy.speed_scale * max(0.0, math.cos(err))
        # wheel differential that would zero the heading error in one step
        diff = err * prey.body.wheel_base / (SPEED_SCALE * STEP_DT)
        left = min(1.0, max(-1.0, base - diff / 2.0))
        right = min(1.0, max(-1.0, base + diff / 2.0))
        return left, right

    # wander: forward with jitter, pivoting away from walls seen by front IR
    ir = ir_readings(state.map, prey.pose, prey.body)
    s = policy.speed_scale
    if max(ir[0], ir[1], ir[2]) >= 0.3:
        left_near = max(ir[1], ir[3])
        right_near = max(ir[2], ir[4])
        return (s, -s) if left_near >= right_near else (-s, s)
    jitter = float(rng.uniform(-0.3, 0.3))
    return (min(1.0, max(-1.0, s - jitter)),
            min(1.0, max(-1.0, s + jitter)))


# ---------------------------------------------------------------------------
# Episode orchestration


def _sense(config: EpisodeConfig, world: WorldState, mem: PerceptionMemory,
           streams: RngStreams | None) -> tuple[str, PerceptionMemory, np.ndarray]:
    noise_rng = streams.environment if (config.ir_noise and streams) else None
    ir = read_ir(world, noise_rng=noise_rng)
    if config.task == 1:
        return discretize_task1(ir, config.perception), mem, ir
    frame = render_camera(world)
    if config.task == 2:
        blobs = detect_blobs(frame, "green", config.perception.min_blob_pixels)
        label, mem = discretize_task2(ir, blobs, mem, config.perception)
    else:
        blobs = detect_blobs(frame, "red", config.perception.min_blob_pixels)
        label, mem = discretize_task3(ir, blobs, mem, config.perception)
    return label, mem, ir


def _eat_closest(world: WorldState) -> tuple[WorldState, int]:
    # at most one food per step so the six-of-seven goal is hit exactly
    rx, ry = world.robot.x, world.robot.y
    best_i, best_d = -1, math.inf
    for i, f in enumerate(world.food):
        if f.eaten:
            continue
        d = math.hypot(rx - f.x, ry - f.y)
        if d < world.body.radius + f.radius and d < best_d:
            best_i, best_d = i, d
    if best_i < 0:
        return world, 0
    food = tuple(replace(f, eaten=True) if i == best_i else f
                 for i, f in enumerate(world.food))
    return replace(world, food=food), 1


def _fresh_world(config: EpisodeConfig, world_map: WorldMap,
                 streams: RngStreams) -> WorldState:
    world = initial_world(world_map, with_prey=config.task == 3)
    if config.task == 2:
        world = spawn_food(world, config.food_count, streams.food)
    return world


def _run_episode(config: EpisodeConfig, table: QTable, epsilon: float,
                 world_map: WorldMap, streams: RngStreams, epoch_index: int,
                 learn: bool) -> EpochMetrics:
    hp = config.hyperparams
    world = _fresh_world(config, world_map, streams)
    recorder = StepRecorder(
        task=config.task,
        epoch_index=epoch_index,
        sub_environment=world_map.name if config.task == 1 else "",
        crash_threshold=config.crash_threshold,
    )
    mem = PerceptionMemory()
    state, mem, _ = _sense(config, world, mem, streams)
    collected = 0
    in_catch_range = False

    for _ in range(hp.steps_per_epoch):
        action = select_action(table, state, epsilon, streams.policy)
        wheels = apply_action(config.task, action, streams.policy)
        world = step_kinematics(world, wheels[0], wheels[1])

        events: dict[str, int | bool] = {}
        if config.task == 3:
            prey_cmd = step_prey(world, config.prey, streams.prey)
            world = step_prey_kinematics(world, prey_cmd[0], prey_cmd[1])
            gap = math.hypot(world.robot.x - world.prey.pose.x,
                             world.robot.y - world.prey.pose.y)
            if gap < config.catch_distance:
                if not in_catch_range:
                    events["catch"] = True
                in_catch_range = True
            else:
                in_catch_range = False
        elif config.task == 2:
            world, eaten = _eat_closest(world)
            if eaten:
                events["food_eaten"] = eaten
                collected += eaten

        next_state, mem, ir = _sense(config, world, mem, streams)
        reward = reward_for(config.task, next_state)
        terminal = config.task == 2 and collected >= config.food_goal
        recorder.record_step(state, action, reward, ir, events)
        if learn:
            q_update(table, TransitionRecord(state, action, reward, next_state, terminal),
                     hp.alpha, hp.gamma)
        state = next_state
        if terminal:
            break
    return recorder.finalize()


def run_epoch(config: EpisodeConfig, table: QTable, epoch_index: int,
              streams: RngStreams | None = None,
              world_map: WorldMap | None = None) -> tuple[QTable, EpochMetrics]:
    """One training epoch: sense, act, observe, update, for the step budget.

    Task 2 re-randomizes food at the start and terminates early once the food
    goal is reached, marking that final transition terminal. Tasks 1 and 3
    always use the full budget.
    """
    if streams is None:
        streams = RngStreams(config.seed)
    if world_map is None:
        world_map = resolve_map(config.maps[0])
    epsilon = epsilon_for_epoch(config.hyperparams, epoch_index)
    metrics = _run_episode(config, table, epsilon, world_map, streams,
                           epoch_index, learn=True)
    return table, metrics


def run_curriculum_task1(config: EpisodeConfig,
                         seed: int | None = None) -> tuple[QTable, list[EpochMetrics]]:
    """Sequential training across the three maps with the table carried over.

    The epsilon schedule restarts at the top of each sub-environment; records
    carry a global epoch index and the sub-environment name.
    """
    if config.task != 1:
        raise ValueError("curriculum training is defined for task 1")
    streams = RngStreams(config.seed if seed is None else seed)
    table = new_qtable(1)
    records: list[EpochMetrics] = []
    global_epoch = 0
    for map_name in config.maps:
        world_map = resolve_map(map_name)
        for local_epoch in range(config.hyperparams.epochs):
            table, metrics = run_epoch(config, table, local_epoch, streams, world_map)
            metrics.epoch_index = global_epoch
            records.append(metrics)
            global_epoch += 1
    return table, records


def evaluate(table: QTable, config: EpisodeConfig,
             episodes: int) -> list[EpochMetrics]:
    """Greedy rollouts (epsilon 0) with no learning; the table is untouched."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    streams = RngStreams(config.seed)
    world_map = resolve_map(config.maps[0])
    records = []
    for i in range(episodes):
        records.append(_run_episode(config, table, 0.0, world_map, streams,
                                    epoch_index=i, learn=False))
    return records
