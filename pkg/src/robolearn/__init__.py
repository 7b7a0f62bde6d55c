"""robolearn: a deterministic 2D robot-learning workbench.

Tabular Q-learning on a simulated differential-drive robot with ray-cast IR
sensors and a synthetic color camera, covering three experiments: obstacle
avoidance across a three-map curriculum, foraging for green food, and a
predator chasing a scripted red prey.
"""

__version__ = "0.1.0"

from .qcore import (
    Hyperparams,
    QTable,
    TransitionRecord,
    epsilon_for_epoch,
    load_qtable,
    q_update,
    save_qtable,
    select_action,
)
from .rng import RngStreams

__all__ = [
    "__version__",
    "Hyperparams",
    "QTable",
    "TransitionRecord",
    "RngStreams",
    "epsilon_for_epoch",
    "load_qtable",
    "q_update",
    "save_qtable",
    "select_action",
]
