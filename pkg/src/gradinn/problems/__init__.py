"""Benchmark targets, their derivative oracles and dataset generators."""
from .burgers import BurgersSolution, burgers_datasets, burgers_solve
from .datasets import CollocationSet, LabeledDataset
from .friedman import add_noise, friedman_eval, friedman_grad
from .lotka_volterra import lv_datasets, lv_rhs, lv_solve
from .sampling import latin_hypercube
from .stokes import stokes_datasets, stokes_speed, stokes_speed_grad
from .toy import toy1d_eval, toy1d_grad

__all__ = [
    "BurgersSolution", "burgers_datasets", "burgers_solve",
    "CollocationSet", "LabeledDataset",
    "add_noise", "friedman_eval", "friedman_grad",
    "lv_datasets", "lv_rhs", "lv_solve",
    "latin_hypercube",
    "stokes_datasets", "stokes_speed", "stokes_speed_grad",
    "toy1d_eval", "toy1d_grad",
]
