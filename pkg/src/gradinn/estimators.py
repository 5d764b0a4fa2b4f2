"""scikit-learn compatible regressors.

* :class:`GradINNRegressor` - solution network trained jointly with a
  gradient-belief network (and optionally a Hessian-belief network) on
  unlabeled collocation points.
* :class:`StandardNNRegressor` - the same solution network trained on the
  data loss only, optionally with l1/l2 weight penalties.
* :class:`SobolevRegressor` - data loss plus supervision of input gradients
  at the training points.

All three expose ``predict_gradient`` (input Jacobian, shape ``(n, d_o, d)``)
so gradient accuracy can be scored the same way for every method.
"""
from __future__ import annotations

from typing import Callable, Dict, Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import network as nw
from .losses import LossConfig
from .training import TrainConfig, TrainData, TrainHistory, train


class _NetworkRegressor(RegressorMixin, BaseEstimator):
    """Shared fit/predict plumbing; subclasses choose the loss."""

    def _train_config(self, loss: LossConfig) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            bs_U=self.batch_size,
            lr0=self.learning_rate,
            decay_steps=self.decay_steps,
            decay_rate=self.decay_rate,
            seed=self.random_state,
            loss=loss,
        )

    def _specs(self, d: int, d_o: int) -> Dict[str, nw.MlpSpec]:
        return {"U": nw.MlpSpec(d, d_o, tuple(self.hidden))}

    def _init(self, specs) -> Optional[Dict[str, nw.MlpParams]]:
        return None

    def _fit_data(self, data: TrainData, loss: LossConfig, y_ndim: int, callback=None):
        self.n_features_in_ = data.X.shape[1]
        self.n_outputs_ = data.Y.shape[1]
        self._y_1d = y_ndim == 1
        specs = self._specs(self.n_features_in_, self.n_outputs_)
        result = train(data, specs, self._train_config(loss), init=self._init(specs), callback=callback)
        self.params_: Dict[str, nw.MlpParams] = result.params
        self.init_params_: Dict[str, nw.MlpParams] = result.initial
        self.specs_ = specs
        self.history_: TrainHistory = result.history
        return self

    def _check_X(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check_X(X)
        out = nw.predict(self.params_["U"], X)
        return out[:, 0] if self._y_1d else out

    def predict_gradient(self, X) -> np.ndarray:
        """Input Jacobian of the solution network, shape ``(n, d_o, d)``."""
        X = self._check_X(X)
        return nw.predict_jacobian(self.params_["U"], X)

    def predict_hessian(self, X) -> np.ndarray:
        """Input Hessian of the solution network, shape ``(n, d_o, d, d)``."""
        X = self._check_X(X)
        return nw.predict_hessian(self.params_["U"], X)


class GradINNRegressor(_NetworkRegressor):
    """Gradient-informed neural network regressor.

    Parameters
    ----------
    hidden : tuple of int
        Hidden widths of the solution network U.
    prior_hidden : tuple of int
        Hidden widths of the gradient-belief network F (and of G).
    use_hessian : bool
        Add a Hessian-belief network G and its matching loss.
    use_consistency : bool
        Also match G against the input Jacobian of F. Requires ``use_hessian``.
    epochs, batch_size, learning_rate, decay_steps, decay_rate
        Adam with inverse time decay ``lr / (1 + rate * epoch / steps)``.
    weight_U, weight_F, weight_G, weight_GF : float
        Multipliers on the loss terms; 1.0 gives the plain sum.
    random_state : int
        Seed for initialization and shuffling.
    init_scale_U, init_scale_F : float or None
        When set, initialize that network with scaled weights and random
        biases instead of the smooth zero-bias Glorot default.
    """

    def __init__(
        self,
        hidden=(20, 20, 20),
        prior_hidden=(50, 50),
        use_hessian=False,
        use_consistency=False,
        epochs=10_000,
        batch_size=64,
        learning_rate=0.1,
        decay_steps=500,
        decay_rate=0.9,
        weight_U=1.0,
        weight_F=1.0,
        weight_G=1.0,
        weight_GF=1.0,
        random_state=0,
        init_scale_U=None,
        init_scale_F=None,
    ):
        self.hidden = hidden
        self.prior_hidden = prior_hidden
        self.use_hessian = use_hessian
        self.use_consistency = use_consistency
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.decay_steps = decay_steps
        self.decay_rate = decay_rate
        self.weight_U = weight_U
        self.weight_F = weight_F
        self.weight_G = weight_G
        self.weight_GF = weight_GF
        self.random_state = random_state
        self.init_scale_U = init_scale_U
        self.init_scale_F = init_scale_F

    def _specs(self, d, d_o):
        specs = super()._specs(d, d_o)
        specs["F"] = nw.MlpSpec(d, d * d_o, tuple(self.prior_hidden))
        if self.use_hessian:
            specs["G"] = nw.MlpSpec(d, d * d * d_o, tuple(self.prior_hidden))
        return specs

    def _init(self, specs):
        from .seeding import seed_join

        out = {}
        if self.init_scale_U is not None:
            out["U"] = nw.init_scaled(specs["U"], seed_join(self.random_state, 1), self.init_scale_U)
        if self.init_scale_F is not None:
            out["F"] = nw.init_scaled(specs["F"], seed_join(self.random_state, 2), self.init_scale_F)
        return out or None

    def loss_config(self) -> LossConfig:
        return LossConfig(
            use_F=True,
            use_G=self.use_hessian,
            use_consistency=self.use_consistency,
            weight_U=self.weight_U,
            weight_F=self.weight_F,
            weight_G=self.weight_G,
            weight_GF=self.weight_GF,
        )

    def fit(self, X, y, X_colloc=None, callback: Optional[Callable] = None):
        """Fit on labeled ``(X, y)`` with unlabeled collocation inputs ``X_colloc``.

        Without collocation points the gradient term vanishes and the fit is
        identical to :class:`StandardNNRegressor` with the same seed.
        """
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        if X_colloc is not None:
            X_colloc = check_array(X_colloc, dtype=np.float64, ensure_min_samples=0)
            if X_colloc.shape[1] != X.shape[1]:
                raise ValueError("collocation points have the wrong number of features")
        return self._fit_data(TrainData(X, y, X_colloc), self.loss_config(), np.ndim(y), callback)

    def predict_prior(self, X) -> np.ndarray:
        """Gradient beliefs of F, shape ``(n, d_o, d)``."""
        X = self._check_X(X)
        return nw.predict(self.params_["F"], X).reshape(len(X), self.n_outputs_, self.n_features_in_)


class StandardNNRegressor(_NetworkRegressor):
    """Solution network fitted on the data loss only (optionally penalized)."""

    def __init__(
        self,
        hidden=(20, 20, 20),
        l1=0.0,
        l2=0.0,
        epochs=10_000,
        batch_size=64,
        learning_rate=0.1,
        decay_steps=500,
        decay_rate=0.9,
        random_state=0,
        init_scale_U=None,
    ):
        self.hidden = hidden
        self.l1 = l1
        self.l2 = l2
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.decay_steps = decay_steps
        self.decay_rate = decay_rate
        self.random_state = random_state
        self.init_scale_U = init_scale_U

    def _init(self, specs):
        if self.init_scale_U is None:
            return None
        from .seeding import seed_join

        return {"U": nw.init_scaled(specs["U"], seed_join(self.random_state, 1), self.init_scale_U)}

    def loss_config(self) -> LossConfig:
        return LossConfig(l1=float(self.l1), l2=float(self.l2))

    def fit(self, X, y, X_colloc=None, callback: Optional[Callable] = None):
        # X_colloc is accepted and ignored so all methods share one call signature
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        return self._fit_data(TrainData(X, y), self.loss_config(), np.ndim(y), callback)


class SobolevRegressor(_NetworkRegressor):
    """Solution network supervised on outputs and true input gradients."""

    def __init__(
        self,
        hidden=(20, 20, 20),
        epochs=10_000,
        batch_size=64,
        learning_rate=0.1,
        decay_steps=500,
        decay_rate=0.9,
        random_state=0,
    ):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.decay_steps = decay_steps
        self.decay_rate = decay_rate
        self.random_state = random_state

    def loss_config(self) -> LossConfig:
        return LossConfig(sobolev=True)

    def fit(self, X, y, dydx=None, X_colloc=None, callback: Optional[Callable] = None):
        """``dydx`` has shape ``(n, d_o, d)`` (or ``(n, d)`` for one output)."""
        if dydx is None:
            raise ValueError("Sobolev training needs gradient labels (dydx)")
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True, dtype=np.float64)
        data = TrainData(X, y, dY=np.asarray(dydx, dtype=np.float64))
        return self._fit_data(data, self.loss_config(), np.ndim(y), callback)
