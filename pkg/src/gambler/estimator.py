"""scikit-learn style classifier trained with the gambler's loss."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils import check_random_state
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import InvalidInputError
from .losses import LossKind, check_lambda
from .model import LossConfig, MlpSpec, OptimizerSpec, TrainState, forward, train_epoch
from .noise import CorruptedDataset
from .numerics import spawn_rngs
from .schedule import LambdaSchedule


class GamblerClassifier(ClassifierMixin, BaseEstimator):
    """MLP with an extra rejection output.

    Parameters
    ----------
    loss : str
        One of ``nll``, ``gambler``, ``gambler-sched-euc``, ``gambler-sched-exp``, ``lq``.
    payoff : float or None
        Fixed gambler payoff; ``None`` uses the number of classes.
    warmup_epochs : int
        Epochs trained at payoff ``m`` before the schedule takes over.
    hidden_layer_sizes : tuple of int
    activation : {"relu", "tanh"}
    solver : {"sgd", "sgd-momentum", "adaptive-moment"}
    learning_rate, momentum, batch_size, epochs, q, mask_rejection
        Passed to the optimizer and loss.
    random_state : int, RandomState or None

    Attributes
    ----------
    classes_ : ndarray
    n_features_in_ : int
    history_ : list of EpochRecord
    """

    def __init__(
        self,
        loss="gambler",
        payoff=None,
        warmup_epochs=0,
        hidden_layer_sizes=(256, 128),
        activation="relu",
        solver="sgd-momentum",
        learning_rate=1e-3,
        momentum=0.9,
        batch_size=128,
        epochs=20,
        q=0.7,
        mask_rejection=False,
        random_state=None,
    ):
        self.loss = loss
        self.payoff = payoff
        self.warmup_epochs = warmup_epochs
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.solver = solver
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.q = q
        self.mask_rejection = mask_rejection
        self.random_state = random_state

    def _setup(self, n_features, classes):
        m = len(classes)
        if m < 2:
            raise InvalidInputError("need at least two classes")
        kind = LossKind(self.loss)
        if self.payoff is not None:
            check_lambda(self.payoff, m)
        mode = {LossKind.GAMBLER_SCHED_EUC: "euc", LossKind.GAMBLER_SCHED_EXP: "exp"}.get(kind, "fixed")
        fixed = (float(m) if self.payoff is None else float(self.payoff)) if mode == "fixed" else None
        self.classes_ = np.asarray(classes)
        self.n_features_in_ = n_features
        self._losscfg = LossConfig(kind, self.q, self.mask_rejection)
        self._schedule = LambdaSchedule(mode, fixed, self.warmup_epochs)
        spec = MlpSpec((n_features, *self.hidden_layer_sizes, m + 1), self.activation)
        opt = OptimizerSpec(self.solver, self.learning_rate, self.momentum, self.batch_size)
        seed = check_random_state(self.random_state).randint(0, 2**31 - 1)
        init_rng, self._shuffle_rng = spawn_rngs(seed, 2)
        self._state = TrainState.create(spec, opt, init_rng)
        self.history_ = []

    def _encode(self, y):
        idx = np.searchsorted(self.classes_, y)
        idx = np.clip(idx, 0, len(self.classes_) - 1)
        if not np.all(self.classes_[idx] == y):
            raise InvalidInputError("y contains labels not seen in classes")
        return idx

    def _epoch(self, X, y_idx):
        data = CorruptedDataset.clean(X, y_idx)
        self._state, rec = train_epoch(self._state, data, self._losscfg, self._schedule, self._shuffle_rng)
        self.history_.append(rec)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self._setup(X.shape[1], np.unique(y))
        y_idx = self._encode(y)
        for _ in range(self.epochs):
            self._epoch(X, y_idx)
        return self

    def partial_fit(self, X, y, classes=None):
        """One epoch over ``(X, y)``; the first call needs ``classes``."""
        X, y = check_X_y(X, y, dtype=np.float64)
        if not hasattr(self, "_state"):
            if classes is None:
                raise InvalidInputError("classes must be given on the first call to partial_fit")
            self._setup(X.shape[1], np.unique(classes))
        elif X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        self._epoch(X, self._encode(y))
        return self

    def _head(self, X):
        check_is_fitted(self, "_state")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward(self._state.params, X, self.activation)

    def predict_proba(self, X):
        """Class probabilities with the rejection mass removed and renormalized."""
        f = self._head(X)[:, 1:]
        total = f.sum(axis=1, keepdims=True)
        m = f.shape[1]
        return np.where(total > 0, f / np.where(total > 0, total, 1.0), 1.0 / m)

    def predict_rejection(self, X):
        """Rejection mass ``f0`` for each row; higher means less confident."""
        check_is_fitted(self, "_state")
        if not self._losscfg.kind.uses_rejection or self.mask_rejection:
            check_array(X)
            return np.zeros(len(X))
        return self._head(X)[:, 0]

    def predict(self, X):
        head = self._head(X)
        return self.classes_[np.argmax(head[:, 1:], axis=1)]

    @property
    def params_(self):
        check_is_fitted(self, "_state")
        return self._state.params
