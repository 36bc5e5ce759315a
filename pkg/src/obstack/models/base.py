from typing import Protocol, runtime_checkable


@runtime_checkable
class PredictiveModel(Protocol):
    """What the experiment loop needs from a Bayesian model.

    ``predict_log_density`` must not change the model; ``observe`` conditions
    it on the realised pair.
    """

    name: str
    feature_dim: int

    def predict_log_density(self, x, y) -> float: ...

    def observe(self, x, y) -> None: ...

    def describe(self) -> dict: ...
