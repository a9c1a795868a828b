"""Exception types shared across modules."""


class NeedsEstimatedConstantError(ValueError):
    """A closed form is unavailable and no Monte Carlo estimate was injected."""


class EmptyRegionError(ValueError):
    """A localization rectangle has inverted bounds."""


class BudgetExceededError(RuntimeError):
    """A Monte Carlo request exceeds the configured resource budget."""


class SynthesisError(RuntimeError):
    """No exact sampling route (circulant embedding, Cholesky) succeeded."""


class InfeasibleCampaignError(RuntimeError):
    """Predicted acceptance too rare for the requested replicate budget."""


class InvalidCampaignError(RuntimeError):
    """Post-hoc diagnostics invalidated a finished campaign."""
