"""Exception types shared across the toolkit."""


class HeatCtrlError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(HeatCtrlError):
    """Invalid configuration value or file."""


class AssumptionError(ConfigError):
    """Sensor-placement assumption violated (some c_n is numerically zero)."""

    def __init__(self, index, value, tol):
        self.index = index
        self.value = value
        self.tol = tol
        super().__init__(
            f"output coefficient c_{index} = {value:.3e} is below the "
            f"tolerance {tol:.1e}; move the sensor location"
        )


class SynthesisError(HeatCtrlError):
    """Gain design failed (infeasible or ill-conditioned LMI)."""


class AnalysisError(HeatCtrlError):
    """Post-processing failure (e.g. nonpositive data in a log fit)."""


class SimulationError(HeatCtrlError):
    """Simulation setup or execution failure."""
