class SimulationError(Exception):
    """Base class for everything the simulator raises on purpose."""


class CausalityError(SimulationError):
    """An event was scheduled in the past."""


class CapacityError(SimulationError):
    """A binding would overcommit a node."""


class LifecycleError(SimulationError):
    """A pod or node was asked to make a transition its state machine forbids."""


class ScenarioError(SimulationError):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class TraceFormatError(SimulationError):
    def __init__(self, message: str, line: int, field: str | None = None):
        where = f"line {line}" + (f", field '{field}'" if field else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.field = field
