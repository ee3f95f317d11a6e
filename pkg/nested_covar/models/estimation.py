import enum


class BudgetStrategy(str, enum.Enum):
    SNS_OPT = "sns_opt"
    SMOOTH_FIXED_L = "smooth_fixed_l"
    DECOUPLED = "decoupled"


class EstimatorMethod(str, enum.Enum):
    BATCHING = "batching"  # batching on exact losses
    SNS = "sns"  # nested simulation, sample means plugged into batching
    COUPLED = "coupled"  # smoothing fitted and evaluated on the same scenarios
    DECOUPLED = "decoupled"  # two-stage approach


class Coupling(str, enum.Enum):
    EXACT = "exact"
    COUPLED = "coupled"
    DECOUPLED = "decoupled"


class RowStatus(str, enum.Enum):
    PENDING = "pending"
    PROCESSING = "processing"
    COMPLETED = "completed"
    FAILED = "failed"
