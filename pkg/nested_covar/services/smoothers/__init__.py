# Loss-surface smoothers
from .diagnostics import predict, scenario_probe, sup_error
from .evaluate import evaluate, fit_surface
from .kernel import bandwidth_rule, fit_kernel_smoother
from .krr import KERNELS, fit_krr
from .linear import BasisSpec, fit_linear
from .mlp import fit_mlp, loss_and_gradient
from .persistence import load_model, save_model
from .tuning import select_and_fit, tune

__all__ = [
    "BasisSpec",
    "KERNELS",
    "bandwidth_rule",
    "evaluate",
    "fit_kernel_smoother",
    "fit_krr",
    "fit_linear",
    "fit_mlp",
    "fit_surface",
    "load_model",
    "loss_and_gradient",
    "predict",
    "save_model",
    "select_and_fit",
    "scenario_probe",
    "sup_error",
    "tune",
]
