from .analytic import register as register_analytic, run_analytic
from .queue import register as register_queue, run_queue
from .simulate import register as register_simulate, run_simulate
from .sweep import register as register_sweep, run_sweep
from .validate import register as register_validate, run_validate

__all__ = [
    "register_analytic",
    "register_queue",
    "register_simulate",
    "register_sweep",
    "register_validate",
    "run_analytic",
    "run_queue",
    "run_simulate",
    "run_sweep",
    "run_validate",
]
