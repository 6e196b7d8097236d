from .parser import ProtocolScript, ScriptError, Step, eval_number, load_script, parse_script, serialize_script
from .runner import RunReport, StepError, resolve_params, run_script
from .sweep import parse_grid, rows_to_csv, sweep

__all__ = [
    "ProtocolScript",
    "RunReport",
    "ScriptError",
    "Step",
    "StepError",
    "eval_number",
    "load_script",
    "parse_grid",
    "parse_script",
    "resolve_params",
    "rows_to_csv",
    "run_script",
    "serialize_script",
    "sweep",
]
