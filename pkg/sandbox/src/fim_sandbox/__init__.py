"""fim-sandbox: executes untrusted candidate programs in isolated child
processes and reports pass/fail/timeout/error verdicts over a
line-delimited JSON protocol (one request object in, one verdict out).
"""

from fim_sandbox.runner import ExecRequest, ExecVerdict, run_one, serve

__version__ = "0.1.0"

__all__ = ["ExecRequest", "ExecVerdict", "run_one", "serve"]
