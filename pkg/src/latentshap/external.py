"""Black-box models and transforms that live in another process.

Protocol: the child reads headerless CSV rows on stdin (17 significant
digits, LF line endings) and writes one CSV line per input row on stdout. A
model writes a single value per line; a transform writes its output vector.
The child must exit with status 0.
"""

from __future__ import annotations

import io
import shlex
import subprocess
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ExternalModelError, ValidationError
from .transforms import Transform


@dataclass(frozen=True)
class ExternalModelSpec:
    command: tuple
    timeout: float = 60.0

    def __post_init__(self):
        cmd = self.command
        if isinstance(cmd, str):
            cmd = shlex.split(cmd)
        cmd = tuple(str(c) for c in cmd)
        if not cmd:
            raise ValidationError("external command must not be empty")
        if not self.timeout > 0:
            raise ValidationError("timeout must be positive")
        object.__setattr__(self, "command", cmd)


def encode_rows(X: np.ndarray) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(X), fmt="%.17g", delimiter=",", newline="\n")
    return buf.getvalue()


def exchange(spec: ExternalModelSpec, X: np.ndarray) -> list[list[float]]:
    """Send ``X`` to one child invocation and parse one row of floats per input row."""
    X = np.asarray(X, dtype=float)
    try:
        proc = subprocess.run(
            list(spec.command), input=encode_rows(X), capture_output=True, text=True,
            timeout=spec.timeout,
        )
    except FileNotFoundError as e:
        raise ExternalModelError(f"cannot launch {spec.command[0]!r}: {e.strerror}") from None
    except subprocess.TimeoutExpired as e:
        err = e.stderr.decode(errors="replace") if isinstance(e.stderr, bytes) else (e.stderr or "")
        raise ExternalModelError(f"external command timed out after {spec.timeout}s", err) from None
    if proc.returncode != 0:
        raise ExternalModelError(f"external command exited with status {proc.returncode}", proc.stderr)
    lines = proc.stdout.splitlines()
    if len(lines) != X.shape[0]:
        raise ExternalModelError(f"expected {X.shape[0]} output lines, got {len(lines)}", proc.stderr)
    rows = []
    for k, line in enumerate(lines):
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise ExternalModelError(f"malformed output line {k + 1}: {line[:80]!r}", proc.stderr) from None
    return rows


def external_model_predict(spec: ExternalModelSpec, X) -> np.ndarray:
    rows = exchange(spec, X)
    if any(len(r) != 1 for r in rows):
        raise ExternalModelError("an external model must print exactly one value per line")
    return np.array([r[0] for r in rows])


class ExternalModel:
    """Callable wrapper so an external command can be passed wherever a model is expected."""

    def __init__(self, spec: Union[ExternalModelSpec, str, Sequence[str]], timeout: float = 60.0):
        self.spec = spec if isinstance(spec, ExternalModelSpec) else ExternalModelSpec(spec, timeout)

    def __call__(self, X) -> np.ndarray:
        return external_model_predict(self.spec, X)


class ExternalTransform(Transform):
    """Forward-only transform computed by an external command."""

    def __init__(self, spec: Union[ExternalModelSpec, str, Sequence[str]], timeout: float = 60.0,
                 feature_names: Optional[list[str]] = None):
        self.spec = spec if isinstance(spec, ExternalModelSpec) else ExternalModelSpec(spec, timeout)
        self.feature_names = feature_names

    def forward(self, X):
        rows = exchange(self.spec, X)
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise ExternalModelError("external transform produced rows of different widths")
        return np.array(rows, dtype=float).reshape(len(rows), -1)
