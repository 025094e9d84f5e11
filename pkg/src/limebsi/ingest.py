"""Reading lime temperature logs, including raw PT1000 resistance logs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .probability import Observation

TEMP_RANGE = (0.0, 200.0)  # degC, where the quadratic Callendar-Van Dusen form applies
TIME_UNITS = {"seconds": 1 / 3600.0, "minutes": 1 / 60.0, "hours": 1.0}
VALUE_COLUMNS = {"temperature_celsius": "temp_c", "resistance_ohms": "resistance_ohm"}


class IngestError(ValueError):
    pass


class RangeError(IngestError):
    pass


@dataclass(frozen=True)
class RtdSpec:
    """Platinum RTD: ``R(T) = r0 (1 + a T + b T^2)``. Defaults are a PT1000."""

    r0: float = 1000.0
    coeff_a: float = 3.9083e-3
    coeff_b: float = -5.775e-7

    def __post_init__(self):
        if not self.r0 > 0:
            raise IngestError(f"r0 must be positive, got {self.r0}")
        lo, hi = TEMP_RANGE
        # derivative linear in T: checking both ends covers the range
        if not (self.coeff_a + 2 * self.coeff_b * lo > 0 and self.coeff_a + 2 * self.coeff_b * hi > 0):
            raise IngestError("R(T) must be strictly increasing on [0, 200] degC")
        if not 1 + self.coeff_a * lo + self.coeff_b * lo**2 > 0:
            raise IngestError("R(T) must be positive on [0, 200] degC")


PT1000 = RtdSpec()


def cvd_resistance(T: float, spec: RtdSpec = PT1000) -> float:
    lo, hi = TEMP_RANGE
    if not lo <= T <= hi:
        raise RangeError(f"temperature {T} degC outside the supported range [{lo}, {hi}]")
    return spec.r0 * (1.0 + spec.coeff_a * T + spec.coeff_b * T * T)


def cvd_temperature(R: float, spec: RtdSpec = PT1000) -> float:
    r_lo = spec.r0
    r_hi = cvd_resistance(TEMP_RANGE[1], spec)
    if not r_lo <= R <= r_hi:
        raise RangeError(f"resistance {R} ohm outside the invertible range [{r_lo}, {r_hi:.6f}]")
    x = R / spec.r0 - 1.0
    # root of b T^2 + a T - x = 0 written without the (-a + sqrt) cancellation
    return 2.0 * x / (spec.coeff_a + math.sqrt(spec.coeff_a**2 + 4.0 * spec.coeff_b * x))


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_timeseries(path, format: str = "temperature_celsius", time_unit: str = "hours", spec: RtdSpec = PT1000):
    """Read a two-column ``time,value`` CSV into observations (time in hours).

    A header row (``time,temp_c`` or ``time,resistance_ohm``) is optional; if
    present, its value column must match ``format``. Lines starting with ``#``
    are ignored. Times must be strictly increasing.
    """
    if format not in VALUE_COLUMNS:
        raise IngestError(f"format must be one of {sorted(VALUE_COLUMNS)}, got {format!r}")
    if time_unit not in TIME_UNITS:
        raise IngestError(f"time_unit must be one of {sorted(TIME_UNITS)}, got {time_unit!r}")
    scale = TIME_UNITS[time_unit]
    try:
        with open(path, newline="") as f:
            lines = list(enumerate(csv.reader(f), start=1))
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc

    out: list[Observation] = []
    header_seen = False
    for lineno, row in lines:
        cells = [c.strip() for c in row]
        if not cells or not any(cells) or cells[0].startswith("#"):
            continue
        if not header_seen and not out and not _is_number(cells[0]):
            header_seen = True
            expected = ["time", VALUE_COLUMNS[format]]
            if [c.lower() for c in cells] != expected:
                raise IngestError(f"{path}:{lineno}: header {cells} does not match {expected}")
            continue
        if len(cells) != 2:
            raise IngestError(f"{path}:{lineno}: expected 2 columns, got {len(cells)}")
        try:
            t_raw, v = float(cells[0]), float(cells[1])
        except ValueError:
            raise IngestError(f"{path}:{lineno}: unparseable row {row}") from None
        if not (math.isfinite(t_raw) and math.isfinite(v)):
            raise IngestError(f"{path}:{lineno}: non-finite value in {row}")
        if format == "resistance_ohms":
            try:
                v = cvd_temperature(v, spec)
            except RangeError as exc:
                raise RangeError(f"{path}:{lineno}: {exc}") from None
        t = t_raw * scale
        if out and not t > out[-1].t:
            raise IngestError(f"{path}:{lineno}: time {t_raw} does not increase on the previous row")
        out.append(Observation(t, v))
    if not out:
        raise IngestError(f"{path}: no data rows")
    return out


def write_timeseries(path, observations, header_comment: str | None = None) -> None:
    """Write observations as ``time,temp_c`` with time in hours."""
    with open(path, "w", newline="") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time", "temp_c"])
        for o in observations:
            w.writerow([repr(float(o.t)), repr(float(o.theta_obs))])


def convert_file(src, dst, direction: str, spec: RtdSpec = PT1000) -> int:
    """Convert a ``time,resistance_ohm`` file to ``time,temp_c`` (``r2t``) or back (``t2r``).

    Time values are copied unchanged. ``dst`` may be a path or a text stream.
    Returns the number of rows written.
    """
    if direction == "r2t":
        # loader already applies the inverse conversion
        rows = [(o.t, o.theta_obs) for o in load_timeseries(src, "resistance_ohms", "hours", spec)]
        out_col = "temp_c"
    elif direction == "t2r":
        rows = []
        for i, o in enumerate(load_timeseries(src, "temperature_celsius", "hours", spec)):
            try:
                rows.append((o.t, cvd_resistance(o.theta_obs, spec)))
            except RangeError as exc:
                raise RangeError(f"{src}: data row {i + 1}: {exc}") from None
        out_col = "resistance_ohm"
    else:
        raise IngestError(f"direction must be 'r2t' or 't2r', got {direction!r}")

    def emit(f):
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time", out_col])
        for t, v in rows:
            w.writerow([repr(float(t)), repr(float(v))])

    if hasattr(dst, "write"):
        emit(dst)
    else:
        with open(dst, "w", newline="") as f:
            emit(f)
    return len(rows)
