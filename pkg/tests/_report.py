"""Shared sink for the acceptance-criteria result lines.

The acceptance tests print one PASS/FAIL line per criterion as they run and
also push the line here, so the terminal-summary hook in conftest can repeat
the whole scoreboard at the end of the run even when pytest captures stdout.
"""

from __future__ import annotations

LINES: list[str] = []


def record(num: int, ok: bool, detail: str) -> bool:
    line = f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {detail}"
    LINES.append(line)
    print(line, flush=True)
    return ok
