"""Per-criterion outcome lines, printed in the pytest terminal summary."""

LINES: dict[int, str] = {}


def record(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    LINES[n] = line
    print(line)
