from dataclasses import dataclass, field


@dataclass
class SolveOutcome:
    sat: bool
    assignment: dict | None = None
    trace: list = field(default_factory=list)

    @property
    def verdict(self):
        return "SAT" if self.sat else "UNSAT"
