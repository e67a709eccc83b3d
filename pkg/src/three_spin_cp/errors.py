"""Exception types shared across the package."""


class SpinSystemError(ValueError):
    """Invalid spin-system definition or index."""


class NumericalError(RuntimeError):
    """Non-finite, non-Hermitian or non-unitary quantity met during propagation."""


class MatchingError(ValueError):
    """Analytic trajectory requested away from the matched RF amplitude."""


class ResonanceError(ValueError):
    """Rotor/offset ratio k sits on a degenerate point (|k| = 1 or 2)."""


class ConfigError(ValueError):
    """Configuration document could not be turned into a scenario.

    ``diagnostics`` holds ``(line, column, message)`` tuples, one per problem.
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [(1, 1, diagnostics)]
        self.diagnostics = list(diagnostics)
        text = "\n".join(f"line {ln}, col {col}: {msg}" for ln, col, msg in self.diagnostics)
        super().__init__(text)
