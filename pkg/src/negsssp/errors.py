class NegSSSPError(Exception):
    """Base class for library errors."""


class EmptyGraph(NegSSSPError):
    pass


class NegativeSelfLoop(NegSSSPError):
    def __init__(self, vertex, length):
        super().__init__(f"negative self-loop at vertex {vertex} (length {length})")
        self.vertex = vertex
        self.length = length


class ParseError(NegSSSPError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InconsistentHeader(NegSSSPError):
    pass


class InfeasibleSpec(NegSSSPError):
    pass


class NegativeEdgeEncountered(NegSSSPError):
    def __init__(self, edge, length):
        super().__init__(f"edge {edge} has negative length {length}")
        self.edge = edge
        self.length = length


class TooLarge(NegSSSPError):
    def __init__(self, k, limit):
        super().__init__(f"{k} negative edges exceed the enumeration limit {limit}")
        self.k = k


class ReachTooLarge(NegSSSPError):
    pass


class CycleFound(NegSSSPError):
    """Carries a NegativeCycle found while building an auxiliary structure."""

    def __init__(self, cycle):
        super().__init__(f"negative cycle of length {cycle.length}")
        self.cycle = cycle


class RetryBudgetExhausted(NegSSSPError):
    pass


class ExtractionFailed(NegSSSPError):
    pass


class MissingEstimates(NegSSSPError):
    def __init__(self, level):
        super().__init__(f"no distance estimates for level {level}")
        self.level = level


class NotNeutralized(NegSSSPError):
    pass
