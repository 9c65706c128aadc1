"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class InvalidMesh(ValueError):
    pass


class MeshParseError(ValueError):
    """Raised by the mesh loader; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IndexOutOfRange(MeshParseError):
    pass


class UnknownDiscretization(MeshParseError):
    pass


class DisconnectedGraph(ValueError):
    """A vertex set that must be connected is not.

    ``witnesses`` holds one vertex from each connected component.
    """

    def __init__(self, witnesses):
        self.witnesses = tuple(int(w) for w in witnesses)
        super().__init__(
            f"subgraph is disconnected: {len(self.witnesses)} components, "
            f"e.g. vertices {list(self.witnesses)}"
        )


class Unreachable(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass
