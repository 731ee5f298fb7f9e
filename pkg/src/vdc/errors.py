"""Exception hierarchy shared across the package."""


class VdcError(Exception):
    """Base class for all errors raised by vdc."""


class DefinitionError(VdcError):
    """Ill-formed program, assertion, or lattice (undeclared names, sort clashes)."""


class SortError(DefinitionError):
    pass


class EvalFault(VdcError):
    """Runtime fault during expression evaluation (division by zero)."""


class CapabilityError(VdcError):
    """A request the engine cannot answer soundly (unbounded search, unsupported term)."""


class AnnotationError(VdcError):
    """Missing or unusable proof annotation."""


class UsageError(VdcError):
    pass


class SoundnessError(VdcError):
    """Internal inconsistency between the solver and the reference semantics."""


class ParseError(VdcError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))
