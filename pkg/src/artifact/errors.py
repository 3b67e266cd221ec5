"""Exception types shared across the package."""


class ArtifactError(Exception):
    """Base class; ``code`` is the machine-readable tag printed by the CLI."""

    code = "error"


class KindMismatch(ArtifactError, TypeError):
    code = "kind_mismatch"


class Singular(ArtifactError, ArithmeticError):
    code = "singular"


class OutOfDomain(ArtifactError, ValueError):
    code = "out_of_domain"


class InvalidIndex(ArtifactError, ValueError):
    code = "invalid_index"


class NoSuccessor(ArtifactError, ValueError):
    code = "no_successor"


class NotLimit(ArtifactError, ValueError):
    code = "not_limit"


class NotCommuting(ArtifactError, ValueError):
    code = "not_commuting"


class DomainViolation(ArtifactError, ValueError):
    code = "domain_violation"


class NotIdempotent(ArtifactError, ValueError):
    code = "not_idempotent"


class NotInvertibleJump(ArtifactError, ValueError):
    code = "not_invertible_jump"


class UnknownName(ArtifactError, KeyError):
    code = "unknown_name"

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown name"


class BadParams(ArtifactError, ValueError):
    code = "bad_params"


class OutOfInterval(ArtifactError, ValueError):
    code = "out_of_interval"


class OffSurface(ArtifactError, ValueError):
    code = "off_surface"


class PrimitiveMismatch(ArtifactError, ValueError):
    code = "primitive_mismatch"
