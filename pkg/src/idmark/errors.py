"""Exception hierarchy.

Every error carries a short ``category`` string so the command line can
report failures in a machine-parsable way (``error[<category>]: ...``).
"""


class IdmarkError(Exception):
    category = "internal"
    exit_code = 1


class InputError(IdmarkError, ValueError):
    """Malformed input data (files, vectors, bit strings)."""

    category = "input"
    exit_code = 3


class PreconditionError(IdmarkError, ValueError):
    category = "precondition"
    exit_code = 4


class CapacityError(PreconditionError):
    """The image cannot hold the requested watermark."""

    category = "capacity"
    exit_code = 5


class LengthMismatchError(PreconditionError):
    category = "length-mismatch"
    exit_code = 6


class CollisionError(IdmarkError):
    """A watermark is already registered under a different identity."""

    category = "collision"
    exit_code = 7

    def __init__(self, existing_identity: str, new_identity: str, bits: str):
        self.existing_identity = existing_identity
        self.new_identity = new_identity
        self.bits = bits
        super().__init__(
            f"watermark {bits} already registered to {existing_identity!r}; "
            f"refusing to register it for {new_identity!r}"
        )


class RegistryError(IdmarkError):
    category = "registry"
    exit_code = 8


class EmptyRegistryError(RegistryError):
    category = "empty-registry"


class ConfigError(IdmarkError):
    category = "config"
    exit_code = 2
