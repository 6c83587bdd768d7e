"""Exception types that the command-line layer maps to distinct exit codes."""


class ConfigError(Exception):
    """Bad or missing configuration / workload input."""


class MappingError(Exception):
    """A layer cannot be lowered onto the memory substrate."""


class MemoryConflictError(Exception):
    """A memory access targeted a subarray row reserved for in-memory compute."""


class InterferenceError(Exception):
    """Products for different output elements share one wavelength sum."""
