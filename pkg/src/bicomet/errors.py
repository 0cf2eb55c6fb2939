class InputError(ValueError):
    """Malformed user-supplied file, parameter, or configuration value."""
