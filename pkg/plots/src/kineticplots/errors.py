class SchemaMismatch(Exception):
    """An input file does not follow the documented on-disk contract."""
