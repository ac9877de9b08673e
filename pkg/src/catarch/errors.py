class CatarchError(Exception):
    pass


class ValidationError(CatarchError, ValueError):
    pass


class ShapeMismatch(ValidationError):
    pass


class CapExceeded(CatarchError, RuntimeError):
    pass
