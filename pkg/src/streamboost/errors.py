class DivergenceError(FloatingPointError):
    """A partial sum blew up or went non-finite during a streaming pass."""

    def __init__(self, message, step=None, stage=None, value=None):
        super().__init__(message)
        self.step = step
        self.stage = stage
        self.value = value
