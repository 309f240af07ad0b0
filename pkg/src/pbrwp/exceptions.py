class PbrwpError(Exception):
    error_type = 'error'

    def __init__(self, message, filename=None):
        super(PbrwpError, self).__init__(message)
        self.filename = filename

    def get_context(self):
        """Return extra error context info."""
        return None

    def get_filename(self):
        """Return filename, if relevant."""
        if self.filename is None:
            return None
        return str(self.filename)

    def __eq__(self, other):
        return str(self) == str(other)

    def __hash__(self):  # pragma: no cover
        return hash(str(self))


class DimensionError(PbrwpError, ValueError):
    error_type = 'dimension mismatch'


class NotPositiveDefiniteError(PbrwpError, ValueError):
    error_type = 'not positive definite'


class InvertibilityError(PbrwpError, ValueError):
    """The proximal map cannot be inverted: the target covariance is not above T*M."""
    error_type = 'not invertible'


class EstimationError(PbrwpError):
    error_type = 'estimation error'


class DivergenceError(PbrwpError, FloatingPointError):
    """
    >>> print(DivergenceError(12, 3, 'nan'))
    diverged at iteration 12, particle 3: nan
    """
    error_type = 'divergence'

    def __init__(self, iteration, particle, value):
        self.iteration = iteration
        self.particle = particle
        self.value = value
        super(DivergenceError, self).__init__(
            'diverged at iteration {0}, particle {1}: {2}'.format(iteration, particle, value))


class ConfigError(PbrwpError):
    """
    >>> e = ConfigError('not a number', filename='run.ini', section='sampler', key='eta')
    >>> print(e)
    [sampler] eta: not a number
    >>> e.get_context()
    'in section [sampler]'
    """
    error_type = 'configuration error'

    def __init__(self, message, filename=None, section=None, key=None):
        super(ConfigError, self).__init__(message, filename=filename)
        self.section = section
        self.key = key

    def get_context(self):
        if self.section:
            return 'in section [{0}]'.format(self.section)

    def __str__(self):
        message = super(ConfigError, self).__str__()
        if self.section and self.key:
            return '[{0}] {1}: {2}'.format(self.section, self.key, message)
        return message
