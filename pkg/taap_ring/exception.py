class TaapException(Exception):
    def __init__(self, ex: Exception | str):
        super().__init__(str(ex))

        if isinstance(ex, Exception):
            self.ex_name = type(ex).__name__
            self.ex = ex
        else:
            self.ex_name = type(self).__name__
            self.ex = None

        self.ex_msg = str(ex)


class ConfigError(TaapException):
    """ Invalid scenario, field config, schedule or ensemble input """


class DomainError(TaapException):
    """ Argument outside the domain of a formula """


class ZeroField(TaapException):
    """ Local field too small to define a quantization axis """


class NoMinimum(TaapException):
    """ Trap minimum search did not converge """


class AdiabaticityViolation(TaapException):
    """ Frequency hierarchy trap << modulation << Larmor broken """


class StepTooLarge(TaapException):
    """ Integrator step too coarse for the trap frequency """


class CentrifugalLimit(TaapException):
    """ Rotation at or above the radial trap frequency """


class FitDiverged(TaapException):
    """ Least-squares fit failed to converge """


class RingNotFound(TaapException):
    """ No annular feature found in an image """


class LowAcceptance(TaapException):
    """ Rejection sampler accepts too few proposals """


class FlowBlocked(TaapException):
    """ Barrier higher than the kinetic energy of the flow """


class AcceptanceFailure(TaapException):
    """ A reproduction verdict failed """
