from typing import Optional


class SimulationException(Exception):
    def __init__(self, title: str, parameters: Optional[dict] = None):
        super().__init__(title)
        self.title = title
        self.parameters = parameters if parameters is not None else {}


class ScheduleInPastException(SimulationException):
    pass


class HorizonExceededException(SimulationException):
    pass


class OutOfOrderDeliveryException(SimulationException):
    pass


class InvalidPoolException(SimulationException):
    pass


class ChannelUpdateException(SimulationException):
    pass


class RouteSetupException(SimulationException):
    pass


class ConfigException(SimulationException):
    pass


class MappingParseException(SimulationException):
    pass


class ExperimentException(SimulationException):
    pass
