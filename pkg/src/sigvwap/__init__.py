from sigvwap.desk import ExecutionDesk

__all__ = ["ExecutionDesk"]
